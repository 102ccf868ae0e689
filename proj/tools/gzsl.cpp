#include "gzsl/cli.hpp"

int main(int argc, char** argv) { return gzsl::run_cli(argc, argv); }
