#pragma once

#include "gzsl/dataset.hpp"
#include "gzsl/eval.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gzsl {

enum class EmbeddingChoice { primary, manual, transferred };

/// Everything `gzsl run` needs. Exactly one of dataset / synthetic is set.
struct ExperimentConfig {
    std::optional<std::filesystem::path> dataset;
    std::optional<SyntheticBenchmarkConfig> synthetic;
    EmbeddingChoice embedding_choice = EmbeddingChoice::primary;
    std::filesystem::path transferred_embeddings;  // c x dm float32, for embedding_choice=transferred
    int num_seen = 10;
    int runs = 5;                 // R; seeds are seed, seed+1, ..., seed+R-1
    std::uint64_t seed = 0;
    std::vector<Method> methods{Method::cewgan_od};
    double seen_test_fraction = 0.2;
    int synth_per_class = 0;
    int threads = 1;
    TrainConfig gan;
    OdConfig od;
    HeadConfig head;
    std::filesystem::path output_dir;

    /// Also checks that referenced paths exist.
    void validate() const;
    ProtocolConfig protocol() const;
};

/// Unknown keys at any level are rejected.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg);

SyntheticBenchmarkConfig synthetic_from_json(const nlohmann::json& j);
nlohmann::ordered_json synthetic_to_json(const SyntheticBenchmarkConfig& cfg);

/// Applies a dotted-path override such as "gan.lr=0.001" to a JSON config.
/// The value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Default output root: $GZSL_OUTPUT_ROOT, else "runs".
std::filesystem::path default_output_root();

/// Dataset as selected by the config (synthetic or loaded, embedding table swapped in).
FeatureDataset load_experiment_data(const ExperimentConfig& cfg);

// Commands ------------------------------------------------------------------

void cmd_synth_data(const SyntheticBenchmarkConfig& cfg, const std::filesystem::path& out_dir);

/// Runs the protocol and writes report.json, curves/<method>.csv and the
/// per-run directories. Returns the reports.
std::vector<AggregateReport> cmd_run(const ExperimentConfig& cfg);

struct CompareRow {
    std::string method_a, method_b;
    double s_a = 0, u_a = 0, h_a = 0;
    double s_b = 0, u_b = 0, h_b = 0;
    double ds() const { return s_a - s_b; }
    double du() const { return u_a - u_b; }
    double dh() const { return h_a - h_b; }
};

/// Pairs the method blocks of two report.json files by position.
std::vector<CompareRow> cmd_compare(const nlohmann::json& report_a, const nlohmann::json& report_b);
std::string compare_text(const std::vector<CompareRow>& rows);
std::string compare_csv(const std::vector<CompareRow>& rows);

struct TransferAttrsOptions {
    std::filesystem::path source;   // dataset with primary (word vector) and manual tables
    std::filesystem::path target;   // dataset whose primary table holds word vectors
    std::filesystem::path gan;      // generator trained on the target's word vectors
    std::vector<int> classes;       // target classes to predict; empty means all
    int per_class = 100;
    TransferConfig transfer;
    std::filesystem::path out_dir;
};

/// Writes attributes.f32 (c x dm, rows of unrequested classes are zero)
/// and transfer.json.
TransferResult cmd_transfer_attrs(const TransferAttrsOptions& opt);

/// Entry point of the gzsl executable. Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace gzsl
