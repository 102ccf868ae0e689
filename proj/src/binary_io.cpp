#include "gzsl/binary_io.hpp"

#include "gzsl/error.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace gzsl::io {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint32_t bits;
        std::memcpy(&bits, &value, 4);
        bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) | ((bits >> 8) & 0xff00) | (bits >> 24);
        std::memcpy(&value, &bits, 4);
    }
    return value;
}

template <typename T>
void write_raw(const std::filesystem::path& path, const std::vector<T>& values) {
    static_assert(sizeof(T) == 4);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RunError("cannot open for writing: " + path.string());
    for (T v : values) {
        const T le = to_little(v);
        out.write(reinterpret_cast<const char*>(&le), 4);
    }
    if (!out) throw RunError("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("missing file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    if (bytes.size() % 4 != 0)
        throw ValidationError("dimension mismatch: " + path.string() + " is not a whole number of 4-byte values");
    std::vector<T> values(bytes.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        T v;
        std::memcpy(&v, bytes.data() + 4 * i, 4);
        values[i] = to_little(v);
    }
    return values;
}

}  // namespace

void write_f32(const std::filesystem::path& path, const std::vector<float>& values) { write_raw(path, values); }
void write_i32(const std::filesystem::path& path, const std::vector<std::int32_t>& values) { write_raw(path, values); }
std::vector<float> read_f32(const std::filesystem::path& path) { return read_raw<float>(path); }
std::vector<std::int32_t> read_i32(const std::filesystem::path& path) { return read_raw<std::int32_t>(path); }

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing file: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& value) {
    write_text(path, value.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RunError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw RunError("write failed: " + path.string());
}

}  // namespace gzsl::io
