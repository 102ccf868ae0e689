#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace gzsl::io {

// Little-endian raw arrays. Byte counts are validated by the caller.
void write_f32(const std::filesystem::path& path, const std::vector<float>& values);
void write_i32(const std::filesystem::path& path, const std::vector<std::int32_t>& values);
std::vector<float> read_f32(const std::filesystem::path& path);
std::vector<std::int32_t> read_i32(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; key order is preserved as inserted.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& value);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gzsl::io
