#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

namespace bdecon::blob {

/// Raw little-endian float64 array files.
void write_f64(const std::filesystem::path& path, const double* data, size_t count);
std::vector<double> read_f64(const std::filesystem::path& path, size_t expected_count);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace bdecon::blob
