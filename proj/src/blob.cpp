#include "blob.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bdecon/error.hpp"

namespace bdecon::blob {
namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

}  // namespace

void write_f64(const std::filesystem::path& path, const double* data, size_t count) {
  std::vector<std::uint64_t> words(count);
  for (size_t i = 0; i < count; ++i) words[i] = to_little(std::bit_cast<std::uint64_t>(data[i]));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(count * 8));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<double> read_f64(const std::filesystem::path& path, size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  const auto size = static_cast<size_t>(in.tellg());
  if (size != expected_count * 8) {
    throw MalformedFile(path.string() + ": expected " + std::to_string(expected_count * 8) + " bytes, found " +
                        std::to_string(size));
  }
  in.seekg(0);
  std::vector<std::uint64_t> words(expected_count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed: " + path.string());
  std::vector<double> out(expected_count);
  for (size_t i = 0; i < expected_count; ++i) out[i] = std::bit_cast<double>(to_little(words[i]));
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }
}

}  // namespace bdecon::blob
