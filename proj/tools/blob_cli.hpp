#pragma once

#include <filesystem>

#include "bdecon/conv.hpp"
#include "blob.hpp"

namespace bdecon::cli {

inline void write_grid(const std::filesystem::path& p, const Grid& g) { blob::write_f64(p, g.data(), g.size()); }

}  // namespace bdecon::cli
