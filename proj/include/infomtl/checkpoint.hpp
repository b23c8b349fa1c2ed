#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "infomtl/model.hpp"

namespace infomtl {

struct Checkpoint {
  ModelState model;
  // learnable weighting scalars (UW / IMTL-L) live here, next to the model
  std::vector<std::pair<std::string, Tensor>> extra;
  uint64_t seed = 0;
};

// Layout: <dir>/manifest.json plus one little-endian float64 raw array file
// per tensor. Round-trip load is bitwise exact.
void save_checkpoint(const std::filesystem::path& dir, const ModelState& model,
                     const std::vector<std::pair<std::string, Tensor>>& extra,
                     uint64_t seed);

Checkpoint load_checkpoint(const std::filesystem::path& dir);

// raw array helpers shared with representation dumps
void write_f64_file(const std::filesystem::path& path,
                    const std::vector<double>& values);
std::vector<double> read_f64_file(const std::filesystem::path& path);

}  // namespace infomtl
