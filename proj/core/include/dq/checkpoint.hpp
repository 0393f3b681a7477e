#pragma once

// Versioned predictor checkpoints.
//
// Layout (all integers little-endian):
//   "D2QC"            4-byte magic
//   u32               format version
//   u64               header length in bytes
//   header            UTF-8 JSON: method, config hash, model config, schema,
//                     tensor names/shapes, duration groups, CDF sizes, WLR
//                     metadata and training metadata
//   payload           f64 values: tensors in header order, then CDF samples

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "dq/predictors.hpp"

namespace dq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointOptions {
  // 0 = automatic: store full samples for groups up to kFullSampleLimit
  // values, otherwise a kDefaultGrid-knot quantile grid.
  std::size_t quantile_grid = 0;
  std::string config_hash;
};

inline constexpr std::size_t kFullSampleLimit = 100'000;
inline constexpr std::size_t kDefaultGrid = 1'000;

std::string checkpoint_bytes(const Predictor& p, const CheckpointOptions& options = {});
Predictor predictor_from_bytes(const std::string& bytes, std::string* config_hash = nullptr);

void save_checkpoint(const Predictor& p, const std::filesystem::path& path,
                     const CheckpointOptions& options = {});
Predictor load_checkpoint(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace dq
