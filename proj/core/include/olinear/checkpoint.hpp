#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "olinear/model.hpp"

namespace olinear {

/// Binary tensor container, all integers little-endian:
///
///   "OLCK"                    4 bytes
///   version                   u32 (currently 1)
///   tensor count              u32
///   per tensor:
///     name length, name       u32, UTF-8 bytes
///     rank, dims              u32, rank x u64
///     data                    prod(dims) x IEEE-754 binary64
///   config length, config     u64, UTF-8 "key = value\n" lines
struct TensorRecord {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

struct CheckpointFile {
  std::vector<TensorRecord> tensors;
  std::vector<std::pair<std::string, std::string>> config;  // echo, in order

  [[nodiscard]] const TensorRecord* find(const std::string& name) const;
  [[nodiscard]] std::map<std::string, std::string> config_map() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);

/// Throws IoError on bad magic, unsupported version, truncation or trailing bytes.
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

TensorRecord to_record(const std::string& name, const Matrix& m);
Matrix to_matrix(const TensorRecord& r);

/// Model config as ordered key/value pairs, and back. Unknown keys are ignored
/// when reading; missing keys are errors.
std::vector<std::pair<std::string, std::string>> model_config_entries(const OLinearConfig& cfg);
OLinearConfig model_config_from(const std::map<std::string, std::string>& kv);

/// Saves every weight tensor, both bases (with method tags and eigenvalues)
/// and a config echo. `extra_config` entries are appended to the echo.
void save_checkpoint(const std::filesystem::path& path, const OLinearParams& params,
                     const OLinearConfig& cfg,
                     const std::vector<std::pair<std::string, std::string>>& extra_config = {});

struct LoadedCheckpoint {
  OLinearConfig config;
  OLinearParams params;
  std::map<std::string, std::string> config_echo;
};

/// Rebuilds the model config from the echo and validates every tensor's
/// presence and shape against it; errors name the offending tensor.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace olinear
