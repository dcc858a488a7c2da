#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "metaal/nn/param_store.hpp"

namespace metaal::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'M', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParamStore params;
  /// Free-form hyperparameters stored alongside the weights.
  nlohmann::json hyperparameters = nlohmann::json::object();
  std::uint64_t seed = 0;
};

/// Layout: "MPCK", u32 version, u32 header length, UTF-8 JSON header
/// {hyperparameters, params: [{name, shape}], seed}, then every parameter as
/// little-endian f64 in header order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace metaal::nn
