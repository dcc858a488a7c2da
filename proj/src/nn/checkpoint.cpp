#include "metaal/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace metaal::nn {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  char buf[sizeof(T)];
  std::memcpy(buf, in.data() + off, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  off += sizeof(T);
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["hyperparameters"] = ckpt.hyperparameters;
  header["seed"] = ckpt.seed;
  header["params"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ckpt.params.tensor_count(); ++i) {
    header["params"].push_back({{"name", ckpt.params.names()[i]}, {"shape", ckpt.params.tensor(i).shape}});
  }
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (double v : ckpt.params.flatten()) put_le<double>(out, v);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  std::size_t off = 4;
  const auto version = get_le<std::uint32_t>(bytes, off);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get_le<std::uint32_t>(bytes, off);
  if (off + len > bytes.size()) throw CheckpointError("checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(off, len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  off += len;

  Checkpoint ckpt;
  ckpt.hyperparameters = header.value("hyperparameters", nlohmann::json::object());
  ckpt.seed = header.value("seed", std::uint64_t{0});
  for (const auto& p : header.at("params")) {
    ckpt.params.add(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
  }
  std::vector<double> flat(ckpt.params.parameter_count());
  for (double& v : flat) v = get_le<double>(bytes, off);
  if (off != bytes.size()) throw CheckpointError("trailing bytes after checkpoint payload");
  ckpt.params.restore(flat);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(ckpt);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace metaal::nn
