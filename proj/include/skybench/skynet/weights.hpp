#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/image.hpp"
#include "skybench/rng.hpp"

namespace skybench::skynet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kRegisterTokens = 4;
inline constexpr int kCameraVectorSize = 9;

struct ModelConfig {
  int depth = 4;  // encoder blocks; the full-size model uses 24
  int width = 32;
  int heads = 4;
  int patch = 16;
  int image_height = 32;
  int image_width = 32;
  int mlp_hidden = 64;
  int camera_head_layers = 4;
  std::uint64_t seed = 0;
  bool frozen = true;  // GAS frame attention and MSA weights are not trainable

  int patches_per_frame() const { return (image_height / patch) * (image_width / patch); }
  int tokens_per_frame() const { return 1 + kRegisterTokens + patches_per_frame(); }

  void validate() const {
    require(depth >= 1, ErrorKind::invalid_input, "model depth must be >= 1");
    require(width >= 4 && heads >= 1 && width % heads == 0, ErrorKind::invalid_input,
            "token width must be divisible by the head count");
    require(width % 4 == 0, ErrorKind::invalid_input,
            "token width must be a multiple of 4 for 2D position encodings");
    require(patch >= 1 && image_height % patch == 0 && image_width % patch == 0 &&
                image_height > 0 && image_width > 0,
            ErrorKind::invalid_shape, "patch size must divide the image dimensions");
    require(mlp_hidden >= 1 && camera_head_layers >= 0, ErrorKind::invalid_input,
            "invalid head sizes");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"depth", c.depth},         {"width", c.width},
          {"heads", c.heads},         {"patch", c.patch},
          {"image_height", c.image_height}, {"image_width", c.image_width},
          {"mlp_hidden", c.mlp_hidden}, {"camera_head_layers", c.camera_head_layers},
          {"seed", c.seed},           {"frozen", c.frozen}};
}

// Missing keys keep their defaults.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.depth = j.value("depth", c.depth);
    c.width = j.value("width", c.width);
    c.heads = j.value("heads", c.heads);
    c.patch = j.value("patch", c.patch);
    c.image_height = j.value("image_height", c.image_height);
    c.image_width = j.value("image_width", c.image_width);
    c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
    c.camera_head_layers = j.value("camera_head_layers", c.camera_head_layers);
    c.seed = j.value("seed", c.seed);
    c.frozen = j.value("frozen", c.frozen);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// Named parameter tensors in creation order.
class WeightBank {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    bool frozen = false;
  };

  void add(std::string name, Matrix value, bool frozen) {
    require(!index_.contains(name), ErrorKind::invalid_input, "duplicate tensor " + name);
    index_[name] = entries_.size();
    entries_.push_back({std::move(name), std::move(value), frozen});
  }

  const Matrix& get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::invalid_input, "missing tensor " + name);
    return entries_[it->second].value;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }
  bool is_frozen(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::invalid_input, "missing tensor " + name);
    return entries_[it->second].frozen;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  std::vector<std::string> names(bool frozen) const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
      if (e.frozen == frozen) out.push_back(e.name);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  bool operator==(const WeightBank& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = o.entries_[i];
      if (a.name != b.name || a.frozen != b.frozen || a.value.rows() != b.value.rows() ||
          a.value.cols() != b.value.cols() || a.value != b.value) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

// Values are rounded to float so that the f32 weight file is lossless.
inline Matrix uniform_matrix(Rng& rng, int rows, int cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(rng.uniform(-bound, bound)));
  }
  return m;
}

inline void add_layer_norm(WeightBank& bank, const std::string& prefix, int width, bool frozen) {
  bank.add(prefix + ".ln.gamma", Matrix::Ones(1, width), frozen);
  bank.add(prefix + ".ln.beta", Matrix::Zero(1, width), frozen);
}

inline void add_attention(WeightBank& bank, Rng& rng, const std::string& prefix, int width,
                          bool frozen) {
  const double b = 1.0 / std::sqrt(static_cast<double>(width));
  add_layer_norm(bank, prefix, width, frozen);
  for (const char* w : {"wq", "wk", "wv", "wo"}) {
    bank.add(prefix + "." + w, uniform_matrix(rng, width, width, b), frozen);
  }
  bank.add(prefix + ".bo", uniform_matrix(rng, 1, width, b), frozen);
}

inline void add_mlp(WeightBank& bank, Rng& rng, const std::string& prefix, int width, int hidden,
                    bool frozen) {
  const double b = 1.0 / std::sqrt(static_cast<double>(width));
  add_layer_norm(bank, prefix, width, frozen);
  bank.add(prefix + ".w1", uniform_matrix(rng, width, hidden, b), frozen);
  bank.add(prefix + ".b1", uniform_matrix(rng, 1, hidden, b), frozen);
  bank.add(prefix + ".w2", uniform_matrix(rng, hidden, width, b), frozen);
  bank.add(prefix + ".b2", uniform_matrix(rng, 1, width, b), frozen);
}

}  // namespace detail

// Deterministic weights: uniform in [-1/sqrt(C), 1/sqrt(C)] from config.seed;
// layer-norm scales start at 1 and shifts at 0.
inline WeightBank generate_weights(const ModelConfig& cfg) {
  cfg.validate();
  WeightBank bank;
  Rng rng(derive_seed(cfg.seed, 0x5e7));
  const int c = cfg.width;
  const double b = 1.0 / std::sqrt(static_cast<double>(c));
  const int patch_dim = 3 * cfg.patch * cfg.patch;

  bank.add("embed.proj.weight", detail::uniform_matrix(rng, patch_dim, c, b), false);
  bank.add("embed.proj.bias", detail::uniform_matrix(rng, 1, c, b), false);
  bank.add("tokens.first.camera", detail::uniform_matrix(rng, 1, c, b), false);
  bank.add("tokens.first.register", detail::uniform_matrix(rng, kRegisterTokens, c, b), false);
  bank.add("tokens.other.camera", detail::uniform_matrix(rng, 1, c, b), false);
  bank.add("tokens.other.register", detail::uniform_matrix(rng, kRegisterTokens, c, b), false);

  for (int l = 0; l < cfg.depth; ++l) {
    const std::string p = "gas." + std::to_string(l);
    detail::add_attention(bank, rng, p + ".frame_attn", c, cfg.frozen);
    detail::add_attention(bank, rng, p + ".msa", c, cfg.frozen);
    detail::add_mlp(bank, rng, p + ".mlp", c, cfg.mlp_hidden, false);
  }
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string p = "sat." + std::to_string(l);
    detail::add_attention(bank, rng, p + ".global_attn", c, false);
    detail::add_mlp(bank, rng, p + ".mlp", c, cfg.mlp_hidden, false);
  }
  for (int l = 0; l < cfg.camera_head_layers; ++l) {
    const std::string p = "camera_head." + std::to_string(l);
    detail::add_attention(bank, rng, p + ".attn", c, false);
    detail::add_mlp(bank, rng, p + ".mlp", c, cfg.mlp_hidden, false);
  }
  detail::add_layer_norm(bank, "camera_head.out", c, false);
  bank.add("camera_head.out.weight", detail::uniform_matrix(rng, c, kCameraVectorSize, b), false);
  bank.add("camera_head.out.bias", detail::uniform_matrix(rng, 1, kCameraVectorSize, b), false);
  detail::add_layer_norm(bank, "depth_head", c, false);
  bank.add("depth_head.weight", detail::uniform_matrix(rng, c, cfg.patch * cfg.patch, b), false);
  bank.add("depth_head.bias", detail::uniform_matrix(rng, 1, cfg.patch * cfg.patch, b), false);
  return bank;
}

// ---------------------------------------------------------------------------
// Serialization: flat little-endian f32 blob plus a JSON sidecar listing
// name, shape, byte offset and frozen flag per tensor.
// ---------------------------------------------------------------------------

inline std::filesystem::path weight_sidecar_path(const std::filesystem::path& blob) {
  std::filesystem::path p = blob;
  p += ".json";
  return p;
}

inline void save_weights(const WeightBank& bank, const ModelConfig& cfg,
                         const std::filesystem::path& blob_path) {
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : bank.entries()) {
    tensors.push_back({{"name", e.name},
                       {"shape", {e.value.rows(), e.value.cols()}},
                       {"offset", blob.size()},
                       {"frozen", e.frozen}});
    for (Eigen::Index i = 0; i < e.value.size(); ++i) {
      skybench::detail::put_f32(blob, static_cast<float>(e.value.data()[i]));
    }
  }
  write_file_atomic(blob_path, blob);
  const nlohmann::json sidecar = {{"config", to_json(cfg)}, {"tensors", tensors}};
  write_file_atomic(weight_sidecar_path(blob_path), sidecar.dump(2) + "\n");
}

struct LoadedWeights {
  ModelConfig config;
  WeightBank bank;
};

inline LoadedWeights load_weights(const std::filesystem::path& blob_path) {
  const std::string blob = read_file_bytes(blob_path);
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file_bytes(weight_sidecar_path(blob_path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io_error, "weight sidecar: " + std::string(e.what()));
  }
  LoadedWeights out;
  out.config = model_config_from_json(sidecar.at("config"));
  for (const auto& t : sidecar.at("tensors")) {
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    require(offset + static_cast<std::size_t>(rows * cols) * 4 <= blob.size(), ErrorKind::io_error,
            "tensor " + t.at("name").get<std::string>() + " runs past the end of the weight file");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = skybench::detail::get_f32(blob, offset + 4 * static_cast<std::size_t>(i));
    }
    out.bank.add(t.at("name").get<std::string>(), std::move(m), t.at("frozen").get<bool>());
  }
  return out;
}

}  // namespace skybench::skynet
