#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/manifest.hpp"
#include "skybench/skynet/layers.hpp"
#include "skybench/skynet/weights.hpp"

namespace skybench::skynet {

// Row layout of one frame's tokens: camera, registers, then patches in
// row-major patch order.
inline constexpr int kCameraRow = 0;
inline constexpr int kFirstRegisterRow = 1;
inline constexpr int kFirstPatchRow = 1 + kRegisterTokens;

struct TokenSet {
  Matrix tokens;
  Modality modality = Modality::ground;
  std::size_t frame_index = 0;
};

inline Matrix position_encoding(int patch_row, int patch_col, int width) {
  const int quarter = width / 4;
  Matrix enc(1, width);
  for (int k = 0; k < quarter; ++k) {
    const double freq = 1.0 / std::pow(10000.0, static_cast<double>(k) / quarter);
    enc(0, k) = std::sin(patch_row * freq);
    enc(0, quarter + k) = std::cos(patch_row * freq);
    enc(0, 2 * quarter + k) = std::sin(patch_col * freq);
    enc(0, 3 * quarter + k) = std::cos(patch_col * freq);
  }
  return enc;
}

// Image is a 3-channel raster with values in [0, 1].
inline TokenSet patch_embed(const ImageF& image, Modality modality, std::size_t frame_index,
                            const ModelConfig& cfg, const WeightBank& bank) {
  require(image.channels == 3, ErrorKind::invalid_shape, "patch_embed expects an RGB image");
  require(image.width % cfg.patch == 0 && image.height % cfg.patch == 0, ErrorKind::invalid_shape,
          "image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
              " is not divisible by patch size " + std::to_string(cfg.patch));
  require(image.width == cfg.image_width && image.height == cfg.image_height,
          ErrorKind::invalid_shape, "image size does not match the model resolution");
  const int rows = image.height / cfg.patch;
  const int cols = image.width / cfg.patch;
  const int p2 = cfg.patch * cfg.patch;

  Matrix flat(rows * cols, 3 * p2);
  for (int pr = 0; pr < rows; ++pr) {
    for (int pc = 0; pc < cols; ++pc) {
      const int row = pr * cols + pc;
      for (int y = 0; y < cfg.patch; ++y) {
        for (int x = 0; x < cfg.patch; ++x) {
          for (int c = 0; c < 3; ++c) {
            flat(row, (y * cfg.patch + x) * 3 + c) =
                image.at(pc * cfg.patch + x, pr * cfg.patch + y, c);
          }
        }
      }
    }
  }
  Matrix patches = linear(flat, bank.get("embed.proj.weight"), &bank.get("embed.proj.bias"));
  for (int pr = 0; pr < rows; ++pr) {
    for (int pc = 0; pc < cols; ++pc) {
      patches.row(pr * cols + pc) += position_encoding(pr, pc, cfg.width);
    }
  }

  const std::string pair = frame_index == 0 ? "tokens.first" : "tokens.other";
  TokenSet ts;
  ts.modality = modality;
  ts.frame_index = frame_index;
  ts.tokens.resize(kFirstPatchRow + patches.rows(), cfg.width);
  ts.tokens.row(kCameraRow) = bank.get(pair + ".camera").row(0);
  ts.tokens.middleRows(kFirstRegisterRow, kRegisterTokens) = bank.get(pair + ".register");
  ts.tokens.bottomRows(patches.rows()) = patches;
  return ts;
}

// ---------------------------------------------------------------------------
// GAS encoder
// ---------------------------------------------------------------------------

struct GasOutput {
  std::vector<Matrix> frames;    // final tokens per frame
  std::vector<Matrix> sat_taps;  // per block: satellite rows stacked in frame order
};

namespace detail {

inline Matrix stack_frames(std::span<const Matrix> frames) {
  Eigen::Index rows = 0;
  for (const auto& f : frames) rows += f.rows();
  Matrix out(rows, frames.empty() ? 0 : frames.front().cols());
  Eigen::Index at = 0;
  for (const auto& f : frames) {
    out.middleRows(at, f.rows()) = f;
    at += f.rows();
  }
  return out;
}

}  // namespace detail

inline GasOutput gas_encoder_forward(std::span<const TokenSet> tokensets, const ModelConfig& cfg,
                                     const WeightBank& bank) {
  require(!tokensets.empty(), ErrorKind::invalid_batch, "GAS encoder needs at least one frame");
  const Eigen::Index t = tokensets.front().tokens.rows();
  std::vector<Modality> tags;
  std::vector<Matrix> frames;
  for (const auto& ts : tokensets) {
    require(ts.tokens.rows() == t && ts.tokens.cols() == cfg.width, ErrorKind::invalid_shape,
            "token sets differ in shape");
    tags.push_back(ts.modality);
    frames.push_back(ts.tokens);
  }
  const auto mask = build_msa_mask(tags, static_cast<std::size_t>(t));

  GasOutput out;
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string p = "gas." + std::to_string(l);
    for (auto& f : frames) f += attention_branch(f, bank, p + ".frame_attn", cfg.heads);

    Matrix all = detail::stack_frames(frames);
    all += attention_branch(all, bank, p + ".msa", cfg.heads, &mask);
    all += mlp_branch(all, bank, p + ".mlp");

    std::vector<Matrix> sat;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      frames[f] = all.middleRows(static_cast<Eigen::Index>(f) * t, t);
      if (tags[f] == Modality::satellite) sat.push_back(frames[f]);
    }
    out.sat_taps.push_back(sat.empty() ? Matrix(0, cfg.width) : detail::stack_frames(sat));
  }
  out.frames = std::move(frames);
  return out;
}

// ---------------------------------------------------------------------------
// Satellite encoder
// ---------------------------------------------------------------------------

// Per block: global attention among all satellite tokens, z += v_s from the
// matching GAS block, then MLP. Returns final tokens per satellite frame.
inline std::vector<Matrix> sat_encoder_forward(std::span<const TokenSet> sat_tokensets,
                                               std::span<const Matrix> sat_taps,
                                               const ModelConfig& cfg, const WeightBank& bank) {
  require(!sat_tokensets.empty(), ErrorKind::invalid_batch,
          "satellite encoder needs at least one satellite frame");
  require(sat_taps.size() == static_cast<std::size_t>(cfg.depth), ErrorKind::invalid_taps,
          "expected " + std::to_string(cfg.depth) + " satellite taps, got " +
              std::to_string(sat_taps.size()));
  std::vector<Matrix> frames;
  for (const auto& ts : sat_tokensets) frames.push_back(ts.tokens);
  Matrix z = detail::stack_frames(frames);
  for (const auto& tap : sat_taps) {
    require(tap.rows() == z.rows() && tap.cols() == z.cols(), ErrorKind::invalid_taps,
            "satellite tap shape does not match the satellite tokens");
  }

  for (int l = 0; l < cfg.depth; ++l) {
    const std::string p = "sat." + std::to_string(l);
    z += attention_branch(z, bank, p + ".global_attn", cfg.heads);
    z += sat_taps[static_cast<std::size_t>(l)];
    z += mlp_branch(z, bank, p + ".mlp");
  }
  const Eigen::Index t = sat_tokensets.front().tokens.rows();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    frames[f] = z.middleRows(static_cast<Eigen::Index>(f) * t, t);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

// pi * sigmoid(x), kept strictly inside (0, pi) even when the sigmoid saturates.
inline double fov_map(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  const double v = kPi * s;
  return std::clamp(v, std::numeric_limits<double>::min(), std::nextafter(kPi, 0.0));
}

inline CameraVector9 decode_camera(std::span<const double> raw) {
  CameraVector9 g;
  g.q = UnitQuaternion::normalized(raw[0], raw[1], raw[2], raw[3]);
  g.t = Vec3(raw[4], raw[5], raw[6]);
  g.fov = Vec2(fov_map(raw[7]), fov_map(raw[8]));
  return g;
}

// Self-attention over the set of camera tokens of one stream, then a linear
// map to 9 values. Weights are shared between streams.
inline std::vector<CameraVector9> camera_head(const Matrix& camera_tokens, const ModelConfig& cfg,
                                              const WeightBank& bank) {
  require(camera_tokens.rows() >= 1, ErrorKind::invalid_input, "camera head needs a token");
  Matrix x = camera_tokens;
  for (int l = 0; l < cfg.camera_head_layers; ++l) {
    const std::string p = "camera_head." + std::to_string(l);
    x += attention_branch(x, bank, p + ".attn", cfg.heads);
    x += mlp_branch(x, bank, p + ".mlp");
  }
  x = layer_norm(x, bank.get("camera_head.out.ln.gamma"), bank.get("camera_head.out.ln.beta"));
  const Matrix raw = linear(x, bank.get("camera_head.out.weight"), &bank.get("camera_head.out.bias"));
  std::vector<CameraVector9> out;
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    out.push_back(decode_camera({raw.row(r).data(), kCameraVectorSize}));
  }
  return out;
}

// Per-token linear decoder; log-depth is clamped so exp stays finite and
// positive in single precision.
inline DepthMap depth_head(const Matrix& patch_tokens, const ModelConfig& cfg,
                           const WeightBank& bank) {
  const int rows = cfg.image_height / cfg.patch;
  const int cols = cfg.image_width / cfg.patch;
  require(patch_tokens.rows() == rows * cols && patch_tokens.cols() == cfg.width,
          ErrorKind::invalid_shape,
          "depth head got " + std::to_string(patch_tokens.rows()) + " tokens for a " +
              std::to_string(rows) + "x" + std::to_string(cols) + " patch grid");
  const Matrix normed =
      layer_norm(patch_tokens, bank.get("depth_head.ln.gamma"), bank.get("depth_head.ln.beta"));
  const Matrix logd = linear(normed, bank.get("depth_head.weight"), &bank.get("depth_head.bias"));
  DepthMap depth(cfg.image_width, cfg.image_height, 1);
  for (int pr = 0; pr < rows; ++pr) {
    for (int pc = 0; pc < cols; ++pc) {
      for (int y = 0; y < cfg.patch; ++y) {
        for (int x = 0; x < cfg.patch; ++x) {
          const double v = std::clamp(logd(pr * cols + pc, y * cfg.patch + x), -30.0, 30.0);
          depth.at(pc * cfg.patch + x, pr * cfg.patch + y) = static_cast<float>(std::exp(v));
        }
      }
    }
  }
  return depth;
}

// ---------------------------------------------------------------------------
// Full forward
// ---------------------------------------------------------------------------

enum class Stream { gas, sat };

inline std::string to_string(Stream s) { return s == Stream::gas ? "gas-encoder" : "sat-encoder"; }

struct FrameInput {
  std::string id;
  Modality modality = Modality::ground;
  ImageF image;  // RGB in [0, 1] at the model resolution
};

struct ForwardOutput {
  std::vector<std::string> ids;
  std::vector<Modality> modalities;
  std::vector<CameraVector9> cameras;
  std::vector<DepthMap> depths;
  std::vector<Stream> provenance;
  std::vector<Matrix> gas_tokens;  // final GAS tokens per frame, kept for inspection
};

inline ForwardOutput skynet_forward(std::span<const FrameInput> frames, const ModelConfig& cfg,
                                    const WeightBank& bank) {
  require(!frames.empty(), ErrorKind::invalid_batch, "forward needs at least one frame");
  cfg.validate();
  std::vector<TokenSet> tokens;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    tokens.push_back(patch_embed(frames[f].image, frames[f].modality, f, cfg, bank));
  }
  GasOutput gas = gas_encoder_forward(tokens, cfg, bank);

  std::vector<std::size_t> ga_idx;
  std::vector<std::size_t> sat_idx;
  std::vector<TokenSet> sat_tokens;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].modality == Modality::satellite) {
      sat_idx.push_back(f);
      sat_tokens.push_back(tokens[f]);
    } else {
      ga_idx.push_back(f);
    }
  }

  const std::size_t n = frames.size();
  ForwardOutput out;
  out.cameras.resize(n);
  out.depths.resize(n);
  out.provenance.resize(n);
  for (const auto& fr : frames) {
    out.ids.push_back(fr.id);
    out.modalities.push_back(fr.modality);
  }

  const auto run_stream = [&](std::span<const std::size_t> idx, std::span<const Matrix> final_tokens,
                              Stream stream) {
    Matrix cams(static_cast<Eigen::Index>(idx.size()), cfg.width);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Matrix& ft = final_tokens[k];
      cams.row(static_cast<Eigen::Index>(k)) = ft.row(kCameraRow);
      out.depths[idx[k]] = depth_head(ft.bottomRows(ft.rows() - kFirstPatchRow), cfg, bank);
      out.provenance[idx[k]] = stream;
    }
    const auto decoded = camera_head(cams, cfg, bank);
    for (std::size_t k = 0; k < idx.size(); ++k) out.cameras[idx[k]] = decoded[k];
  };

  if (!ga_idx.empty()) {
    std::vector<Matrix> ga_final;
    for (std::size_t f : ga_idx) ga_final.push_back(gas.frames[f]);
    run_stream(ga_idx, ga_final, Stream::gas);
  }
  if (!sat_idx.empty()) {
    const auto sat_final = sat_encoder_forward(sat_tokens, gas.sat_taps, cfg, bank);
    run_stream(sat_idx, sat_final, Stream::sat);
  }
  out.gas_tokens = std::move(gas.frames);
  return out;
}

// Box-filter resample of an 8-bit image to the model resolution, scaled to [0, 1].
inline ImageF to_model_input(const ImageU8& img, int width, int height) {
  require(img.width > 0 && img.height > 0 && img.channels >= 3, ErrorKind::invalid_shape,
          "model input must be a non-empty RGB image");
  ImageF out(width, height, 3);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const int y0 = static_cast<int>(std::floor(y * sy));
    const int y1 = std::max(y0 + 1, static_cast<int>(std::floor((y + 1) * sy)));
    for (int x = 0; x < width; ++x) {
      const int x0 = static_cast<int>(std::floor(x * sx));
      const int x1 = std::max(x0 + 1, static_cast<int>(std::floor((x + 1) * sx)));
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        int count = 0;
        for (int yy = y0; yy < std::min(y1, img.height); ++yy) {
          for (int xx = x0; xx < std::min(x1, img.width); ++xx) {
            acc += img.at(xx, yy, c);
            ++count;
          }
        }
        out.at(x, y, c) = acc / (255.0 * std::max(count, 1));
      }
    }
  }
  return out;
}

}  // namespace skybench::skynet
