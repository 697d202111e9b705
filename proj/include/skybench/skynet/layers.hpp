#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/manifest.hpp"
#include "skybench/skynet/weights.hpp"

namespace skybench::skynet {

// Every reduction whose term set can be reordered by a frame permutation goes
// through ordered_sum: terms are sorted before accumulation, so the result
// depends only on the multiset of terms.
inline double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (double v : terms) acc += v;
  return acc;
}

// Row-wise x·W + b with a fixed accumulation order per output element, so a
// row's result never depends on its position in the batch.
inline Matrix linear(const Matrix& x, const Matrix& w, const Matrix* bias = nullptr) {
  require(x.cols() == w.rows(), ErrorKind::invalid_shape, "linear: input width mismatch");
  Matrix y(x.rows(), w.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      double acc = bias ? (*bias)(0, c) : 0.0;
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(r, k) * w(k, c);
      y(r, c) = acc;
    }
  }
  return y;
}

inline Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                         double eps = 1e-6) {
  Matrix y(x.rows(), x.cols());
  const auto n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      y(r, c) = (x(r, c) - mean) * inv * gamma(0, c) + beta(0, c);
    }
  }
  return y;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

// Pre-norm MLP branch; the caller adds the residual.
inline Matrix mlp_branch(const Matrix& x, const WeightBank& bank, const std::string& prefix) {
  Matrix h = layer_norm(x, bank.get(prefix + ".ln.gamma"), bank.get(prefix + ".ln.beta"));
  h = linear(h, bank.get(prefix + ".w1"), &bank.get(prefix + ".b1"));
  h = h.unaryExpr([](double v) { return gelu(v); });
  return linear(h, bank.get(prefix + ".w2"), &bank.get(prefix + ".b2"));
}

// ---------------------------------------------------------------------------
// Attention masks
// ---------------------------------------------------------------------------

class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t n, bool fill = true) : n_(n), allowed_(n * n, fill ? 1 : 0) {}

  std::size_t size() const { return n_; }
  bool at(std::size_t row, std::size_t col) const { return allowed_[row * n_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool v) { allowed_[row * n_ + col] = v ? 1 : 0; }
  bool all_true() const {
    return std::all_of(allowed_.begin(), allowed_.end(), [](std::uint8_t v) { return v != 0; });
  }
  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> allowed_;
};

// Ground/aerial rows may not attend to satellite columns; satellite rows
// attend everywhere. Applies to every token of a frame.
inline AttentionMask build_msa_mask(std::span<const Modality> modalities,
                                    std::span<const std::size_t> tokens_per_frame) {
  require(modalities.size() == tokens_per_frame.size(), ErrorKind::invalid_input,
          "modality tags and token counts differ in length");
  std::vector<bool> is_sat;
  for (std::size_t f = 0; f < modalities.size(); ++f) {
    is_sat.insert(is_sat.end(), tokens_per_frame[f], modalities[f] == Modality::satellite);
  }
  AttentionMask mask(is_sat.size());
  for (std::size_t r = 0; r < is_sat.size(); ++r) {
    if (is_sat[r]) continue;
    for (std::size_t c = 0; c < is_sat.size(); ++c) {
      if (is_sat[c]) mask.set(r, c, false);
    }
  }
  return mask;
}

inline AttentionMask build_msa_mask(std::span<const Modality> modalities,
                                    std::size_t tokens_per_frame) {
  const std::vector<std::size_t> counts(modalities.size(), tokens_per_frame);
  return build_msa_mask(modalities, counts);
}

// ---------------------------------------------------------------------------
// Multi-head softmax attention
// ---------------------------------------------------------------------------

inline double mask_bias(const AttentionMask* mask, std::size_t r, std::size_t c) {
  return (mask == nullptr || mask->at(r, c)) ? 0.0 : -std::numeric_limits<double>::infinity();
}

// Softmax weights of one query row over all keys; blocked keys get exactly 0
// and are left out of the normalizer.
inline std::vector<double> softmax_row(std::span<const double> logits, const AttentionMask* mask,
                                       std::size_t row) {
  std::vector<double> biased(logits.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < logits.size(); ++c) {
    biased[c] = logits[c] + mask_bias(mask, row, c);
    peak = std::max(peak, biased[c]);
  }
  require(std::isfinite(peak), ErrorKind::invalid_input, "attention row has no permitted keys");
  std::vector<double> e(logits.size(), 0.0);
  std::vector<double> terms;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (std::isinf(biased[c])) continue;
    e[c] = std::exp(biased[c] - peak);
    terms.push_back(e[c]);
  }
  const double denom = ordered_sum(terms);
  for (double& v : e) v /= denom;
  return e;
}

struct AttentionProjections {
  Matrix q, k, v;
};

inline AttentionProjections project_qkv(const Matrix& normed, const WeightBank& bank,
                                        const std::string& prefix) {
  return {linear(normed, bank.get(prefix + ".wq")), linear(normed, bank.get(prefix + ".wk")),
          linear(normed, bank.get(prefix + ".wv"))};
}

// Per-head attention weights (heads x rows x rows), exposed for inspection.
inline std::vector<Matrix> attention_weights(const AttentionProjections& p, int heads,
                                             const AttentionMask* mask) {
  const Eigen::Index n = p.q.rows();
  const Eigen::Index dh = p.q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Matrix> out;
  std::vector<double> logits(static_cast<std::size_t>(n));
  for (int h = 0; h < heads; ++h) {
    Matrix w(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        double dot = 0.0;
        for (Eigen::Index d = h * dh; d < (h + 1) * dh; ++d) dot += p.q(r, d) * p.k(c, d);
        logits[static_cast<std::size_t>(c)] = dot * scale;
      }
      const auto row = softmax_row(logits, mask, static_cast<std::size_t>(r));
      for (Eigen::Index c = 0; c < n; ++c) w(r, c) = row[static_cast<std::size_t>(c)];
    }
    out.push_back(std::move(w));
  }
  return out;
}

// Pre-norm attention branch; the caller adds the residual.
inline Matrix attention_branch(const Matrix& x, const WeightBank& bank, const std::string& prefix,
                               int heads, const AttentionMask* mask = nullptr) {
  require(mask == nullptr || mask->size() == static_cast<std::size_t>(x.rows()),
          ErrorKind::invalid_shape, "attention mask does not match the token count");
  const Matrix normed = layer_norm(x, bank.get(prefix + ".ln.gamma"), bank.get(prefix + ".ln.beta"));
  const auto proj = project_qkv(normed, bank, prefix);
  const auto weights = attention_weights(proj, heads, mask);
  const Eigen::Index n = x.rows();
  const Eigen::Index dh = proj.v.cols() / heads;
  Matrix mixed(n, proj.v.cols());
  std::vector<double> terms;
  for (int h = 0; h < heads; ++h) {
    const Matrix& w = weights[static_cast<std::size_t>(h)];
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index d = h * dh; d < (h + 1) * dh; ++d) {
        terms.clear();
        for (Eigen::Index c = 0; c < n; ++c) {
          if (w(r, c) != 0.0) terms.push_back(w(r, c) * proj.v(c, d));
        }
        mixed(r, d) = ordered_sum(terms);
      }
    }
  }
  return linear(mixed, bank.get(prefix + ".wo"), &bank.get(prefix + ".bo"));
}

}  // namespace skybench::skynet
