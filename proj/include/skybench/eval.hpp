#pragma once

#include <json.hpp>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/manifest.hpp"

namespace skybench {

inline constexpr double kDefaultThresholdDeg = 5.0;
inline constexpr double kDefaultThresholdMeters = 5.0;

struct PairError {
  std::size_t i = 0;
  std::size_t j = 0;
  std::string id_i;
  std::string id_j;
  double rot_err_deg = 0.0;
  double trans_err_deg = 0.0;
  double trans_err_m = 0.0;  // distance between relative translations
  Modality tag_i = Modality::ground;
  Modality tag_j = Modality::ground;
};

// Pairs (i, j), i < j, in lexicographic order.
inline std::vector<PairError> pair_errors(std::span<const Pose> pred, std::span<const Pose> gt,
                                          std::span<const Modality> tags,
                                          std::span<const std::string> ids = {}) {
  require(pred.size() == gt.size() && tags.size() == gt.size(), ErrorKind::invalid_pairing,
          "pair_errors: " + std::to_string(pred.size()) + " predicted poses, " +
              std::to_string(gt.size()) + " ground-truth poses, " + std::to_string(tags.size()) +
              " tags");
  require(ids.empty() || ids.size() == gt.size(), ErrorKind::invalid_pairing,
          "pair_errors: id list does not match the pose lists");
  require(gt.size() >= 2, ErrorKind::invalid_input, "pair_errors needs at least 2 poses");
  std::vector<PairError> out;
  out.reserve(gt.size() * (gt.size() - 1) / 2);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t j = i + 1; j < gt.size(); ++j) {
      const Pose rp = relative_pose(pred[i], pred[j]);
      const Pose rg = relative_pose(gt[i], gt[j]);
      PairError e;
      e.i = i;
      e.j = j;
      if (!ids.empty()) {
        e.id_i = ids[i];
        e.id_j = ids[j];
      }
      e.rot_err_deg = rotation_error_deg(rp.rotation, rg.rotation);
      e.trans_err_deg = translation_direction_error_deg(rp.translation, rg.translation);
      e.trans_err_m = (rp.translation - rg.translation).norm();
      e.tag_i = tags[i];
      e.tag_j = tags[j];
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// RRA / RTA
// ---------------------------------------------------------------------------

enum class BucketRule {
  pair_endpoints,  // a pair counts once toward each distinct endpoint modality
  image_anchored,  // per-image accuracy over its pairs, averaged per modality
};

enum class TranslationMode { angular, metric };

inline std::string to_string(BucketRule r) {
  return r == BucketRule::pair_endpoints ? "pair-endpoints" : "image-anchored";
}
inline BucketRule parse_bucket_rule(const std::string& s) {
  if (s == "pair-endpoints") return BucketRule::pair_endpoints;
  if (s == "image-anchored") return BucketRule::image_anchored;
  fail(ErrorKind::invalid_input, "unknown bucket rule '" + s + "'");
}
inline std::string to_string(TranslationMode m) {
  return m == TranslationMode::angular ? "angular" : "metric";
}
inline TranslationMode parse_translation_mode(const std::string& s) {
  if (s == "angular") return TranslationMode::angular;
  if (s == "metric") return TranslationMode::metric;
  fail(ErrorKind::invalid_input, "unknown translation mode '" + s + "'");
}

struct EvalConfig {
  double rot_threshold_deg = kDefaultThresholdDeg;
  double trans_threshold_deg = kDefaultThresholdDeg;
  double trans_threshold_m = kDefaultThresholdMeters;  // metric mode only
  BucketRule rule = BucketRule::pair_endpoints;
  TranslationMode translation = TranslationMode::angular;

  void validate() const {
    require(rot_threshold_deg > 0.0 && trans_threshold_deg > 0.0 && trans_threshold_m > 0.0,
            ErrorKind::invalid_input, "thresholds must be positive");
  }
};

struct BucketScore {
  bool present = false;
  double rra = 0.0;  // percent
  double rta = 0.0;
  std::size_t pairs = 0;
};

struct MetricReport {
  std::array<BucketScore, 3> buckets;  // indexed by Modality
  double rra_avg = 0.0;
  double rta_avg = 0.0;
  double avg = 0.0;
  std::size_t pair_count = 0;
  EvalConfig config;
  std::vector<std::string> flags;

  const BucketScore& bucket(Modality m) const { return buckets[static_cast<std::size_t>(m)]; }
  BucketScore& bucket(Modality m) { return buckets[static_cast<std::size_t>(m)]; }
};

namespace detail {

inline bool rot_ok(const PairError& e, const EvalConfig& c) {
  return e.rot_err_deg < c.rot_threshold_deg;
}
inline bool trans_ok(const PairError& e, const EvalConfig& c) {
  return c.translation == TranslationMode::angular ? e.trans_err_deg < c.trans_threshold_deg
                                                   : e.trans_err_m < c.trans_threshold_m;
}

inline void finish_report(MetricReport& r) {
  double rra = 0.0, rta = 0.0;
  int present = 0;
  for (Modality m : kAllModalities) {
    const auto& b = r.bucket(m);
    if (!b.present) {
      r.flags.push_back("absent:" + to_string(m));
      continue;
    }
    rra += b.rra;
    rta += b.rta;
    ++present;
  }
  r.rra_avg = present ? rra / present : 0.0;
  r.rta_avg = present ? rta / present : 0.0;
  r.avg = (r.rra_avg + r.rta_avg) / 2.0;
}

}  // namespace detail

inline MetricReport rra_rta(std::span<const PairError> errors, const EvalConfig& config = {}) {
  config.validate();
  require(!errors.empty(), ErrorKind::invalid_input, "no pair errors to score");
  MetricReport r;
  r.config = config;
  r.pair_count = errors.size();

  if (config.rule == BucketRule::pair_endpoints) {
    std::array<std::size_t, 3> n{}, rot{}, trans{};
    for (const auto& e : errors) {
      const bool ro = detail::rot_ok(e, config);
      const bool tr = detail::trans_ok(e, config);
      for (Modality m : kAllModalities) {
        if (e.tag_i != m && e.tag_j != m) continue;
        const auto k = static_cast<std::size_t>(m);
        ++n[k];
        rot[k] += ro;
        trans[k] += tr;
      }
    }
    for (Modality m : kAllModalities) {
      const auto k = static_cast<std::size_t>(m);
      auto& b = r.bucket(m);
      b.pairs = n[k];
      b.present = n[k] > 0;
      if (b.present) {
        b.rra = 100.0 * static_cast<double>(rot[k]) / static_cast<double>(n[k]);
        b.rta = 100.0 * static_cast<double>(trans[k]) / static_cast<double>(n[k]);
      }
    }
  } else {
    struct Tally {
      Modality tag;
      std::size_t n = 0, rot = 0, trans = 0;
    };
    std::map<std::size_t, Tally> images;
    for (const auto& e : errors) {
      const bool ro = detail::rot_ok(e, config);
      const bool tr = detail::trans_ok(e, config);
      for (auto [idx, tag] : {std::pair{e.i, e.tag_i}, std::pair{e.j, e.tag_j}}) {
        auto& t = images.try_emplace(idx, Tally{tag}).first->second;
        ++t.n;
        t.rot += ro;
        t.trans += tr;
      }
    }
    std::array<double, 3> rra{}, rta{};
    std::array<std::size_t, 3> count{}, pairs{};
    for (const auto& [idx, t] : images) {
      const auto k = static_cast<std::size_t>(t.tag);
      rra[k] += 100.0 * static_cast<double>(t.rot) / static_cast<double>(t.n);
      rta[k] += 100.0 * static_cast<double>(t.trans) / static_cast<double>(t.n);
      ++count[k];
      pairs[k] += t.n;
    }
    for (Modality m : kAllModalities) {
      const auto k = static_cast<std::size_t>(m);
      auto& b = r.bucket(m);
      b.present = count[k] > 0;
      b.pairs = pairs[k];
      if (b.present) {
        b.rra = rra[k] / static_cast<double>(count[k]);
        b.rta = rta[k] / static_cast<double>(count[k]);
      }
    }
  }
  detail::finish_report(r);
  return r;
}

// ---------------------------------------------------------------------------
// PSNR
// ---------------------------------------------------------------------------

// +infinity when the images are identical.
template <typename T>
double psnr(const Raster<T>& a, const Raster<T>& b, double peak = 255.0) {
  require(a.same_shape(b), ErrorKind::invalid_shape, "psnr: images differ in shape");
  require(!a.data.empty(), ErrorKind::invalid_shape, "psnr: empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

// ---------------------------------------------------------------------------
// Report formatting
// ---------------------------------------------------------------------------

enum class ReportStyle {
  per_modality,  // Ground | Satellite | Aerial | Avg, each with RRA/RTA
  ground_satellite,  // Ground | Satellite | Overall Avg
};

// One decimal place, halves rounded up.
inline std::string format_percent(double v) {
  const double r = std::floor(v * 10.0 + 0.5 + 1e-9) / 10.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", r);
  return buf;
}

inline std::string threshold_label(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

inline std::string format_report(const MetricReport& r,
                                 ReportStyle style = ReportStyle::per_modality) {
  const std::string rra = "RRA@" + threshold_label(r.config.rot_threshold_deg);
  const std::string rta =
      "RTA@" + threshold_label(r.config.translation == TranslationMode::angular
                                   ? r.config.trans_threshold_deg
                                   : r.config.trans_threshold_m) +
      (r.config.translation == TranslationMode::metric ? "m" : "");
  std::vector<std::string> header, cells;
  bool any_absent = false;
  const auto add = [&](const std::string& name, std::optional<double> v) {
    header.push_back(name);
    cells.push_back(v ? format_percent(*v) : "-");
    if (!v) any_absent = true;
  };
  const auto score = [&](Modality m, bool rot) -> std::optional<double> {
    const auto& b = r.bucket(m);
    if (!b.present) return std::nullopt;
    return rot ? b.rra : b.rta;
  };

  if (style == ReportStyle::per_modality) {
    for (Modality m : {Modality::ground, Modality::satellite, Modality::aerial}) {
      std::string name = to_string(m);
      name[0] = static_cast<char>(std::toupper(name[0]));
      add(name + " " + rra, score(m, true));
      add(name + " " + rta, score(m, false));
    }
    add("Avg " + rra, r.rra_avg);
    add("Avg " + rta, r.rta_avg);
  } else {
    for (Modality m : {Modality::ground, Modality::satellite}) {
      std::string name = to_string(m);
      name[0] = static_cast<char>(std::toupper(name[0]));
      const auto a = score(m, true);
      const auto b = score(m, false);
      add(name + " " + rra, a);
      add(name + " " + rta, b);
      add(name + " Avg", a && b ? std::optional<double>((*a + *b) / 2.0) : std::nullopt);
    }
    add("Overall Avg", r.avg);
  }

  std::ostringstream os;
  const auto row = [&](const std::vector<std::string>& v) {
    os << '|';
    for (const auto& c : v) os << ' ' << c << " |";
    os << '\n';
  };
  row(header);
  std::vector<std::string> rule(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) rule[k] = std::string(header[k].size(), '-');
  row(rule);
  row(cells);
  if (any_absent) os << "- : no pairs for this modality; excluded from averages\n";
  return os.str();
}

// Inverse of format_report: column name -> value (nullopt for "-").
inline std::vector<std::pair<std::string, std::optional<double>>> parse_report(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] != '|') continue;
    std::vector<std::string> cells;
    std::size_t pos = 1;
    while (pos < line.size()) {
      const std::size_t next = line.find('|', pos);
      if (next == std::string::npos) break;
      std::string c = line.substr(pos, next - pos);
      const auto b = c.find_first_not_of(' ');
      const auto e = c.find_last_not_of(' ');
      cells.push_back(b == std::string::npos ? "" : c.substr(b, e - b + 1));
      pos = next + 1;
    }
    rows.push_back(std::move(cells));
  }
  require(rows.size() == 3 && rows[0].size() == rows[2].size(), ErrorKind::invalid_input,
          "not a formatted report table");
  std::vector<std::pair<std::string, std::optional<double>>> out;
  for (std::size_t k = 0; k < rows[0].size(); ++k) {
    const auto& c = rows[2][k];
    out.emplace_back(rows[0][k], c == "-" ? std::nullopt : std::optional<double>(std::stod(c)));
  }
  return out;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json buckets = nlohmann::json::object();
  for (Modality m : kAllModalities) {
    const auto& b = r.bucket(m);
    buckets[to_string(m)] = {{"present", b.present},
                             {"pairs", b.pairs},
                             {"rra", b.present ? nlohmann::json(b.rra) : nlohmann::json()},
                             {"rta", b.present ? nlohmann::json(b.rta) : nlohmann::json()}};
  }
  return {{"buckets", buckets},
          {"rra_avg", r.rra_avg},
          {"rta_avg", r.rta_avg},
          {"avg", r.avg},
          {"pair_count", r.pair_count},
          {"rot_threshold_deg", r.config.rot_threshold_deg},
          {"trans_threshold_deg", r.config.trans_threshold_deg},
          {"trans_threshold_m", r.config.trans_threshold_m},
          {"translation_mode", to_string(r.config.translation)},
          {"bucket_rule", to_string(r.config.rule)},
          {"flags", r.flags}};
}

// ---------------------------------------------------------------------------
// Multi-site aggregation
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd out;
  out.n = v.size();
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

struct AggregateReport {
  std::array<MeanStd, 3> rra;  // per modality, over sites where the bucket is present
  std::array<MeanStd, 3> rta;
  MeanStd rra_avg, rta_avg, avg;
  std::size_t sites = 0;
};

inline AggregateReport aggregate_reports(std::span<const MetricReport> reports) {
  require(!reports.empty(), ErrorKind::invalid_input, "no site reports to aggregate");
  AggregateReport a;
  a.sites = reports.size();
  for (Modality m : kAllModalities) {
    std::vector<double> rra, rta;
    for (const auto& r : reports) {
      if (!r.bucket(m).present) continue;
      rra.push_back(r.bucket(m).rra);
      rta.push_back(r.bucket(m).rta);
    }
    a.rra[static_cast<std::size_t>(m)] = mean_std(rra);
    a.rta[static_cast<std::size_t>(m)] = mean_std(rta);
  }
  std::vector<double> ra, ta, av;
  for (const auto& r : reports) {
    ra.push_back(r.rra_avg);
    ta.push_back(r.rta_avg);
    av.push_back(r.avg);
  }
  a.rra_avg = mean_std(ra);
  a.rta_avg = mean_std(ta);
  a.avg = mean_std(av);
  return a;
}

inline std::string format_mean_std(const MeanStd& s) {
  if (s.n == 0) return "-";
  return format_percent(s.mean) + " ± " + format_percent(s.std);
}

inline nlohmann::json to_json(const AggregateReport& a) {
  const auto ms = [](const MeanStd& s) {
    return nlohmann::json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
  };
  nlohmann::json buckets = nlohmann::json::object();
  for (Modality m : kAllModalities) {
    const auto k = static_cast<std::size_t>(m);
    buckets[to_string(m)] = {{"rra", ms(a.rra[k])}, {"rta", ms(a.rta[k])}};
  }
  return {{"sites", a.sites},
          {"buckets", buckets},
          {"rra_avg", ms(a.rra_avg)},
          {"rta_avg", ms(a.rta_avg)},
          {"avg", ms(a.avg)}};
}

// ---------------------------------------------------------------------------
// Pose sets from files
// ---------------------------------------------------------------------------

struct PoseEntry {
  std::string id;
  Modality modality = Modality::ground;
  Pose pose;
};

// Reads either a site manifest ("views") or a forward output ("cameras");
// both carry id, modality, quat_wxyz and translation_xyz per entry.
inline std::vector<PoseEntry> read_pose_set(const std::filesystem::path& path_in) {
  const auto path = std::filesystem::is_directory(path_in) ? path_in / kManifestFile : path_in;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::manifest_parse_error, path.string() + ": " + e.what());
  }
  if (j.contains("views")) {
    std::vector<PoseEntry> out;
    for (const auto& v : manifest_from_json(j).views) out.push_back({v.id, v.modality, v.pose()});
    return out;
  }
  using R = detail::ManifestReader;
  const auto& cams = R::field(j, "$", "cameras");
  if (!cams.is_array()) R::bad("$.cameras", "expected an array");
  std::vector<PoseEntry> out;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string p = "$.cameras[" + std::to_string(i) + "]";
    PoseEntry e;
    e.id = R::string(cams[i], p, "id");
    e.modality = parse_modality(R::string(cams[i], p, "modality"));
    const auto q = R::numbers<4>(cams[i], p, "quat_wxyz");
    const UnitQuaternion quat{q[0], q[1], q[2], q[3]};
    if (std::abs(quat.norm() - 1.0) > kQuaternionNormTolerance) R::bad(p + ".quat_wxyz", "not unit norm");
    const auto t = R::numbers<3>(cams[i], p, "translation_xyz");
    e.pose = {quat_to_rotation(quat), Vec3(t[0], t[1], t[2])};
    out.push_back(std::move(e));
  }
  return out;
}

struct AlignedPoses {
  std::vector<std::string> ids;
  std::vector<Modality> tags;
  std::vector<Pose> pred;
  std::vector<Pose> gt;
};

// Every predicted id must exist in the ground truth; extra ground-truth views
// are ignored. Order follows the prediction.
inline AlignedPoses align_pose_sets(std::span<const PoseEntry> pred, std::span<const PoseEntry> gt) {
  std::map<std::string, const PoseEntry*> by_id;
  for (const auto& g : gt) by_id[g.id] = &g;
  AlignedPoses out;
  std::map<std::string, bool> seen;
  for (const auto& p : pred) {
    auto it = by_id.find(p.id);
    require(it != by_id.end(), ErrorKind::invalid_pairing,
            "predicted frame '" + p.id + "' has no ground truth");
    require(!seen[p.id], ErrorKind::invalid_pairing, "predicted frame '" + p.id + "' repeated");
    seen[p.id] = true;
    require(it->second->modality == p.modality, ErrorKind::invalid_pairing,
            "modality mismatch for frame '" + p.id + "'");
    out.ids.push_back(p.id);
    out.tags.push_back(p.modality);
    out.pred.push_back(p.pose);
    out.gt.push_back(it->second->pose);
  }
  return out;
}

}  // namespace skybench
