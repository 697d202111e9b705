#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skybench/curriculum.hpp"
#include "skybench/eval.hpp"
#include "skybench/scenegen.hpp"
#include "skybench/skynet/loss.hpp"
#include "skybench/skynet/model.hpp"
#include "skybench/skynet/weights.hpp"
#include "skybench/tile_fetch.hpp"

namespace skybench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNetwork = 4;

// Flag validation failure detected by the CLI itself.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::network_error:
    case ErrorKind::tile_unavailable:
      return kExitNetwork;
    default:
      return kExitData;
  }
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

struct GenSiteOptions {
  std::string site_id = "site000";
  int ground_n = 100;
  int satellite_n = 120;
  std::vector<int> aerial_frames = {60, 120, 180};
  double ground_altitude = 10.0;
  double satellite_altitude = 1500.0;
  std::vector<double> aerial_band_top = {800.0, 550.0, 300.0};
  std::vector<double> aerial_band_bottom = {700.0, 450.0, 200.0};
  bool relax_counts = false;
  bool no_rgb = false;
};

struct SampleOptions {
  std::filesystem::path manifest;
  std::string mode = "cacs";
  double tau = 0.0;
  int n = 8;
  std::string anchor;
  double lambda_t = kDefaultLambdaT;
  std::filesystem::path cache;
};

struct ForwardOptions {
  std::filesystem::path manifest;
  std::vector<std::string> ids;
  std::filesystem::path ids_file;
  std::filesystem::path model_config;
  std::filesystem::path weights;
  std::filesystem::path save_weights;
  double alpha = skynet::kDefaultAlpha;
};

struct EvalOptions {
  std::vector<std::filesystem::path> pred;
  std::vector<std::filesystem::path> gt;
  double threshold = kDefaultThresholdDeg;
  double threshold_m = kDefaultThresholdMeters;
  std::string bucket_rule = "pair-endpoints";
  std::string translation = "angular";
  std::string style = "per-modality";
  bool json = false;
};

struct FetchOptions {
  double lat = 0.0;
  double lon = 0.0;
  int zoom = 17;
  int grid = 3;
  std::filesystem::path cache;
  std::string endpoint = kBingTileEndpoint;
  std::filesystem::path output;
  bool offline = false;
  int timeout = 10;
};

namespace detail {

inline void check_band_flag(const char* flag, Modality m, double v) {
  const AltitudeBand band = altitude_band(m);
  if (!std::isfinite(v) || !band.contains(v)) {
    std::ostringstream os;
    os << flag << " " << v << " is outside the " << to_string(m) << " AGL band [" << band.min_m
       << ", " << band.max_m << "] m";
    throw UsageError(os.str());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::manifest_parse_error, path.string() + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gen-site
// ---------------------------------------------------------------------------

inline int cmd_gen_site(const GlobalOptions& g, const GenSiteOptions& o, std::ostream& out) {
  if (o.aerial_frames.size() != 3 || o.aerial_band_top.size() != 3 ||
      o.aerial_band_bottom.size() != 3) {
    throw UsageError("aerial band flags take exactly 3 values (high, medium, low)");
  }
  detail::check_band_flag("--ground-altitude", Modality::ground, o.ground_altitude);
  detail::check_band_flag("--satellite-altitude", Modality::satellite, o.satellite_altitude);
  for (int b = 0; b < 3; ++b) {
    detail::check_band_flag("--aerial-band-top", Modality::aerial, o.aerial_band_top[b]);
    detail::check_band_flag("--aerial-band-bottom", Modality::aerial, o.aerial_band_bottom[b]);
    if (o.aerial_band_bottom[b] > o.aerial_band_top[b]) {
      throw UsageError("--aerial-band-bottom exceeds --aerial-band-top for band " +
                       std::string(kAerialBandNames[b]));
    }
    if (o.aerial_frames[b] < 0) throw UsageError("--aerial-frames must be >= 0");
  }
  if (!o.relax_counts && (o.ground_n < kMinGroundViews || o.ground_n > kMaxGroundViews)) {
    throw UsageError("--ground-n " + std::to_string(o.ground_n) + " outside [" +
                     std::to_string(kMinGroundViews) + ", " + std::to_string(kMaxGroundViews) +
                     "]; pass --relax-counts for smaller test sites");
  }

  SiteConfig cfg;
  cfg.site_id = o.site_id;
  cfg.seed = g.seed;
  cfg.ground.count = o.ground_n;
  cfg.ground.altitude = o.ground_altitude;
  cfg.satellite.count = o.satellite_n;
  cfg.satellite.altitude = o.satellite_altitude;
  for (int b = 0; b < 3; ++b) {
    cfg.aerial.frames_per_band[b] = o.aerial_frames[b];
    cfg.aerial.band_top[b] = o.aerial_band_top[b];
    cfg.aerial.band_bottom[b] = o.aerial_band_bottom[b];
  }
  cfg.strict_counts = !o.relax_counts;
  cfg.write_rgb = !o.no_rgb;

  const auto dir = g.out_dir / o.site_id;
  const SiteManifest m = generate_site(cfg, dir);
  const auto c = m.counts();
  out << "site " << m.site_id << ": " << c.ground << " ground, " << c.aerial << " aerial, "
      << c.satellite << " satellite -> " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

// Loads the distance cache from `path` when present, otherwise builds it and
// writes it there. The returned cache always holds the f32-rounded values so
// the sampled ids do not depend on whether the file existed.
inline DistanceCache load_or_build_cache(const SiteManifest& m, const std::filesystem::path& path,
                                         double lambda_t) {
  std::vector<std::string> ids;
  for (const auto& v : m.views) ids.push_back(v.id);
  if (!path.empty() && std::filesystem::exists(path)) {
    return decode_distance_cache(read_file_bytes(path), std::move(ids));
  }
  const std::string bytes =
      encode_distance_cache(build_distance_cache(std::span<const ViewRecord>(m.views), lambda_t));
  if (!path.empty()) write_file_atomic(path, bytes);
  return decode_distance_cache(bytes, std::move(ids));
}

inline std::size_t pick_anchor(const SiteManifest& m, const std::string& anchor, std::uint64_t seed,
                               std::ostream& err) {
  if (!anchor.empty()) {
    const auto idx = m.find(anchor);
    require(idx >= 0, ErrorKind::invalid_pairing, "anchor id '" + anchor + "' not in the manifest");
    return static_cast<std::size_t>(idx);
  }
  std::vector<std::size_t> ground;
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    if (m.views[i].modality == Modality::ground) ground.push_back(i);
  }
  require(!ground.empty(), ErrorKind::insufficient_views, "no ground view to anchor on");
  Rng rng(derive_seed(seed, 0xa7c));
  const std::size_t idx = ground[rng.below(ground.size())];
  err << "anchor: " << m.views[idx].id << "\n";
  return idx;
}

inline int cmd_sample(const GlobalOptions& g, const SampleOptions& o, std::ostream& out,
                      std::ostream& err) {
  if (o.n < 0) throw UsageError("--n must be >= 0");
  // CLI::Range lets NaN through.
  if (!(o.tau >= 0.0 && o.tau <= 1.0)) throw UsageError("--tau must be in [0, 1]");
  const SiteManifest m = read_manifest(o.manifest);
  const CurriculumProgress progress(o.tau);
  const auto n = static_cast<std::size_t>(o.n);

  std::vector<std::string> ids;
  if (o.mode == "pvs") {
    ids = pvs_sample(m, pvs_counts(n, progress), g.seed);
  } else {
    const DistanceCache cache = load_or_build_cache(m, o.cache, o.lambda_t);
    const std::size_t anchor = pick_anchor(m, o.anchor, g.seed, err);
    if (o.mode == "cacs") {
      for (std::size_t idx : cacs_sample(anchor, cache, n, progress)) ids.push_back(m.views[idx].id);
    } else {
      ids = composed_sample(m, cache, anchor, pvs_counts(n, progress), progress);
    }
  }
  for (const auto& id : ids) out << id << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

inline std::vector<std::string> collect_ids(const ForwardOptions& o) {
  std::vector<std::string> ids = o.ids;
  if (!o.ids_file.empty()) {
    std::istringstream is(read_file_bytes(o.ids_file));
    std::string line;
    while (std::getline(is, line)) {
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      ids.push_back(line.substr(b, line.find_last_not_of(" \t\r") - b + 1));
    }
  }
  if (ids.empty()) throw UsageError("forward needs --ids or --ids-file");
  return ids;
}

inline int cmd_forward(const GlobalOptions& g, const ForwardOptions& o, std::ostream& out) {
  using namespace skynet;
  const std::vector<std::string> ids = collect_ids(o);
  const SiteManifest m = read_manifest(o.manifest);
  const auto site_dir = manifest_dir(o.manifest);

  ModelConfig cfg;
  cfg.seed = g.seed;
  if (!o.model_config.empty()) {
    const auto j = detail::read_json(o.model_config);
    cfg = model_config_from_json(j);
    if (!j.contains("seed")) cfg.seed = g.seed;
  }
  WeightBank bank;
  if (!o.weights.empty()) {
    LoadedWeights loaded = load_weights(o.weights);
    require(o.model_config.empty() || loaded.config == cfg, ErrorKind::invalid_input,
            "--model-config does not match the config stored with --weights");
    cfg = loaded.config;
    bank = std::move(loaded.bank);
  } else {
    cfg.validate();
    bank = generate_weights(cfg);
  }
  if (!o.save_weights.empty()) save_weights(bank, cfg, o.save_weights);

  std::vector<FrameInput> frames;
  std::vector<FrameTarget> targets;
  for (const auto& id : ids) {
    const auto idx = m.find(id);
    require(idx >= 0, ErrorKind::invalid_pairing, "view id '" + id + "' not in the manifest");
    const ViewRecord& v = m.views[static_cast<std::size_t>(idx)];
    const ImageU8 rgb = read_png(site_dir / rgb_path_for(v));
    frames.push_back({v.id, v.modality, to_model_input(rgb, cfg.image_width, cfg.image_height)});
    const DepthMap depth = read_depth(site_dir / v.depth_path);
    targets.push_back({v.id, v.modality, CameraVector9::from_pose(v.pose(), v.intrinsics),
                       resample_depth_nearest(depth, cfg.image_width, cfg.image_height)});
  }

  const ForwardOutput pred = skynet_forward(frames, cfg, bank);
  const LossParts loss = compute_loss(pred, targets, o.alpha);

  std::filesystem::create_directories(g.out_dir / "depth");
  nlohmann::json cams = nlohmann::json::array();
  for (std::size_t f = 0; f < pred.ids.size(); ++f) {
    const auto& c = pred.cameras[f];
    const std::string depth_rel = "depth/" + pred.ids[f] + ".skyd";
    write_depth(g.out_dir / depth_rel, pred.depths[f]);
    cams.push_back({{"id", pred.ids[f]},
                    {"modality", to_string(pred.modalities[f])},
                    {"provenance", to_string(pred.provenance[f])},
                    {"quat_wxyz", {c.q.w, c.q.x, c.q.y, c.q.z}},
                    {"translation_xyz", {c.t.x(), c.t.y(), c.t.z()}},
                    {"fov_xy", {c.fov.x(), c.fov.y()}},
                    {"depth_path", depth_rel}});
  }
  detail::write_json(g.out_dir / "cameras.json",
                     {{"site_id", m.site_id}, {"model", to_json(cfg)}, {"cameras", cams}});
  detail::write_json(g.out_dir / "loss.json", {{"alpha", o.alpha},
                                               {"cam_sat", loss.cam_sat},
                                               {"cam_ground_aerial", loss.cam_ground_aerial},
                                               {"depth", loss.depth},
                                               {"total", loss.total}});

  for (std::size_t f = 0; f < pred.ids.size(); ++f) {
    out << pred.ids[f] << "  " << to_string(pred.modalities[f]) << "  "
        << to_string(pred.provenance[f]) << "\n";
  }
  out << "loss total " << loss.total << " (sat " << loss.cam_sat << ", ground/aerial "
      << loss.cam_ground_aerial << ", depth " << loss.depth << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

inline int cmd_eval(const GlobalOptions& g, const EvalOptions& o, std::ostream& out) {
  if (o.pred.size() != o.gt.size()) {
    throw UsageError("--pred and --gt must be given the same number of times");
  }
  EvalConfig cfg;
  cfg.rot_threshold_deg = o.threshold;
  cfg.trans_threshold_deg = o.threshold;
  cfg.trans_threshold_m = o.threshold_m;
  cfg.rule = parse_bucket_rule(o.bucket_rule);
  cfg.translation = parse_translation_mode(o.translation);
  const ReportStyle style =
      o.style == "ground-satellite" ? ReportStyle::ground_satellite : ReportStyle::per_modality;

  std::vector<MetricReport> reports;
  for (std::size_t k = 0; k < o.pred.size(); ++k) {
    const auto pred = read_pose_set(o.pred[k]);
    const auto gt = read_pose_set(o.gt[k]);
    const AlignedPoses a = align_pose_sets(pred, gt);
    const auto errors = pair_errors(a.pred, a.gt, a.tags, a.ids);
    reports.push_back(rra_rta(errors, cfg));
  }

  nlohmann::json report;
  if (reports.size() == 1) {
    report = to_json(reports.front());
  } else {
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& r : reports) sites.push_back(to_json(r));
    report = {{"sites", sites}, {"aggregate", to_json(aggregate_reports(reports))}};
  }
  std::filesystem::create_directories(g.out_dir);
  detail::write_json(g.out_dir / "report.json", report);

  if (o.json) {
    out << report.dump(2) << "\n";
    return kExitOk;
  }
  for (std::size_t k = 0; k < reports.size(); ++k) {
    if (reports.size() > 1) out << o.pred[k].string() << "\n";
    out << format_report(reports[k], style);
  }
  if (reports.size() > 1) {
    const AggregateReport agg = aggregate_reports(reports);
    out << "mean ± std over " << agg.sites << " sites: RRA " << format_mean_std(agg.rra_avg)
        << ", RTA " << format_mean_std(agg.rta_avg) << ", avg " << format_mean_std(agg.avg) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fetch-tiles
// ---------------------------------------------------------------------------

inline int cmd_fetch_tiles(const GlobalOptions& g, const FetchOptions& o, HttpClient* client,
                           std::ostream& out, std::ostream& err) {
  if (o.grid < 1 || o.grid % 2 == 0) {
    throw UsageError("--grid must be odd and >= 1, got " + std::to_string(o.grid));
  }
  const auto cache = o.cache.empty() ? g.out_dir / "tile_cache" : o.cache;
  const auto output = o.output.empty() ? g.out_dir / "tiles.png" : o.output;

  std::optional<HttplibClient> own;
  HttpClient* http = nullptr;
  if (!o.offline) {
    if (client == nullptr) own.emplace(o.timeout);
    http = client ? client : &*own;
  }
  const StitchResult res =
      stitch_grid(o.lat, o.lon, o.zoom, o.grid, make_cached_fetcher(cache, http, o.endpoint));

  nlohmann::json misses = nlohmann::json::array();
  for (const auto& miss : res.misses) {
    err << "tile " << miss.tile.zoom << "/" << miss.tile.x << "/" << miss.tile.y
        << " missing: " << miss.reason << "\n";
    misses.push_back(nlohmann::json{
        {"z", miss.tile.zoom}, {"x", miss.tile.x}, {"y", miss.tile.y}, {"reason", miss.reason}});
  }
  const auto total = static_cast<std::size_t>(o.grid) * static_cast<std::size_t>(o.grid);
  if (res.misses.size() == total) {
    err << "no tile could be retrieved\n";
    return kExitNetwork;
  }
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  write_png(output, res.image.pixels);
  auto sidecar = output;
  sidecar += ".json";
  detail::write_json(sidecar, {{"center_lat", res.image.center_lat},
                               {"center_lon", res.image.center_lon},
                               {"zoom", res.image.zoom},
                               {"grid", res.image.grid_size},
                               {"misses", misses}});
  out << "stitched " << o.grid << "x" << o.grid << " tiles at zoom " << o.zoom << " -> "
      << output.string() << " (" << res.misses.size() << " missing)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

// args excludes the program name. `client` overrides the HTTP client used by
// fetch-tiles (tests pass a stub).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   HttpClient* client = nullptr) {
  CLI::App app{"skybench: synthetic cross-view sites, curriculum samplers, SkyNet forward, "
               "pose metrics and tile retrieval"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();

  GenSiteOptions gs;
  auto* gen = app.add_subcommand("gen-site", "Generate a synthetic site (manifest, depth, RGB)");
  gen->add_option("--site-id", gs.site_id)->capture_default_str();
  gen->add_option("--ground-n", gs.ground_n, "Ground views")->capture_default_str();
  gen->add_option("--satellite-n", gs.satellite_n, "Satellite views")->capture_default_str();
  gen->add_option("--aerial-frames", gs.aerial_frames, "Frames per band (high medium low)")
      ->expected(3);
  gen->add_option("--ground-altitude", gs.ground_altitude, "Ground camera AGL in m")
      ->capture_default_str();
  gen->add_option("--satellite-altitude", gs.satellite_altitude, "Satellite AGL in m")
      ->capture_default_str();
  gen->add_option("--aerial-band-top", gs.aerial_band_top)->expected(3);
  gen->add_option("--aerial-band-bottom", gs.aerial_band_bottom)->expected(3);
  gen->add_flag("--relax-counts", gs.relax_counts, "Allow ground counts outside [50, 250]");
  gen->add_flag("--no-rgb", gs.no_rgb, "Skip RGB rendering");

  SampleOptions so;
  auto* sample = app.add_subcommand("sample", "Draw a view batch with a curriculum sampler");
  sample->add_option("--manifest", so.manifest, "Site directory or manifest.json")->required();
  sample->add_option("--mode", so.mode)
      ->check(CLI::IsMember({"cacs", "pvs", "composed"}))
      ->capture_default_str();
  sample->add_option("--tau", so.tau, "Curriculum progress")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sample->add_option("--n", so.n, "Views to draw")->capture_default_str();
  sample->add_option("--anchor", so.anchor, "Anchor view id (default: seeded ground view)");
  sample->add_option("--lambda-t", so.lambda_t)->check(CLI::NonNegativeNumber)->capture_default_str();
  sample->add_option("--cache", so.cache, "Distance cache file, created when missing");

  ForwardOptions fo;
  auto* forward = app.add_subcommand("forward", "Run the toy SkyNet forward on a view batch");
  forward->add_option("--manifest", fo.manifest, "Site directory or manifest.json")->required();
  forward->add_option("--ids", fo.ids, "Comma-separated view ids; the first is frame 1")
      ->delimiter(',');
  forward->add_option("--ids-file", fo.ids_file, "File with one view id per line");
  forward->add_option("--model-config", fo.model_config, "Model config JSON");
  forward->add_option("--weights", fo.weights, "Weight blob written by --save-weights");
  forward->add_option("--save-weights", fo.save_weights, "Write the weights used");
  forward->add_option("--alpha", fo.alpha, "Ground/aerial camera loss weight")->capture_default_str();

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Score predicted poses against ground truth");
  eval->add_option("--pred", eo.pred, "cameras.json or manifest; repeat for several sites")
      ->required();
  eval->add_option("--gt", eo.gt, "Ground-truth site directory or manifest")->required();
  eval->add_option("--threshold", eo.threshold, "Angular threshold in degrees")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--threshold-m", eo.threshold_m, "Metric translation threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval->add_option("--bucket-rule", eo.bucket_rule)
      ->check(CLI::IsMember({"pair-endpoints", "image-anchored"}))
      ->capture_default_str();
  eval->add_option("--translation-mode", eo.translation)
      ->check(CLI::IsMember({"angular", "metric"}))
      ->capture_default_str();
  eval->add_option("--style", eo.style)
      ->check(CLI::IsMember({"per-modality", "ground-satellite"}))
      ->capture_default_str();
  eval->add_flag("--json", eo.json, "Print the JSON report instead of the table");

  FetchOptions fto;
  auto* fetch = app.add_subcommand("fetch-tiles", "Download and stitch a grid of aerial tiles");
  fetch->add_option("--lat", fto.lat)->required()->check(CLI::Range(-90.0, 90.0));
  fetch->add_option("--lon", fto.lon)->required()->check(CLI::Range(-180.0, 180.0));
  fetch->add_option("--zoom", fto.zoom)->check(CLI::Range(1, 23))->capture_default_str();
  fetch->add_option("--grid", fto.grid, "Odd grid width in tiles")->capture_default_str();
  fetch->add_option("--cache", fto.cache, "Tile cache directory (default <out-dir>/tile_cache)");
  fetch->add_option("--endpoint", fto.endpoint)->capture_default_str();
  fetch->add_option("--output", fto.output, "Stitched PNG (default <out-dir>/tiles.png)");
  fetch->add_option("--timeout", fto.timeout, "Per-request timeout in seconds")->capture_default_str();
  fetch->add_flag("--offline", fto.offline, "Serve from the cache only");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_site(g, gs, out);
    if (*sample) return cmd_sample(g, so, out, err);
    if (*forward) return cmd_forward(g, fo, out);
    if (*eval) return cmd_eval(g, eo, out);
    if (*fetch) return cmd_fetch_tiles(g, fto, client, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace skybench::cli
