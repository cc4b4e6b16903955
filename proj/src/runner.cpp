#include "vtrack/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "vtrack/errors.hpp"
#include "vtrack/evaluation.hpp"
#include "vtrack/image.hpp"
#include "vtrack/rng.hpp"
#include "vtrack/scenario_config.hpp"

#ifndef VTRACK_VERSION
#define VTRACK_VERSION "0.0.0"
#endif

namespace vtrack {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kFrameNoiseStream = 1'000'003;
constexpr int kDefaultBenchFrames = 100;
constexpr double kCm = 100.0;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json blob_json(const Blob& b) { return {{"x", b.x}, {"y", b.y}, {"sigma", b.sigma}, {"response", b.response}}; }

json blobs_json(const std::vector<Blob>& blobs) {
  json out = json::array();
  for (const auto& b : blobs) out.push_back(blob_json(b));
  return out;
}

RunConfig load_config(const RunRequest& req) {
  if (req.scenario.empty()) throw ConfigError("--scenario is required for " + std::string(to_string(req.command)));
  auto cfg = load_scenario(req.scenario, req.overrides);
  if (req.seed) cfg.scenario.seed = *req.seed;
  return cfg;
}

std::string mode_label(const MotionModelSpec<double>& m) {
  std::string label(to_string(m.kind));
  if (m.kind == MotionKind::kCoordinatedTurn) label += (m.turn_rate >= 0 ? "+" : "") + num(m.turn_rate);
  return label;
}

std::vector<std::string> mode_labels(const TrackerConfig& cfg, FilterKind kind) {
  if (kind == FilterKind::kKalman) return {"cv"};
  std::vector<std::string> out;
  for (const auto& m : cfg.imm_modes) out.push_back(mode_label(m));
  return out;
}

// Run manifest: everything needed to reproduce the run, plus timings.
class Manifest {
 public:
  Manifest(const RunRequest& req, json config, std::uint64_t seed) {
    doc_ = {{"tool", "vtrack"},
            {"version", VTRACK_VERSION},
            {"command", std::string(to_string(req.command))},
            {"command_line", req.command_line},
            {"scenario", req.scenario},
            {"overrides", req.overrides},
            {"seed", seed},
            {"config_sha256", sha256_hex(config.dump())},
            {"config", std::move(config)},
            {"build",
             {{"compiler", __VERSION__},
              {"cxx_standard", static_cast<long>(__cplusplus)},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)}}}};
  }

  json& operator[](const char* key) { return doc_[key]; }

  void finish(ArtifactSet& artifacts, const json& wall_times) {
    json hashes = json::object();
    for (const auto& [path, content] : artifacts.files()) hashes[path] = sha256_hex(content);
    doc_["artifacts"] = hashes;
    doc_["wall_time_ms"] = wall_times;
    artifacts.add("run_manifest.json", dump(doc_));
  }

 private:
  json doc_;
};

std::string truth_csv(const std::vector<GroundTruthSample>& truth) {
  std::string out = "t,x,y,vx,vy\n";
  for (const auto& s : truth) {
    out += num(s.t) + "," + num(s.position.x()) + "," + num(s.position.y()) + "," + num(s.velocity.x()) + "," +
           num(s.velocity.y()) + "\n";
  }
  return out;
}

std::string measurements_csv(const std::vector<GroundTruthSample>& truth,
                             const std::vector<std::optional<Measurement<double>>>& z) {
  std::string out = "t,x,y,detected\n";
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (z[k]) {
      out += num(truth[k].t) + "," + num(z[k]->z.x()) + "," + num(z[k]->z.y()) + ",1\n";
    } else {
      out += num(truth[k].t) + ",,,0\n";
    }
  }
  return out;
}

std::string frame_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frames/frame_%05zu.pgm", k);
  return buf;
}

// Frame k of the scenario camera, with the pixel-noise stream advanced in
// frame order.
GrayImage render_frame(const RunConfig& cfg, const GroundTruthSample& truth, Rng& rng) {
  GrayImage img = synthesize_frame(truth, cfg.scenario.camera, cfg.scenario.appearance);
  if (cfg.scenario.appearance.pixel_noise_std > 0) img = add_pixel_noise(img, cfg.scenario.appearance.pixel_noise_std, rng);
  return img;
}

RunResult simulate(const RunRequest& req) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(req);
  const auto seed = cfg.scenario.seed;
  const auto truth = simulate_trajectory(cfg.scenario);
  const auto z = sense_all(truth, cfg.scenario.sensor, measurement_seed(seed));

  RunResult result;
  result.artifacts.add("truth.csv", truth_csv(truth));
  result.artifacts.add("measurements.csv", measurements_csv(truth, z));
  if (req.write_frames) {
    Rng rng(derive_seed(seed, kFrameNoiseStream));
    for (std::size_t k = 0; k < truth.size(); ++k) {
      result.artifacts.add(frame_name(k), encode_pgm(render_frame(cfg, truth[k], rng)));
    }
  }
  const auto dropped = std::count_if(z.begin(), z.end(), [](const auto& m) { return !m.has_value(); });
  Manifest manifest(req, resolved_json(cfg), seed);
  manifest["samples"] = truth.size();
  manifest.finish(result.artifacts, {{"total", ms_since(t0)}});
  result.summary = "simulate: " + std::to_string(truth.size()) + " samples over " + num(cfg.scenario.duration()) +
                   " s, " + std::to_string(dropped) + " dropped measurements\n";
  return result;
}

// Overrides for the scenario-free detect modes; only detector.* keys apply.
DetectorConfig detector_with_overrides(DetectorConfig dc, const std::vector<std::string>& overrides) {
  const json doc = apply_overrides(json::object(), overrides);
  for (const auto& [key, _] : doc.items()) {
    if (key != "detector") throw ConfigError(key + ": only detector.* overrides apply without a scenario");
  }
  parse_detector(doc, dc);
  dc.validate();
  return dc;
}

RunResult detect_corpus(const RunRequest& req) {
  const auto t0 = Clock::now();
  const auto kind = *req.corpus;
  const std::uint64_t seed = req.seed.value_or(1);
  const auto dc = detector_with_overrides(corpus_detector_config(), req.overrides);
  const int frames = req.frames > 0 ? std::min(req.frames, kCorpusFrames) : kCorpusFrames;
  const auto corpus = run_corpus(kind, seed, dc, frames);

  std::string lines;
  json sequences = json::array();
  for (const auto& seq : corpus.sequences) {
    for (std::size_t f = 0; f < seq.detections.size(); ++f) {
      const auto& blobs = seq.detections[f];
      const auto& px = seq.truth_px[f];
      const bool hit = !blobs.empty() &&
                       std::hypot(blobs.front().x - px.x(), blobs.front().y - px.y()) <= kCorpusSuccessTolerance;
      json line = {{"sequence", seq.sequence}, {"frame", f},           {"truth_px", {px.x(), px.y()}},
                   {"hit", hit},               {"blobs", blobs_json(blobs)}};
      lines += line.dump() + "\n";
    }
    sequences.push_back({{"sequence", seq.sequence},
                         {"frames", seq.detections.size()},
                         {"hits", seq.hits},
                         {"max_offset_px", std::isfinite(seq.max_offset_px) ? json(seq.max_offset_px) : json(nullptr)},
                         {"success", seq.success}});
  }
  const int ok = corpus.successes();
  const int total = static_cast<int>(corpus.sequences.size());
  json summary = {{"corpus", std::string(to_string(kind))},
                  {"seed", seed},
                  {"tolerance_px", kCorpusSuccessTolerance},
                  {"sequences", sequences},
                  {"success", ok},
                  {"failure", total - ok}};

  RunResult result;
  result.artifacts.add("detections.jsonl", lines);
  result.artifacts.add("detection_summary.json", dump(summary));
  json config = {{"corpus", std::string(to_string(kind))}, {"frames", frames}, {"detector", detector_json(dc)}};
  Manifest manifest(req, config, seed);
  manifest.finish(result.artifacts, {{"total", ms_since(t0)}});
  result.summary = "detect: corpus " + std::string(to_string(kind)) + ", success " + std::to_string(ok) +
                   ", failure " + std::to_string(total - ok) + "\n";
  return result;
}

RunResult detect_image(const RunRequest& req) {
  const auto t0 = Clock::now();
  const auto dc = detector_with_overrides(DetectorConfig{}, req.overrides);
  const auto image = read_pgm(*req.image);
  const auto blobs = detect(image, dc);

  RunResult result;
  json line = {{"image", req.image->string()}, {"blobs", blobs_json(blobs)}};
  result.artifacts.add("detections.jsonl", line.dump() + "\n");
  Manifest manifest(req, {{"image", req.image->string()}, {"detector", detector_json(dc)}}, req.seed.value_or(0));
  manifest.finish(result.artifacts, {{"total", ms_since(t0)}});
  result.summary = "detect: " + std::to_string(blobs.size()) + " blobs in " + req.image->string() + "\n";
  return result;
}

RunResult detect_scenario(const RunRequest& req) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(req);
  const auto seed = cfg.scenario.seed;
  const auto truth = simulate_trajectory(cfg.scenario);
  const std::size_t frames =
      req.frames > 0 ? std::min(truth.size(), static_cast<std::size_t>(req.frames)) : truth.size();
  Rng rng(derive_seed(seed, kFrameNoiseStream));
  std::string lines;
  int found = 0;
  for (std::size_t k = 0; k < frames; ++k) {
    const auto img = render_frame(cfg, truth[k], rng);
    const auto blobs = detect(img, cfg.detector);
    json line = {{"frame", k}, {"t", truth[k].t}, {"blobs", blobs_json(blobs)}};
    try {
      const auto px = project(Eigen::Vector3d(truth[k].position.x(), truth[k].position.y(), 0.0), cfg.scenario.camera.pose,
                              cfg.scenario.camera.intrinsics);
      line["truth_px"] = {px.pixel.x(), px.pixel.y()};
    } catch (const BehindCameraError&) {
      line["truth_px"] = nullptr;
    }
    found += blobs.empty() ? 0 : 1;
    lines += line.dump() + "\n";
  }
  RunResult result;
  result.artifacts.add("detections.jsonl", lines);
  json config = resolved_json(cfg);
  config["frames"] = frames;
  Manifest manifest(req, config, seed);
  manifest.finish(result.artifacts, {{"total", ms_since(t0)}});
  result.summary = "detect: " + std::to_string(frames) + " frames, " + std::to_string(found) + " with detections\n";
  return result;
}

RunResult detect_command(const RunRequest& req) {
  const int sources = (req.corpus ? 1 : 0) + (req.image ? 1 : 0) + (req.scenario.empty() ? 0 : 1);
  if (sources != 1) throw ConfigError("detect needs exactly one of --corpus, --image or --scenario");
  if (req.corpus) return detect_corpus(req);
  if (req.image) return detect_image(req);
  return detect_scenario(req);
}

std::string trajectory_csv(const TrackingRun& run, const std::vector<GroundTruthSample>& truth,
                           const std::vector<std::string>& labels) {
  std::string out = "t,x_est,y_est,vx_est,vy_est,x_true,y_true";
  for (const auto& l : labels) out += ",mu_" + l;
  out += "\n";
  // History points carry their own time; truth is looked up on the dt grid.
  std::size_t k = 0;
  for (const auto& p : run.history) {
    while (k < truth.size() && truth[k].t < p.t - 1e-9) ++k;
    if (k == truth.size()) break;
    const auto& m = p.fused.mean;
    out += num(p.t) + "," + num(m(0)) + "," + num(m(2)) + "," + num(m(1)) + "," + num(m(3)) + "," +
           num(truth[k].position.x()) + "," + num(truth[k].position.y());
    for (Eigen::Index i = 0; i < p.mode_probabilities.size(); ++i) out += "," + num(p.mode_probabilities(i));
    out += "\n";
  }
  return out;
}

json metrics_json(const TrackingRun& run) {
  const auto& m = run.metrics;
  return {{"max_error_m", m.max_error},   {"rmse_m", m.rmse},
          {"max_error_cm", m.max_error * kCm}, {"rmse_cm", m.rmse * kCm},
          {"miss_count", m.miss_count},   {"tracks_started", run.tracks_started},
          {"tracks_dropped", run.tracks_dropped}, {"steps", run.history.size()}};
}

// Frame-driven tracking: every truth sample is rendered and passed through
// the detector before the filter sees it.
TrackingRun run_frame_tracker(const RunConfig& cfg, const std::vector<GroundTruthSample>& truth, FilterKind kind,
                              std::uint64_t seed) {
  const auto& cam = cfg.scenario.camera;
  const double depth = cam.pose.translation().z();
  Rng rng(derive_seed(seed, kFrameNoiseStream));
  TrackingRun run;
  std::optional<Track> track;
  double step_ms = 0;
  int steps = 0;
  for (const auto& gt : truth) {
    const auto frame = render_frame(cfg, gt, rng);
    const auto t0 = Clock::now();
    if (!track) {
      const auto z = frame_measurement(frame, cam, depth, cfg.detector, gt.t);
      if (!z) continue;
      track = start_track(run.tracks_started++, *z, cfg.tracker, kind);
      run.history.push_back(track->history.back());
      continue;
    }
    auto outcome = pipeline_step(*track, frame, cam, depth, cfg.detector, gt.t - track->time, cfg.tracker);
    step_ms += ms_since(t0);
    ++steps;
    run.history.push_back(outcome.track.history.back());
    run.reports.push_back(outcome.report);
    if (outcome.report.dropped) {
      ++run.tracks_dropped;
      track.reset();
    } else {
      track = std::move(outcome.track);
    }
  }
  run.metrics = compute_metrics(run.history, truth);
  run.metrics.mean_step_time = steps > 0 ? step_ms / steps : 0.0;
  return run;
}

RunResult track_command(const RunRequest& req) {
  const auto t0 = Clock::now();
  if (req.filters.empty()) throw ConfigError("--filters: at least one filter is required");
  const auto cfg = load_config(req);
  cfg.tracker.validate();
  const auto seed = cfg.scenario.seed;
  const auto truth = simulate_trajectory(cfg.scenario);
  const auto z = sense_all(truth, cfg.scenario.sensor, measurement_seed(seed));

  RunResult result;
  json filters = json::object();
  json timing = json::object();
  std::vector<PlotSeries> series;
  {
    PlotSeries gt{"truth", "#222222", {}};
    for (const auto& s : truth) gt.points.push_back(s.position);
    series.push_back(std::move(gt));
  }
  const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c"};
  std::string summary;
  for (std::size_t i = 0; i < req.filters.size(); ++i) {
    const auto kind = req.filters[i];
    const std::string name(to_string(kind));
    if (filters.contains(name)) throw ConfigError("--filters: '" + name + "' listed twice");
    const auto run = req.source == TrackSource::kFrames ? run_frame_tracker(cfg, truth, kind, seed)
                                                        : run_tracker(truth, z, cfg.tracker, kind);
    filters[name] = metrics_json(run);
    timing[name] = {{"mean_step_time_ms", run.metrics.mean_step_time}};
    result.artifacts.add("trajectory_" + name + ".csv", trajectory_csv(run, truth, mode_labels(cfg.tracker, kind)));
    PlotSeries est{name, colors[i % 3], {}};
    for (const auto& p : run.history) est.points.emplace_back(p.fused.mean(0), p.fused.mean(2));
    series.push_back(std::move(est));
    summary += "track: " + name + " max error " + num(run.metrics.max_error * kCm) + " cm, rmse " +
               num(run.metrics.rmse * kCm) + " cm, misses " + std::to_string(run.metrics.miss_count) + "\n";
  }
  json metrics = {{"scenario", cfg.scenario.name},
                  {"seed", seed},
                  {"source", req.source == TrackSource::kFrames ? "frames" : "measurements"},
                  {"filters", filters}};
  if (filters.contains("kf") && filters.contains("imm")) {
    metrics["imm_max_error_reduction_cm"] =
        filters["kf"]["max_error_cm"].get<double>() - filters["imm"]["max_error_cm"].get<double>();
  }
  result.artifacts.add("metrics.json", dump(metrics));
  result.artifacts.add("plot.svg", render_svg(series, cfg.scenario.name + " (seed " + std::to_string(seed) + ")"));
  Manifest manifest(req, resolved_json(cfg), seed);
  manifest["timing"] = timing;
  manifest.finish(result.artifacts, {{"total", ms_since(t0)}});
  result.summary = summary;
  return result;
}

json errors_cm(const std::vector<double>& metres) {
  json out = json::array();
  for (double v : metres) out.push_back(v * kCm);
  return out;
}

RunResult bench_command(const RunRequest& req) {
  const auto t0 = Clock::now();
  if (req.runs < 1) throw ConfigError("--runs: must be >= 1");
  const auto cfg = load_config(req);
  cfg.tracker.validate();
  const auto seed = cfg.scenario.seed;
  const auto mc = monte_carlo_compare(cfg, req.runs, seed);
  const double mc_ms = ms_since(t0);

  const auto t1 = Clock::now();
  const int frames = req.frames > 0 ? req.frames : kDefaultBenchFrames;
  const auto tp = measure_throughput(cfg, frames, derive_seed(seed, kFrameNoiseStream));
  const double tp_ms = ms_since(t1);

  json metrics = {{"scenario", cfg.scenario.name},
                  {"seed", seed},
                  {"runs", mc.runs()},
                  {"kf", {{"median_max_error_cm", mc.kf_median * kCm}, {"max_error_cm", errors_cm(mc.kf_max_errors)},
                          {"rmse_cm", errors_cm(mc.kf_rmse)}}},
                  {"imm", {{"median_max_error_cm", mc.imm_median * kCm}, {"max_error_cm", errors_cm(mc.imm_max_errors)},
                           {"rmse_cm", errors_cm(mc.imm_rmse)}}},
                  {"median_ratio", mc.ratio()},
                  {"imm_wins", mc.imm_wins},
                  {"imm_max_error_reduction_cm", (mc.kf_median - mc.imm_median) * kCm}};
  RunResult result;
  result.artifacts.add("metrics.json", dump(metrics));
  Manifest manifest(req, resolved_json(cfg), seed);
  manifest["throughput"] = {{"frames", tp.frames},
                            {"width", tp.width},
                            {"height", tp.height},
                            {"pipeline_ms_per_frame", tp.pipeline_ms},
                            {"full_frame_detect_ms", tp.full_frame_detect_ms},
                            {"full_frame_samples", tp.full_frame_samples},
                            {"target_ms_per_frame", 22.0},
                            {"meets_target", tp.pipeline_ms <= 22.0}};
  manifest.finish(result.artifacts, {{"total", ms_since(t0)}, {"monte_carlo", mc_ms}, {"throughput", tp_ms}});
  result.summary = "bench: median max error kf " + num(mc.kf_median * kCm) + " cm, imm " + num(mc.imm_median * kCm) +
                   " cm, ratio " + num(mc.ratio()) + ", imm wins " + std::to_string(mc.imm_wins) + "/" +
                   std::to_string(mc.runs()) + "\n" + "bench: pipeline " + num(tp.pipeline_ms) +
                   " ms/frame (target 22), full-frame detect " + num(tp.full_frame_detect_ms) + " ms\n";
  return result;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::kSimulate: return "simulate";
    case Command::kDetect: return "detect";
    case Command::kTrack: return "track";
    case Command::kBench: return "bench";
  }
  return "unknown";
}

std::optional<Command> parse_command(std::string_view name) {
  for (auto c : {Command::kSimulate, Command::kDetect, Command::kTrack, Command::kBench}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::uint64_t measurement_seed(std::uint64_t seed, int index) {
  return derive_seed(seed, static_cast<std::uint64_t>(index));
}

RunResult execute(const RunRequest& request) {
  switch (request.command) {
    case Command::kSimulate: return simulate(request);
    case Command::kDetect: return detect_command(request);
    case Command::kTrack: return track_command(request);
    case Command::kBench: return bench_command(request);
  }
  throw ConfigError("unknown command");
}

int run(const RunRequest& request, std::ostream& out, std::ostream& err) {
  try {
    if (request.output_dir.empty()) throw ConfigError("--out is required");
    auto result = execute(request);
    result.artifacts.commit(request.output_dir);
    out << result.summary;
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "vtrack: config error: " << one_line(e.what()) << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "vtrack: i/o error: " << one_line(e.what()) << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "vtrack: config error: " << one_line(e.what()) << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "vtrack: numeric error: " << one_line(e.what()) << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "vtrack: error: " << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  constexpr double kW = 800, kH = 600, kPad = 50;
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      if (!p.allFinite()) continue;
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  if (!lo.allFinite()) lo = hi = Eigen::Vector2d::Zero();
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-9});
  const double scale = std::min((kW - 2 * kPad) / span, (kH - 2 * kPad) / span);
  const auto sx = [&](double x) { return kPad + (x - lo.x()) * scale; };
  const auto sy = [&](double y) { return kH - kPad - (y - lo.y()) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << " " << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kPad << "\" y=\"30\" font-family=\"sans-serif\" font-size=\"16\">" << title
      << " (x/y in m)</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << (i == 0 ? 3 : 1.5)
        << "\" points=\"";
    for (const auto& p : s.points) {
      if (p.allFinite()) svg << num(sx(p.x())) << "," << num(sy(p.y())) << " ";
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kW - 150 << "\" y=\"" << 30 + 20 * static_cast<int>(i)
        << "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vtrack
