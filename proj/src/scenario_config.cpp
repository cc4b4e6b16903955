#include "vtrack/scenario_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "vtrack/errors.hpp"

namespace vtrack {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Typed, strict view of one JSON object.
class Section {
 public:
  Section(const json& obj, std::string path, std::set<std::string> allowed)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [key, _] : obj_.items()) {
      if (!allowed.contains(key)) throw ConfigError(join(path_, key) + ": unknown key");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }
  const json& at(const std::string& key) const { return obj_.at(key); }
  std::string key_path(const std::string& key) const { return join(path_, key); }

  double number(const std::string& key) const {
    if (!has(key)) throw ConfigError(key_path(key) + ": required number is missing");
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key_path(key) + ": expected a finite number");
    return d;
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
    return v.get<long long>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(key_path(key) + ": expected a non-negative integer");
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
    return v.get<std::string>();
  }

 private:
  const json& obj_;
  std::string path_;
};

const json& empty_object() {
  static const json kEmpty = json::object();
  return kEmpty;
}

const json& section_or_empty(const json& doc, const char* key) {
  return doc.contains(key) && !doc.at(key).is_null() ? doc.at(key) : empty_object();
}

Eigen::MatrixXd read_matrix(const json& v, const std::string& path, int rows, int cols) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    throw ConfigError(path + ": expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = v.at(static_cast<std::size_t>(r));
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ConfigError(rp + ": expected " + std::to_string(cols) + " numbers");
    }
    for (int c = 0; c < cols; ++c) {
      const auto& x = row.at(static_cast<std::size_t>(c));
      if (!x.is_number()) throw ConfigError(rp + "[" + std::to_string(c) + "]: expected a number");
      m(r, c) = x.get<double>();
    }
  }
  return m;
}

Eigen::VectorXd read_vector(const json& v, const std::string& path, int size) {
  if (!v.is_array() || static_cast<int>(v.size()) != size) {
    throw ConfigError(path + ": expected " + std::to_string(size) + " numbers");
  }
  Eigen::VectorXd out(size);
  for (int i = 0; i < size; ++i) {
    const auto& x = v.at(static_cast<std::size_t>(i));
    if (!x.is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
    out(i) = x.get<double>();
  }
  return out;
}

void parse_scenario_section(const json& doc, Scenario& sc) {
  if (!doc.contains("scenario")) throw ConfigError("scenario: required section is missing");
  Section s(doc.at("scenario"), "scenario", {"name", "dt", "seed"});
  sc.name = s.string("name", "custom");
  sc.dt = s.number("dt");
  if (!(sc.dt > 0)) throw ConfigError("scenario.dt: must be > 0");
  sc.seed = s.seed("seed", 1);
}

void parse_segments(const json& doc, Scenario& sc) {
  if (!doc.contains("segments")) throw ConfigError("segments: required list is missing");
  const auto& list = doc.at("segments");
  if (!list.is_array() || list.empty()) throw ConfigError("segments: expected a non-empty list");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "segments[" + std::to_string(i) + "]";
    Section s(list.at(i), path, {"kind", "duration", "speed", "accel", "turn_rate"});
    SegmentSpec seg;
    const auto kind = parse_segment_kind(s.string("kind", ""));
    if (!kind) throw ConfigError(path + ".kind: expected one of cruise, turn, accelerate");
    seg.kind = *kind;
    seg.duration = s.number("duration");
    if (s.has("speed")) seg.speed = s.number("speed");
    if (seg.kind == SegmentKind::kAccelerate) seg.accel = s.number("accel");
    else if (s.has("accel")) throw ConfigError(path + ".accel: only accelerate segments take accel");
    if (seg.kind == SegmentKind::kTurn) seg.turn_rate = s.number("turn_rate");
    else if (s.has("turn_rate")) throw ConfigError(path + ".turn_rate: only turn segments take turn_rate");
    sc.segments.push_back(seg);
  }
}

void parse_sensor(const json& doc, Scenario& sc) {
  Section s(section_or_empty(doc, "sensor"), "sensor", {"position_noise_std", "dropout_prob"});
  sc.sensor.position_noise_std = s.number("position_noise_std", sc.sensor.position_noise_std);
  sc.sensor.dropout_prob = s.number("dropout_prob", sc.sensor.dropout_prob);
}

void parse_camera(const json& doc, Scenario& sc) {
  Section s(section_or_empty(doc, "camera"), "camera", {"fx", "fy", "cx", "cy", "width", "height", "pose"});
  auto& cam = sc.camera;
  cam.intrinsics.fx = s.number("fx", cam.intrinsics.fx);
  cam.intrinsics.fy = s.number("fy", cam.intrinsics.fy);
  cam.intrinsics.cx = s.number("cx", cam.intrinsics.cx);
  cam.intrinsics.cy = s.number("cy", cam.intrinsics.cy);
  cam.width = static_cast<int>(s.integer("width", cam.width));
  cam.height = static_cast<int>(s.integer("height", cam.height));
  if (s.has("pose")) {
    Section p(s.at("pose"), "camera.pose", {"rotation", "translation"});
    const Eigen::Matrix3d r = p.has("rotation") ? Eigen::Matrix3d(read_matrix(p.at("rotation"), "camera.pose.rotation", 3, 3))
                                                : cam.pose.rotation();
    const Eigen::Vector3d t = p.has("translation")
                                  ? Eigen::Vector3d(read_vector(p.at("translation"), "camera.pose.translation", 3))
                                  : cam.pose.translation();
    try {
      cam.pose = RigidPose<double>(r, t);
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("camera.pose.rotation: ") + e.what());
    }
  }
}

void parse_appearance(const json& doc, Scenario& sc) {
  Section s(section_or_empty(doc, "appearance"), "appearance",
            {"shape", "blob_sigma_px", "square_side_px", "rotation_deg", "gain", "background", "pixel_noise_std"});
  auto& a = sc.appearance;
  const auto shape = s.string("shape", a.shape == TargetShape::kSquare ? "square" : "gaussian");
  if (shape == "gaussian") a.shape = TargetShape::kGaussian;
  else if (shape == "square") a.shape = TargetShape::kSquare;
  else throw ConfigError("appearance.shape: expected gaussian or square");
  a.blob_sigma_px = s.number("blob_sigma_px", a.blob_sigma_px);
  a.square_side_px = s.number("square_side_px", a.square_side_px);
  a.rotation_deg = s.number("rotation_deg", a.rotation_deg);
  a.gain = s.number("gain", a.gain);
  a.background = s.number("background", a.background);
  a.pixel_noise_std = s.number("pixel_noise_std", a.pixel_noise_std);
  if (!(a.blob_sigma_px > 0)) throw ConfigError("appearance.blob_sigma_px: must be > 0");
  if (!(a.square_side_px > 0)) throw ConfigError("appearance.square_side_px: must be > 0");
  if (!(a.pixel_noise_std >= 0)) throw ConfigError("appearance.pixel_noise_std: must be >= 0");
}

void parse_imm(const json& doc, TrackerConfig& tc) {
  Section s(section_or_empty(doc, "imm"), "imm", {"modes", "pi", "initial_probs", "missing_fill", "padding_variance", "omega"});
  tc.imm_modes = TrackerConfig::default_imm_modes(s.number("omega", 0.5));
  if (s.has("modes")) {
    const auto& list = s.at("modes");
    if (!list.is_array() || list.empty()) throw ConfigError("imm.modes: expected a non-empty list");
    tc.imm_modes.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "imm.modes[" + std::to_string(i) + "]";
      Section m(list.at(i), path, {"kind", "q", "omega"});
      const auto kind = parse_motion_kind(m.string("kind", ""));
      if (!kind) throw ConfigError(path + ".kind: expected one of cv, ca, ct");
      MotionModelSpec<double> spec;
      spec.kind = *kind;
      spec.q = m.number("q", 1.0);
      if (!(spec.q >= 0)) throw ConfigError(path + ".q: must be >= 0");
      if (*kind == MotionKind::kCoordinatedTurn) {
        spec.turn_rate = m.number("omega");
        if (spec.turn_rate == 0) throw ConfigError(path + ".omega: must be nonzero (use cv for straight motion)");
      } else if (m.has("omega")) {
        throw ConfigError(path + ".omega: only ct modes take omega");
      }
      tc.imm_modes.push_back(spec);
    }
  }
  const int m = static_cast<int>(tc.imm_modes.size());
  tc.imm_transition = s.has("pi") ? read_matrix(s.at("pi"), "imm.pi", m, m) : uniform_switching<double>(m, 0.95);
  for (int r = 0; r < m; ++r) {
    if ((tc.imm_transition.row(r).array() < 0).any() || std::abs(tc.imm_transition.row(r).sum() - 1.0) > 1e-12) {
      throw ConfigError("imm.pi[" + std::to_string(r) + "]: row must be non-negative and sum to 1");
    }
  }
  tc.imm_initial_probabilities = s.has("initial_probs") ? read_vector(s.at("initial_probs"), "imm.initial_probs", m)
                                                        : Eigen::VectorXd::Constant(m, 1.0 / m);
  if ((tc.imm_initial_probabilities.array() < 0).any() || std::abs(tc.imm_initial_probabilities.sum() - 1.0) > 1e-9) {
    throw ConfigError("imm.initial_probs: must be non-negative and sum to 1");
  }
  const auto fill = s.string("missing_fill", "own");
  if (fill == "own") {
    tc.missing_fill = MissingFill::kOwnEstimate;
  } else if (fill == "padding") {
    tc.missing_fill = MissingFill::kPadding;
  } else {
    throw ConfigError("imm.missing_fill: expected \"own\" or \"padding\"");
  }
  tc.padding_variance = s.number("padding_variance", tc.padding_variance);
  if (!(tc.padding_variance > 0)) throw ConfigError("imm.padding_variance: must be > 0");
}

void parse_tracker(const json& doc, const Scenario& sc, TrackerConfig& tc) {
  Section s(section_or_empty(doc, "tracker"), "tracker",
            {"gate_threshold", "max_misses", "measurement_std", "initial_velocity_std", "initial_accel_std", "kf_q",
             "window_px", "tentative_updates"});
  tc.gate_threshold = s.number("gate_threshold", tc.gate_threshold);
  tc.max_misses = static_cast<int>(s.integer("max_misses", tc.max_misses));
  tc.measurement_std = s.number("measurement_std", std::max(sc.sensor.position_noise_std, 1e-4));
  tc.initial_velocity_std = s.number("initial_velocity_std", tc.initial_velocity_std);
  tc.initial_accel_std = s.number("initial_accel_std", tc.initial_accel_std);
  tc.kf_q = s.number("kf_q", tc.kf_q);
  tc.window_px = static_cast<int>(s.integer("window_px", tc.window_px));
  tc.tentative_updates = static_cast<int>(s.integer("tentative_updates", tc.tentative_updates));
  if (tc.tentative_updates < 1) throw ConfigError("tracker.tentative_updates: must be >= 1");
  if (tc.window_px < 0) throw ConfigError("tracker.window_px: must be >= 0");
  if (!(tc.gate_threshold > 0)) throw ConfigError("tracker.gate_threshold: must be > 0");
  if (tc.max_misses < 1) throw ConfigError("tracker.max_misses: must be >= 1");
  if (!(tc.measurement_std > 0)) throw ConfigError("tracker.measurement_std: must be > 0");
  if (!(tc.kf_q >= 0)) throw ConfigError("tracker.kf_q: must be >= 0");
}

}  // namespace

void parse_detector(const json& doc, DetectorConfig& dc) {
  Section s(section_or_empty(doc, "detector"), "detector",
            {"sigma_min", "sigma_max", "levels_per_octave", "response_threshold", "absolute_floor", "max_blobs"});
  dc.sigma_min = s.number("sigma_min", dc.sigma_min);
  dc.sigma_max = s.number("sigma_max", dc.sigma_max);
  dc.levels_per_octave = static_cast<int>(s.integer("levels_per_octave", dc.levels_per_octave));
  dc.response_threshold = s.number("response_threshold", dc.response_threshold);
  dc.absolute_floor = s.number("absolute_floor", dc.absolute_floor);
  dc.max_blobs = static_cast<int>(s.integer("max_blobs", dc.max_blobs));
  try {
    dc.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("detector: ") + e.what());
  }
}

namespace {

json segment_json(const SegmentSpec& s) {
  json j = {{"kind", to_string(s.kind)}, {"duration", s.duration}};
  if (s.speed) j["speed"] = *s.speed;
  if (s.kind == SegmentKind::kAccelerate) j["accel"] = s.accel;
  if (s.kind == SegmentKind::kTurn) j["turn_rate"] = s.turn_rate;
  return j;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

RunConfig parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario document must be a JSON object");
  Section top(doc, "",
              {"scenario", "segments", "sensor", "camera", "appearance", "imm", "tracker", "detector"});
  RunConfig cfg;
  cfg.document = doc;
  parse_scenario_section(doc, cfg.scenario);
  parse_segments(doc, cfg.scenario);
  parse_sensor(doc, cfg.scenario);
  parse_camera(doc, cfg.scenario);
  parse_appearance(doc, cfg.scenario);
  parse_imm(doc, cfg.tracker);
  parse_tracker(doc, cfg.scenario, cfg.tracker);
  parse_detector(doc, cfg.detector);
  cfg.scenario.validate();
  return cfg;
}

json apply_overrides(json doc, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + ov + ": expected key=value");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].empty()) throw ConfigError("--set " + key + ": empty path component");
      if (node->is_array()) {
        std::size_t index = 0;
        const auto [end, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), index);
        if (ec != std::errc() || end != parts[i].data() + parts[i].size() || index >= node->size()) {
          throw ConfigError("--set " + key + ": '" + parts[i] + "' is not a valid index");
        }
        node = &(*node)[index];
        if (i + 1 == parts.size()) *node = value;
        continue;
      }
      if (!node->is_object()) throw ConfigError("--set " + key + ": '" + parts[i] + "' is not inside an object");
      if (i + 1 == parts.size()) {
        (*node)[parts[i]] = value;
      } else {
        if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
        node = &(*node)[parts[i]];
      }
    }
  }
  return doc;
}

std::vector<std::string> preset_names() { return {"moving-platform-turn", "moving-pillar"}; }

bool is_preset(const std::string& name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

json preset_document(const std::string& name) {
  // Nadir camera above the middle of the path.
  const json camera = {{"fx", 500.0}, {"fy", 500.0}, {"cx", 319.5}, {"cy", 239.5}, {"width", 640}, {"height", 480},
                       {"pose", {{"rotation", {{1, 0, 0}, {0, -1, 0}, {0, 0, -1}}}, {"translation", {6.0, 7.0, 30.0}}}}};
  if (name == "moving-platform-turn") {
    // Cruise at 15 m/s, a 90 degree left turn at 0.5 rad/s, then 1 m/s² along
    // track. The path spans about 90 x 80 m, so the camera sits 90 m up.
    json cam = camera;
    cam["pose"]["translation"] = {45.0, 40.0, 90.0};
    return {{"scenario", {{"name", name}, {"dt", 0.05}, {"seed", 1}}},
            {"segments",
             {{{"kind", "cruise"}, {"duration", 4.0}, {"speed", 15.0}},
              {{"kind", "turn"}, {"duration", std::numbers::pi}, {"turn_rate", 0.5}},
              {{"kind", "accelerate"}, {"duration", 3.0}, {"accel", 1.0}}}},
            {"sensor", {{"position_noise_std", 0.02}, {"dropout_prob", 0.0}}},
            {"camera", cam},
            {"appearance", {{"shape", "gaussian"}, {"blob_sigma_px", 5.0}, {"gain", 1.0}}},
            {"tracker", {{"kf_q", 5.0}}},
            {"detector", {{"sigma_min", 2.0}, {"sigma_max", 8.0}, {"levels_per_octave", 4}}}};
  }
  if (name == "moving-pillar") {
    // slow box/pillar drifting with gentle alternating turns
    json cam = camera;
    cam["pose"]["translation"] = {4.0, 1.0, 30.0};
    return {{"scenario", {{"name", name}, {"dt", 0.05}, {"seed", 1}}},
            {"segments",
             {{{"kind", "cruise"}, {"duration", 6.0}, {"speed", 0.5}},
              {{"kind", "turn"}, {"duration", 4.0}, {"turn_rate", 0.4}},
              {{"kind", "cruise"}, {"duration", 4.0}},
              {{"kind", "turn"}, {"duration", 4.0}, {"turn_rate", -0.4}},
              {{"kind", "accelerate"}, {"duration", 3.0}, {"accel", 0.3}}}},
            {"sensor", {{"position_noise_std", 0.02}, {"dropout_prob", 0.0}}},
            {"camera", cam},
            {"appearance", {{"shape", "gaussian"}, {"blob_sigma_px", 5.0}, {"gain", 1.0}}},
            {"detector", {{"sigma_min", 2.0}, {"sigma_max", 8.0}, {"levels_per_octave", 4}}}};
  }
  throw ConfigError("unknown preset '" + name + "'");
}

RunConfig load_scenario(const std::string& preset_or_path, const std::vector<std::string>& overrides) {
  json doc;
  if (is_preset(preset_or_path)) {
    doc = preset_document(preset_or_path);
  } else {
    std::ifstream in(preset_or_path);
    if (!in) throw IoError("cannot open scenario file '" + preset_or_path + "'");
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(preset_or_path + ": not valid JSON");
  }
  return parse_scenario(apply_overrides(std::move(doc), overrides));
}

json resolved_json(const RunConfig& cfg) {
  const auto& sc = cfg.scenario;
  json segments = json::array();
  for (const auto& s : sc.segments) segments.push_back(segment_json(s));
  json modes = json::array();
  for (const auto& m : cfg.tracker.imm_modes) {
    json j = {{"kind", to_string(m.kind)}, {"q", m.q}};
    if (m.kind == MotionKind::kCoordinatedTurn) j["omega"] = m.turn_rate;
    modes.push_back(j);
  }
  json probs = json::array();
  for (Eigen::Index i = 0; i < cfg.tracker.imm_initial_probabilities.size(); ++i) {
    probs.push_back(cfg.tracker.imm_initial_probabilities(i));
  }
  const auto& cam = sc.camera;
  const auto& a = sc.appearance;
  const auto& t = cfg.tracker;
  return {
      {"scenario", {{"name", sc.name}, {"dt", sc.dt}, {"seed", sc.seed}}},
      {"segments", segments},
      {"sensor", {{"position_noise_std", sc.sensor.position_noise_std}, {"dropout_prob", sc.sensor.dropout_prob}}},
      {"camera",
       {{"fx", cam.intrinsics.fx}, {"fy", cam.intrinsics.fy}, {"cx", cam.intrinsics.cx}, {"cy", cam.intrinsics.cy},
        {"width", cam.width}, {"height", cam.height},
        {"pose", {{"rotation", matrix_json(cam.pose.rotation())},
                  {"translation", {cam.pose.translation().x(), cam.pose.translation().y(), cam.pose.translation().z()}}}}}},
      {"appearance",
       {{"shape", a.shape == TargetShape::kSquare ? "square" : "gaussian"}, {"blob_sigma_px", a.blob_sigma_px},
        {"square_side_px", a.square_side_px}, {"rotation_deg", a.rotation_deg}, {"gain", a.gain},
        {"background", a.background}, {"pixel_noise_std", a.pixel_noise_std}}},
      {"imm", {{"modes", modes}, {"pi", matrix_json(t.imm_transition)}, {"initial_probs", probs},
               {"missing_fill", t.missing_fill == MissingFill::kOwnEstimate ? "own" : "padding"},
               {"padding_variance", t.padding_variance}}},
      {"tracker", {{"gate_threshold", t.gate_threshold}, {"max_misses", t.max_misses},
                   {"measurement_std", t.measurement_std}, {"initial_velocity_std", t.initial_velocity_std},
                   {"initial_accel_std", t.initial_accel_std}, {"kf_q", t.kf_q},
                   {"window_px", t.window_px}, {"tentative_updates", t.tentative_updates}}},
      {"detector", detector_json(cfg.detector)}};
}

json detector_json(const DetectorConfig& d) {
  return {{"sigma_min", d.sigma_min}, {"sigma_max", d.sigma_max}, {"levels_per_octave", d.levels_per_octave},
          {"response_threshold", d.response_threshold}, {"absolute_floor", d.absolute_floor},
          {"max_blobs", d.max_blobs}};
}

}  // namespace vtrack
