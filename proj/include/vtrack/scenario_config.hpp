#pragma once

// Scenario documents: one JSON object with the sections
//   scenario{name, dt, seed}, segments[], sensor{}, camera{}, appearance{},
//   imm{modes[], pi[][], initial_probs[], padding_variance}, tracker{}, detector{}
// Unknown keys are rejected; every error names the offending key path.
// See docs/scenario_schema.md for the field list.

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "vtrack/log_detector.hpp"
#include "vtrack/simulator.hpp"
#include "vtrack/tracker.hpp"

namespace vtrack {

struct RunConfig {
  Scenario scenario;
  TrackerConfig tracker;
  DetectorConfig detector;
  nlohmann::json document;  // the input after overrides, before defaults
};

RunConfig parse_scenario(const nlohmann::json& doc);

/// Reads the optional "detector" section of `doc` on top of `dc`.
void parse_detector(const nlohmann::json& doc, DetectorConfig& dc);
nlohmann::json detector_json(const DetectorConfig& dc);

/// `key=value` with a dotted key path (numeric parts index lists); the value is parsed as JSON when it
/// is valid JSON and taken as a string otherwise.
nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& overrides);

/// Built-in preset name or path to a JSON file, then overrides.
RunConfig load_scenario(const std::string& preset_or_path, const std::vector<std::string>& overrides = {});

std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
nlohmann::json preset_document(const std::string& name);

/// Fully resolved configuration with all defaults filled in; its serialized
/// form is what the run manifest hashes.
nlohmann::json resolved_json(const RunConfig& cfg);

}  // namespace vtrack
