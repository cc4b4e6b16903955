#pragma once

// Command implementations behind the CLI. Every command stages its artifacts
// in memory and commits them together with run_manifest.json, so a failing
// run writes nothing.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vtrack/artifacts.hpp"
#include "vtrack/corpora.hpp"
#include "vtrack/tracker.hpp"

namespace vtrack {

enum class Command { kSimulate, kDetect, kTrack, kBench };

std::string_view to_string(Command command);
std::optional<Command> parse_command(std::string_view name);

enum class TrackSource { kMeasurements, kFrames };

struct RunRequest {
  Command command = Command::kTrack;
  std::string scenario;  // preset name or JSON path; empty for detect --corpus/--image
  std::filesystem::path output_dir;
  std::vector<std::string> overrides;  // "dotted.key=value"
  std::optional<std::uint64_t> seed;   // replaces scenario.seed
  std::vector<FilterKind> filters = {FilterKind::kKalman, FilterKind::kImm};
  std::optional<CorpusKind> corpus;
  std::optional<std::filesystem::path> image;
  TrackSource source = TrackSource::kMeasurements;
  int runs = 100;     // bench Monte-Carlo runs
  int frames = 0;     // detect: frame cap (0 = all); bench: throughput frames (0 = 100)
  bool write_frames = false;  // simulate: also emit P5 frames
  std::string command_line;   // recorded in the manifest
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct RunResult {
  ArtifactSet artifacts;      // includes run_manifest.json
  std::string summary;        // human-readable lines for stdout
};

/// Runs the command without touching the filesystem except for reading
/// inputs. Throws the library's error types.
RunResult execute(const RunRequest& request);

/// execute() + commit; maps errors to exit codes and prints a one-line
/// diagnostic to `err`.
int run(const RunRequest& request, std::ostream& out, std::ostream& err);

/// Seed of the measurement stream of Monte-Carlo run `index`; run 0 is the
/// stream `simulate` and `track` use.
std::uint64_t measurement_seed(std::uint64_t seed, int index = 0);

/// SVG with the truth path and one polyline per estimate.
struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<Eigen::Vector2d> points;
};
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title);

}  // namespace vtrack
