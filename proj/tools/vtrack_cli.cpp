#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "vtrack/runner.hpp"

namespace {

std::vector<vtrack::FilterKind> parse_filters(const std::string& list) {
  std::vector<vtrack::FilterKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto kind = vtrack::parse_filter_kind(item);
    if (!kind) throw CLI::ValidationError("--filters", "unknown filter '" + item + "' (expected kf or imm)");
    out.push_back(*kind);
  }
  if (out.empty()) throw CLI::ValidationError("--filters", "empty filter list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtrack: Kalman/IMM target tracking with a LoG blob detector"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VTRACK_VERSION);

  vtrack::RunRequest req;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string filters = "kf,imm";
  std::string corpus;
  std::string image;
  std::string source = "measurements";

  const auto common = [&](CLI::App* cmd, bool scenario_required) {
    auto* s = cmd->add_option("--scenario", req.scenario, "preset name or scenario JSON path");
    if (scenario_required) s->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "replaces scenario.seed");
    cmd->add_option("--set", req.overrides, "dotted.key=value override (repeatable)")->take_all();
  };

  auto* simulate = app.add_subcommand("simulate", "ground truth, measurements and optional frames");
  common(simulate, true);
  simulate->add_flag("--write-frames", req.write_frames, "also write frames/frame_NNNNN.pgm");

  auto* detect = app.add_subcommand("detect", "run the blob detector on a corpus, an image or scenario frames");
  common(detect, false);
  detect->add_option("--corpus", corpus, "rotation | low-light");
  detect->add_option("--image", image, "P5 image path");
  detect->add_option("--frames", req.frames, "frame cap");

  auto* track = app.add_subcommand("track", "track one scenario run with each filter");
  common(track, true);
  track->add_option("--filters", filters, "comma-separated list of kf, imm");
  track->add_option("--source", source, "measurements | frames")->check(CLI::IsMember({"measurements", "frames"}));

  auto* bench = app.add_subcommand("bench", "Monte-Carlo comparison and frame throughput");
  common(bench, true);
  bench->add_option("--runs", req.runs, "Monte-Carlo runs")->check(CLI::PositiveNumber);
  bench->add_option("--frames", req.frames, "throughput frames");

  try {
    app.parse(argc, argv);
    auto* chosen = app.get_subcommands().front();
    req.command = *vtrack::parse_command(chosen->get_name());
    req.output_dir = out_dir;
    if (chosen->count("--seed") > 0) req.seed = seed;
    if (req.command == vtrack::Command::kTrack) {
      req.filters = parse_filters(filters);
      req.source = source == "frames" ? vtrack::TrackSource::kFrames : vtrack::TrackSource::kMeasurements;
    }
    if (!corpus.empty()) {
      req.corpus = vtrack::parse_corpus_kind(corpus);
      if (!req.corpus) throw CLI::ValidationError("--corpus", "unknown corpus '" + corpus + "'");
    }
    if (!image.empty()) req.image = image;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "vtrack: usage error: " << e.what() << "\n";
    return vtrack::kExitConfig;
  }

  for (int i = 0; i < argc; ++i) req.command_line += (i ? " " : "") + std::string(argv[i]);
  return vtrack::run(req, std::cout, std::cerr);
}
