#include <CLI11.hpp>
#include <iostream>

#include "arrayloc/pipeline.hpp"

using namespace arrayloc;

int main(int argc, char** argv) {
  CLI::App app{"Collaborative antenna-array 3D localization pipeline"};
  app.require_subcommand(1);

  std::string scenario_path;
  RunOptions opts;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { seed_given = true; });
    return cmd;
  };

  auto* simulate = add_common(app.add_subcommand("simulate", "generate capture files"));
  auto* calibrate = add_common(
      app.add_subcommand("calibrate", "measure and save a calibration profile"));
  auto* aoa = add_common(app.add_subcommand("aoa", "estimate arrival angles"));
  aoa->add_flag("--sweep", opts.sweep, "run music, ss-music, and i-ssmusic");
  auto* locate = add_common(app.add_subcommand("locate", "estimate 3D position"));
  locate->add_flag("--export-lsoi", opts.export_lsoi,
                   "dump the final search-sphere spectrum");
  auto* track = add_common(
      app.add_subcommand("track", "localize along a waypoint trajectory"));
  auto* bench = add_common(app.add_subcommand("bench", "time the pipeline stages"));
  bench->add_option("--repeat", opts.bench_repeat, "bench repetitions");

  CLI11_PARSE(app, argc, argv);

  std::string stage = "scenario";
  try {
    Scenario scenario = Scenario::parse_file(scenario_path);
    if (seed_given) opts.seed_override = seed;
    if (simulate->parsed()) {
      stage = "simulate";
      run_simulate(scenario, opts, std::cout);
    } else if (calibrate->parsed()) {
      stage = "calibrate";
      run_calibrate(scenario, opts, std::cout);
    } else if (aoa->parsed()) {
      stage = "aoa";
      run_aoa(scenario, opts, std::cout);
    } else if (locate->parsed()) {
      stage = "locate";
      run_locate(scenario, opts, std::cout);
    } else if (track->parsed()) {
      stage = "track";
      run_track(scenario, opts, std::cout);
    } else if (bench->parsed()) {
      stage = "bench";
      run_bench(scenario, opts, std::cout);
    }
  } catch (const PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ScenarioError& e) {
    std::cerr << "error: scenario: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
