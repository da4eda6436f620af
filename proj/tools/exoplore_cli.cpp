// Command-line front end: dataset generation, calibration, surrogate training,
// control optimization, series comparison and landscape plots.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include "exoplore/gait_generator.hpp"
#include "exoplore/io.hpp"
#include "exoplore/optimizer.hpp"
#include "exoplore/parallel.hpp"
#include "exoplore/surrogate.hpp"

namespace {

using namespace exoplore;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_stage = 3;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string dataset;
  std::string checkpoint;
  std::string sim;
  std::string ref;
  int threads = -1;
  bool quiet = false;
};

/// Runs `fn`; failures other than config and stage errors come back tagged with `name`.
template <class Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string in_out(const RunConfig& cfg, const std::string& file) {
  return (std::filesystem::path(cfg.output_dir) / file).string();
}

std::string pick(const std::string& flag, const std::string& from_config, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  return fallback;
}

RunConfig resolve_config(const Options& o) {
  if (o.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  if (o.threads >= 0) cfg.threads = static_cast<unsigned>(o.threads);
  return cfg;
}

void log(const Options& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << '\n';
}

GaitGenerator build_generator(const RunConfig& cfg) {
  return stage("generator", [&] { return train_generator(cfg.generator, cfg.mee); });
}

std::vector<GaitParams> resolve_gaits(const RunConfig& cfg, const GaitGenerator& gen) {
  if (!cfg.gaits.empty()) return cfg.gaits;
  return stage("gait selection",
               [&] { return preferred_gaits(gen, cfg.speeds_kmh, derive_seed(cfg.seed, 0x9a17), cfg.threads); });
}

std::function<void(int, double)> progress(const Options& o, int epochs) {
  if (o.quiet) return {};
  const int every = std::max(1, epochs / 10);
  return [every, epochs](int e, double loss) {
    if ((e + 1) % every == 0 || e + 1 == epochs)
      std::cerr << "epoch " << e + 1 << "/" << epochs << " loss " << loss << '\n';
  };
}

constexpr std::uint64_t training_stream = 0x7a11;

int cmd_gen_data(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const GaitGenerator gen = build_generator(cfg);
  if (cfg.samples == 0) throw StageError("sampling", "sample count must be at least 1");
  const auto rows = stage("rollout", [&] {
    return generate_dataset(gen, cfg.space, cfg.pathology, cfg.samples, cfg.seed, cfg.threads);
  });
  const std::string path = pick(o.dataset, "", in_out(cfg, "dataset.csv"));
  stage("output", [&] { write_dataset(rows, path); return 0; });
  log(o, "wrote " + std::to_string(rows.size()) + " rows to " + path);
  return exit_ok;
}

int cmd_calibrate(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const auto grid = pws_grid(cfg.pws.n_length, cfg.pws.n_freq);
  const auto result = stage("calibration", [&] {
    return calibrate_mee(cfg.pws.candidates, cfg.pws.v_real, cfg.generator, cfg.mee, grid,
                         cfg.pws.rollouts_per_point, cfg.seed, cfg.threads);
  });
  const std::string path = in_out(cfg, "calibration.json");
  stage("output", [&] { write_text(path, dump_json(calibration_to_json(result, cfg.pws.v_real))); return 0; });
  log(o, "alpha* = " + format_double(result.alpha_star) + ", beta* = " + format_double(result.beta_star));
  return exit_ok;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const std::string data_path = pick(o.dataset, cfg.inputs.dataset, in_out(cfg, "dataset.csv"));
  const auto rows = stage("input", [&] { return read_dataset(data_path); });
  const auto result = stage("training", [&] {
    return train(to_training_set(rows, cfg.space), cfg.surrogate, derive_seed(cfg.seed, training_stream),
                 progress(o, cfg.surrogate.epochs));
  });
  stage("output", [&] {
    write_checkpoint(result.net, pick(o.checkpoint, "", in_out(cfg, "surrogate.json")));
    write_text(in_out(cfg, "loss_curve.csv"), loss_curve_csv(result.loss_curve));
    return 0;
  });
  log(o, "final loss " + format_double(result.net.final_loss));
  return exit_ok;
}

int cmd_optimize(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const std::string ck = pick(o.checkpoint, cfg.inputs.checkpoint, in_out(cfg, "surrogate.json"));
  const SurrogateNet net = stage("input", [&] { return read_checkpoint(ck); });
  std::vector<GaitParams> gaits = cfg.gaits;
  if (gaits.empty()) gaits = resolve_gaits(cfg, build_generator(cfg));
  const auto result = stage("optimization", [&] {
    return optimize_controls(net, gaits, cfg.optimizer, cfg.box, derive_seed(cfg.seed, 0x0b7), cfg.severity);
  });
  stage("output", [&] { write_text(in_out(cfg, "optimization.json"), dump_json(optimization_to_json(result))); return 0; });
  for (const auto& s : result.per_speed)
    log(o, "v=" + format_double(speed_of(s.gait)) + " kappa=" + format_double(s.kappa) +
               " dt=" + format_double(s.delta_t));
  return exit_ok;
}

int cmd_pipeline(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  PipelineConfig p;
  p.generator = cfg.generator;
  p.mee = cfg.mee;
  p.pathology = cfg.pathology;
  p.space = cfg.space;
  p.samples = cfg.samples;
  p.surrogate = cfg.surrogate;
  p.optimizer = cfg.optimizer;
  p.box = cfg.box;
  p.severity = cfg.severity;
  p.seed = cfg.seed;
  p.threads = cfg.threads;
  p.gaits = resolve_gaits(cfg, build_generator(cfg));
  const PipelineResult r = run_pipeline(p);
  stage("output", [&] {
    write_dataset(r.dataset, in_out(cfg, "dataset.csv"));
    write_checkpoint(r.training.net, in_out(cfg, "surrogate.json"));
    write_text(in_out(cfg, "loss_curve.csv"), loss_curve_csv(r.training.loss_curve));
    write_text(in_out(cfg, "optimization.json"), dump_json(optimization_to_json(r.optimization)));
    write_text(in_out(cfg, "config.json"), dump_json(config_to_json(cfg)));
    return 0;
  });
  for (const auto& s : r.optimization.per_speed)
    log(o, "v=" + format_double(speed_of(s.gait)) + " kappa=" + format_double(s.kappa) +
               " dt=" + format_double(s.delta_t));
  return exit_ok;
}

int cmd_compare(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const std::string sim_path = pick(o.sim, cfg.inputs.sim_series, "");
  const std::string ref_path = pick(o.ref, cfg.inputs.ref_series, "");
  if (sim_path.empty() || ref_path.empty()) throw ConfigError("compare needs --sim and --ref series");
  const auto sim = stage("input", [&] { return read_series(sim_path); });
  const auto ref = stage("input", [&] { return read_series(ref_path); });
  const json doc = stage("compare", [&] { return compare_series(sim, ref); });
  stage("output", [&] { write_text(in_out(cfg, "compare.json"), dump_json(doc)); return 0; });
  log(o, doc.dump());
  return exit_ok;
}

int cmd_landscape(const Options& o) {
  const RunConfig cfg = resolve_config(o);
  const std::string ck = pick(o.checkpoint, cfg.inputs.checkpoint, in_out(cfg, "surrogate.json"));
  const SurrogateNet net = stage("input", [&] { return read_checkpoint(ck); });
  const Landscape l = stage("landscape", [&] { return surrogate_landscape(net, cfg.landscape, cfg.box); });
  stage("output", [&] {
    write_text(in_out(cfg, "landscape.csv"), landscape_csv(l));
    write_text(in_out(cfg, "landscape.svg"), landscape_svg(l));
    return 0;
  });
  return exit_ok;
}

int cmd_print_config(const Options& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = resolve_config(o);
  std::cout << dump_json(config_to_json(cfg));
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exoskeleton control parameter exploration over a synthetic gait generator"};
  app.require_subcommand(1);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"gen-data", "Sample the parameter space and write the rollout dataset CSV", cmd_gen_data},
      {"calibrate-mee", "Pick the metabolic exponents whose preferred speed matches v_real", cmd_calibrate},
      {"train-surrogate", "Fit the surrogate to a dataset; writes checkpoint and loss curve", cmd_train},
      {"optimize", "Optimize gain and delay per speed over a trained surrogate", cmd_optimize},
      {"pipeline", "Sample, simulate, train and optimize in one run", cmd_pipeline},
      {"compare", "NRMSE, Pearson r and NDTW between two series", cmd_compare},
      {"landscape", "Emit the surrogate cost grid over gain and delay as CSV and SVG", cmd_landscape},
      {"print-config", "Print the full configuration with every default filled in", cmd_print_config},
  };

  int (*selected)(const Options&) = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", o.config_path, "JSON run configuration");
    sub->add_option("-o,--out", o.out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--threads", o.threads, "Worker threads; 0 uses all cores");
    sub->add_flag("-q,--quiet", o.quiet, "Suppress progress output");
    const std::string name = c.name;
    if (name == "gen-data" || name == "train-surrogate")
      sub->add_option("--dataset", o.dataset, "Dataset CSV path");
    if (name == "train-surrogate" || name == "optimize" || name == "landscape")
      sub->add_option("--checkpoint", o.checkpoint, "Surrogate checkpoint path");
    if (name == "compare") {
      sub->add_option("--sim", o.sim, "Simulated series file");
      sub->add_option("--ref", o.ref, "Reference series file");
    }
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    return selected(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const StageError& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return exit_stage;
  } catch (const std::exception& e) {
    std::cerr << "stage 'unknown' failed: " << e.what() << '\n';
    return exit_stage;
  }
}
