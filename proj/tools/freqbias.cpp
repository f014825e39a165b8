// freqbias: command-line front end for the library.
//
// Every subcommand writes its data files and a <subcommand>.manifest.json into
// --out-dir. Progress goes to stderr. Exit codes: 0 success, 2 bad input or
// violated precondition, 3 numerical divergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "freqbias/freqbias.hpp"

namespace fb = freqbias;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::size_t threads = 1;
};

void progress(const std::string& msg) { std::cerr << "[freqbias] " << msg << std::endl; }

// "lo:hi:count" -> count evenly spaced values.
std::vector<double> parse_grid(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = spec.find(':', a == std::string::npos ? a : a + 1);
  fb::require(a != std::string::npos && b != std::string::npos,
              "grid '" + spec + "' must look like lo:hi:count");
  double lo = 0.0, hi = 0.0;
  long count = 0;
  try {
    lo = std::stod(spec.substr(0, a));
    hi = std::stod(spec.substr(a + 1, b - a - 1));
    count = std::stol(spec.substr(b + 1));
  } catch (const std::exception&) {
    throw fb::PreconditionError("grid '" + spec + "' must look like lo:hi:count");
  }
  fb::require(count >= 1, "grid '" + spec + "': count must be >= 1");
  fb::require(count == 1 || lo < hi, "grid '" + spec + "': lo must be below hi");
  return fb::linspace(lo, hi, static_cast<std::size_t>(count));
}

std::pair<double, double> parse_range(const std::string& spec) {
  const auto a = spec.find(':');
  fb::require(a != std::string::npos, "range '" + spec + "' must look like lo:hi");
  double lo = 0.0, hi = 0.0;
  try {
    lo = std::stod(spec.substr(0, a));
    hi = std::stod(spec.substr(a + 1));
  } catch (const std::exception&) {
    throw fb::PreconditionError("range '" + spec + "' must look like lo:hi");
  }
  fb::require(lo < hi, "range '" + spec + "': lo must be below hi");
  return {lo, hi};
}

fb::TargetVariant parse_variant(const std::string& v) {
  if (v == "main") return fb::TargetVariant::main;
  if (v == "appendixD" || v == "appendix_d") return fb::TargetVariant::appendix_d;
  throw fb::PreconditionError("unknown target variant '" + v + "' (expected main or appendixD)");
}

class Run {
 public:
  Run(std::string name, const Globals& g) : g_(g), start_(std::chrono::steady_clock::now()) {
    manifest_.subcommand = std::move(name);
    manifest_.seed = g.seed;
    fs::create_directories(g.out_dir);
  }

  fb::Json& config() { return manifest_.config; }

  fs::path artifact(const std::string& file) {
    const fs::path p = fs::path(g_.out_dir) / file;
    manifest_.artifacts.push_back(p.string());
    return p;
  }

  void finish() {
    manifest_.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const fs::path p = fs::path(g_.out_dir) / (manifest_.subcommand + ".manifest.json");
    manifest_.save(p);
    progress("wrote " + p.string());
  }

 private:
  const Globals& g_;
  std::chrono::steady_clock::time_point start_;
  fb::RunManifest manifest_;
};

// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string model;
  double cutoff = 0.0;
  double beta = 0.0;
  std::size_t grid = fb::kDefaultTvGridPoints;
  std::string out = "report.json";
};

void cmd_analyze(const AnalyzeOpts& o, const Globals& g) {
  Run run("analyze", g);
  run.config() = {{"model", o.model}, {"b", o.cutoff}, {"beta", o.beta}, {"grid", o.grid}};
  const fb::DiagonalLti sys = fb::lti_from_json(fb::read_json_file(o.model));
  const double bound_left = fb::tv_tail_bound(sys, o.cutoff, fb::TailSide::left);
  const double bound_right = fb::tv_tail_bound(sys, o.cutoff, fb::TailSide::right);
  const double inf = std::numeric_limits<double>::infinity();
  progress("total variation on " + std::to_string(o.grid) + " points");
  const double tv_left = fb::total_variation_numeric(sys, 0.0, {-inf, -o.cutoff}, o.grid);
  const double tv_right = fb::total_variation_numeric(sys, 0.0, {o.cutoff, inf}, o.grid);
  const double tv_inside = fb::total_variation_numeric(sys, o.beta, {-o.cutoff, o.cutoff}, o.grid);
  fb::Json report = {{"n", sys.size()},
                     {"cutoff_b", o.cutoff},
                     {"beta", o.beta},
                     {"grid_points", o.grid},
                     {"tv_inside_filtered", tv_inside},
                     {"tv_left_tail", tv_left},
                     {"tv_right_tail", tv_right},
                     {"bound_left", bound_left},
                     {"bound_right", bound_right},
                     {"left_within_bound", tv_left <= bound_left},
                     {"right_within_bound", tv_right <= bound_right}};
  fb::write_json_file(run.artifact(o.out), report);
  run.finish();
}

struct ScalingOpts {
  std::size_t n = 64;
  double alpha = 1.0;
  double dt = 1e-2;
  std::size_t len = 1024;
  double top_fraction = 0.05;
  bool spectrum = false;
  std::string out = "scaling.json";
};

void cmd_scaling(const ScalingOpts& o, const Globals& g) {
  Run run("scaling", g);
  run.config() = {{"n", o.n},     {"alpha", o.alpha}, {"dt", o.dt}, {"len", o.len}, {"top_fraction", o.top_fraction},
                  {"spectrum", o.spectrum}};
  fb::require(o.top_fraction > 0.0 && o.top_fraction < 1.0, "--top-fraction must lie in (0, 1)");
  const fb::DiagonalLti sys = fb::hippo_alpha({o.n, o.alpha, -0.5, g.seed});
  const fb::FrequencyGrid grid = fb::frequency_nodes(o.len, o.dt);
  fb::Json poles = fb::Json::array();
  for (std::size_t j = 0; j < sys.size(); ++j) {
    poles.push_back(fb::scaling_report_to_json(fb::scaling_report(j, sys, grid), o.spectrum));
  }
  fb::Json out = {{"n", o.n},
                  {"alpha", o.alpha},
                  {"dt", o.dt},
                  {"len", o.len},
                  {"rule2_alpha_max", fb::rule2_alpha_max(o.n, o.len, o.dt)},
                  {"aliasing_imag_cap", fb::aliasing_imag_cap(o.dt, o.top_fraction)},
                  {"rule1_alpha_guideline", fb::rule1_alpha_guideline(o.n, o.dt, o.top_fraction)},
                  {"max_finite_node", grid.max_finite()},
                  {"poles", std::move(poles)}};
  fb::write_json_file(run.artifact(o.out), out);
  run.finish();
}

struct ApplyOpts {
  std::string model;
  std::string in;
  std::string out = "y.csv";
  double beta = 0.0;
  double dt = 1.0;
};

void cmd_apply(const ApplyOpts& o, const Globals& g) {
  Run run("apply", g);
  run.config() = {{"model", o.model}, {"in", o.in}, {"beta", o.beta}, {"dt", o.dt}};
  const fb::DiagonalLti sys = fb::lti_from_json(fb::read_json_file(o.model));
  const fb::SequenceSignal u{fb::read_column_csv(o.in), o.dt};
  progress("applying to " + std::to_string(u.size()) + " samples");
  const auto y = fb::apply(sys, fb::SobolevFilter{o.beta}, u);
  fb::write_column_csv(run.artifact(o.out), "y", y.samples);
  run.finish();
}

struct FlowOpts {
  std::string variant = "main";
  double beta = 0.0;
  std::string y0_grid = "-80:80:161";
  double xi0 = 3.0;
  std::string integrator = "implicit";
  double step = 2e-3;
  std::size_t steps = 200'000;
  std::size_t points = (std::size_t{1} << 15) + 1;
  std::size_t record_every = 1;
  bool trajectories = false;
  std::string out = "flow.csv";
};

void cmd_flow(const FlowOpts& o, const Globals& g) {
  Run run("flow", g);
  run.config() = {{"variant", o.variant}, {"beta", o.beta},   {"y0_grid", o.y0_grid},
                  {"xi0", o.xi0},         {"integrator", o.integrator}, {"step", o.step},
                  {"steps", o.steps},     {"points", o.points}, {"record_every", o.record_every},
                  {"trajectories", o.trajectories}};
  fb::require(o.integrator == "implicit" || o.integrator == "rk4", "--integrator must be implicit or rk4");
  const auto target = fb::illustrative_target(parse_variant(o.variant));
  const auto grid = parse_grid(o.y0_grid);
  const fb::FlowProblem problem(target, o.beta, fb::flow_quadrature(target, o.points));
  fb::FlowOptions opt;
  opt.integrator = o.integrator == "rk4" ? fb::FlowIntegrator::rk4 : fb::FlowIntegrator::implicit;
  opt.step = o.step;
  opt.steps = o.steps;
  opt.record_every = o.record_every;

  progress("running " + std::to_string(grid.size()) + " trajectories");
  std::vector<fb::FlowTrajectory> runs(grid.size());
  fb::parallel_for(grid.size(), g.threads, [&](std::size_t i) {
    runs[i] = fb::run_flow(problem, target, grid[i], o.xi0, opt);
  });

  fb::CsvWriter summary({"y0", "xi0", "y_final", "xi_final", "loss_final", "grad_norm_final", "terminal_class"});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& end = runs[i].path.back();
    summary.row_text({fb::format_double(grid[i]), fb::format_double(o.xi0), fb::format_double(end.y),
                      fb::format_double(end.xi), fb::format_double(runs[i].loss_final),
                      fb::format_double(runs[i].grad_norm_final), fb::to_string(runs[i].terminal_class)});
    if (o.trajectories) {
      fb::CsvWriter path({"tau", "y", "xi", "loss"});
      for (const auto& p : runs[i].path) path.row({p.tau, p.y, p.xi, p.loss});
      path.save(run.artifact("trajectory_" + std::to_string(i) + ".csv"));
    }
  }
  summary.save(run.artifact(o.out));
  run.finish();
}

struct LandscapeOpts {
  std::string variant = "main";
  double beta = 0.0;
  std::string y_range = "-80:80";
  std::string xi_range = "-2:8";
  std::size_t y_resolution = 161;
  std::size_t xi_resolution = 101;
  std::size_t points = (std::size_t{1} << 15) + 1;
  std::string out = "landscape.csv";
};

void cmd_landscape(const LandscapeOpts& o, const Globals& g) {
  Run run("landscape", g);
  run.config() = {{"variant", o.variant},     {"beta", o.beta},
                  {"y_range", o.y_range},     {"xi_range", o.xi_range},
                  {"y_resolution", o.y_resolution}, {"xi_resolution", o.xi_resolution},
                  {"points", o.points}};
  const auto target = fb::illustrative_target(parse_variant(o.variant));
  const fb::FlowProblem problem(target, o.beta, fb::flow_quadrature(target, o.points));
  progress("evaluating " + std::to_string(o.y_resolution * o.xi_resolution) + " grid points");
  const auto grid = fb::landscape_grid(problem, parse_range(o.y_range), parse_range(o.xi_range), o.y_resolution,
                                       o.xi_resolution, g.threads);
  fb::CsvWriter csv({"y", "xi", "loss"});
  for (std::size_t iy = 0; iy < grid.y_values.size(); ++iy)
    for (std::size_t ix = 0; ix < grid.xi_values.size(); ++ix)
      csv.row({grid.y_values[iy], grid.xi_values[ix], grid.at(iy, ix)});
  csv.save(run.artifact(o.out));
  run.finish();
}

struct WavesOpts {
  std::string config;
  double alpha = 1.0;
  double beta = 0.0;
  bool train_beta = false;
  bool skip = false;
  std::string pool = "rms";
  std::size_t channels = 16;
  std::size_t states = 32;
  std::size_t epochs = 30;
  std::size_t batch = 128;
  std::size_t train_samples = 2048;
  std::size_t eval_samples = 256;
};

void cmd_waves(const WavesOpts& o, const Globals& g) {
  Run run("waves", g);
  fb::WaveTaskConfig cfg;
  if (!o.config.empty()) {
    const fb::Json j = fb::read_json_file(o.config);
    if (j.contains("model")) cfg.model = fb::toy_config_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = fb::train_config_from_json(j.at("train"));
    cfg.train_samples = j.value("train_samples", cfg.train_samples);
    cfg.eval_samples = j.value("eval_samples", cfg.eval_samples);
    cfg.data_seed = j.value("data_seed", cfg.data_seed);
  } else {
    cfg.model.alpha = o.alpha;
    cfg.model.beta = o.beta;
    cfg.model.train_beta = o.train_beta;
    cfg.model.use_skip = o.skip;
    cfg.model.pool = fb::pool_mode_from_string(o.pool);
    cfg.model.channels = o.channels;
    cfg.model.states = o.states;
    cfg.model.seed = g.seed;
    cfg.train.epochs = o.epochs;
    cfg.train.batch_size = o.batch;
    cfg.train.seed = g.seed;
    cfg.train_samples = o.train_samples;
    cfg.eval_samples = o.eval_samples;
  }
  cfg.train.threads = g.threads;
  run.config() = {{"model", fb::toy_config_to_json(cfg.model)},
                  {"train", fb::train_config_to_json(cfg.train)},
                  {"train_samples", cfg.train_samples},
                  {"eval_samples", cfg.eval_samples},
                  {"data_seed", cfg.data_seed}};

  progress("training " + std::to_string(cfg.train.epochs) + " epochs on " + std::to_string(cfg.train_samples) +
           " samples");
  const auto r = fb::run_wave_task(cfg);

  std::vector<std::string> header{"epoch"};
  for (double f : cfg.freqs) header.push_back("err_f" + fb::format_double(f));
  header.push_back("loss");
  fb::CsvWriter log(header);
  std::vector<double> row{0.0};
  row.insert(row.end(), r.initial_error.begin(), r.initial_error.end());
  row.push_back(std::numeric_limits<double>::quiet_NaN());
  log.row(row);
  for (const auto& e : r.log.epochs) {
    row = {static_cast<double>(e.epoch)};
    row.insert(row.end(), e.label_error.begin(), e.label_error.end());
    row.push_back(e.loss);
    log.row(row);
  }
  log.save(run.artifact("waves_log.csv"));
  fb::write_json_file(run.artifact("checkpoint.json"), fb::checkpoint_to_json(r.model));
  const auto& c = r.log.change;
  const auto& last = r.log.epochs.back().label_error;
  fb::write_json_file(run.artifact("waves_summary.json"),
                      {{"final_label_error", last},
                       {"freqs", cfg.freqs},
                       {"param_change",
                        {{"x", c.x}, {"y", c.y}, {"xi_zeta", c.xi_zeta}, {"d", c.d},
                         {"encoder", c.encoder}, {"head", c.head}, {"beta", c.beta}}}});
  std::string line = "final errors:";
  for (double e : last) line += " " + fb::format_double(e);
  progress(line);
  run.finish();
}

struct PassrateOpts {
  std::vector<double> alpha_grid{0.1, 1.0, 10.0};
  std::vector<double> beta_grid{-1.0, 0.0, 1.0};
  fb::StripeExperimentConfig stripe;
  std::string out = "passrate.csv";
};

void cmd_passrate(PassrateOpts o, const Globals& g) {
  Run run("passrate", g);
  o.stripe.seed = g.seed;
  o.stripe.threads = g.threads;
  const auto& s = o.stripe;
  run.config() = {{"alpha_grid", o.alpha_grid}, {"beta_grid", o.beta_grid}, {"height", s.height},
                  {"width", s.width},           {"channels", s.channels},   {"states", s.states},
                  {"cycles_lo", s.cycles_lo},   {"cycles_hi", s.cycles_hi}, {"dt", s.dt},
                  {"image_decay", s.image_decay}, {"train_images", s.train_images}, {"epochs", s.epochs},
                  {"replicates", s.replicates}, {"lr_fast", s.lr_fast},     {"lr_slow", s.lr_slow}};
  progress("training " + std::to_string(o.alpha_grid.size() * o.beta_grid.size() * s.replicates) +
           " autoencoders");
  const auto ratio = fb::stripe_passrate_experiment(o.alpha_grid, o.beta_grid, s);
  fb::CsvWriter csv({"alpha", "beta", "ratio"});
  for (std::size_t i = 0; i < o.alpha_grid.size(); ++i)
    for (std::size_t j = 0; j < o.beta_grid.size(); ++j) csv.row({o.alpha_grid[i], o.beta_grid[j], ratio[i][j]});
  csv.save(run.artifact(o.out));
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-bias diagnostics and experiments for diagonal LTI systems"};
  app.set_version_flag("--version", fb::kVersion);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and the run manifest")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  AnalyzeOpts analyze;
  auto* a = app.add_subcommand("analyze", "Total variation and tail bounds of a model");
  a->add_option("--model", analyze.model, "DiagonalLti JSON")->required()->check(CLI::ExistingFile);
  a->add_option("--b", analyze.cutoff, "Cutoff B > max |y_j|")->required();
  a->add_option("--beta", analyze.beta, "Sobolev exponent for the in-band variation")->capture_default_str();
  a->add_option("--grid", analyze.grid, "Grid points per variation")->capture_default_str();
  a->add_option("--out", analyze.out, "Report file name")->capture_default_str();

  ScalingOpts scaling;
  auto* sc = app.add_subcommand("scaling", "Discretization scaling report of an alpha-scaled HiPPO system");
  sc->add_option("--n", scaling.n, "States")->capture_default_str()->check(CLI::PositiveNumber);
  sc->add_option("--alpha", scaling.alpha, "Imaginary-part scaling")->capture_default_str();
  sc->add_option("--dt", scaling.dt, "Sampling interval")->capture_default_str();
  sc->add_option("--len", scaling.len, "Sequence length")->capture_default_str()->check(CLI::PositiveNumber);
  sc->add_option("--top-fraction", scaling.top_fraction, "Top fraction of nodes to avoid")->capture_default_str();
  sc->add_flag("--spectrum", scaling.spectrum, "Include |g_k| per bin");
  sc->add_option("--out", scaling.out, "Output file name")->capture_default_str();

  ApplyOpts apply;
  auto* ap = app.add_subcommand("apply", "Filter a signal through a model");
  ap->add_option("--model", apply.model, "DiagonalLti JSON")->required()->check(CLI::ExistingFile);
  ap->add_option("--in", apply.in, "Single-column CSV input")->required()->check(CLI::ExistingFile);
  ap->add_option("--out", apply.out, "Output file name")->capture_default_str();
  ap->add_option("--beta", apply.beta, "Sobolev exponent")->capture_default_str();
  ap->add_option("--dt", apply.dt, "Sampling interval")->capture_default_str();

  FlowOpts flow;
  auto* fl = app.add_subcommand("flow", "Gradient flow of a single trainable pole");
  fl->add_option("--variant", flow.variant, "main or appendixD")->capture_default_str();
  fl->add_option("--beta", flow.beta, "Sobolev exponent of the loss")->capture_default_str();
  fl->add_option("--y0-grid", flow.y0_grid, "Initial y grid lo:hi:count")->capture_default_str();
  fl->add_option("--xi0", flow.xi0, "Initial residue")->capture_default_str();
  fl->add_option("--integrator", flow.integrator, "implicit or rk4")->capture_default_str();
  fl->add_option("--step", flow.step, "RK4 step / initial implicit step")->capture_default_str();
  fl->add_option("--steps", flow.steps, "Maximum steps")->capture_default_str();
  fl->add_option("--points", flow.points, "Quadrature nodes")->capture_default_str();
  fl->add_option("--record-every", flow.record_every, "Keep every k-th path point")->capture_default_str();
  fl->add_flag("--trajectories", flow.trajectories, "Write one tau,y,xi,loss CSV per initialization");
  fl->add_option("--out", flow.out, "Summary file name")->capture_default_str();

  LandscapeOpts land;
  auto* la = app.add_subcommand("landscape", "Loss landscape on a (y, xi) grid");
  la->add_option("--variant", land.variant, "main or appendixD")->capture_default_str();
  la->add_option("--beta", land.beta, "Sobolev exponent of the loss")->capture_default_str();
  la->add_option("--y-range", land.y_range, "lo:hi")->capture_default_str();
  la->add_option("--xi-range", land.xi_range, "lo:hi")->capture_default_str();
  la->add_option("--y-resolution", land.y_resolution, "Points along y")->capture_default_str();
  la->add_option("--xi-resolution", land.xi_resolution, "Points along xi")->capture_default_str();
  la->add_option("--points", land.points, "Quadrature nodes")->capture_default_str();
  la->add_option("--out", land.out, "Output file name")->capture_default_str();

  WavesOpts waves;
  auto* wa = app.add_subcommand("waves", "Train the toy model on the wave-magnitude task");
  wa->add_option("--config", waves.config, "JSON with model/train sections (overrides flags)")
      ->check(CLI::ExistingFile);
  wa->add_option("--alpha", waves.alpha, "Initialization scaling")->capture_default_str();
  wa->add_option("--beta", waves.beta, "Sobolev exponent")->capture_default_str();
  wa->add_flag("--train-beta", waves.train_beta, "Make beta trainable");
  wa->add_flag("--skip", waves.skip, "Use the skip term d");
  wa->add_option("--pool", waves.pool, "rms or mean")->capture_default_str();
  wa->add_option("--channels", waves.channels, "Channels")->capture_default_str();
  wa->add_option("--states", waves.states, "States per channel")->capture_default_str();
  wa->add_option("--epochs", waves.epochs, "Epochs")->capture_default_str();
  wa->add_option("--batch", waves.batch, "Batch size")->capture_default_str();
  wa->add_option("--train-samples", waves.train_samples, "Training samples")->capture_default_str();
  wa->add_option("--eval-samples", waves.eval_samples, "Evaluation samples")->capture_default_str();

  PassrateOpts pr;
  auto* pa = app.add_subcommand("passrate", "Low/high stripe pass-rate ratios over (alpha, beta)");
  pa->add_option("--alpha-grid", pr.alpha_grid, "Alpha values")->delimiter(',')->capture_default_str();
  pa->add_option("--beta-grid", pr.beta_grid, "Beta values")->delimiter(',')->capture_default_str();
  pa->add_option("--height", pr.stripe.height, "Image height")->capture_default_str();
  pa->add_option("--width", pr.stripe.width, "Image width")->capture_default_str();
  pa->add_option("--channels", pr.stripe.channels, "Channels")->capture_default_str();
  pa->add_option("--states", pr.stripe.states, "States per channel")->capture_default_str();
  pa->add_option("--cycles-lo", pr.stripe.cycles_lo, "Fewest stripe cycles")->capture_default_str();
  pa->add_option("--cycles-hi", pr.stripe.cycles_hi, "Most stripe cycles")->capture_default_str();
  pa->add_option("--dt", pr.stripe.dt, "Sampling interval")->capture_default_str();
  pa->add_option("--images", pr.stripe.train_images, "Clean training images")->capture_default_str();
  pa->add_option("--epochs", pr.stripe.epochs, "Epochs")->capture_default_str();
  pa->add_option("--replicates", pr.stripe.replicates, "Models per cell")->capture_default_str();
  pa->add_option("--out", pr.out, "Output file name")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*a) cmd_analyze(analyze, g);
    else if (*sc) cmd_scaling(scaling, g);
    else if (*ap) cmd_apply(apply, g);
    else if (*fl) cmd_flow(flow, g);
    else if (*la) cmd_landscape(land, g);
    else if (*wa) cmd_waves(waves, g);
    else if (*pa) cmd_passrate(pr, g);
  } catch (const fb::PreconditionError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const fb::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
