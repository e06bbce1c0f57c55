#include "mfg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mfg/config_io.hpp"
#include "mfg/output.hpp"
#include "mfg/simulator.hpp"
#include "mfg/solver.hpp"
#include "mfg/stability.hpp"
#include "mfg/stationary.hpp"

namespace mfg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out_dir;

  std::string regime;
  std::optional<double> delta;

  std::optional<double> T;
  std::optional<double> dt;
  std::string x0_file;
  std::string gT_file;
  double damping = 0.5;
  int max_iter = 100;

  std::int64_t N = 1000;
  int reps = 100;
  std::uint64_t seed = 1;
  std::optional<double> dt_out;
  std::string payoff_file;
  bool per_rep = false;
  int threads = 0;

  std::string param;
  std::vector<double> values;
};

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

struct Context {
  std::string command;
  fs::path out;
  std::vector<std::string> command_line;
  std::string hash = "unavailable";
  json summary;

  void write_manifest() const { io::write_json(out / "manifest.json", io::manifest(hash, command_line)); }
};

GameConfig load_checked(const Options& opt, Context& ctx, bool require_validity = true) {
  GameConfig cfg = load_config(opt.config);
  ctx.hash = config_hash(cfg);
  if (require_validity) require_valid(cfg);
  return cfg;
}

Occupation initial_occupation(const Options& opt, const GameConfig& cfg) {
  if (opt.x0_file.empty()) return Occupation::uniform(cfg.n, cfg.m);
  return Occupation(io::read_state_row(opt.x0_file, cfg.n, cfg.m));
}

// Largest total outflow rate from any state, used to pick a stable default step.
double max_exit_rate(const GameConfig& cfg) {
  double worst = cfg.lambda;
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.m; ++j) {
      double r = cfg.lambda + cfg.q_up(i, j) + (cfg.q_sink ? cfg.q_sink->rates(i, j) : cfg.q_down(i, j));
      for (int k = 0; k < cfg.m; ++k) {
        r += cfg.delta_int * (cfg.q_up_evo(i, j, k) + cfg.q_down_evo(i, j, k));
        if (cfg.q_sink) r += cfg.delta_int * cfg.q_sink->evo(i, j, k);
      }
      worst = std::max(worst, r);
    }
  return worst;
}

int cmd_validate(const Options& opt, Context& ctx) {
  const GameConfig cfg = load_checked(opt, ctx, false);
  ctx.write_manifest();
  const auto violations = validate(cfg);
  json list = json::array();
  for (const auto& v : violations) list.push_back({{"field", v.field}, {"message", v.message}});
  io::write_json(ctx.out / "validation.json", {{"valid", violations.empty()}, {"violations", list}});
  ctx.summary = {{"valid", violations.empty()}, {"violations", list}};
  return violations.empty() ? kExitOk : kExitInvalid;
}

int cmd_stationary(const Options& opt, Context& ctx) {
  GameConfig cfg = load_config(opt.config);
  if (!opt.regime.empty() || opt.delta) {
    std::optional<Regime> regime = cfg.regime ? std::optional(cfg.regime->regime) : std::nullopt;
    if (!opt.regime.empty()) {
      regime = parse_regime(opt.regime);
      if (!regime) throw Failure(kExitInvalid, "unknown regime '" + opt.regime + "' (expected id1, id2 or id3)");
    }
    std::optional<double> delta = opt.delta;
    if (!delta && cfg.regime) delta = cfg.regime->delta;
    if (!regime || !delta) throw Failure(kExitInvalid, "stationary needs both a regime and delta");
    apply_regime(cfg, *regime, *delta);
  }
  ctx.hash = config_hash(cfg);
  ctx.write_manifest();
  require_valid(cfg);
  const StationarySolution sol = stationary_solution(cfg);

  const Matrix x = sol.density();
  json doc = {
      {"regime", to_string(sol.regime)},
      {"delta", sol.delta},
      {"delta_int", sol.delta_int},
      {"delta_dis", sol.delta_dis},
      {"dominant_level", sol.b + 1},
      {"x0", matrix_to_json(sol.x0)},
      {"x1", matrix_to_json(sol.x1)},
      {"x", matrix_to_json(x)},
      {"x_star_b", sol.x0(0, sol.b)},
      {"g0", matrix_to_json(sol.g0)},
      {"g1", matrix_to_json(sol.g1)},
      {"g", matrix_to_json(sol.g)},
      {"g_leading_b", sol.g0(0, sol.b) / sol.delta_dis},
      {"strategic_margin", sol.strategic_margin},
      {"consistency_margin", sol.consistency_margin},
      {"complement_sign", sol.complement_sign},
      {"g1_indicator_discrepancy", sol.g1_indicator_discrepancy},
      {"hjb_residual", sol.hjb_residual},
      {"kinetic_residual", sol.kinetic_residual},
  };
  if (sol.g2) doc["g2"] = matrix_to_json(*sol.g2);
  io::write_json(ctx.out / "stationary.json", doc);
  ctx.summary = {{"regime", to_string(sol.regime)},
                 {"delta", sol.delta},
                 {"dominant_level", sol.b + 1},
                 {"x_star_b", sol.x0(0, sol.b)},
                 {"g_leading_b", sol.g0(0, sol.b) / sol.delta_dis},
                 {"consistency_margin", sol.consistency_margin},
                 {"hjb_residual", sol.hjb_residual}};
  return kExitOk;
}

int cmd_stability(const Options& opt, Context& ctx) {
  const GameConfig cfg = load_checked(opt, ctx);
  ctx.write_manifest();

  Matrix x_ref = Matrix::Constant(cfg.n, cfg.m, 1.0 / (cfg.n * cfg.m));
  std::string reference = "uniform";
  if (cfg.regime && cfg.delta_int != 0.0) {
    try {
      x_ref = stationary_solution(cfg).density();
      reference = "stationary";
    } catch (const AssumptionError&) {
    }
  }
  const Matrix L = build_reduced_linearization(cfg, x_ref);
  const SpectrumReport rep = spectrum(L);
  const BlockComparison block = compare_last_block(cfg);

  json eig = json::array();
  for (const auto& ev : rep.eigenvalues) eig.push_back({ev.real(), ev.imag()});
  json mismatches = json::array();
  for (const auto& e : block.mismatches)
    mismatches.push_back({{"row", e.row}, {"col", e.col}, {"displayed", e.displayed}, {"derived", e.first_principles}});
  const json counts = {{"zero", rep.zero_count},
                       {"negative", rep.negative_count},
                       {"positive", rep.positive_count},
                       {"imaginary_axis", rep.imaginary_count},
                       {"null_space_dimension", rep.geometric_multiplicity_zero}};
  io::write_json(ctx.out / "stability.json",
                 {{"reference", reference},
                  {"dimension", rep.dimension()},
                  {"norm", rep.norm},
                  {"tol_zero", rep.tol_zero},
                  {"spectral_abscissa", rep.spectral_abscissa},
                  {"counts", counts},
                  {"eigenvalues", eig},
                  {"linearization", matrix_to_json(L)},
                  {"last_block", {{"displayed", matrix_to_json(block.displayed)},
                                  {"derived", matrix_to_json(block.first_principles)},
                                  {"max_abs_diff", block.max_abs_diff},
                                  {"mismatches", mismatches}}}});
  ctx.summary = {{"dimension", rep.dimension()}, {"counts", counts}, {"spectral_abscissa", rep.spectral_abscissa}};
  return kExitOk;
}

void write_controls_csv(const fs::path& path, const MfgSolveResult& res) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,i,j,target\n";
  for (std::size_t k = 0; k < res.controls.size(); ++k) {
    const Control& u = res.controls[k];
    for (int i = 0; i < u.levels(); ++i)
      for (int j = 0; j < u.behaviours(); ++j) {
        const int now = u.target(i, j);
        const int before = k == 0 ? Control::kStay : res.controls[k - 1].target(i, j);
        if (k == 0 ? now == Control::kStay : now == before) continue;
        out << io::format_double(res.times[k]) << ',' << i + 1 << ',' << j + 1 << ','
            << (now == Control::kStay ? 0 : now + 1) << '\n';
      }
  }
}

int cmd_solve(const Options& opt, Context& ctx) {
  const GameConfig cfg = load_checked(opt, ctx);
  ctx.write_manifest();
  if (cfg.is_sink_variant()) throw Failure(kExitInvalid, "solve: the sink variant has no payoff dynamics");
  const Occupation x0 = initial_occupation(opt, cfg);
  const Matrix gT = opt.gT_file.empty() ? Matrix::Zero(cfg.n, cfg.m) : io::read_state_row(opt.gT_file, cfg.n, cfg.m);
  const double T = opt.T ? *opt.T : default_horizon(cfg);
  const double dt = opt.dt ? *opt.dt : std::min(T / 1000.0, 0.1 / max_exit_rate(cfg));

  SolveOptions so;
  so.damping = opt.damping;
  so.max_iter = opt.max_iter;
  const MfgSolveResult res = solve_mfg(x0, gT, T, dt, cfg, so);
  const TurnpikeSummary tp = turnpike_metrics(res, cfg);

  io::write_trajectory_csv(ctx.out / "x.csv", res.times, res.x, "x");
  io::write_trajectory_csv(ctx.out / "g.csv", res.times, res.g, "g");
  write_controls_csv(ctx.out / "controls.csv", res);

  double cone_worst = -std::numeric_limits<double>::infinity();
  for (const auto& g : res.g) cone_worst = std::max(cone_worst, cone_check(g, cfg));
  json turnpike = {{"middle_sup", tp.middle_sup},
                   {"window", {tp.window_lo, tp.window_hi}},
                   {"plateau", tp.plateau},
                   {"switch_fraction", tp.switch_fraction},
                   {"max_ripple", tp.max_ripple}};
  if (tp.g_middle_sup) turnpike["g_middle_sup"] = *tp.g_middle_sup;
  const json summary = {{"status", to_string(res.status)},
                        {"converged", res.converged},
                        {"iterations", res.iterations},
                        {"last_change", res.last_change},
                        {"damping", res.damping},
                        {"T", T},
                        {"dt", res.dt()},
                        {"cone_worst", std::isfinite(cone_worst) ? json(cone_worst) : json(nullptr)},
                        {"cone_violations", res.cone_violations.size()},
                        {"x_ref", matrix_to_json(res.x_ref)},
                        {"turnpike", turnpike}};
  io::write_json(ctx.out / "summary.json", summary);
  ctx.summary = {{"status", to_string(res.status)},
                 {"iterations", res.iterations},
                 {"switch_fraction", tp.switch_fraction},
                 {"turnpike_middle_sup", tp.middle_sup}};
  if (!res.converged) throw Failure(kExitNumerical, "solve did not converge (" + to_string(res.status) + ")");
  return kExitOk;
}

int cmd_simulate(const Options& opt, Context& ctx) {
  const GameConfig cfg = load_checked(opt, ctx);
  ctx.write_manifest();
  const Occupation x0 = initial_occupation(opt, cfg);
  if (!opt.T || !(*opt.T > 0.0)) throw Failure(kExitInvalid, "simulate: --T must be positive");
  const double T = *opt.T;
  const double dt_out = opt.dt_out ? *opt.dt_out : T / 100.0;

  Policy policy = Policy::fixed(Control(cfg.n, cfg.m));
  if (!opt.payoff_file.empty()) {
    const auto table = io::read_trajectory_csv(opt.payoff_file, cfg.n, cfg.m);
    policy = Policy::from_payoff(table.times, table.states, cfg);
  }
  EnsembleOptions eo;
  eo.threads = opt.threads;
  eo.keep_paths = opt.per_rep;
  const EnsembleResult ens = run_ensemble(x0.matrix(), opt.N, policy, T, dt_out, opt.reps, opt.seed, cfg, eo);

  io::write_ensemble_csv(ctx.out / "aggregate.csv", ens.times, ens.mean, ens.std_error);
  if (opt.per_rep) {
    for (std::size_t r = 0; r < ens.paths.size(); ++r) {
      std::vector<Matrix> states;
      for (const auto& c : ens.paths[r].counts) states.push_back(c.cast<double>() / static_cast<double>(opt.N));
      char name[32];
      std::snprintf(name, sizeof name, "rep_%05zu.csv", r);
      io::write_trajectory_csv(ctx.out / "replications" / name, ens.paths[r].times, states, "x");
    }
  }
  json hashes = json::array();
  for (auto h : ens.hashes) hashes.push_back(fnv1a_hex(std::to_string(h)));
  io::write_json(ctx.out / "simulation.json", {{"rng", kRngName},
                                               {"seed", opt.seed},
                                               {"N", opt.N},
                                               {"replications", opt.reps},
                                               {"T", T},
                                               {"dt_out", dt_out},
                                               {"config_hash", ctx.hash},
                                               {"event_hashes", hashes},
                                               {"combined_hash", fnv1a_hex(std::to_string(ens.combined_hash))}});
  ctx.summary = {{"N", opt.N},
                 {"replications", opt.reps},
                 {"seed", opt.seed},
                 {"combined_hash", fnv1a_hex(std::to_string(ens.combined_hash))},
                 {"final_mean", matrix_to_json(ens.mean.back())}};
  return kExitOk;
}

std::string pointer_path(std::string param) {
  if (!param.empty() && param.front() == '/') return param;
  std::replace(param.begin(), param.end(), '.', '/');
  return "/" + param;
}

int cmd_sweep(const Options& opt, Context& ctx) {
  std::ifstream in(opt.config);
  if (!in) throw ConfigError("cannot open config file " + opt.config);
  std::ostringstream buf;
  buf << in.rdbuf();
  const GameConfig base = parse_config(buf.str(), opt.config);
  ctx.hash = config_hash(base);
  ctx.write_manifest();
  const json doc = json::parse(buf.str());

  json::json_pointer ptr;
  try {
    ptr = json::json_pointer(pointer_path(opt.param));
  } catch (const json::exception&) {
    throw Failure(kExitInvalid, "sweep: bad --param path '" + opt.param + "'");
  }
  if (!doc.contains(ptr)) throw Failure(kExitInvalid, "sweep: --param path '" + opt.param + "' not found in config");
  if (!doc.at(ptr).is_number()) throw Failure(kExitInvalid, "sweep: --param must name a number");
  if (opt.values.empty()) throw Failure(kExitInvalid, "sweep: --values is empty");

  struct Row {
    std::string status = "ok";
    std::string error;
    std::optional<StationarySolution> sol;
  };
  std::vector<Row> rows(opt.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < rows.size(); r = next++) {
      try {
        json d = doc;
        d[ptr] = opt.values[r];
        const GameConfig cfg = parse_config(d);
        require_valid(cfg);
        rows[r].sol = stationary_solution(cfg);
      } catch (const NumericalError& e) {
        rows[r] = {"numerical", e.what(), std::nullopt};
      } catch (const std::exception& e) {
        rows[r] = {"invalid", e.what(), std::nullopt};
      }
    }
  };
  const int threads = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1,
                                 static_cast<int>(rows.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  {
    std::ofstream csv(ctx.out / "sweep.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write sweep.csv");
    csv << "value,status,dominant_level,strategic_margin,consistency_margin,hjb_residual,kinetic_residual"
        << io::trajectory_header(base.n, base.m, "g").substr(1) << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
      csv << io::format_double(opt.values[r]) << ',' << rows[r].status;
      if (rows[r].sol) {
        const auto& s = *rows[r].sol;
        csv << ',' << s.b + 1 << ',' << io::format_double(s.strategic_margin) << ','
            << io::format_double(s.consistency_margin) << ',' << io::format_double(s.hjb_residual) << ','
            << io::format_double(s.kinetic_residual);
        for (int i = 0; i < s.g.rows(); ++i)
          for (int j = 0; j < s.g.cols(); ++j) csv << ',' << io::format_double(s.g(i, j));
      } else {
        for (int k = 0; k < 5 + base.n * base.m; ++k) csv << ',';
      }
      csv << '\n';
    }
  }
  json errors = json::array();
  int code = kExitOk;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].status == "ok") continue;
    errors.push_back({{"value", opt.values[r]}, {"status", rows[r].status}, {"error", rows[r].error}});
    code = std::max(code, rows[r].status == "numerical" ? kExitNumerical : kExitInvalid);
  }
  io::write_json(ctx.out / "sweep.json", {{"param", pointer_path(opt.param)}, {"values", opt.values}, {"errors", errors}});
  ctx.summary = {{"param", pointer_path(opt.param)}, {"points", rows.size()}, {"failures", errors.size()}};
  return code;
}

fs::path default_out_dir() {
  if (const char* env = std::getenv("MFG_OUT"); env && *env) return env;
  return "out";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-state mean-field game engine", "mfg"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config, "Config JSON file")->required();
    sub->add_option("--out", opt.out_dir, "Output directory (default ./out or $MFG_OUT)");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a config and list violations");
  common(validate_cmd);

  auto* stationary_cmd = app.add_subcommand("stationary", "Stationary solution of the expansion");
  common(stationary_cmd);
  stationary_cmd->add_option("--regime", opt.regime, "id1, id2 or id3");
  stationary_cmd->add_option("--delta", opt.delta, "Small parameter")->check(CLI::PositiveNumber);

  auto* stability_cmd = app.add_subcommand("stability", "Spectrum of the reduced linearization");
  common(stability_cmd);

  auto* solve_cmd = app.add_subcommand("solve", "Time-dependent forward-backward solve");
  common(solve_cmd);
  solve_cmd->add_option("--T", opt.T, "Horizon (default 50 / smallest positive rate)")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--dt", opt.dt, "Time step")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--x0", opt.x0_file, "Initial occupation, one CSV row")->check(CLI::ExistingFile);
  solve_cmd->add_option("--gT", opt.gT_file, "Terminal payoff, one CSV row")->check(CLI::ExistingFile);
  solve_cmd->add_option("--damping", opt.damping, "Initial damping in (0, 1]")->check(CLI::Range(1e-6, 1.0));
  solve_cmd->add_option("--max-iter", opt.max_iter, "Iteration cap")->check(CLI::PositiveNumber);

  auto* simulate_cmd = app.add_subcommand("simulate", "Finite-N stochastic simulation");
  common(simulate_cmd);
  simulate_cmd->add_option("--N", opt.N, "Agents")->required()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--T", opt.T, "Horizon")->required()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--reps", opt.reps, "Replications")->required()->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", opt.seed, "Base seed; replication r uses seed + r")->required();
  simulate_cmd->add_option("--dt-out", opt.dt_out, "Output spacing (default T / 100)")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--x0", opt.x0_file, "Initial occupation, one CSV row")->check(CLI::ExistingFile);
  simulate_cmd->add_option("--payoff", opt.payoff_file, "Payoff trajectory CSV defining the policy")
      ->check(CLI::ExistingFile);
  simulate_cmd->add_flag("--per-rep", opt.per_rep, "Also write one CSV per replication");
  simulate_cmd->add_option("--threads", opt.threads, "Worker threads (default all cores)")->check(CLI::NonNegativeNumber);

  auto* sweep_cmd = app.add_subcommand("sweep", "Stationary solution over a parameter list");
  common(sweep_cmd);
  sweep_cmd->add_option("--param", opt.param, "JSON pointer or dotted path, e.g. scales.delta")->required();
  sweep_cmd->add_option("--values", opt.values, "Values, comma separated")->required()->delimiter(',');

  Context ctx;
  ctx.command_line.push_back("mfg");
  ctx.command_line.insert(ctx.command_line.end(), args.begin(), args.end());

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mfg: " << e.what() << '\n';
    out << json{{"command", nullptr}, {"status", "error"}, {"exit_code", kExitInvalid}, {"error", e.what()}}.dump()
        << '\n';
    return kExitInvalid;
  }

  CLI::App* chosen = app.get_subcommands().front();
  ctx.command = chosen->get_name();
  ctx.out = opt.out_dir.empty() ? default_out_dir() : fs::path(opt.out_dir);

  int code = kExitOk;
  std::string error;
  try {
    fs::create_directories(ctx.out);
    if (ctx.command == "validate") code = cmd_validate(opt, ctx);
    else if (ctx.command == "stationary") code = cmd_stationary(opt, ctx);
    else if (ctx.command == "stability") code = cmd_stability(opt, ctx);
    else if (ctx.command == "solve") code = cmd_solve(opt, ctx);
    else if (ctx.command == "simulate") code = cmd_simulate(opt, ctx);
    else if (ctx.command == "sweep") code = cmd_sweep(opt, ctx);
  } catch (const Failure& e) {
    code = e.code();
    error = e.what();
  } catch (const ConfigError& e) {
    code = kExitInvalid;
    error = e.what();
  } catch (const AssumptionError& e) {
    code = kExitInvalid;
    error = e.what();
  } catch (const std::invalid_argument& e) {
    code = kExitInvalid;
    error = e.what();
  } catch (const NumericalError& e) {
    code = kExitNumerical;
    error = e.what();
  } catch (const std::exception& e) {
    code = kExitNumerical;
    error = e.what();
  }

  json summary = {{"command", ctx.command}, {"status", code == kExitOk ? "ok" : "error"}, {"exit_code", code},
                  {"out", ctx.out.string()}, {"config_hash", ctx.hash}};
  if (!error.empty()) {
    summary["error"] = error;
    err << "mfg " << ctx.command << ": " << error << '\n';
  }
  for (auto& [k, v] : ctx.summary.items()) summary[k] = v;
  out << summary.dump() << '\n';
  return code;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mfg::cli
