// fastslow: command-line front end for the fast-slow toolkit.
//
//   simulate  run one pipeline and write its trajectory as CSV
//   sweep     eps sweep with fitted error slopes
//   stepsize  maximal step-size search for one pipeline and criterion
//   bench     step counts and wall times for a pair of step sizes
//   thermo    thermodynamic observables along a trajectory
//   check     resonance checks and the invariant suite
//
// Exit codes: 0 success, 1 failed check, 2 configuration error, 3 integration failure.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli_io.hpp"
#include "fastslow/analysis.hpp"
#include "fastslow/thermo.hpp"

using namespace fastslow;
using nlohmann::json;

namespace {

struct CheckFailed {
  std::vector<std::string> failed;
};

struct Common {
  std::string model = "builtin:test";
  std::string out;
  double T = 0.0;  // 0: the model's horizon
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--model", c.model, "builtin:test, builtin:constant, or a JSON model file")
      ->capture_default_str();
  auto* o = cmd->add_option("--out", c.out, "output path");
  if (out_required) o->required();
  cmd->add_option("--T", c.T, "time horizon (default: the model's T)");
}

double horizon(const Common& c, const ModelSpec& m) { return c.T > 0 ? c.T : m.T(); }

cli::RunManifest manifest(const std::string& command, const std::vector<std::string>& argv, const Common& c,
                          const ModelSpec& m, double T) {
  cli::RunManifest man;
  man.command = command;
  man.argv = argv;
  man.model_name = m.name();
  man.model_source = c.model;
  man.T = T;
  return man;
}

// Writes the JSON document to `out`, or stdout when `out` is empty.
void emit_json(const std::string& out, const json& doc, cli::RunManifest& man) {
  if (out.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  cli::write_text(out, doc.dump(2) + "\n");
  man.outputs.insert(man.outputs.begin(), out);
  cli::write_manifest(out, man);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common c;
  std::string pipeline = "full";
  double eps = 0.0, dt = 0.0, dt_out = 0.0;
  int stride = 1;
};

void cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const ModelSpec m = load_model(a.c.model);
  const double T = horizon(a.c, m);
  if (!(a.dt > 0)) throw Error(ErrorKind::InvalidArgument, "--dt must be positive");
  const bool needs_eps = a.pipeline != "homog";
  if (needs_eps && !(a.eps > 0)) throw Error(ErrorKind::InvalidArgument, "--eps must be positive for this pipeline");
  const double dt = adjusted_dt(T, a.dt);
  int stride = a.stride;
  if (a.dt_out > 0) {
    const double k = a.dt_out / dt;
    stride = static_cast<int>(std::lround(k));
    if (stride < 1 || std::abs(k - stride) > 1e-9 * k)
      throw Error(ErrorKind::InvalidArgument, "--dt-out must be a multiple of the adjusted dt");
  }
  if (a.pipeline == "full" && dt > a.eps)
    std::cerr << "warning: dt = " << dt << " exceeds eps = " << a.eps << "; step likely under-resolves fast phase\n";
  const RunConfig cfg{dt, T, stride};
  Trajectory traj;
  if (a.pipeline == "full")
    traj = run_full(m, a.eps, cfg);
  else if (a.pipeline == "homog")
    traj = run_homogenized(m, cfg);
  else if (a.pipeline == "second")
    traj = run_second(m, a.eps, cfg);
  else if (a.pipeline == "transformed")
    traj = run_transformed(m, a.eps, cfg);
  else
    throw Error(ErrorKind::InvalidArgument, "unknown pipeline '" + a.pipeline + "'");
  cli::write_csv(a.c.out, traj);
  auto man = manifest("simulate", argv, a.c, m, T);
  if (needs_eps) man.eps = {a.eps};
  man.dt = {{"requested", a.dt}, {"used", dt}, {"output", dt * stride}};
  man.outputs = {a.c.out};
  cli::write_manifest(a.c.out, man);
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  Common c;
  std::vector<double> eps = {0.125, 0.0625, 0.03125, 0.015625};
  DtPolicy policy;
  unsigned workers = 0;
};

void cmd_sweep(const SweepArgs& a, const std::vector<std::string>& argv) {
  const ModelSpec m = load_model(a.c.model);
  const double T = horizon(a.c, m);
  const SweepReport rep = eps_sweep(m, a.eps, T, a.policy, a.workers);
  auto man = manifest("sweep", argv, a.c, m, T);
  man.eps = rep.eps_values;
  man.dt = {{"dt_out", rep.dt_out}, {"c_full", a.policy.c_full}, {"c_slow", a.policy.c_slow}};
  if (!a.c.out.empty()) {
    Trajectory tbl;
    tbl.labels = {"dt_full", "dt_slow", "sup_error_leading", "sup_error_second"};
    tbl.states.resize(static_cast<Eigen::Index>(rep.eps_values.size()), 4);
    for (std::size_t i = 0; i < rep.eps_values.size(); ++i) {
      tbl.times.push_back(rep.eps_values[i]);
      tbl.states.row(i) << rep.dt_full[i], rep.dt_slow[i], rep.sup_errors_leading[i], rep.sup_errors_second[i];
    }
    // First column holds eps here; rename the header accordingly.
    std::string csv = cli::format_csv(tbl);
    csv.replace(0, 1, "eps");
    const std::string csv_path = a.c.out + ".csv";
    cli::write_text(csv_path, csv);
    man.outputs.push_back(csv_path);
    cli::write_manifest(csv_path, man);
  }
  if (rep.degenerate) std::cerr << "degenerate: below noise floor\n";
  emit_json(a.c.out, to_json(rep), man);
}

// ---------------------------------------------------------------------------

struct StepsizeArgs {
  Common c;
  double eps = 0.0;
  std::string pipeline = "full", criterion = "second";
  double threshold = 1.5;
  unsigned workers = 0;
};

Pipeline parse_pipeline(const std::string& s) {
  if (s == "full") return Pipeline::Full;
  if (s == "slow") return Pipeline::Slow;
  throw Error(ErrorKind::InvalidArgument, "pipeline must be full or slow");
}

Criterion parse_criterion(const std::string& s) {
  if (s == "leading") return Criterion::Leading;
  if (s == "second") return Criterion::Second;
  throw Error(ErrorKind::InvalidArgument, "criterion must be leading or second");
}

void cmd_stepsize(const StepsizeArgs& a, const std::vector<std::string>& argv) {
  const ModelSpec m = load_model(a.c.model);
  const double T = horizon(a.c, m);
  StepSizeOptions opts;
  opts.threshold_factor = a.threshold;
  opts.workers = a.workers;
  const StepSizeReport rep = stepsize_search(m, a.eps, parse_pipeline(a.pipeline), T, parse_criterion(a.criterion), opts);
  auto man = manifest("stepsize", argv, a.c, m, T);
  man.eps = {a.eps};
  man.dt = {{"dt_max", rep.dt_max}, {"dt_reference", rep.dt_reference}, {"dt_min", rep.dt_grid.front()},
            {"dt_top", rep.dt_grid.back()}};
  emit_json(a.c.out, to_json(rep), man);
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  Common c;
  double eps = 0.0, dt_full = 0.0, dt_slow = 0.0;
  int repeats = 3;
  bool counts_only = false;
};

void cmd_bench(const BenchArgs& a, const std::vector<std::string>& argv) {
  const ModelSpec m = load_model(a.c.model);
  const double T = horizon(a.c, m);
  double dt_full = a.dt_full, dt_slow = a.dt_slow;
  if (!(dt_full > 0)) dt_full = stepsize_search(m, a.eps, Pipeline::Full, T, Criterion::Second).dt_max;
  if (!(dt_slow > 0)) dt_slow = stepsize_search(m, a.eps, Pipeline::Slow, T, Criterion::Second).dt_max;
  const BenchReport rep =
      a.counts_only ? bench_counts(a.eps, T, dt_full, dt_slow) : bench(m, a.eps, T, dt_full, dt_slow, a.repeats);
  auto man = manifest("bench", argv, a.c, m, T);
  man.eps = {a.eps};
  man.dt = {{"dt_full", dt_full}, {"dt_slow", dt_slow}};
  emit_json(a.c.out, to_json(rep), man);
}

// ---------------------------------------------------------------------------

struct ThermoArgs {
  Common c;
  std::string in;
  std::string source = "second";
  double eps = 0.0, dt = 1.0 / 8192;
};

void cmd_thermo(const ThermoArgs& a, const std::vector<std::string>& argv) {
  const ModelSpec m = load_model(a.c.model);
  double T = horizon(a.c, m);
  Trajectory traj;
  std::string source = a.source;
  if (!a.in.empty()) {
    traj = cli::read_csv(a.in);
    source = traj.has("z1") ? "full" : traj.has("ybar21") ? "second" : "";
    if (source.empty()) throw Error(ErrorKind::InvalidArgument, "input CSV is neither a full nor a second-order trajectory");
    if (!traj.times.empty()) T = traj.times.back() - traj.times.front();
  } else {
    const RunConfig cfg{adjusted_dt(T, a.dt), T, 1};
    if (source == "full")
      traj = run_full(m, a.eps, cfg);
    else if (source == "second")
      traj = run_second(m, a.eps, cfg);
    else
      throw Error(ErrorKind::InvalidArgument, "source must be full or second");
  }
  if (source == "full" && !(a.eps > 0)) throw Error(ErrorKind::InvalidArgument, "--eps required for a full trajectory");

  json summary = {{"source", source}, {"rows", traj.rows()}};
  std::vector<ThermoRecord> rec;
  if (source == "full") {
    rec = thermo_series_full(m, traj, a.eps);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : rec) lo = std::min(lo, r.log_Gamma_eps - r.S_eps), hi = std::max(hi, r.log_Gamma_eps - r.S_eps);
    summary["log_Gamma_minus_S_spread"] = hi - lo;
  } else {
    const VectorXd C = second_order_initials(m).C;
    rec = thermo_series_second(m, traj, C);
    const ConstraintReport cr = verify_constraint(rec);
    summary["constraint"] = {{"max_abs", cr.max_abs}, {"t_at_max", cr.t_at_max}, {"at_t0", cr.at_t0},
                             {"tol", cr.tol}, {"pass", cr.pass}};
    const FirstLawReport fl = verify_first_law(rec, traj);
    summary["first_law"] = {{"max", fl.max}, {"mean", fl.mean}, {"dt_out", fl.dt_out}};
  }
  const std::string csv_path = a.c.out;
  cli::write_csv(csv_path, cli::thermo_table(rec));
  auto man = manifest("thermo", argv, a.c, m, T);
  if (a.eps > 0) man.eps = {a.eps};
  if (a.in.empty()) man.dt = {{"dt", adjusted_dt(T, a.dt)}};
  man.outputs = {csv_path};
  cli::write_manifest(csv_path, man);
  const std::string json_path = a.c.out + ".summary.json";
  man.outputs = {json_path, csv_path};
  emit_json(json_path, summary, man);
}

// ---------------------------------------------------------------------------

struct CheckArgs {
  Common c;
  double eps = 0.125;
  double dt = 1.0 / 8192;
};

void cmd_check(const CheckArgs& a, const std::vector<std::string>& argv) {
  const ModelSpec m = load_model(a.c.model);
  const double T = horizon(a.c, m);
  // Dyadic fraction of T, so the first-law check can halve the output spacing.
  const double dt = T / std::exp2(std::ceil(std::log2(T / a.dt) - 1e-9));
  json report = json::object();
  std::vector<std::string> failed;
  auto record = [&](const std::string& name, bool pass, json detail) {
    detail["pass"] = pass;
    report[name] = detail;
    if (!pass) failed.push_back(name);
  };

  const Trajectory hom = run_homogenized(m, RunConfig{dt, T, 1});
  for (int order : {2, 3}) {
    const ResonanceReport rr = check_resonance(m, hom, order);
    json crossings = json::array();
    for (const auto& c : rr.crossings)
      crossings.push_back({{"t", c.t}, {"gamma", std::vector<int>(c.gamma.data(), c.gamma.data() + c.gamma.size())},
                           {"rate", c.rate}});
    record("resonance_order_" + std::to_string(order), rr.pass,
           {{"global_min", rr.global_min}, {"t_global_min", rr.t_global_min}, {"tol", rr.tol}, {"crossings", crossings}});
  }

  const Trajectory full = run_full(m, a.eps, RunConfig{dt, T, 1});
  const Trajectory full_half = run_full(m, a.eps, RunConfig{dt / 2, T, 2});
  double round_trip = 0.0;
  for (Eigen::Index k = 0; k < full.rows(); ++k) {
    const FullState s = full_state_at(m, full, k);
    const FullState b = from_action_angle(m, to_action_angle(m, s, a.eps), a.eps);
    auto rel = [](const VectorXd& x, const VectorXd& y) {
      return ((x - y).array().abs() / x.array().abs().max(1.0)).maxCoeff();
    };
    round_trip = std::max({round_trip, rel(s.y, b.y), rel(s.ydot, b.ydot), rel(s.z, b.z), rel(s.zdot, b.zdot)});
  }
  record("transform_round_trip", round_trip <= 1e-12, {{"max_relative", round_trip}, {"tol", 1e-12}});

  auto drift = [&](const Trajectory& t) {
    const VectorXd E = energy_series(m, t, a.eps);
    return ((E.array() - E(0)).abs() / std::abs(E(0))).maxCoeff();
  };
  const double d1 = drift(full), d2 = drift(full_half);
  record("energy_drift_order", d1 / d2 >= 3.5, {{"drift_dt", d1}, {"drift_dt_half", d2}, {"shrink", d1 / d2}, {"min_shrink", 3.5}});

  SecondOrderInitials init;
  const Trajectory sec = run_second(m, a.eps, RunConfig{dt, T, 1}, &init);
  const auto rec = thermo_series_second(m, sec, init.C);
  const ConstraintReport cr = verify_constraint(rec, 1e-6);
  record("constraint_Ebar2", cr.pass, {{"max_abs", cr.max_abs}, {"t_at_max", cr.t_at_max}, {"tol", cr.tol}});

  double e0 = 0.0, thm = 0.0, constituent = 0.0;
  for (Eigen::Index k = 0; k < sec.rows(); ++k) {
    const ThermoRecord& r = rec[static_cast<std::size_t>(k)];
    e0 = std::max(e0, std::abs(r.E0_perp - r.E0_perp_from_entropy) / std::abs(r.E0_perp));
    const SlowState s = slow_state_at(m, sec, k);
    const double alt = ebar2_perp_from_entropy(m, s, r.Sbar2, s.ybar2);
    thm = std::max(thm, std::abs(r.Ebar2_perp - alt) / std::max(std::abs(r.Ebar2_perp), 1e-300));
    if (k % 256 == 0) constituent = std::max(constituent, verify_constituents(m, s, init.C, 1e-3).max_residual);
  }
  record("E0_perp_identity", e0 <= 1e-12, {{"max_relative", e0}, {"tol", 1e-12}});
  record("Ebar2_perp_identity", thm <= 1e-12, {{"max_relative", thm}, {"tol", 1e-12}});
  record("constituent_relations", constituent <= 1e-10, {{"max_relative", constituent}, {"tol", 1e-10}});

  const double r64 = verify_first_law(thermo_series_second(m, subsample(sec, T / 64), init.C), subsample(sec, T / 64)).max;
  const double r128 =
      verify_first_law(thermo_series_second(m, subsample(sec, T / 128), init.C), subsample(sec, T / 128)).max;
  const double q = r64 / r128;
  record("first_law_order", q >= 3.5 && q <= 4.5, {{"max_T_over_64", r64}, {"max_T_over_128", r128}, {"reduction", q}});

  auto man = manifest("check", argv, a.c, m, T);
  man.eps = {a.eps};
  man.dt = {{"dt", dt}};
  report["failed"] = failed;
  emit_json(a.c.out, report, man);
  if (!failed.empty()) throw CheckFailed{failed};
}

// Maps failures to exit codes, naming the command that failed.
int guarded(const std::string& name, const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const CheckFailed& f) {
    std::cerr << name << ": failed invariants:";
    for (const auto& s : f.failed) std::cerr << " " << s;
    std::cerr << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return e.is_config_error() ? 2 : 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fast-slow Hamiltonian toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);
  const std::vector<std::string> args(argv, argv + argc);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "run one pipeline and write a CSV trajectory");
  add_common(s, sim.c);
  s->add_option("--pipeline", sim.pipeline, "full, homog, second or transformed")
      ->check(CLI::IsMember({"full", "homog", "second", "transformed"}))
      ->capture_default_str();
  s->add_option("--eps", sim.eps, "scale separation");
  s->add_option("--dt", sim.dt, "step size (reduced so it divides T)")->required();
  s->add_option("--stride", sim.stride, "write every k-th step")->check(CLI::PositiveNumber);
  s->add_option("--dt-out", sim.dt_out, "output spacing (overrides --stride)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "eps sweep of leading and second-order errors");
  add_common(w, sw.c, false);
  w->add_option("--eps", sw.eps, "comma-separated, strictly decreasing")->delimiter(',');
  w->add_option("--c-full", sw.policy.c_full, "dt_full ~ c_full eps^3")->capture_default_str();
  w->add_option("--c-slow", sw.policy.c_slow, "dt_slow ~ c_slow eps^1.5")->capture_default_str();
  w->add_option("--dt-out", sw.policy.dt_out, "shared output spacing")->capture_default_str();
  w->add_option("--workers", sw.workers, "parallel jobs (0: available cores)");

  StepsizeArgs st;
  auto* z = app.add_subcommand("stepsize", "maximal step-size search");
  add_common(z, st.c, false);
  z->add_option("--eps", st.eps, "scale separation")->required();
  z->add_option("--pipeline", st.pipeline, "full or slow")->check(CLI::IsMember({"full", "slow"}))->capture_default_str();
  z->add_option("--criterion", st.criterion, "leading or second")
      ->check(CLI::IsMember({"leading", "second"}))
      ->capture_default_str();
  z->add_option("--threshold", st.threshold, "plateau threshold factor")->capture_default_str();
  z->add_option("--workers", st.workers, "parallel jobs (0: available cores)");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "step counts and wall times");
  add_common(b, be.c, false);
  b->add_option("--eps", be.eps, "scale separation")->required();
  b->add_option("--dt-full", be.dt_full, "full-pipeline step (default: searched)");
  b->add_option("--dt-slow", be.dt_slow, "slow-pipeline step (default: searched)");
  b->add_option("--repeats", be.repeats, "timing repeats (median)")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_flag("--counts-only", be.counts_only, "skip timing runs");

  ThermoArgs th;
  auto* t = app.add_subcommand("thermo", "thermodynamic observables along a trajectory");
  add_common(t, th.c);
  t->add_option("--in", th.in, "trajectory CSV from simulate (full or second)");
  t->add_option("--source", th.source, "pipeline to run when --in is absent: full or second")
      ->check(CLI::IsMember({"full", "second"}))
      ->capture_default_str();
  t->add_option("--eps", th.eps, "scale separation");
  t->add_option("--dt", th.dt, "step size")->capture_default_str();

  CheckArgs ck;
  auto* c = app.add_subcommand("check", "resonance checks and invariant suite");
  add_common(c, ck.c, false);
  c->add_option("--eps", ck.eps, "scale separation")->capture_default_str();
  c->add_option("--dt", ck.dt, "step size (rounded down to T / 2^k)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*s) return guarded("simulate", [&] { cmd_simulate(sim, args); });
  if (*w) return guarded("sweep", [&] { cmd_sweep(sw, args); });
  if (*z) return guarded("stepsize", [&] { cmd_stepsize(st, args); });
  if (*b) return guarded("bench", [&] { cmd_bench(be, args); });
  if (*t) return guarded("thermo", [&] { cmd_thermo(th, args); });
  if (*c) return guarded("check", [&] { cmd_check(ck, args); });
  return 2;
}
