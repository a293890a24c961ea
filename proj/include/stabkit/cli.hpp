#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gramian.hpp"
#include "io.hpp"
#include "models.hpp"
#include "pipeline.hpp"

namespace stabkit {

// ---------------------------------------------------------------------------
// One process = one command.  All knobs live in a flat RunConfig so the same
// keys work as command-line flags and as `key=value` lines in --config files
// (flags take precedence).  Exit codes: 0 pass, 2 analysis-negative, 1
// operational error, 64 usage.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string command;
  std::string system_path;    // structured-text system file
  std::string model;          // inline source: heat | fractional
  int heat_modes = 16;        // --N
  int n_grid = 64;
  double s = 0.5;
  std::string mask = "half";  // full | empty | half | RLE | 0/1 string
  double amplitude = 1.0;
  bool keep_zero_mode = false;
  double alpha = 1.0;
  double mu = -1.0;           // <= 0: use alpha + 1
  double horizon = -1.0;      // <= 0: use 12 / alpha
  double dt = -1.0;           // <= 0: use horizon / 400
  int re_points = 9;
  int im_points = 41;
  double imag_bound = -1.0;   // <= 0: automatic
  double d2 = 2.0;
  double cutoff = 4.0;        // band limit for the restriction probe
  double thick_eps = 0.5;
  double thick_len = kPi;
  double tol = 1e-8;          // re-verification slack for constants
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = ".";
};

namespace detail {

inline std::string join_path(const std::string& dir, const char* name) {
  if (dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

inline void emit(const std::string& dir, const char* name,
                 const std::string& body) {
  write_text_file(join_path(dir, name), body);
}

inline SweepGrid grid_from(const RunConfig& cfg) {
  SweepGrid grid;
  grid.re_points = cfg.re_points;
  grid.im_points = cfg.im_points;
  grid.imag_bound = cfg.imag_bound;
  return grid;
}

inline ControlSystem load_system(const RunConfig& cfg, TextReport& report) {
  if (!cfg.system_path.empty()) {
    report.add("source", cfg.system_path);
    return read_system_file(cfg.system_path);
  }
  if (cfg.model == "heat") {
    const HeatDirichletModel model = build_heat_dirichlet(cfg.heat_modes);
    report.add("source", "model heat");
    report.add("modes", model.N);
    return model.sys;
  }
  if (cfg.model == "fractional") {
    const std::vector<bool> mask = parse_mask(cfg.mask, cfg.n_grid);
    const FractionalThickModel model = build_fractional_model(
        cfg.n_grid, cfg.s, mask,
        RealVec::Constant(cfg.n_grid, cfg.amplitude));
    report.add("source", "model fractional");
    report.add("n_grid", model.n_grid);
    report.add("s", model.s);
    report.add("mask", mask_rle(mask));
    const bool masked = model.a_floor > 0.0;
    const bool deflate = !cfg.keep_zero_mode && cfg.s > 0.0 && masked;
    report.add("zero_mode_deflated", deflate);
    if (deflate) return deflate_zero_mode(model);
    return model.sys;
  }
  throw InvalidArgument(
      "no system source: pass --system FILE or --model heat|fractional");
}

inline int finish(const RunConfig& cfg, TextReport& report, std::ostream& out,
                  bool pass) {
  report.add("verdict", pass ? "pass" : "negative");
  const std::string body = report.str();
  emit(cfg.out_dir, "report.txt", body);
  out << body;
  return pass ? 0 : 2;
}

inline int cmd_audit(const RunConfig& cfg, std::ostream& out) {
  TextReport report;
  report.add("command", "audit");
  report.add("alpha", cfg.alpha);
  const ControlSystem sys = load_system(cfg, report);
  const AuditReport audit = equivalence_audit(sys, cfg.alpha, grid_from(cfg));
  report.add("hautus_min_margin", audit.hautus.min_margin);
  report.add("hautus_C_alpha", audit.hautus.C_alpha);
  report.add("hautus_positive", audit.hautus_positive);
  report.add("worst_lambda", audit.hautus.worst_lambda);
  report.add("pbh_pass", audit.pbh_pass);
  report.add("pipeline_ok", audit.pipeline_ok);
  if (!audit.pipeline_note.empty())
    report.add("pipeline_note", audit.pipeline_note);
  report.add("closed_loop_abscissa", audit.closed_loop_abscissa);
  report.add("consistent", audit.consistent);
  if (!audit.pbh.failures.empty()) {
    report.add("witness_lambda", audit.pbh.failures.front().lambda);
    report.add_vector("witness", audit.pbh.failures.front().witness);
    report.add("witness_alignment", audit.witness_alignment);
  }
  std::ostringstream csv;
  write_margins_csv(csv, audit.hautus);
  emit(cfg.out_dir, "margins.csv", csv.str());
  const int code = finish(cfg, report, out, audit.hautus_positive);
  if (!audit.consistent)
    throw Error("audit: the three criteria disagree; see report.txt");
  return code;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  TextReport report;
  report.add("command", "sweep");
  report.add("alpha", cfg.alpha);
  const ControlSystem sys = load_system(cfg, report);
  const HautusReport hr = sweep_halfplane(sys, cfg.alpha, grid_from(cfg));
  report.add("grid_points", static_cast<int>(hr.grid.size()));
  report.add("min_margin", hr.min_margin);
  report.add("C_alpha", hr.C_alpha);
  report.add("threshold", hr.threshold);
  report.add("worst_lambda", hr.worst_lambda);
  report.add("positive", hr.positive);
  if (!hr.positive && hr.worst_witness.size() > 0)
    report.add_vector("witness", hr.worst_witness);
  std::ostringstream csv;
  write_margins_csv(csv, hr);
  emit(cfg.out_dir, "margins.csv", csv.str());
  return finish(cfg, report, out, hr.positive);
}

inline int run_synthesis(const RunConfig& cfg, std::ostream& out,
                         bool custom_trajectory) {
  TextReport report;
  report.add("command", custom_trajectory ? "simulate" : "synthesize");
  report.add("alpha", cfg.alpha);
  report.add("seed", std::to_string(cfg.seed));
  const ControlSystem sys = load_system(cfg, report);
  try {
    const StabilizeReport rep = stabilize(sys, cfg.alpha, cfg.seed, cfg.mu);
    report.add("mu", rep.mu);
    report.add("alpha_split", rep.alpha_split);
    report.add("shifted_realization", rep.shifted_realization);
    report.add("unstable_dim", static_cast<int>(rep.feedback.pair.dim_H1));
    report.add("gain_norm", rep.gain_norm);
    report.add("closed_loop_abscissa", rep.closed_loop_abscissa);
    report.add("split_certified", rep.split_check.pass());
    bool pass = rep.success;

    Trajectory traj = rep.trajectory;
    if (custom_trajectory) {
      const double horizon = cfg.horizon > 0.0 ? cfg.horizon : 12.0 / cfg.alpha;
      const double dt = cfg.dt > 0.0 ? cfg.dt : horizon / 400.0;
      Rng rng(cfg.seed);
      const Vec y0 = rng.unit_vector(sys.n());
      traj = simulate_closed_loop(sys, rep.K, y0, horizon, dt, cfg.seed);
      report.add("horizon", horizon);
      report.add("dt", dt);
      const L2Certificate l2 = certify_l2(traj);
      report.add("l2_bounded", l2.in_l2);
      report.add("l2_tail_ratio", l2.tail_ratio);
      pass = pass && l2.in_l2;
    } else {
      report.add("l2_bounded", rep.l2.in_l2);
      report.add("l2_tail_ratio", rep.l2.tail_ratio);
      std::ostringstream gain;
      write_matrix_csv(gain, rep.K);
      emit(cfg.out_dir, "gain.csv", gain.str());
    }
    report.add("fitted_rate", traj.fitted_rate);
    report.add("l2_estimate", traj.l2_estimate);
    report.add("duhamel_residual", traj.duhamel_residual);
    std::ostringstream decay;
    write_decay_csv(decay, traj);
    emit(cfg.out_dir, "decay.csv", decay.str());
    return finish(cfg, report, out, pass);
  } catch (const ProjectedPairUncontrollable& e) {
    report.add("error", e.what());
    report.add("witness_lambda", e.lambda);
    return finish(cfg, report, out, false);
  }
}

inline int cmd_constants(const RunConfig& cfg, std::ostream& out) {
  TextReport report;
  report.add("command", "constants");
  report.add("alpha", cfg.alpha);
  report.add("D2_target", cfg.d2);
  const ControlSystem sys = load_system(cfg, report);
  const WorkPair w = work_realization(sys);
  report.add("shifted_realization", w.shifted);
  const double T = std::min(1.0, 4.0 / (1.0 + opnorm(w.A)));
  const ControllabilityCheck cc = check_exact_controllability(w.A, w.B, T);
  report.add("controllability_horizon", T);
  report.add("controllability_margin", cc.margin);
  if (!cc.controllable) {
    report.add("error", "pair is not exactly controllable at desk precision");
    return finish(cfg, report, out, false);
  }
  try {
    const ObservabilityConstants c =
        estimate_observability_constants(w.A, w.B, cfg.alpha, cfg.d2);
    verify_observability_constants(w.A, w.B, c, 4, 64, cfg.seed + 1, cfg.tol);
    report.add("D1", c.D1);
    report.add("D2", c.D2);
    report.add("T_max", c.T_max);
    report.add("reverified", true);
    return finish(cfg, report, out, true);
  } catch (const ConstantsNotCertified& e) {
    report.add("error", e.what());
    return finish(cfg, report, out, false);
  }
}

inline int cmd_model(const RunConfig& cfg, std::ostream& out) {
  TextReport report;
  report.add("command", "model");
  const std::string path = join_path(cfg.out_dir, "system.txt");
  if (cfg.model == "heat") {
    const HeatDirichletModel model = build_heat_dirichlet(cfg.heat_modes);
    report.add("model", "heat");
    report.add("modes", model.N);
    report.add("gamma", model.gamma_declared);
    report.add("rho0", model.sys.rho0);
    report.add("control_norm", model.b.norm());
    write_system_file(path, model.sys);
  } else if (cfg.model == "fractional") {
    const std::vector<bool> mask = parse_mask(cfg.mask, cfg.n_grid);
    const FractionalThickModel model = build_fractional_model(
        cfg.n_grid, cfg.s, mask,
        RealVec::Constant(cfg.n_grid, cfg.amplitude));
    report.add("model", "fractional");
    report.add("n_grid", model.n_grid);
    report.add("s", model.s);
    report.add("mask", mask_rle(mask));
    report.add("a_floor", model.a_floor);
    report.add("thick_eps", cfg.thick_eps);
    report.add("thick_L", cfg.thick_len);
    report.add("thick", thickness_check(mask, {cfg.thick_eps, cfg.thick_len}));
    report.add("cutoff", cfg.cutoff);
    report.add("restriction_constant",
               spectral_inequality_probe(mask, cfg.cutoff));
    report.add("hautus_bound", fractional_hautus_bound(cfg.s, cfg.alpha));
    report.add("hautus_bound_alpha", cfg.alpha);
    write_system_file(path, model.sys);
  } else {
    throw InvalidArgument("model: pass heat or fractional");
  }
  report.add("system_file", path);
  return finish(cfg, report, out, true);
}

}  // namespace detail

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::string stage = "setup";
  try {
    if (!cfg.out_dir.empty() && cfg.out_dir != ".")
      std::filesystem::create_directories(cfg.out_dir);
    stage = cfg.command;
    if (cfg.command == "audit") return detail::cmd_audit(cfg, out);
    if (cfg.command == "sweep") return detail::cmd_sweep(cfg, out);
    if (cfg.command == "synthesize")
      return detail::run_synthesis(cfg, out, false);
    if (cfg.command == "simulate") return detail::run_synthesis(cfg, out, true);
    if (cfg.command == "constants") return detail::cmd_constants(cfg, out);
    if (cfg.command == "model") return detail::cmd_model(cfg, out);
    err << "stabkit: unknown command '" << cfg.command << "'\n";
    return 64;
  } catch (const ParseError& e) {
    err << "stabkit [" << stage << "]: " << e.what() << '\n';
    return 1;
  } catch (const ProjectedPairUncontrollable& e) {
    err << "stabkit [" << stage << "]: " << e.what() << '\n';
    return 2;
  } catch (const ConstantsNotCertified& e) {
    err << "stabkit [" << stage << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "stabkit [" << stage << "]: " << e.what() << '\n';
    return 1;
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"stabilizability analysis and bounded-feedback synthesis for "
               "finite truncations of linear control systems",
               "stabkit"};
  app.set_config("--config", "",
                 "configuration file with key=value lines; flags override");
  app.add_option("--system", cfg.system_path,
                 "structured-text system file (stabkit-system v1)");
  app.add_option("--model", cfg.model, "inline system source: heat | fractional");
  app.add_option("--N", cfg.heat_modes, "heat model: number of sine modes");
  app.add_option("--n-grid", cfg.n_grid,
                 "fractional model: torus grid size (power of two)");
  app.add_option("--s", cfg.s, "fractional model: Laplacian exponent in [0,1)");
  app.add_option("--mask", cfg.mask,
                 "fractional model mask: full|empty|half, RLE (32x1,32x0), or 0/1 string");
  app.add_option("--amplitude", cfg.amplitude,
                 "fractional model: multiplier amplitude on the mask");
  app.add_flag("--keep-zero-mode", cfg.keep_zero_mode,
               "fractional model: keep the constant Fourier mode in analyses");
  app.add_option("--alpha", cfg.alpha, "decay level alpha > 0");
  app.add_option("--mu", cfg.mu, "synthesis target rate (default alpha + 1)");
  app.add_option("--horizon", cfg.horizon, "simulation horizon (default 12/alpha)");
  app.add_option("--dt", cfg.dt, "simulation step (default horizon/400)");
  app.add_option("--re-points", cfg.re_points, "sweep grid: real-axis points");
  app.add_option("--im-points", cfg.im_points, "sweep grid: imaginary-axis points");
  app.add_option("--imag-bound", cfg.imag_bound,
                 "sweep grid: imaginary half-width (default automatic)");
  app.add_option("--d2", cfg.d2, "observability constant D2 target (> 1)");
  app.add_option("--cutoff", cfg.cutoff, "restriction probe band limit R < n/2");
  app.add_option("--thick-eps", cfg.thick_eps, "thickness fraction in (0, 1]");
  app.add_option("--thick-L", cfg.thick_len, "thickness window length");
  app.add_option("--tol", cfg.tol, "re-verification relative slack");
  app.add_option("--seed", cfg.seed, "deterministic seed for probes and runs");
  app.add_option("--out", cfg.out_dir, "output directory for artifacts")
      ->envname("STABKIT_OUTDIR");

  app.add_subcommand("audit", "run the sweep/PBH/pipeline equivalence audit")
      ->fallthrough();
  app.add_subcommand("sweep", "sample Hautus margins over a half-plane grid")
      ->fallthrough();
  app.add_subcommand("synthesize", "synthesize a bounded stabilizing feedback")
      ->fallthrough();
  app.add_subcommand("simulate", "simulate the synthesized closed loop")
      ->fallthrough();
  CLI::App* model_cmd =
      app.add_subcommand("model", "build and export a bundled model");
  model_cmd->fallthrough();
  model_cmd->add_option("which", cfg.model, "heat | fractional");
  app.add_subcommand("constants", "estimate and certify observability constants")
      ->fallthrough();
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 64;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return 64;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  return run(cfg, out, err);
}

}  // namespace stabkit
