// Command line interface for the cutoff laboratory.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 invariant violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cutoff/csv.hpp"
#include "cutoff/density.hpp"
#include "cutoff/experiments.hpp"
#include "cutoff/runner.hpp"
#include "cutoff/version.hpp"

namespace {

using namespace cutoff;

std::string read_model_arg(const std::string& arg) {
  if (!arg.empty() && arg[0] == '@') {
    std::ifstream f(arg.substr(1));
    if (!f) throw ConfigError("cannot open model file " + arg.substr(1));
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  }
  return arg;
}

std::vector<double> linspace_grid(double lo, double hi, double step) {
  std::vector<double> out;
  if (!(step > 0.0) || hi < lo) throw ConfigError("bad c grid range");
  for (double c = lo; c <= hi + 1e-12; c += step) out.push_back(c);
  return out;
}

Eigen::VectorXd parse_x0(const std::vector<double>& values, int dim) {
  if (static_cast<int>(values.size()) != dim)
    throw ConfigError("x0 dimension does not match the model");
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = values[i];
  return x;
}

void write_profile_like_csv(const std::string& path, double epsilon,
                            const ProfileCurve& curve,
                            const std::vector<double>& g_values) {
  CsvWriter csv(path, {"epsilon", "c", "t", "distance", "stderr", "G"});
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    csv.field(epsilon).field(p.c).field(p.t).field(p.distance).field(p.std_error)
       .field(g_values[i]);
    csv.end_row();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cutoff: exact and simulated cutoff profiles for small-noise "
               "coercive diffusions"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // Shared options.
  std::string model_arg = R"({"kind":"ou-diagonal","rates":[1.0]})";
  std::vector<double> x0_arg{1.0};
  std::string out_file = "out.csv";
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  int workers = 1;

  auto add_model_opts = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_arg, "model JSON (or @file)");
    cmd->add_option("--x0", x0_arg, "initial condition");
    cmd->add_option("--out", out_file, "output CSV path");
  };

  // validate-lemmas
  auto* lemmas = app.add_subcommand("validate-lemmas",
                                    "randomized Gaussian TV identity suite");
  int lemma_cases = 100;
  std::uint64_t lemma_seed = 1;
  lemmas->add_option("--cases", lemma_cases, "number of randomized cases");
  lemmas->add_option("--seed", lemma_seed, "RNG seed");
  lemmas->add_option("--workers", workers, "worker threads");

  // semiflow
  auto* semiflow_cmd = app.add_subcommand("semiflow", "integrate dx = -grad V");
  double t_end = 10.0;
  double step = 0.0;
  add_model_opts(semiflow_cmd);
  semiflow_cmd->add_option("--t-end", t_end, "integration horizon");
  semiflow_cmd->add_option("--step", step, "RK4 step (0 = automatic)");

  // lyapunov
  auto* lyap_cmd = app.add_subcommand("lyapunov", "covariance matrix ODE");
  std::string mode_arg = "along-flow";
  double lyap_t_end = 0.0;
  add_model_opts(lyap_cmd);
  lyap_cmd->add_option("--epsilon", epsilon, "noise intensity");
  lyap_cmd->add_option("--mode", mode_arg, "frozen | along-flow");
  lyap_cmd->add_option("--t-end", lyap_t_end, "horizon (0 = 20/delta)");

  // profile
  auto* profile_cmd = app.add_subcommand("profile", "limit profile G_{x0}(c)");
  double c_min = -3.0, c_max = 3.0, c_step = 0.5;
  add_model_opts(profile_cmd);
  profile_cmd->add_option("--c-min", c_min);
  profile_cmd->add_option("--c-max", c_max);
  profile_cmd->add_option("--c-step", c_step);

  // curve
  auto* curve_cmd = app.add_subcommand("curve", "distance curve d^eps(t*(c))");
  std::string method_arg = "exact";
  int fp_cells = 2048;
  int kde_paths = 100000;
  add_model_opts(curve_cmd);
  curve_cmd->add_option("--method", method_arg, "exact | fp | kde");
  curve_cmd->add_option("--epsilon", epsilon, "noise intensity");
  curve_cmd->add_option("--c-min", c_min);
  curve_cmd->add_option("--c-max", c_max);
  curve_cmd->add_option("--c-step", c_step);
  curve_cmd->add_option("--fp-cells", fp_cells, "Fokker-Planck grid cells");
  curve_cmd->add_option("--kde-paths", kde_paths, "paths for the KDE law");
  curve_cmd->add_option("--seed", seed);
  curve_cmd->add_option("--workers", workers);

  // moments
  auto* moments_cmd = app.add_subcommand("moments", "moment bound verdicts");
  int paths = 10000;
  double moments_t_end = 5.0;
  add_model_opts(moments_cmd);
  moments_cmd->add_option("--epsilon", epsilon);
  moments_cmd->add_option("--paths", paths);
  moments_cmd->add_option("--t-end", moments_t_end);
  moments_cmd->add_option("--seed", seed);
  moments_cmd->add_option("--workers", workers);

  // truncation
  auto* trunc_cmd = app.add_subcommand("truncation", "truncation comparison");
  std::vector<double> m_list{3.0, 5.0};
  add_model_opts(trunc_cmd);
  trunc_cmd->add_option("--epsilon", epsilon);
  trunc_cmd->add_option("--M", m_list, "truncation radii");
  trunc_cmd->add_option("--paths", paths);
  trunc_cmd->add_option("--seed", seed);
  trunc_cmd->add_option("--workers", workers);

  // rotating
  auto* rot_cmd = app.add_subcommand("rotating", "non-symmetric rotating case");
  double rot_a = 1.0, rot_b = 1.0;
  rot_cmd->add_option("--a", rot_a, "radial rate (a > 0)");
  rot_cmd->add_option("--b", rot_b, "rotation rate");
  rot_cmd->add_option("--x0", x0_arg, "initial condition (2D)");
  rot_cmd->add_option("--epsilon", epsilon);
  rot_cmd->add_option("--c-min", c_min);
  rot_cmd->add_option("--c-max", c_max);
  rot_cmd->add_option("--c-step", c_step);
  rot_cmd->add_option("--out", out_file, "output CSV path");

  // run
  auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
  std::string config_path;
  int workers_override = 0;
  run_cmd->add_option("config", config_path, "config JSON path")->required();
  run_cmd->add_option("--workers", workers_override, "override config workers");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*lemmas) {
      const IdentityReport rep =
          verify_gaussian_identities(lemma_seed, lemma_cases, workers);
      std::cout << rep.summary() << "\n";
      return 0;
    }

    if (*semiflow_cmd) {
      const PotentialModel model = parse_model_json(read_model_arg(model_arg));
      const Eigen::VectorXd x0 = parse_x0(x0_arg, model.dim());
      StepControl sc;
      sc.h = step;
      const SemiflowResult flow = integrate_semiflow(model, x0, t_end, sc);
      std::vector<std::string> header{"t"};
      for (int i = 0; i < model.dim(); ++i) header.push_back("x_" + std::to_string(i));
      CsvWriter csv(out_file, header);
      for (int k = 0; k < flow.times.size(); ++k) {
        csv.field(flow.times(k));
        for (int i = 0; i < model.dim(); ++i) csv.field(flow.states[k](i));
        csv.end_row();
      }
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*lyap_cmd) {
      const PotentialModel model = parse_model_json(read_model_arg(model_arg));
      const Eigen::VectorXd x0 = parse_x0(x0_arg, model.dim());
      const double horizon =
          lyap_t_end > 0.0 ? lyap_t_end : 20.0 / model.declared_delta();
      LyapunovMode mode;
      if (mode_arg == "frozen") mode = LyapunovMode::Frozen;
      else if (mode_arg == "along-flow") mode = LyapunovMode::AlongFlow;
      else throw ConfigError("unknown lyapunov mode '" + mode_arg + "'");
      const LyapunovSolution sol = integrate_lyapunov(
          model, epsilon, horizon, mode,
          mode == LyapunovMode::AlongFlow ? std::optional(x0) : std::nullopt);
      std::vector<std::string> header{"t"};
      for (int i = 0; i < model.dim(); ++i)
        for (int j = 0; j < model.dim(); ++j)
          header.push_back("entry_" + std::to_string(i) + std::to_string(j));
      CsvWriter csv(out_file, header);
      for (int k = 0; k < sol.times.size(); ++k) {
        csv.field(sol.times(k));
        for (int i = 0; i < model.dim(); ++i)
          for (int j = 0; j < model.dim(); ++j) csv.field(sol.matrices[k](i, j));
        csv.end_row();
      }
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*profile_cmd) {
      const PotentialModel model = parse_model_json(read_model_arg(model_arg));
      const Eigen::VectorXd x0 = parse_x0(x0_arg, model.dim());
      const SpectralData spectral = spectral_at_origin(model);
      const AsymptoticDirection v = asymptotic_direction(model, x0, spectral);
      CsvWriter csv(out_file, {"c", "G"});
      for (double c : linspace_grid(c_min, c_max, c_step)) {
        csv.field(c).field(profile_G(spectral, v, c));
        csv.end_row();
      }
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*curve_cmd) {
      const PotentialModel model = parse_model_json(read_model_arg(model_arg));
      const Eigen::VectorXd x0 = parse_x0(x0_arg, model.dim());
      const std::vector<double> cs = linspace_grid(c_min, c_max, c_step);
      CurveControls ctrl;
      ctrl.fp_cells = fp_cells;
      ctrl.kde_paths = kde_paths;
      ctrl.seed = seed;
      ctrl.n_workers = workers;
      ProfileCurve curve;
      if (method_arg == "exact")
        curve = linearized_distance_curve(model, epsilon, x0, cs, ctrl);
      else if (method_arg == "fp")
        curve = nonlinear_distance_curve(model, epsilon, x0, cs,
                                         NonlinearMethod::FokkerPlanck, ctrl);
      else if (method_arg == "kde")
        curve = nonlinear_distance_curve(model, epsilon, x0, cs,
                                         NonlinearMethod::Kde, ctrl);
      else
        throw ConfigError("unknown curve method '" + method_arg + "'");

      const SpectralData spectral = spectral_at_origin(model);
      const AsymptoticDirection v = asymptotic_direction(model, x0, spectral);
      std::vector<double> g;
      for (const auto& p : curve.points) g.push_back(profile_G(spectral, v, p.c));
      write_profile_like_csv(out_file, epsilon, curve, g);
      for (const auto& s : curve.skipped)
        std::cerr << "warning: skipped c=" << s.c << " (" << s.reason << ")\n";
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*moments_cmd) {
      const PotentialModel model = parse_model_json(read_model_arg(model_arg));
      const Eigen::VectorXd x0 = parse_x0(x0_arg, model.dim());
      const TimeGrid grid = make_grid(model, epsilon, moments_t_end, x0.norm());
      const int stride = std::max(1, grid.n_steps / 100);
      const TrajectoryEnsemble ens = simulate_coupled_linearization(
          model, epsilon, x0, grid, paths, seed, workers, stride);
      StepControl sc;
      sc.h = grid.step();
      const SemiflowResult flow = integrate_semiflow(model, x0, grid.t_end, sc);
      const MomentReport rep = moment_report(ens, flow, {1, 2});
      CsvWriter csv(out_file, {"t", "n", "estimate", "stderr", "bound", "pass"});
      for (const auto& row : rep.rows) {
        csv.field(row.t).field(row.order).field(row.estimate).field(row.std_error)
           .field(row.bound).field(row.pass ? 1 : 0);
        csv.end_row();
      }
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*trunc_cmd) {
      const PotentialModel model = parse_model_json(read_model_arg(model_arg));
      if (model.dim() != 1) throw ConfigError("truncation requires a 1D model");
      const TruncationReport rep = truncation_comparison(
          model, m_list, epsilon, x0_arg.at(0), 0.0, paths, seed, 1.0 / 16.0,
          workers);
      CsvWriter csv(out_file, {"M", "stationary_tv", "exit_probability",
                               "exit_bound", "exits", "paths"});
      for (const auto& row : rep.rows) {
        csv.field(row.M).field(row.stationary_tv).field(row.exit_probability)
           .field(row.exit_bound).field(row.exits).field(row.paths);
        csv.end_row();
      }
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*rot_cmd) {
      if (x0_arg.size() != 2) throw ConfigError("rotating requires a 2D x0");
      Eigen::Vector2d x0(x0_arg[0], x0_arg[1]);
      const ProfileCurve curve = rotating_frame_curve(
          rot_a, rot_b, x0, epsilon, linspace_grid(c_min, c_max, c_step));
      std::vector<double> g;
      for (const auto& p : curve.points)
        g.push_back(rotating_profile_G(rot_a, x0, p.c));
      write_profile_like_csv(out_file, epsilon, curve, g);
      std::cout << "wrote " << out_file << "\n";
      return 0;
    }

    if (*run_cmd) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (workers_override > 0) {
        cfg.workers = workers_override;
        cfg.controls.n_workers = workers_override;
      }
      const RunManifest manifest = run_experiment(cfg);
      for (const auto& t : manifest.tasks) {
        std::cout << (t.ok ? "ok   " : "FAIL ") << t.name;
        if (!t.message.empty()) std::cout << " : " << t.message;
        std::cout << "\n";
      }
      if (!manifest.all_ok()) return 3;
      std::cout << "manifest: " << cfg.output_dir << "/manifest.json\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ConfigError::exit_code;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return InvariantError::exit_code;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return NumericError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
