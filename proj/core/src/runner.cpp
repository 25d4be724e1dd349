#include "cutoff/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cutoff/csv.hpp"
#include "cutoff/rng.hpp"
#include "cutoff/version.hpp"

namespace cutoff {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
  }
}

Eigen::VectorXd parse_vector(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty())
    throw ConfigError("config: " + where + " must be a non-empty array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError("config: " + where + " must be numeric");
    v(i) = arr[i].get<double>();
  }
  return v;
}

PotentialModel parse_model(const json& m) {
  if (!m.is_object() || !m.contains("kind"))
    throw ConfigError("config: model requires a 'kind' field");
  const std::string kind = m.at("kind").get<std::string>();
  if (kind == "ou-diagonal") {
    require_keys(m, {"kind", "rates"}, "model");
    return PotentialModel::ou_diagonal(parse_vector(m.at("rates"), "model.rates"));
  }
  if (kind == "quadratic") {
    require_keys(m, {"kind", "matrix"}, "model");
    const json& rows = m.at("matrix");
    if (!rows.is_array() || rows.empty())
      throw ConfigError("config: model.matrix must be an array of rows");
    const int n = static_cast<int>(rows.size());
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
      const json& row = rows[i];
      if (!row.is_array() || static_cast<int>(row.size()) != n)
        throw ConfigError("config: model.matrix must be square");
      for (int j = 0; j < n; ++j) a(i, j) = row[j].get<double>();
    }
    return PotentialModel::quadratic(a);
  }
  if (kind == "quartic-1d") {
    require_keys(m, {"kind", "a", "beta"}, "model");
    return PotentialModel::quartic_1d(m.at("a").get<double>(),
                                      m.at("beta").get<double>());
  }
  if (kind == "custom-polynomial") {
    require_keys(m, {"kind", "coefficients", "delta"}, "model");
    return PotentialModel::custom_poly_1d(
        parse_vector(m.at("coefficients"), "model.coefficients"),
        m.at("delta").get<double>());
  }
  if (kind == "truncated") {
    require_keys(m, {"kind", "base", "M"}, "model");
    return build_truncated_model(parse_model(m.at("base")), m.at("M").get<double>());
  }
  throw ConfigError("config: unknown model kind '" + kind + "'");
}

std::vector<double> parse_c_grid(const json& g) {
  std::vector<double> cs;
  if (g.is_array()) {
    for (const auto& v : g) cs.push_back(v.get<double>());
    return cs;
  }
  require_keys(g, {"min", "max", "step"}, "c_grid");
  const double lo = g.at("min").get<double>();
  const double hi = g.at("max").get<double>();
  const double step = g.at("step").get<double>();
  if (!(step > 0.0) || hi < lo) throw ConfigError("config: bad c_grid range");
  for (double c = lo; c <= hi + 1e-12; c += step) cs.push_back(c);
  return cs;
}

std::vector<double> default_c_grid() {
  std::vector<double> cs;
  for (double c = -3.0; c <= 3.0 + 1e-12; c += 0.5) cs.push_back(c);
  return cs;
}

}  // namespace

PotentialModel parse_model_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model JSON parse error: ") + e.what());
  }
  return parse_model(j);
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  require_keys(j,
               {"model", "x0", "epsilons", "c_grid", "gamma", "seed", "workers",
                "output_dir", "tasks", "solver", "moments", "truncation",
                "rotating", "lemmas", "semiflow", "lyapunov", "verdict"},
               "top level");

  ExperimentConfig cfg;
  try {
    if (!j.contains("model")) throw ConfigError("config: 'model' is required");
    cfg.model = parse_model(j.at("model"));
    if (j.contains("x0")) cfg.x0 = parse_vector(j.at("x0"), "x0");
    if (cfg.x0.size() != cfg.model.dim())
      throw ConfigError("config: x0 dimension does not match the model");
    if (j.contains("epsilons")) {
      cfg.epsilons.clear();
      for (const auto& e : j.at("epsilons")) {
        const double eps = e.get<double>();
        if (!(eps > 0.0) || eps >= 1.0)
          throw ConfigError("config: epsilons must lie in (0, 1)");
        cfg.epsilons.push_back(eps);
      }
      if (cfg.epsilons.empty()) throw ConfigError("config: epsilons must be non-empty");
    }
    cfg.c_grid = j.contains("c_grid") ? parse_c_grid(j.at("c_grid")) : default_c_grid();
    if (j.contains("gamma")) {
      cfg.gamma = j.at("gamma").get<double>();
      if (!(cfg.gamma > 0.0) || cfg.gamma > 0.25)
        throw ConfigError("config: gamma must lie in (0, 1/4]");
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) {
      cfg.workers = j.at("workers").get<int>();
      if (cfg.workers < 1 || cfg.workers > 64)
        throw ConfigError("config: workers must lie in [1, 64]");
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("tasks")) {
      for (const auto& t : j.at("tasks")) cfg.tasks.push_back(t.get<std::string>());
    }
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      require_keys(s,
                   {"semiflow_step", "fp_cells", "fp_dt_safety", "kde_paths",
                    "kde_grid_cells", "kde_bootstrap", "quadrature_points",
                    "quadrature_tolerance"},
                   "solver");
      if (s.contains("semiflow_step"))
        cfg.controls.semiflow_step = s.at("semiflow_step").get<double>();
      if (s.contains("fp_cells")) cfg.controls.fp_cells = s.at("fp_cells").get<int>();
      if (s.contains("fp_dt_safety"))
        cfg.controls.fp_dt_safety = s.at("fp_dt_safety").get<double>();
      if (s.contains("kde_paths")) cfg.controls.kde_paths = s.at("kde_paths").get<int>();
      if (s.contains("kde_grid_cells"))
        cfg.controls.kde_grid_cells = s.at("kde_grid_cells").get<int>();
      if (s.contains("kde_bootstrap"))
        cfg.controls.kde_bootstrap = s.at("kde_bootstrap").get<int>();
      if (s.contains("quadrature_points"))
        cfg.controls.quadrature.points_per_axis = s.at("quadrature_points").get<int>();
      if (s.contains("quadrature_tolerance"))
        cfg.controls.quadrature.abs_tolerance = s.at("quadrature_tolerance").get<double>();
    }
    if (j.contains("moments")) {
      const json& s = j.at("moments");
      require_keys(s, {"t_end", "paths"}, "moments");
      if (s.contains("t_end")) cfg.moments_t_end = s.at("t_end").get<double>();
      if (s.contains("paths")) cfg.moments_paths = s.at("paths").get<int>();
    }
    if (j.contains("truncation")) {
      const json& s = j.at("truncation");
      require_keys(s, {"m_list", "paths"}, "truncation");
      if (s.contains("m_list")) {
        cfg.truncation_m.clear();
        for (const auto& m : s.at("m_list")) cfg.truncation_m.push_back(m.get<double>());
      }
      if (s.contains("paths")) cfg.truncation_paths = s.at("paths").get<int>();
    }
    if (j.contains("rotating")) {
      const json& s = j.at("rotating");
      require_keys(s, {"a", "b"}, "rotating");
      if (s.contains("a")) cfg.rotating_a = s.at("a").get<double>();
      if (s.contains("b")) cfg.rotating_b = s.at("b").get<double>();
    }
    if (j.contains("lemmas")) {
      const json& s = j.at("lemmas");
      require_keys(s, {"cases"}, "lemmas");
      if (s.contains("cases")) cfg.lemma_cases = s.at("cases").get<int>();
    }
    if (j.contains("semiflow")) {
      const json& s = j.at("semiflow");
      require_keys(s, {"t_end"}, "semiflow");
      if (s.contains("t_end")) cfg.semiflow_t_end = s.at("t_end").get<double>();
    }
    if (j.contains("lyapunov")) {
      const json& s = j.at("lyapunov");
      require_keys(s, {"t_end"}, "lyapunov");
      if (s.contains("t_end")) cfg.lyapunov_t_end = s.at("t_end").get<double>();
    }
    if (j.contains("verdict")) {
      const json& s = j.at("verdict");
      require_keys(s, {"high", "low"}, "verdict");
      if (s.contains("high")) cfg.verdict_high = s.at("high").get<double>();
      if (s.contains("low")) cfg.verdict_low = s.at("low").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.controls.seed = cfg.seed;
  cfg.controls.n_workers = cfg.workers;
  cfg.controls.gamma = cfg.gamma;
  cfg.raw_json = j.dump();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Profile values per c for the scenario, shared by the curve tasks.
std::vector<double> profile_values(const PotentialModel& model,
                                   const Eigen::VectorXd& x0,
                                   const std::vector<double>& cs) {
  const SpectralData spectral = spectral_at_origin(model);
  const AsymptoticDirection v = asymptotic_direction(model, x0, spectral);
  std::vector<double> g;
  g.reserve(cs.size());
  for (double c : cs) g.push_back(profile_G(spectral, v, c));
  return g;
}

void write_curve_csv(const std::string& path, const std::vector<double>& epsilons,
                     const std::vector<ProfileCurve>& curves,
                     const std::vector<std::vector<double>>& g_per_curve) {
  CsvWriter csv(path, {"epsilon", "c", "t", "distance", "stderr", "G"});
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t k = 0; k < curves[i].points.size(); ++k) {
      const auto& p = curves[i].points[k];
      csv.field(epsilons[i]).field(p.c).field(p.t).field(p.distance)
         .field(p.std_error).field(g_per_curve[i][k]);
      csv.end_row();
    }
  }
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const auto t_begin = std::chrono::steady_clock::now();

  RunManifest manifest;
  manifest.config_hash = hex64(fnv1a_hash(config.raw_json));
  manifest.version = kVersion;
  manifest.gamma = config.gamma;

  fs::create_directories(config.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(config.output_dir) / name).string();
  };

  std::vector<double> cs = config.c_grid;
  std::sort(cs.begin(), cs.end());

  int task_index = 0;
  for (const std::string& task : config.tasks) {
    TaskStatus status;
    status.name = task;
    status.seed = mix_seed(config.seed, fnv1a_hash(task) + task_index);
    CurveControls controls = config.controls;
    controls.seed = status.seed;
    try {
      if (task == "profile" || task == "curve-exact") {
        const std::string file =
            task == "profile" ? "profile.csv" : "curve_exact.csv";
        std::vector<ProfileCurve> curves;
        std::vector<std::vector<double>> gs;
        for (double eps : config.epsilons) {
          ProfileCurve c = linearized_distance_curve(config.model, eps, config.x0,
                                                     cs, controls);
          std::vector<double> kept;
          for (const auto& p : c.points) kept.push_back(p.c);
          std::vector<double> g = profile_values(config.model, config.x0, kept);
          gs.push_back(std::move(g));
          curves.push_back(std::move(c));
        }
        write_curve_csv(out_path(file), config.epsilons, curves, gs);
        status.files.push_back(file);
        status.ok = true;
      } else if (task == "curve-fp" || task == "curve-kde") {
        const NonlinearMethod method = task == "curve-fp"
                                           ? NonlinearMethod::FokkerPlanck
                                           : NonlinearMethod::Kde;
        const std::string file =
            task == "curve-fp" ? "curve_fp.csv" : "curve_kde.csv";
        std::vector<ProfileCurve> curves;
        std::vector<std::vector<double>> gs;
        for (double eps : config.epsilons) {
          ProfileCurve c = nonlinear_distance_curve(config.model, eps, config.x0,
                                                    cs, method, controls);
          std::vector<double> kept;
          for (const auto& p : c.points) kept.push_back(p.c);
          gs.push_back(profile_values(config.model, config.x0, kept));
          curves.push_back(std::move(c));
        }
        write_curve_csv(out_path(file), config.epsilons, curves, gs);
        status.files.push_back(file);
        status.ok = true;
      } else if (task == "moments") {
        for (std::size_t ei = 0; ei < config.epsilons.size(); ++ei) {
          const double eps = config.epsilons[ei];
          const TimeGrid grid =
              make_grid(config.model, eps, config.moments_t_end, config.x0.norm());
          const int stride =
              std::max(1, grid.n_steps / 100);  // ~100 recorded times
          const TrajectoryEnsemble ens = simulate_coupled_linearization(
              config.model, eps, config.x0, grid, config.moments_paths,
              mix_seed(status.seed, ei), config.workers, stride);
          StepControl sc;
          sc.h = grid.step();
          const SemiflowResult flow =
              integrate_semiflow(config.model, config.x0, grid.t_end, sc);
          const MomentReport rep = moment_report(ens, flow, {1, 2});
          const std::string file = "moments_" + std::to_string(ei) + ".csv";
          CsvWriter csv(out_path(file),
                        {"t", "n", "estimate", "stderr", "bound", "pass"});
          for (const auto& row : rep.rows) {
            csv.field(row.t).field(row.order).field(row.estimate)
               .field(row.std_error).field(row.bound)
               .field(row.pass ? 1 : 0);
            csv.end_row();
          }
          status.files.push_back(file);
        }
        status.ok = true;
      } else if (task == "truncation") {
        // A truncated scenario model plays the role of its own base here.
        const auto base_ptr = config.model.truncation_base();
        const PotentialModel& base = base_ptr ? *base_ptr : config.model;
        const TruncationReport rep = truncation_comparison(
            base, config.truncation_m, config.epsilons.front(),
            config.x0(0), 0.0, config.truncation_paths, status.seed,
            config.gamma, config.workers);
        CsvWriter csv(out_path("truncation.csv"),
                      {"M", "stationary_tv", "exit_probability", "exit_bound",
                       "exits", "paths"});
        for (const auto& row : rep.rows) {
          csv.field(row.M).field(row.stationary_tv).field(row.exit_probability)
             .field(row.exit_bound).field(row.exits).field(row.paths);
          csv.end_row();
        }
        status.files.push_back("truncation.csv");
        status.ok = true;
      } else if (task == "rotating") {
        Eigen::Vector2d x0;
        if (config.x0.size() == 2) {
          x0 = config.x0;
        } else {
          x0 << 1.0, 0.0;
        }
        CsvWriter csv(out_path("rotating.csv"),
                      {"epsilon", "c", "t", "distance", "stderr", "G"});
        for (double eps : config.epsilons) {
          const ProfileCurve curve = rotating_frame_curve(
              config.rotating_a, config.rotating_b, x0, eps, cs, controls);
          for (const auto& p : curve.points) {
            csv.field(eps).field(p.c).field(p.t).field(p.distance)
               .field(p.std_error)
               .field(rotating_profile_G(config.rotating_a, x0, p.c));
            csv.end_row();
          }
        }
        status.files.push_back("rotating.csv");
        status.ok = true;
      } else if (task == "lemmas") {
        const IdentityReport rep =
            verify_gaussian_identities(status.seed, config.lemma_cases,
                                       config.workers);
        CsvWriter csv(out_path("lemmas.csv"), {"identity", "max_deviation"});
        const char* names[5] = {"scaling", "translation", "whitening",
                                "simultaneous-whitening", "padding"};
        for (int k = 0; k < 5; ++k) {
          csv.field(std::string(names[k])).field(rep.max_deviation[k]);
          csv.end_row();
        }
        status.files.push_back("lemmas.csv");
        status.ok = true;
      } else if (task == "semiflow") {
        StepControl sc;
        sc.h = config.controls.semiflow_step;
        const SemiflowResult flow =
            integrate_semiflow(config.model, config.x0, config.semiflow_t_end, sc);
        std::vector<std::string> header{"t"};
        for (int i = 0; i < config.model.dim(); ++i)
          header.push_back("x_" + std::to_string(i));
        CsvWriter csv(out_path("semiflow.csv"), header);
        for (int k = 0; k < flow.times.size(); ++k) {
          csv.field(flow.times(k));
          for (int i = 0; i < config.model.dim(); ++i) csv.field(flow.states[k](i));
          csv.end_row();
        }
        status.files.push_back("semiflow.csv");
        status.ok = true;
      } else if (task == "lyapunov") {
        const double t_end = config.lyapunov_t_end > 0.0
                                 ? config.lyapunov_t_end
                                 : 20.0 / config.model.declared_delta();
        for (const auto mode : {LyapunovMode::Frozen, LyapunovMode::AlongFlow}) {
          const LyapunovSolution sol = integrate_lyapunov(
              config.model, config.epsilons.front(), t_end, mode,
              mode == LyapunovMode::AlongFlow ? std::optional(config.x0)
                                              : std::nullopt);
          const std::string file = mode == LyapunovMode::Frozen
                                       ? "lyapunov_frozen.csv"
                                       : "lyapunov_alongflow.csv";
          std::vector<std::string> header{"t"};
          const int d = config.model.dim();
          for (int i = 0; i < d; ++i)
            for (int jj = 0; jj < d; ++jj)
              header.push_back("entry_" + std::to_string(i) + std::to_string(jj));
          CsvWriter csv(out_path(file), header);
          for (int k = 0; k < sol.times.size(); ++k) {
            csv.field(sol.times(k));
            for (int i = 0; i < d; ++i)
              for (int jj = 0; jj < d; ++jj) csv.field(sol.matrices[k](i, jj));
            csv.end_row();
          }
          status.files.push_back(file);
        }
        status.ok = true;
      } else {
        throw ConfigError("config: unknown task '" + task + "'");
      }
    } catch (const std::exception& e) {
      status.ok = false;
      status.message = e.what();
    }
    manifest.tasks.push_back(std::move(status));
    ++task_index;
  }

  manifest.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t_begin)
                               .count();
  write_manifest(manifest, out_path("manifest.json"));
  return manifest;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  json j;
  j["config_hash"] = manifest.config_hash;
  j["version"] = manifest.version;
  j["gamma"] = manifest.gamma;
  j["wall_clock_ms"] = manifest.wall_clock_ms;
  j["tasks"] = json::array();
  for (const auto& t : manifest.tasks) {
    json tj;
    tj["name"] = t.name;
    tj["ok"] = t.ok;
    tj["seed"] = t.seed;
    tj["files"] = t.files;
    if (!t.message.empty()) tj["error"] = t.message;
    j["tasks"].push_back(tj);
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("write_manifest: cannot open " + path);
  f << j.dump(2) << "\n";
}

}  // namespace cutoff
