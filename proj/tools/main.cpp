#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gridmrf/fit.hpp"
#include "gridmrf/io.hpp"
#include "gridmrf/oracle.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/rng.hpp"
#include "gridmrf/sim.hpp"
#include "gridmrf/spectral.hpp"

namespace {

using namespace gridmrf;
using nlohmann::json;

// "e4" means exp(4); otherwise plain decimal.
double parse_lambda(const std::string& s) {
  try {
    if (s.size() > 1 && (s[0] == 'e' || s[0] == 'E')) {
      return std::exp(std::stod(s.substr(1)));
    }
    return std::stod(s);
  } catch (const std::exception&) {
    throw DomainError("cannot parse lambda '" + s + "' (use a number or e<k> for exp(k))");
  }
}

struct FamilySpec {
  MrfFamily family;
  double param = 0.0;
  std::string label;
};

// "icar", "tpsmrf", "hicar:3", "dicar:5.5"
FamilySpec parse_family(const std::string& s) {
  FamilySpec spec;
  auto pos = s.find(':');
  std::string name = pos == std::string::npos ? s : s.substr(0, pos);
  spec.family = family_from_name(name);
  bool needs_param = spec.family == MrfFamily::Hicar || spec.family == MrfFamily::Dicar;
  if (pos != std::string::npos) {
    if (!needs_param) throw DomainError("family '" + name + "' takes no parameter");
    try {
      spec.param = std::stod(s.substr(pos + 1));
    } catch (const std::exception&) {
      throw DomainError("bad parameter in family spec '" + s + "'");
    }
  } else if (needs_param) {
    throw DomainError("family '" + name + "' needs a parameter, e.g. '" + name + ":3'");
  }
  spec.label = name;
  if (needs_param) {
    std::string p = s.substr(pos + 1);
    spec.label += "_" + p;
  }
  return spec;
}

std::vector<FamilySpec> parse_families(const std::string& arg) {
  std::vector<FamilySpec> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_family(item));
  }
  if (out.empty()) throw DomainError("no families given");
  return out;
}

PrecisionMatrix build_family(const GridSpec& grid, const FamilySpec& spec) {
  switch (spec.family) {
    case MrfFamily::Icar: return build_icar(grid);
    case MrfFamily::Hicar: return build_hicar(grid, spec.param);
    case MrfFamily::Dicar: return build_dicar(grid, spec.param);
    case MrfFamily::TpsMrf: return build_tpsmrf(grid);
  }
  throw DomainError("unknown family");
}

struct GridArgs {
  std::string grid_json;
  int nx = 0, ny = 0;
  double x0 = 0.0, y0 = 0.0, dx = 0.0, dy = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--grid", grid_json, "grid spec JSON file");
    cmd->add_option("--nx", nx, "cells in x");
    cmd->add_option("--ny", ny, "cells in y");
    cmd->add_option("--x0", x0, "domain origin x");
    cmd->add_option("--y0", y0, "domain origin y");
    cmd->add_option("--dx", dx, "cell width (default 1/nx)");
    cmd->add_option("--dy", dy, "cell height (default 1/ny)");
  }

  GridSpec resolve() const {
    if (!grid_json.empty()) return read_grid_json(grid_json);
    if (nx <= 0 || ny <= 0) throw DomainError("give --grid or both --nx and --ny");
    GridSpec g{nx, ny, x0, y0, dx > 0.0 ? dx : 1.0 / nx, dy > 0.0 ? dy : 1.0 / ny};
    g.validate();
    return g;
  }
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr ? v : fallback;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void finish_manifest(RunManifest manifest, const Timer& timer, const std::string& path) {
  manifest.wall_seconds = timer.seconds();
  write_manifest(path, manifest);
}

int cmd_precision(const GridArgs& grid_args, const std::string& family_arg,
                  const std::string& out, const std::vector<std::string>& raw_args) {
  Timer timer;
  GridSpec grid = grid_args.resolve();
  FamilySpec spec = parse_family(family_arg);
  PrecisionMatrix Q = build_family(grid, spec);
  std::string triplets = out + ".txt";
  std::string meta = out + ".json";
  write_precision(triplets, meta, Q, grid);
  RunManifest manifest{"precision", raw_args, 0, {}, {triplets, meta}};
  finish_manifest(std::move(manifest), timer, out + "_manifest.json");
  std::cout << "wrote " << triplets << " (" << Q.m() << "x" << Q.m() << ", c=" << Q.null_dim
            << ")\n";
  return 0;
}

// Header-sniffing loader; returns the stacked mapping and observation vector.
void load_dataset(const GridSpec& grid, const std::vector<std::string>& paths,
                  std::optional<MappingMatrix>& K, Vector& y) {
  std::vector<double> values;
  for (const auto& path : paths) {
    MappingMatrix part;
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
      auto areas = read_polygon_json(path);
      part = build_areal_mapping(grid, areas);
      for (const auto& a : areas) values.push_back(a.value);
    } else {
      std::ifstream in(path);
      if (!in) throw DomainError("cannot open " + path);
      std::string header;
      std::getline(in, header);
      in.close();
      if (header.find("xmin") != std::string::npos) {
        auto areas = read_rect_csv(path);
        part = build_areal_mapping(grid, areas);
        for (const auto& a : areas) values.push_back(a.value);
      } else {
        auto pts = read_point_csv(path);
        part = build_point_mapping(grid, pts);
        for (const auto& p : pts) values.push_back(p.value);
      }
    }
    K = K ? stack_mappings(*K, part) : part;
  }
  if (!K) throw DomainError("no data files given");
  y = Eigen::Map<Vector>(values.data(), static_cast<int>(values.size()));
}

int cmd_fit(const GridArgs& grid_args, const std::string& family_arg,
            const std::vector<std::string>& data_paths, const std::string& lambda_arg,
            double log_lo, double log_hi, const std::string& out,
            const std::vector<std::string>& raw_args) {
  Timer timer;
  GridSpec grid = grid_args.resolve();
  FamilySpec spec = parse_family(family_arg);
  PrecisionMatrix Q = build_family(grid, spec);
  std::optional<MappingMatrix> K;
  Vector y;
  load_dataset(grid, data_paths, K, y);

  FitResult fit;
  if (!lambda_arg.empty()) {
    double lambda = parse_lambda(lambda_arg);
    SmoothingSolver solver(*K, Q);
    solver.factorize(lambda);
    ProfileEstimates est = profile_beta_tau(solver, Matrix(), y);
    fit.hyper = {lambda, est.tau2};
    fit.ghat = compute_ghat(solver, y);
    PointwiseSe se = pointwise_se(*K, Q, fit.hyper);
    fit.se_g = se.se;
    fit.se_stochastic = se.stochastic;
    fit.loglik_trace = {{lambda, profile_loglik(solver, Matrix(), y)}};
    fit.null_dim = Q.null_dim;
  } else {
    fit = maximize_lambda(*K, Q, Matrix(), y, {log_lo, log_hi});
  }

  std::string fit_json = out + "_fit.json";
  std::string grid_csv = out + "_grid.csv";
  write_fit_json(fit_json, fit);
  write_fit_grid_csv(grid_csv, grid, fit);
  RunManifest manifest{"fit", raw_args, 0, {}, {fit_json, grid_csv}};
  for (const auto& p : data_paths) manifest.inputs["data:" + p] = p;
  finish_manifest(std::move(manifest), timer, out + "_manifest.json");
  std::cout << "lambda=" << fit.hyper.lambda << " tau2=" << fit.hyper.tau2
            << (fit.at_bound ? " (at search bound)" : "") << "\n";
  return 0;
}

int cmd_diagnose_eigen(const GridArgs& grid_args, const std::string& families_arg,
                       const std::vector<std::string>& gp_args, int normalize_index,
                       int max_index, const std::string& out,
                       const std::vector<std::string>& raw_args) {
  Timer timer;
  GridSpec grid = grid_args.resolve();
  std::vector<std::string> outputs;
  auto emit = [&](EigenCurve curve, const std::string& label) {
    if (max_index > 0 && static_cast<int>(curve.values.size()) > max_index) {
      curve.values.resize(max_index);
    }
    std::string path = out + "_" + label + ".csv";
    write_eigencurve_csv(path, curve);
    outputs.push_back(path);
  };
  for (const auto& spec : parse_families(families_arg)) {
    PrecisionMatrix Q = build_family(grid, spec);
    emit(eigencurve_mrf(grid, Q, normalize_index, spec.label), spec.label);
  }
  for (const auto& g : gp_args) {
    auto pos = g.find(':');
    if (pos == std::string::npos) throw DomainError("--gp needs nu:rho, got '" + g + "'");
    MaternParams params{std::stod(g.substr(0, pos)), std::stod(g.substr(pos + 1)), 1.0};
    std::string label = "gp_" + g.substr(0, pos) + "_" + g.substr(pos + 1);
    emit(eigencurve_gp(grid, params, normalize_index, label), label);
  }
  RunManifest manifest{"diagnose eigen", raw_args, 0, {}, outputs};
  finish_manifest(std::move(manifest), timer, out + "_manifest.json");
  std::cout << "wrote " << outputs.size() << " eigencurve files\n";
  return 0;
}

int cmd_diagnose_kernel(const GridArgs& grid_args, const std::string& families_arg,
                        const std::vector<std::string>& gp_args, const std::string& lambda_arg,
                        int focal, const std::string& out,
                        const std::vector<std::string>& raw_args) {
  Timer timer;
  GridSpec grid = grid_args.resolve();
  double lambda = parse_lambda(lambda_arg);
  if (focal < 0) focal = grid.index(grid.ny / 2, grid.nx / 2);
  std::vector<std::string> outputs;
  auto emit = [&](const KernelSlice& slice, const std::string& label) {
    std::string transect = out + "_" + label + "_transect.csv";
    std::string row = out + "_" + label + "_row.csv";
    write_kernel_csv(transect, row, grid, slice);
    outputs.push_back(transect);
    outputs.push_back(row);
  };
  for (const auto& spec : parse_families(families_arg)) {
    PrecisionMatrix Q = build_family(grid, spec);
    emit(equivalent_kernel_mrf(grid, Q, lambda, focal), spec.label);
  }
  for (const auto& g : gp_args) {
    auto pos = g.find(':');
    if (pos == std::string::npos) throw DomainError("--gp needs nu:rho, got '" + g + "'");
    MaternParams params{std::stod(g.substr(0, pos)), std::stod(g.substr(pos + 1)), 1.0};
    std::string label = "gp_" + g.substr(0, pos) + "_" + g.substr(pos + 1);
    emit(equivalent_kernel_gp(grid, params, lambda, focal), label);
  }
  RunManifest manifest{"diagnose kernel", raw_args, 0, {}, outputs};
  finish_manifest(std::move(manifest), timer, out + "_manifest.json");
  std::cout << "wrote " << outputs.size() << " kernel files\n";
  return 0;
}

ScenarioConfig read_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError(path + ": invalid JSON: " + e.what());
  }
  ScenarioConfig cfg;
  try {
    if (j.contains("grid")) {
      cfg.grid.nx = j["grid"].at("nx").get<int>();
      cfg.grid.ny = j["grid"].at("ny").get<int>();
      cfg.grid.x0 = j["grid"].value("x0", 0.0);
      cfg.grid.y0 = j["grid"].value("y0", 0.0);
      cfg.grid.dx = j["grid"].value("dx", 1.0 / cfg.grid.nx);
      cfg.grid.dy = j["grid"].value("dy", 1.0 / cfg.grid.ny);
    }
    std::string kind = j.value("kind", "point");
    if (kind == "point") {
      cfg.kind = ObsKind::Point;
    } else if (kind == "areal") {
      cfg.kind = ObsKind::Areal;
    } else {
      throw DomainError("kind must be 'point' or 'areal'");
    }
    std::string scheme = j.value("scheme", "uniform");
    if (scheme == "uniform") {
      cfg.scheme = LocationScheme::Uniform;
    } else if (scheme == "clustered" || scheme == "pcp") {
      cfg.scheme = LocationScheme::Clustered;
    } else {
      throw DomainError("scheme must be 'uniform' or 'clustered'");
    }
    cfg.n_obs = j.value("n_obs", 100);
    cfg.coarse_nx = j.value("coarse_nx", 10);
    cfg.coarse_ny = j.value("coarse_ny", 10);
    for (const auto& c : j.at("cells")) {
      FactorCell cell;
      cell.nu = c.at("nu").get<double>();
      cell.rho = c.at("rho").get<double>();
      if (c.contains("tau2")) {
        cell.tau2 = c["tau2"].get<double>();
      } else {
        double tau = c.at("tau").get<double>();
        cell.tau2 = tau * tau;
      }
      cfg.cells.push_back(cell);
    }
    cfg.n_reps = j.value("n_reps", 100);
    cfg.seed = j.value("seed", 1ULL);
    cfg.parent_intensity = j.value("parent_intensity", 25.0);
    cfg.cluster_sd = j.value("cluster_sd", 0.05);
    if (j.contains("log_lambda_bounds")) {
      cfg.log_lambda_bounds = {j["log_lambda_bounds"].at(0).get<double>(),
                               j["log_lambda_bounds"].at(1).get<double>()};
    }
    cfg.fit_gp = j.value("fit_gp", false);
    cfg.threads = j.value("threads", 0);
    cfg.label = j.value("label", std::filesystem::path(path).stem().string());
  } catch (const json::exception& e) {
    throw DomainError(path + ": bad scenario config: " + e.what());
  }
  return cfg;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, bool oracle,
                 bool full_scale, int threads_flag, std::uint64_t seed_flag, bool seed_given,
                 const std::vector<std::string>& raw_args) {
  Timer timer;
  ScenarioConfig cfg = read_scenario_config(config_path);
  if (seed_given) cfg.seed = seed_flag;
  if (threads_flag > 0) {
    cfg.threads = threads_flag;
  } else if (cfg.threads <= 0) {
    cfg.threads = std::stoi(env_or("GRIDMRF_THREADS", "1"));
  }
  // Joint simulation needs a dense factorization over data sites plus
  // centroids; sizes past the desk scale are expensive and must be asked for.
  int sites = cfg.grid.cells() + (cfg.kind == ObsKind::Point ? cfg.n_obs : 0);
  if (sites > 5000 && !full_scale) {
    throw DomainError("configuration implies a " + std::to_string(sites) +
                      "-site dense simulation; pass --full-scale to confirm");
  }
  std::filesystem::create_directories(out_dir);
  RunManifest manifest{oracle ? "simulate --oracle" : "simulate", raw_args, cfg.seed,
                       {{"config", config_path}}, {}};

  if (oracle) {
    std::vector<OracleRow> rows;
    for (std::size_t ci = 0; ci < cfg.cells.size(); ++ci) {
      const FactorCell& cell = cfg.cells[ci];
      GenerativeSpec spec;
      spec.grid = cfg.grid;
      spec.gp = {cell.nu, cell.rho, 1.0};
      spec.tau2 = cell.tau2;
      if (cfg.kind == ObsKind::Point) {
        auto locs = cfg.scheme == LocationScheme::Uniform
                        ? sample_locations_uniform(cfg.grid, cfg.n_obs,
                                                   derive_seed(cfg.seed, ci, 0xA11))
                        : sample_locations_clustered(cfg.grid, cfg.n_obs, cfg.parent_intensity,
                                                     cfg.cluster_sd,
                                                     derive_seed(cfg.seed, ci, 0xA11));
        spec.points.reserve(locs.size());
        for (const auto& p : locs) spec.points.push_back({p.x, p.y, 0.0});
      } else {
        double wx = (cfg.grid.xmax() - cfg.grid.x0) / cfg.coarse_nx;
        double wy = (cfg.grid.ymax() - cfg.grid.y0) / cfg.coarse_ny;
        for (int r = 0; r < cfg.coarse_ny; ++r) {
          for (int c = 0; c < cfg.coarse_nx; ++c) {
            spec.areas.push_back({Rect{cfg.grid.x0 + c * wx, cfg.grid.y0 + r * wy,
                                       cfg.grid.x0 + (c + 1) * wx, cfg.grid.y0 + (r + 1) * wy},
                                  0.0});
          }
        }
      }
      for (const char* fam : {"icar", "tpsmrf"}) {
        PrecisionMatrix Q = std::string(fam) == "icar" ? build_icar(cfg.grid)
                                                       : build_tpsmrf(cfg.grid);
        OracleResult res = oracle_lambda(spec, Q, cfg.log_lambda_bounds);
        rows.push_back({fam, cell, cfg.label, res.lambda_star, res.sse.value, res.sse.se});
      }
      if (cfg.fit_gp && cfg.kind == ObsKind::Point) {
        SseValue sse = expected_sse_gp(spec);
        rows.push_back({"gp", cell, cfg.label, cell.tau2, sse.value, sse.se});
      }
    }
    std::string oracle_csv = out_dir + "/oracle.csv";
    write_oracle_csv(oracle_csv, rows);
    manifest.outputs.push_back(oracle_csv);
    finish_manifest(std::move(manifest), timer, out_dir + "/manifest.json");
    std::cout << "wrote " << oracle_csv << " (" << rows.size() << " rows)\n";
    return 0;
  }

  ScenarioResult result = run_scenario(cfg);
  if (result.rows.empty()) {
    throw NumericError("all cells failed; no results produced");
  }
  std::string results_csv = out_dir + "/results.csv";
  std::string summary_csv = out_dir + "/summary.csv";
  write_sim_csv(results_csv, result);
  write_summary_csv(summary_csv, summarize(result));
  manifest.outputs.push_back(results_csv);
  manifest.outputs.push_back(summary_csv);
  finish_manifest(std::move(manifest), timer, out_dir + "/manifest.json");
  std::cout << "wrote " << results_csv << " (" << result.rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRF smoothing of gridded spatial data: precision builders, profile-likelihood "
               "fits, spectral diagnostics, and simulation studies"};
  app.require_subcommand(1);
  std::vector<std::string> raw_args(argv + 1, argv + argc);

  // precision
  auto* prec = app.add_subcommand("precision", "build and export a precision matrix");
  GridArgs prec_grid;
  prec_grid.attach(prec);
  std::string prec_family, prec_out = "precision";
  prec->add_option("--family", prec_family, "icar|tpsmrf|hicar:<d>|dicar:<r>")->required();
  prec->add_option("--out", prec_out, "output path prefix");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the smoothing model to observations");
  GridArgs fit_grid;
  fit_grid.attach(fit);
  std::string fit_family, fit_lambda, fit_out = "fit";
  std::vector<std::string> fit_data;
  double fit_lo = -10.0, fit_hi = 20.0;
  fit->add_option("--family", fit_family, "icar|tpsmrf|hicar:<d>|dicar:<r>")->required();
  fit->add_option("--data", fit_data, "data CSV/JSON (repeatable; schema by header)")
      ->required();
  fit->add_option("--lambda", fit_lambda, "fix lambda (number or e<k>) instead of searching");
  fit->add_option("--log-lambda-lo", fit_lo, "lower search bound in log lambda");
  fit->add_option("--log-lambda-hi", fit_hi, "upper search bound in log lambda");
  fit->add_option("--out", fit_out, "output path prefix");

  // diagnose eigen|kernel
  auto* diag = app.add_subcommand("diagnose", "spectral and kernel diagnostics");
  diag->require_subcommand(1);
  auto* eig = diag->add_subcommand("eigen", "scaled inverse-eigenvalue curves");
  GridArgs eig_grid;
  eig_grid.attach(eig);
  std::string eig_families = "icar,tpsmrf";
  std::vector<std::string> eig_gp;
  int eig_norm = 100, eig_max = 0;
  std::string eig_out = "eigen";
  eig->add_option("--families", eig_families, "comma list, e.g. icar,tpsmrf,hicar:3,dicar:5");
  eig->add_option("--gp", eig_gp, "add a correlation-spectrum curve nu:rho (repeatable)");
  eig->add_option("--normalize-index", eig_norm, "index scaled to 1");
  eig->add_option("--max-index", eig_max, "truncate curves after this many values");
  eig->add_option("--out", eig_out, "output path prefix");

  auto* ker = diag->add_subcommand("kernel", "equivalent smoothing kernels");
  GridArgs ker_grid;
  ker_grid.attach(ker);
  std::string ker_families = "icar,tpsmrf", ker_lambda;
  std::vector<std::string> ker_gp;
  int ker_focal = -1;
  std::string ker_out = "kernel";
  ker->add_option("--families", ker_families, "comma list of MRF families");
  ker->add_option("--gp", ker_gp, "add a correlation kernel nu:rho (repeatable)");
  ker->add_option("--lambda", ker_lambda, "smoothing parameter (number or e<k>)")->required();
  ker->add_option("--focal", ker_focal, "focal cell index (default grid center)");
  ker->add_option("--out", ker_out, "output path prefix");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a factorial simulation or oracle study");
  std::string sim_config, sim_out = "simout";
  bool sim_oracle = false, sim_full = false;
  int sim_threads = 0;
  std::uint64_t sim_seed = 0;
  auto* seed_opt = sim->add_option("--seed", sim_seed, "override the config root seed");
  sim->add_option("--config", sim_config, "scenario config JSON")->required();
  sim->add_option("--out", sim_out, "output directory");
  sim->add_flag("--oracle", sim_oracle, "compute expected-SSE oracle instead of fitting");
  sim->add_flag("--full-scale", sim_full, "allow dense simulation sizes past the desk scale");
  sim->add_option("--threads", sim_threads, "worker threads (default GRIDMRF_THREADS or 1)");

  try {
    app.parse(argc, argv);
    if (prec->parsed()) return cmd_precision(prec_grid, prec_family, prec_out, raw_args);
    if (fit->parsed()) {
      return cmd_fit(fit_grid, fit_family, fit_data, fit_lambda, fit_lo, fit_hi, fit_out,
                     raw_args);
    }
    if (diag->parsed()) {
      if (eig->parsed()) {
        return cmd_diagnose_eigen(eig_grid, eig_families, eig_gp, eig_norm, eig_max, eig_out,
                                  raw_args);
      }
      return cmd_diagnose_kernel(ker_grid, ker_families, ker_gp, ker_lambda, ker_focal, ker_out,
                                 raw_args);
    }
    if (sim->parsed()) {
      return cmd_simulate(sim_config, sim_out, sim_oracle, sim_full, sim_threads, sim_seed,
                          seed_opt->count() > 0, raw_args);
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
