#include "gridmrf/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include "gridmrf/fit.hpp"
#include "gridmrf/mapping.hpp"
#include "gridmrf/rng.hpp"

namespace gridmrf {

std::vector<Point> sample_locations_uniform(const GridSpec& grid, int n, std::uint64_t seed) {
  grid.validate();
  if (n < 1) throw DomainError("need at least one location");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> ux(grid.x0, grid.xmax());
  std::uniform_real_distribution<double> uy(grid.y0, grid.ymax());
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.x = ux(rng);
    p.y = uy(rng);
  }
  return pts;
}

std::vector<Point> sample_locations_clustered(const GridSpec& grid, int n,
                                              double parent_intensity, double cluster_sd,
                                              std::uint64_t seed) {
  grid.validate();
  if (n < 1) throw DomainError("need at least one location");
  if (!(parent_intensity > 0.0)) throw DomainError("parent intensity must be > 0");
  if (!(cluster_sd > 0.0)) throw DomainError("cluster sd must be > 0");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> ux(grid.x0, grid.xmax());
  std::uniform_real_distribution<double> uy(grid.y0, grid.ymax());
  std::poisson_distribution<int> pois(parent_intensity);
  int n_parents = 0;
  while (n_parents == 0) n_parents = pois(rng);
  std::vector<Point> parents(n_parents);
  for (auto& p : parents) {
    p.x = ux(rng);
    p.y = uy(rng);
  }
  std::uniform_int_distribution<int> pick(0, n_parents - 1);
  std::normal_distribution<double> disp(0.0, cluster_sd);
  std::vector<Point> pts;
  pts.reserve(n);
  while (static_cast<int>(pts.size()) < n) {
    const Point& par = parents[pick(rng)];
    Point cand{par.x + disp(rng), par.y + disp(rng)};
    if (cand.x < grid.x0 || cand.x > grid.xmax() || cand.y < grid.y0 || cand.y > grid.ymax()) {
      continue;  // outside the domain: redraw parent choice and displacement
    }
    pts.push_back(cand);
  }
  return pts;
}

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone-chain convex hull, counter-clockwise without repeated endpoint.
// Returns empty for degenerate (collinear or tiny) input.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return {};
  std::vector<Point> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) return {};
  return hull;
}

}  // namespace

std::vector<int> convex_hull_cells(const GridSpec& grid, const std::vector<Point>& pts) {
  grid.validate();
  std::vector<Point> hull = convex_hull(pts);
  std::vector<int> cells;
  if (hull.empty()) {
    // Degenerate input: only the cells containing the points.
    for (const auto& p : pts) cells.push_back(cell_index(grid, p.x, p.y));
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
  }
  double span = std::max(grid.xmax() - grid.x0, grid.ymax() - grid.y0);
  double eps = 1e-12 * span * span;  // cross products scale as length squared
  const int h = static_cast<int>(hull.size());
  for (int cell = 0; cell < grid.cells(); ++cell) {
    Point c = grid.centroid(cell);
    bool inside = true;
    for (int i = 0; i < h && inside; ++i) {
      if (cross(hull[i], hull[(i + 1) % h], c) < -eps) inside = false;
    }
    if (inside) cells.push_back(cell);
  }
  return cells;
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0) || !(level < 1.0)) throw DomainError("coverage level must be in (0, 1)");
  double target = 0.5 * (1.0 + level);  // upper-tail quantile of the two-sided interval
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    double cdf = 0.5 * (1.0 + std::erf(mid / std::sqrt(2.0)));
    (cdf < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CoverageStats coverage_stats(const Vector& held_out_y, const Vector& truth_g,
                             const Vector& ghat, const Vector& se_g,
                             const std::vector<int>& subset, double tau2_hat, double level) {
  if (held_out_y.size() != truth_g.size() || truth_g.size() != ghat.size() ||
      ghat.size() != se_g.size()) {
    throw DomainError("coverage inputs must share one length");
  }
  double z = normal_quantile_two_sided(level);
  CoverageStats out;
  if (subset.empty()) return out;
  int pred = 0, fun = 0;
  for (int j : subset) {
    double half_pred = z * std::sqrt(se_g(j) * se_g(j) + tau2_hat);
    if (std::abs(held_out_y(j) - ghat(j)) <= half_pred) ++pred;
    if (std::abs(truth_g(j) - ghat(j)) <= z * se_g(j)) ++fun;
  }
  out.pred_coverage = static_cast<double>(pred) / subset.size();
  out.fun_coverage = static_cast<double>(fun) / subset.size();
  return out;
}

namespace {

struct CellTask {
  int cell_idx;
  int rep;
};

// One replicate of one factorial cell; appends up to three family rows.
std::vector<RepResult> run_replicate(const ScenarioConfig& cfg, int cell_idx, int rep,
                                     const PrecisionMatrix& q_icar,
                                     const PrecisionMatrix& q_tps) {
  const FactorCell& cell = cfg.cells[cell_idx];
  const int m = cfg.grid.cells();
  std::uint64_t rep_seed = derive_seed(cfg.seed, cell_idx, rep);
  MaternParams gp{cell.nu, cell.rho, 1.0};
  auto centroids = grid_centroids(cfg.grid);
  double noise_sd = std::sqrt(cell.tau2);

  Vector g_grid, y;
  std::vector<Point> locations;
  std::optional<MappingMatrix> K;
  std::vector<int> hull;

  if (cfg.kind == ObsKind::Point) {
    locations = cfg.scheme == LocationScheme::Uniform
                    ? sample_locations_uniform(cfg.grid, cfg.n_obs, derive_seed(rep_seed, 1))
                    : sample_locations_clustered(cfg.grid, cfg.n_obs, cfg.parent_intensity,
                                                 cfg.cluster_sd, derive_seed(rep_seed, 1));
    // The surface is continuous: simulate jointly at the exact data locations
    // and the centroids, then observe the location part with noise.
    std::vector<Point> sites = locations;
    sites.insert(sites.end(), centroids.begin(), centroids.end());
    Vector g_all = simulate_gp_field(sites, gp, derive_seed(rep_seed, 2));
    Vector g_data = g_all.head(cfg.n_obs);
    g_grid = g_all.tail(m);
    auto rng = make_rng(derive_seed(rep_seed, 3));
    std::normal_distribution<double> gauss(0.0, 1.0);
    y = g_data;
    for (int i = 0; i < y.size(); ++i) y(i) += noise_sd * gauss(rng);
    std::vector<PointObs> obs(locations.size());
    for (std::size_t i = 0; i < locations.size(); ++i) {
      obs[i] = {locations[i].x, locations[i].y, y(i)};
    }
    K = build_point_mapping(cfg.grid, obs);
    hull = convex_hull_cells(cfg.grid, locations);
  } else {
    g_grid = simulate_gp_field(centroids, gp, derive_seed(rep_seed, 2));
    std::vector<ArealObs> areas;
    areas.reserve(cfg.coarse_nx * cfg.coarse_ny);
    double wx = (cfg.grid.xmax() - cfg.grid.x0) / cfg.coarse_nx;
    double wy = (cfg.grid.ymax() - cfg.grid.y0) / cfg.coarse_ny;
    for (int r = 0; r < cfg.coarse_ny; ++r) {
      for (int c = 0; c < cfg.coarse_nx; ++c) {
        areas.push_back({Rect{cfg.grid.x0 + c * wx, cfg.grid.y0 + r * wy,
                              cfg.grid.x0 + (c + 1) * wx, cfg.grid.y0 + (r + 1) * wy},
                         0.0});
      }
    }
    K = build_areal_mapping(cfg.grid, areas);
    auto rng = make_rng(derive_seed(rep_seed, 3));
    std::normal_distribution<double> gauss(0.0, 1.0);
    y = K->mat * g_grid;
    for (int i = 0; i < y.size(); ++i) y(i) += noise_sd * gauss(rng);
    hull.resize(m);
    for (int j = 0; j < m; ++j) hull[j] = j;
  }

  // Held-out observations at the centroids, shared across families so the
  // coverage comparison is paired.
  Vector held_out = g_grid;
  {
    auto rng = make_rng(derive_seed(rep_seed, 4));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int j = 0; j < m; ++j) held_out(j) += noise_sd * gauss(rng);
  }

  std::vector<RepResult> rows;
  auto record = [&](const std::string& family, const Vector& ghat, const Vector& se,
                    double lambda_hat, double tau2_hat, bool at_bound) {
    RepResult row;
    row.scenario = cfg.label;
    row.cell = cell;
    row.rep = rep;
    row.family = family;
    row.sse = (ghat - g_grid).squaredNorm();
    double hull_sse = 0.0;
    for (int j : hull) {
      double d = ghat(j) - g_grid(j);
      hull_sse += d * d;
    }
    row.sse_hull = cfg.kind == ObsKind::Point ? hull_sse : row.sse;
    if (cfg.kind == ObsKind::Areal) {
      row.sse_coarse = (K->mat * (ghat - g_grid)).squaredNorm();
    }
    CoverageStats cov = coverage_stats(held_out, g_grid, ghat, se, hull, tau2_hat);
    row.cov_pred = cov.pred_coverage;
    row.cov_fun = cov.fun_coverage;
    row.lambda_hat = lambda_hat;
    row.tau2_hat = tau2_hat;
    row.at_bound = at_bound;
    rows.push_back(std::move(row));
  };

  for (const auto* entry : {&q_icar, &q_tps}) {
    const std::string family = family_name(entry->family);
    try {
      FitResult fit = maximize_lambda(*K, *entry, Matrix(), y, cfg.log_lambda_bounds);
      record(family, fit.ghat, fit.se_g, fit.hyper.lambda, fit.hyper.tau2, fit.at_bound);
    } catch (const std::exception& e) {
      std::cerr << "warning: " << cfg.label << " cell " << cell_idx << " rep " << rep << " "
                << family << " fit failed: " << e.what() << "\n";
    }
  }
  if (cfg.fit_gp && cfg.kind == ObsKind::Point) {
    try {
      GpFit fit = gp_profile_fit(locations, centroids, cell.nu, y);
      record("gp", fit.ghat, fit.se, fit.lambda, fit.tau2, !fit.converged);
    } catch (const std::exception& e) {
      std::cerr << "warning: " << cfg.label << " cell " << cell_idx << " rep " << rep
                << " gp fit failed: " << e.what() << "\n";
    }
  }
  return rows;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.grid.validate();
  if (cfg.cells.empty()) throw DomainError("scenario has no factorial cells");
  if (cfg.n_reps < 1) throw DomainError("scenario needs at least one replicate");
  if (cfg.kind == ObsKind::Areal &&
      (cfg.coarse_nx < 1 || cfg.coarse_ny < 1 || cfg.grid.nx % cfg.coarse_nx != 0 ||
       cfg.grid.ny % cfg.coarse_ny != 0)) {
    throw DomainError("coarse grid must tile the fine grid exactly");
  }
  for (const auto& cell : cfg.cells) {
    MaternParams{cell.nu, cell.rho, 1.0}.validate();
    if (!(cell.tau2 > 0.0)) throw DomainError("factorial tau2 must be > 0");
  }

  PrecisionMatrix q_icar = build_icar(cfg.grid);
  PrecisionMatrix q_tps = build_tpsmrf(cfg.grid);

  std::vector<CellTask> tasks;
  for (int ci = 0; ci < static_cast<int>(cfg.cells.size()); ++ci) {
    for (int rep = 0; rep < cfg.n_reps; ++rep) tasks.push_back({ci, rep});
  }
  // Slot per task keeps the output order independent of thread scheduling.
  std::vector<std::vector<RepResult>> slots(tasks.size());
  int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      slots[t] = run_replicate(cfg, tasks[t].cell_idx, tasks[t].rep, q_icar, q_tps);
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t t = next.fetch_add(1); t < tasks.size(); t = next.fetch_add(1)) {
        slots[t] = run_replicate(cfg, tasks[t].cell_idx, tasks[t].rep, q_icar, q_tps);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ScenarioResult result;
  for (auto& slot : slots) {
    for (auto& row : slot) result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

struct Accum {
  std::vector<double> sse, sse_hull, cov_pred, cov_fun;
};

std::pair<double, double> mean_se(const std::vector<double>& xs) {
  const int n = static_cast<int>(xs.size());
  if (n == 0) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace

std::vector<SummaryRow> summarize(const ScenarioResult& result) {
  // Grouped by (scenario, cell, family); the string key keeps ordering
  // deterministic across runs.
  std::map<std::string, std::pair<SummaryRow, Accum>> groups;
  auto cell_key = [](const RepResult& r) {
    return r.scenario + "|" + std::to_string(r.cell.nu) + "|" + std::to_string(r.cell.rho) +
           "|" + std::to_string(r.cell.tau2);
  };
  for (const auto& row : result.rows) {
    auto& g = groups[cell_key(row) + "|" + row.family];
    g.first.scenario = row.scenario;
    g.first.cell = row.cell;
    g.first.family = row.family;
    g.second.sse.push_back(row.sse);
    g.second.sse_hull.push_back(row.sse_hull);
    g.second.cov_pred.push_back(row.cov_pred);
    g.second.cov_fun.push_back(row.cov_fun);
  }
  // Paired hull-restricted log2 ratios need icar and tpsmrf matched by rep.
  struct PairAcc {
    SummaryRow proto;
    std::map<int, std::pair<double, double>> by_rep;  // rep -> (icar, tps)
  };
  std::map<std::string, PairAcc> pairs;
  for (const auto& row : result.rows) {
    if (row.family != "icar" && row.family != "tpsmrf") continue;
    auto& acc = pairs[cell_key(row)];
    acc.proto.scenario = row.scenario;
    acc.proto.cell = row.cell;
    auto& slot = acc.by_rep[row.rep];
    (row.family == "icar" ? slot.first : slot.second) = row.sse_hull;
  }

  std::vector<SummaryRow> out;
  for (auto& [key, entry] : groups) {
    SummaryRow row = entry.first;
    const Accum& acc = entry.second;
    row.n_reps = static_cast<int>(acc.sse.size());
    std::tie(row.mean_sse, row.se_sse) = mean_se(acc.sse);
    std::tie(row.mean_sse_hull, row.se_sse_hull) = mean_se(acc.sse_hull);
    row.mean_cov_pred = mean_se(acc.cov_pred).first;
    row.mean_cov_fun = mean_se(acc.cov_fun).first;
    row.high_se = row.mean_sse > 0.0 && row.se_sse > 0.2 * row.mean_sse;
    out.push_back(row);
  }
  for (auto& [key, acc] : pairs) {
    std::vector<double> ratios;
    for (const auto& [rep, pr] : acc.by_rep) {
      if (pr.first > 0.0 && pr.second > 0.0) ratios.push_back(std::log2(pr.first / pr.second));
    }
    if (ratios.empty()) continue;
    SummaryRow row = acc.proto;
    row.family = "log2(icar/tpsmrf)";
    row.n_reps = static_cast<int>(ratios.size());
    std::tie(row.mean_sse_hull, row.se_sse_hull) = mean_se(ratios);
    row.mean_sse = row.mean_sse_hull;
    row.se_sse = row.se_sse_hull;
    out.push_back(row);
  }
  return out;
}

}  // namespace gridmrf
