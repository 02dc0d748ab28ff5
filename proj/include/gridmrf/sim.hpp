#ifndef GRIDMRF_SIM_HPP
#define GRIDMRF_SIM_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridmrf/grid.hpp"
#include "gridmrf/matern.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

enum class LocationScheme { Uniform, Clustered };
enum class ObsKind { Point, Areal };

struct FactorCell {
  double nu = 0.5;
  double rho = 0.32;
  double tau2 = 0.15 * 0.15;
};

struct ScenarioConfig {
  GridSpec grid = unit_square_grid(100, 100);
  ObsKind kind = ObsKind::Point;
  LocationScheme scheme = LocationScheme::Uniform;
  int n_obs = 100;
  int coarse_nx = 10;  // areal scenarios: coarse blocks per side
  int coarse_ny = 10;
  std::vector<FactorCell> cells;
  int n_reps = 100;
  std::uint64_t seed = 1;
  double parent_intensity = 25.0;  // clustered sampling
  double cluster_sd = 0.05;
  std::pair<double, double> log_lambda_bounds{-10.0, 20.0};
  bool fit_gp = false;  // kriging comparison fit (point scenarios only)
  int threads = 1;
  std::string label = "scenario";
};

// n points uniform on the grid bounding box, half-open at the upper edges.
std::vector<Point> sample_locations_uniform(const GridSpec& grid, int n, std::uint64_t seed);

// Parent-child clustered sampling: Poisson(parent_intensity) parent count
// (resampled while zero), each point picks a uniform parent and adds an
// isotropic N(0, sd^2) displacement; points landing outside the domain are
// redrawn.  Returns exactly n points.
std::vector<Point> sample_locations_clustered(const GridSpec& grid, int n,
                                              double parent_intensity, double cluster_sd,
                                              std::uint64_t seed);

// Cells whose centroids lie inside or on the convex hull of the given points.
// Fewer than 3 distinct points, or collinear points, fall back to the cells
// containing the points.
std::vector<int> convex_hull_cells(const GridSpec& grid, const std::vector<Point>& pts);

struct CoverageStats {
  double pred_coverage = 0.0;  // held-out noisy values vs ghat +- z sqrt(se^2 + tau2)
  double fun_coverage = 0.0;   // latent truth vs ghat +- z se
};

// Interval coverage over the listed cells at the given confidence level.
CoverageStats coverage_stats(const Vector& held_out_y, const Vector& truth_g,
                             const Vector& ghat, const Vector& se_g,
                             const std::vector<int>& subset, double tau2_hat,
                             double level = 0.95);

// Two-sided standard normal quantile at the given central coverage level.
double normal_quantile_two_sided(double level);

struct RepResult {
  std::string scenario;
  FactorCell cell;
  int rep = 0;
  std::string family;       // icar, tpsmrf, gp
  double sse = 0.0;         // SSE over all grid centroids
  double sse_hull = 0.0;    // hull-restricted SSE (points); equals sse for areal
  double sse_coarse = 0.0;  // coarse-average SSE (areal scenarios; 0 for points)
  double cov_pred = 0.0;
  double cov_fun = 0.0;
  double lambda_hat = 0.0;
  double tau2_hat = 0.0;
  bool at_bound = false;
};

struct ScenarioResult {
  std::vector<RepResult> rows;
};

// Full factorial sweep.  For each (cell, rep): simulate the latent surface
// and noise with a seed derived from (seed, cell, rep), fit the ICAR and
// thin-plate MRF models by profile likelihood (plus an optional kriging fit),
// and record SSE and coverage.  Per-replicate failures are reported on stderr
// and skipped.  Output is deterministic for a fixed config.
ScenarioResult run_scenario(const ScenarioConfig& config);

struct SummaryRow {
  std::string scenario;
  FactorCell cell;
  std::string family;
  int n_reps = 0;
  double mean_sse = 0.0;
  double se_sse = 0.0;
  double mean_sse_hull = 0.0;
  double se_sse_hull = 0.0;
  double mean_cov_pred = 0.0;
  double mean_cov_fun = 0.0;
  bool high_se = false;  // SE exceeds 20% of the mean SSE
};

// Per-cell means and Monte Carlo standard errors, plus paired log2 SSE-ratio
// rows (family "log2(icar/tpsmrf)", hull-restricted SSE) when both MRF
// families are present.
std::vector<SummaryRow> summarize(const ScenarioResult& result);

}  // namespace gridmrf

#endif
