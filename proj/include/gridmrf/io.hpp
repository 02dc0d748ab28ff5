#ifndef GRIDMRF_IO_HPP
#define GRIDMRF_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "gridmrf/fit.hpp"
#include "gridmrf/grid.hpp"
#include "gridmrf/mapping.hpp"
#include "gridmrf/oracle.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/sim.hpp"
#include "gridmrf/spectral.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

// Point observations: CSV with header x,y,value.
std::vector<PointObs> read_point_csv(const std::string& path);
void write_point_csv(const std::string& path, const std::vector<PointObs>& obs);

// Axis-aligned rectangular regions: CSV with header xmin,ymin,xmax,ymax,value.
std::vector<ArealObs> read_rect_csv(const std::string& path);

// Polygonal regions: JSON array of {"vertices": [[x, y], ...], "value": v}.
std::vector<ArealObs> read_polygon_json(const std::string& path);

GridSpec read_grid_json(const std::string& path);
void write_grid_json(const std::string& path, const GridSpec& grid);

// Sparse precision: whitespace triplets "i j value" (upper triangle plus
// diagonal, 0-based) next to a JSON sidecar with family, size and null dim.
void write_precision(const std::string& triplet_path, const std::string& meta_path,
                     const PrecisionMatrix& Q, const GridSpec& grid);

void write_fit_json(const std::string& path, const FitResult& fit);
// Per-cell CSV row,col,ghat,se over the grid.
void write_fit_grid_csv(const std::string& path, const GridSpec& grid, const FitResult& fit);

// CSV index,value of the scaled inverse spectrum.
void write_eigencurve_csv(const std::string& path, const EigenCurve& curve);

// Transect CSV offset_x,weight and full-row CSV row,col,weight.
void write_kernel_csv(const std::string& transect_path, const std::string& row_path,
                      const GridSpec& grid, const KernelSlice& slice);

void write_sim_csv(const std::string& path, const ScenarioResult& result);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);

struct OracleRow {
  std::string family;
  FactorCell cell;
  std::string scenario;
  double lambda_star = 0.0;
  double sse = 0.0;
  double sse_se = 0.0;
};
void write_oracle_csv(const std::string& path, const std::vector<OracleRow>& rows);

// Run provenance: command, seed, config and output listing, written
// atomically (temp file + rename).
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
  std::string version = "0.1.0";
};
void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace gridmrf

#endif
