#include "gridmrf/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace gridmrf {

namespace {

using nlohmann::json;

// %.17g round-trips doubles exactly and keeps repeated runs byte-identical.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(strip(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError(path + ": line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  return out;
}

void expect_header(const std::string& got, const std::string& want, const std::string& path) {
  if (strip(got) != want) {
    throw DomainError(path + ": expected header '" + want + "', got '" + strip(got) + "'");
  }
}

json load_json(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError(path + ": invalid JSON: " + e.what());
  }
  return j;
}

}  // namespace

std::vector<PointObs> read_point_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DomainError(path + ": empty file");
  expect_header(line, "x,y,value", path);
  std::vector<PointObs> obs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3) {
      throw DomainError(path + ": line " + std::to_string(lineno) + ": expected 3 fields, got " +
                        std::to_string(fields.size()));
    }
    obs.push_back({parse_double(fields[0], path, lineno), parse_double(fields[1], path, lineno),
                   parse_double(fields[2], path, lineno)});
  }
  if (obs.empty()) throw DomainError(path + ": no observations");
  return obs;
}

void write_point_csv(const std::string& path, const std::vector<PointObs>& obs) {
  auto out = open_out(path);
  out << "x,y,value\n";
  for (const auto& o : obs) out << fmt(o.x) << "," << fmt(o.y) << "," << fmt(o.value) << "\n";
}

std::vector<ArealObs> read_rect_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DomainError(path + ": empty file");
  expect_header(line, "xmin,ymin,xmax,ymax,value", path);
  std::vector<ArealObs> obs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 5) {
      throw DomainError(path + ": line " + std::to_string(lineno) + ": expected 5 fields, got " +
                        std::to_string(fields.size()));
    }
    Rect r{parse_double(fields[0], path, lineno), parse_double(fields[1], path, lineno),
           parse_double(fields[2], path, lineno), parse_double(fields[3], path, lineno)};
    obs.push_back({r, parse_double(fields[4], path, lineno)});
  }
  if (obs.empty()) throw DomainError(path + ": no observations");
  return obs;
}

std::vector<ArealObs> read_polygon_json(const std::string& path) {
  json j = load_json(path);
  if (!j.is_array()) throw DomainError(path + ": expected a JSON array of regions");
  std::vector<ArealObs> obs;
  for (const auto& item : j) {
    if (!item.contains("vertices") || !item.contains("value")) {
      throw DomainError(path + ": each region needs 'vertices' and 'value'");
    }
    Polygon poly;
    for (const auto& v : item["vertices"]) {
      if (!v.is_array() || v.size() != 2) {
        throw DomainError(path + ": vertices must be [x, y] pairs");
      }
      poly.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    obs.push_back({poly, item["value"].get<double>()});
  }
  if (obs.empty()) throw DomainError(path + ": no regions");
  return obs;
}

GridSpec read_grid_json(const std::string& path) {
  json j = load_json(path);
  GridSpec grid;
  try {
    grid.nx = j.at("nx").get<int>();
    grid.ny = j.at("ny").get<int>();
    grid.x0 = j.value("x0", 0.0);
    grid.y0 = j.value("y0", 0.0);
    grid.dx = j.value("dx", 1.0 / grid.nx);
    grid.dy = j.value("dy", 1.0 / grid.ny);
  } catch (const json::exception& e) {
    throw DomainError(path + ": bad grid spec: " + e.what());
  }
  grid.validate();
  return grid;
}

namespace {

json grid_to_json(const GridSpec& grid) {
  return json{{"nx", grid.nx}, {"ny", grid.ny}, {"x0", grid.x0},
              {"y0", grid.y0}, {"dx", grid.dx}, {"dy", grid.dy}};
}

}  // namespace

void write_grid_json(const std::string& path, const GridSpec& grid) {
  auto out = open_out(path);
  out << grid_to_json(grid).dump(2) << "\n";
}

void write_precision(const std::string& triplet_path, const std::string& meta_path,
                     const PrecisionMatrix& Q, const GridSpec& grid) {
  auto out = open_out(triplet_path);
  for (int k = 0; k < Q.mat.outerSize(); ++k) {
    for (SpMat::InnerIterator it(Q.mat, k); it; ++it) {
      if (it.row() > it.col()) continue;  // upper triangle plus diagonal
      out << it.row() << " " << it.col() << " " << fmt(it.value()) << "\n";
    }
  }
  json meta{{"family", family_name(Q.family)},
            {"m", Q.m()},
            {"c", Q.null_dim},
            {"grid", grid_to_json(grid)}};
  auto mout = open_out(meta_path);
  mout << meta.dump(2) << "\n";
}

void write_fit_json(const std::string& path, const FitResult& fit) {
  json j{{"lambda", fit.hyper.lambda},
         {"tau2", fit.hyper.tau2},
         {"kappa", fit.hyper.kappa()},
         {"c", fit.null_dim},
         {"converged_at_bound", fit.at_bound},
         {"se_stochastic", fit.se_stochastic},
         {"loglik_evals", fit.loglik_trace.size()}};
  if (fit.beta.size() > 0) {
    j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  }
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_fit_grid_csv(const std::string& path, const GridSpec& grid, const FitResult& fit) {
  if (fit.ghat.size() != grid.cells() || fit.se_g.size() != grid.cells()) {
    throw DomainError("fit result does not match the grid size");
  }
  auto out = open_out(path);
  out << "row,col,ghat,se\n";
  for (int cell = 0; cell < grid.cells(); ++cell) {
    out << grid.row_of(cell) << "," << grid.col_of(cell) << "," << fmt(fit.ghat(cell)) << ","
        << fmt(fit.se_g(cell)) << "\n";
  }
}

void write_eigencurve_csv(const std::string& path, const EigenCurve& curve) {
  auto out = open_out(path);
  out << "index,scaled_inv_eigenvalue\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    out << (i + 1) << "," << fmt(curve.values[i]) << "\n";
  }
}

void write_kernel_csv(const std::string& transect_path, const std::string& row_path,
                      const GridSpec& grid, const KernelSlice& slice) {
  {
    auto out = open_out(transect_path);
    out << "offset,weight\n";
    for (std::size_t i = 0; i < slice.cross_x.size(); ++i) {
      out << fmt(slice.cross_x[i]) << "," << fmt(slice.cross_weights[i]) << "\n";
    }
  }
  auto out = open_out(row_path);
  out << "row,col,weight\n";
  for (int cell = 0; cell < grid.cells(); ++cell) {
    out << grid.row_of(cell) << "," << grid.col_of(cell) << "," << fmt(slice.weights(cell))
        << "\n";
  }
}

void write_sim_csv(const std::string& path, const ScenarioResult& result) {
  auto out = open_out(path);
  out << "scenario,nu,rho,tau2,rep,family,sse,sse_hull,cov_pred,cov_fun,lambda_hat,tau2_hat,"
         "sse_coarse\n";
  for (const auto& r : result.rows) {
    out << r.scenario << "," << fmt(r.cell.nu) << "," << fmt(r.cell.rho) << ","
        << fmt(r.cell.tau2) << "," << r.rep << "," << r.family << "," << fmt(r.sse) << ","
        << fmt(r.sse_hull) << "," << fmt(r.cov_pred) << "," << fmt(r.cov_fun) << ","
        << fmt(r.lambda_hat) << "," << fmt(r.tau2_hat) << "," << fmt(r.sse_coarse) << "\n";
  }
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << "scenario,nu,rho,tau2,family,n_reps,mean_sse,se_sse,mean_sse_hull,se_sse_hull,"
         "mean_cov_pred,mean_cov_fun,high_se\n";
  for (const auto& r : rows) {
    out << r.scenario << "," << fmt(r.cell.nu) << "," << fmt(r.cell.rho) << ","
        << fmt(r.cell.tau2) << "," << r.family << "," << r.n_reps << "," << fmt(r.mean_sse)
        << "," << fmt(r.se_sse) << "," << fmt(r.mean_sse_hull) << "," << fmt(r.se_sse_hull)
        << "," << fmt(r.mean_cov_pred) << "," << fmt(r.mean_cov_fun) << ","
        << (r.high_se ? 1 : 0) << "\n";
  }
}

void write_oracle_csv(const std::string& path, const std::vector<OracleRow>& rows) {
  auto out = open_out(path);
  out << "family,nu,rho,tau2,scenario,lambda_star,sse,sse_se\n";
  for (const auto& r : rows) {
    out << r.family << "," << fmt(r.cell.nu) << "," << fmt(r.cell.rho) << ","
        << fmt(r.cell.tau2) << "," << r.scenario << "," << fmt(r.lambda_star) << ","
        << fmt(r.sse) << "," << fmt(r.sse_se) << "\n";
  }
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  json j{{"command", manifest.command},
         {"args", manifest.args},
         {"seed", manifest.seed},
         {"inputs", manifest.inputs},
         {"outputs", manifest.outputs},
         {"wall_seconds", manifest.wall_seconds},
         {"version", manifest.version}};
  std::string tmp = path + ".tmp";
  {
    auto out = open_out(tmp);
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gridmrf
