#include "gridmrf/optim.hpp"

#include <algorithm>
#include <cmath>

namespace gridmrf {

GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                double tol) {
  if (!(hi > lo)) throw DomainError("golden section needs lo < hi");
  if (!(tol > 0.0)) throw DomainError("golden section needs tol > 0");
  GoldenResult res;
  auto eval = [&](double x) {
    double fx = f(x);
    res.trace.emplace_back(x, fx);
    return fx;
  };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double flo = eval(lo), fhi = eval(hi);
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  double xin = fc > fd ? c : d;
  double fin = std::max(fc, fd);
  res.x = xin;
  res.fx = fin;
  // Endpoint wins only if it strictly beats the interior optimum; this flags
  // maxima the bracket failed to contain.
  if (flo > fin && flo >= fhi) {
    res.x = lo;
    res.fx = flo;
    res.at_lower = true;
  } else if (fhi > fin) {
    res.x = hi;
    res.fx = fhi;
    res.at_upper = true;
  }
  return res;
}

NelderMeadResult nelder_mead_min(const std::function<double(const Vector&)>& f, const Vector& x0,
                                 double step, double ftol, int max_evals) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw DomainError("nelder-mead needs at least one dimension");
  NelderMeadResult res;
  std::vector<Vector> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 1; i <= n; ++i) pts[i](i - 1) += step;
  for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);
  res.evals = n + 1;

  const double alpha = 1.0, gamma = 2.0, beta = 0.5, delta = 0.5;
  while (res.evals < max_evals) {
    std::vector<int> order(n + 1);
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    int best = order[0], worst = order[n], second = order[n - 1];
    if (fv[worst] - fv[best] < ftol) {
      res.converged = true;
      break;
    }
    Vector centroid = Vector::Zero(n);
    for (int i = 0; i <= n; ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= n;

    Vector xr = centroid + alpha * (centroid - pts[worst]);
    double fr = f(xr);
    ++res.evals;
    if (fr < fv[best]) {
      Vector xe = centroid + gamma * (xr - centroid);
      double fe = f(xe);
      ++res.evals;
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      Vector xc = fr < fv[worst] ? Vector(centroid + beta * (xr - centroid))
                                 : Vector(centroid + beta * (pts[worst] - centroid));
      double fc = f(xc);
      ++res.evals;
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + delta * (pts[i] - pts[best]);
          fv[i] = f(pts[i]);
          ++res.evals;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i) {
    if (fv[i] < fv[best]) best = i;
  }
  res.x = pts[best];
  res.fx = fv[best];
  return res;
}

}  // namespace gridmrf
