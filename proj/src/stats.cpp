#include "resnet_lab/stats.hpp"

#include <cmath>
#include <numeric>

#include "resnet_lab/errors.hpp"

namespace resnet_lab {

double student_t975(int dof) {
  static const double table[] = {0.0,   12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                 2.306, 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
                                 2.120, 2.110,  2.101, 2.093, 2.086};
  require(dof >= 1, "student_t975: dof must be positive");
  if (dof <= 20) return table[dof];
  return 1.960 + 2.4 / dof;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "fit_loglog: x and y lengths differ");
  require(x.size() >= 3, "fit_loglog: need at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "fit_loglog: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = mean(lx), my = mean(ly);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, "fit_loglog: x values must not all coincide");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  const double se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  const double t = student_t975(static_cast<int>(n - 2));
  fit.ci_lo = fit.slope - t * se;
  fit.ci_hi = fit.slope + t * se;
  return fit;
}

double integrate_samples(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  if (n >= 6) {
    static const double edge[] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = 1.0;
      if (i < 3) w = edge[i];
      else if (n - 1 - i < 3) w = edge[n - 1 - i];
      acc += w * f[i];
    }
    return h * acc;
  }
  if (n % 2 == 1) {
    double acc = f.front() + f.back();
    for (std::size_t i = 1; i + 1 < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[i];
    return h * acc / 3.0;
  }
  double acc = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < n; ++i) acc += f[i];
  return h * acc;
}

double mean(const std::vector<double>& v) {
  require(!v.empty(), "mean: empty input");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace resnet_lab
