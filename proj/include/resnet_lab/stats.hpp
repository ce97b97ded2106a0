#pragma once

#include <vector>

namespace resnet_lab {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double ci_lo = 0.0;  // 95% interval on the slope (Student t, n - 2 dof)
  double ci_hi = 0.0;
};

/// Ordinary least squares of log(y) on log(x). Needs >= 3 points, all positive.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Two-sided 97.5% quantile of Student's t with `dof` degrees of freedom.
double student_t975(int dof);

/// Integral of equally spaced samples f_0..f_{n-1} (spacing h) of a smooth
/// function. Uses the fourth-order end-corrected trapezoid rule
///   h [3/8, 7/6, 23/24, 1, ..., 1, 23/24, 7/6, 3/8]
/// for n >= 6, Simpson's rule for odd n < 6 and the trapezoid rule otherwise.
double integrate_samples(const std::vector<double>& f, double h);

double mean(const std::vector<double>& v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(const std::vector<double>& v);

}  // namespace resnet_lab
