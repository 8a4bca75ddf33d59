#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace skz {

// Regularization weight for f(x) = lambda*||x||_1 + 0.5*||x||_2^2.
// Validated once so downstream kernels never re-check.
class RegParam {
public:
  explicit RegParam(double lambda) : lambda_(lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("RegParam: lambda must be finite and nonnegative");
  }
  double value() const { return lambda_; }

private:
  double lambda_;
};

inline double soft_shrink_scalar(double v, double lambda) {
  const double mag = std::abs(v) - lambda;
  if (mag <= 0.0) return 0.0;
  return v < 0.0 ? -mag : mag;
}

inline void soft_shrinkage_into(std::span<const double> x_star, RegParam lambda,
                                std::span<double> out) {
  if (out.size() != x_star.size())
    throw std::invalid_argument("soft_shrinkage_into: bad output length");
  const double l = lambda.value();
  for (std::size_t j = 0; j < x_star.size(); ++j)
    out[j] = soft_shrink_scalar(x_star[j], l);
}

inline std::vector<double> soft_shrinkage(std::span<const double> x_star,
                                          RegParam lambda) {
  std::vector<double> out(x_star.size());
  soft_shrinkage_into(x_star, lambda, out);
  return out;
}

// f(x) = lambda*||x||_1 + 0.5*||x||_2^2
inline double objective_f(std::span<const double> x, RegParam lambda) {
  double l1 = 0.0;
  double l2 = 0.0;
  for (double v : x) {
    l1 += std::abs(v);
    l2 += v * v;
  }
  return lambda.value() * l1 + 0.5 * l2;
}

// f*(y) = 0.5*||S_lambda(y)||_2^2, so grad f* is the shrinkage itself.
inline double conjugate_f(std::span<const double> y, RegParam lambda) {
  const double l = lambda.value();
  double s = 0.0;
  for (double v : y) {
    const double z = soft_shrink_scalar(v, l);
    s += z * z;
  }
  return 0.5 * s;
}

// Bregman distance D_f^{x*}(x, y) = f*(x*) - <x*, y> + f(y) for the
// subgradient x* of f at x. The pairing x = S_lambda(x*) is what makes x*
// a subgradient, so it is enforced (componentwise, 1e-12) rather than
// trusted. Rounding can leave a tiny negative; the distance is nonnegative.
inline double bregman_distance(std::span<const double> x_star,
                               std::span<const double> x,
                               std::span<const double> y, RegParam lambda) {
  const std::size_t n = x_star.size();
  if (x.size() != n || y.size() != n)
    throw std::invalid_argument("bregman_distance: length mismatch");
  const double l = lambda.value();
  double inner = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(soft_shrink_scalar(x_star[j], l) - x[j]) > 1e-12)
      throw std::invalid_argument(
          "bregman_distance: x_star is not a subgradient of f at x");
    inner += x_star[j] * y[j];
  }
  const double d = conjugate_f(x_star, lambda) - inner + objective_f(y, lambda);
  return std::max(0.0, d);
}

}  // namespace skz
