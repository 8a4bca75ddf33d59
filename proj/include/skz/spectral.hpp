#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "skz/row_matrix.hpp"

namespace skz {

struct SpectralSummary {
  double sigma_max = 0.0;
  double sigma_min = 0.0;          // smallest computed singular value
  double sigma_min_nonzero = 0.0;  // smallest singular value above the rank tolerance
  std::size_t rank = 0;
};

namespace detail {

inline Eigen::MatrixXd to_eigen(const RowMatrix& a) {
  const std::vector<double> d = a.to_dense();
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(
      d.data(), static_cast<Eigen::Index>(a.rows()),
      static_cast<Eigen::Index>(a.cols()));
}

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

// Rank tolerance: max(rows, cols) * sigma_max * eps.
inline double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * sigma_max *
         std::numeric_limits<double>::epsilon();
}

inline SpectralSummary summarize(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd sv = singular_values(m);  // descending
  SpectralSummary s;
  s.sigma_max = sv(0);
  if (s.sigma_max == 0.0)
    throw std::invalid_argument("spectral_summary: zero matrix has no spectral data");
  const double tol = rank_tolerance(m.rows(), m.cols(), s.sigma_max);
  s.sigma_min = sv(sv.size() - 1);
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) {
      s.rank = static_cast<std::size_t>(i) + 1;
      s.sigma_min_nonzero = sv(i);
    }
  }
  return s;
}

}  // namespace detail

// Dense SVD of the whole matrix; guarded because the cost is cubic in the
// small dimension. Raise size_guard deliberately for bigger inputs.
inline SpectralSummary spectral_summary(const RowMatrix& a,
                                        std::size_t size_guard = 5000) {
  if (std::min(a.rows(), a.cols()) > size_guard)
    throw std::invalid_argument("spectral_summary: matrix exceeds the size guard");
  return detail::summarize(detail::to_eigen(a));
}

}  // namespace skz
