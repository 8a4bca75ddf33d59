#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "skz/bregman.hpp"
#include "skz/row_matrix.hpp"
#include "skz/solver.hpp"
#include "skz/spectral.hpp"

namespace skz {

// ---------------------------------------------------------------------------
// Spectral quantities entering the linear convergence rates.

// Minimum over all nonempty column subsets J of the smallest nonzero
// singular value of A_J. Exponential in the column count, hence the hard
// enumeration limit.
inline double sigma_tilde_min(const RowMatrix& a, std::size_t n_limit = 15) {
  if (n_limit > 25)
    throw std::invalid_argument("sigma_tilde_min: enumeration limit too large");
  const std::size_t n = a.cols();
  if (n > n_limit)
    throw std::invalid_argument("sigma_tilde_min: column count exceeds the enumeration limit");
  const Eigen::MatrixXd full = detail::to_eigen(a);
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < n; ++j)
      if (mask & (std::size_t{1} << j)) cols.push_back(static_cast<Eigen::Index>(j));
    Eigen::MatrixXd sub(full.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = full.col(cols[c]);
    const Eigen::VectorXd sv = detail::singular_values(sub);
    if (sv(0) == 0.0) continue;  // all-zero submatrix carries no constraint
    const double tol = detail::rank_tolerance(sub.rows(), sub.cols(), sv(0));
    for (Eigen::Index i = sv.size() - 1; i >= 0; --i) {
      if (sv(i) > tol) {
        best = std::min(best, sv(i));
        any = true;
        break;
      }
    }
  }
  if (!any) throw std::invalid_argument("sigma_tilde_min: zero matrix");
  return best;
}

// Smallest magnitude among the nonzero entries of the reference solution.
inline double x_hat_min_abs(std::span<const double> xhat) {
  double best = std::numeric_limits<double>::infinity();
  for (double v : xhat)
    if (v != 0.0) best = std::min(best, std::abs(v));
  if (!std::isfinite(best))
    throw std::invalid_argument("x_hat_min_abs: reference solution is zero");
  return best;
}

// nu = (|xhat|_min + 2*lambda) / (|xhat|_min * sigma_tilde_min^2); the
// constant in D(x_k, xhat) <= nu * ||A x_k - b||^2 along the iteration.
inline double nu_error_constant(const RowMatrix& a, std::span<const double> xhat,
                                RegParam lambda, std::size_t n_limit = 15) {
  const double st = sigma_tilde_min(a, n_limit);
  const double xmin = x_hat_min_abs(xhat);
  return (xmin + 2.0 * lambda.value()) / (xmin * st * st);
}

namespace detail {

inline void check_rate(double q, const char* what) {
  if (!(q > 0.0) || !(q <= 0.5 * (1.0 + 1e-9)))
    throw std::runtime_error(std::string(what) + ": rate outside (0, 1/2]");
}

inline double sigma_max_of_rows(const RowMatrix& a, std::span<const std::size_t> rows) {
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(a.cols()));
  for (std::size_t p = 0; p < rows.size(); ++p) {
    const std::vector<double> row = a.row_dense(rows[p]);
    for (std::size_t j = 0; j < row.size(); ++j)
      sub(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = row[j];
  }
  return singular_values(sub)(0);
}

}  // namespace detail

// Global per-step contraction factor of the full-residual weighting:
// D_{k+1} <= (1 - q) D_k with q = 1 / (2 nu sigma_max(A)^2).
inline double q_rate(const RowMatrix& a, std::span<const double> xhat, RegParam lambda,
                     std::size_t n_limit = 15) {
  const double nu = nu_error_constant(a, xhat, lambda, n_limit);
  const SpectralSummary s = spectral_summary(a);
  const double q = 1.0 / (2.0 * nu * s.sigma_max * s.sigma_max);
  detail::check_rate(q, "q_rate");
  return q;
}

// Contraction factor of one adaptive step with threshold epsilon and
// selection tau: q_k = epsilon ||A_tau||_F^2 / (2 nu sigma_max(A_tau)^2).
inline double q_step_rate(const RowMatrix& a, std::span<const std::size_t> tau,
                          double epsilon, double nu) {
  if (tau.empty()) throw std::invalid_argument("q_step_rate: empty selection");
  double fro_tau = 0.0;
  for (std::size_t p = 0; p < tau.size(); ++p) {
    if (tau[p] >= a.rows())
      throw std::invalid_argument("q_step_rate: row index out of range");
    if (p > 0 && tau[p] <= tau[p - 1])
      throw std::invalid_argument("q_step_rate: selection must be strictly increasing");
    fro_tau += a.row_norm_sq(tau[p]);
  }
  if (fro_tau == 0.0) throw std::invalid_argument("q_step_rate: selection has no energy");
  const double smax = detail::sigma_max_of_rows(a, tau);
  const double q = epsilon * fro_tau / (2.0 * nu * smax * smax);
  detail::check_rate(q, "q_step_rate");
  return q;
}

// Rate expressed through the condition number, q / kappa(A)^2. Undefined for
// rank-deficient matrices.
inline std::optional<double> q_tilde_rate(const RowMatrix& a, std::span<const double> xhat,
                                          RegParam lambda, std::size_t n_limit = 15) {
  const SpectralSummary s = spectral_summary(a);
  if (s.rank < std::min(a.rows(), a.cols())) return std::nullopt;
  const double nu = nu_error_constant(a, xhat, lambda, n_limit);
  const double kappa = s.sigma_max / s.sigma_min;
  const double q = 1.0 / (2.0 * nu * s.sigma_max * s.sigma_max * kappa * kappa);
  detail::check_rate(q, "q_tilde_rate");
  return q;
}

// ---------------------------------------------------------------------------
// Certificates and their verification against recorded histories.

struct RateCertificate {
  double nu = 0.0;
  double q = 0.0;
  std::optional<double> q_tilde;
  // One factor per taken step, from recorded (epsilon, tau) selection data.
  std::optional<std::vector<double>> per_step_q;
};

inline RateCertificate make_certificate(const RowMatrix& a, std::span<const double> xhat,
                                        RegParam lambda, std::size_t n_limit = 15) {
  RateCertificate c;
  c.nu = nu_error_constant(a, xhat, lambda, n_limit);
  const SpectralSummary s = spectral_summary(a);
  c.q = 1.0 / (2.0 * c.nu * s.sigma_max * s.sigma_max);
  detail::check_rate(c.q, "make_certificate");
  if (s.rank == std::min(a.rows(), a.cols())) {
    const double kappa = s.sigma_max / s.sigma_min;
    c.q_tilde = c.q / (kappa * kappa);
  }
  return c;
}

// Per-step factors for a history that recorded its selection data; the final
// record takes no step and contributes none.
inline std::vector<double> per_step_rates(const RowMatrix& a, const ConvergenceHistory& h,
                                          double nu) {
  if (h.records.empty()) throw std::invalid_argument("per_step_rates: empty history");
  std::vector<double> out;
  out.reserve(h.records.size() - 1);
  for (std::size_t j = 0; j + 1 < h.records.size(); ++j) {
    const HistoryRecord& r = h.records[j];
    if (!r.epsilon || !r.tau)
      throw std::invalid_argument("per_step_rates: history lacks selection data");
    out.push_back(q_step_rate(a, *r.tau, *r.epsilon, nu));
  }
  return out;
}

enum class CertCheck { StepDecrease, GlobalRate, PerStepRate };

inline const char* to_string(CertCheck c) {
  switch (c) {
    case CertCheck::StepDecrease: return "step_decrease";
    case CertCheck::GlobalRate: return "global_rate";
    case CertCheck::PerStepRate: return "per_step_rate";
  }
  return "unknown";
}

struct CertViolation {
  CertCheck check = CertCheck::StepDecrease;
  std::size_t step = 0;  // index of the record the step starts from
  double lhs = 0.0;      // D_{k+1}
  double rhs = 0.0;      // bound it had to stay below
};

struct VerificationReport {
  std::size_t steps = 0;
  std::vector<CertViolation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(CertCheck c) const {
    std::size_t n = 0;
    for (const CertViolation& v : violations)
      if (v.check == c) ++n;
    return n;
  }
};

namespace detail {

inline void require_bregman(const ConvergenceHistory& h) {
  if (h.records.empty())
    throw std::invalid_argument("verification: empty history");
  for (const HistoryRecord& r : h.records)
    if (!r.bregman)
      throw std::invalid_argument("verification: history lacks Bregman distances");
}

inline double cert_tol(double d) { return 1e-9 * std::max(1.0, d); }

}  // namespace detail

// Check (a): each step pays at least half its recorded step term,
// D_{k+1} <= D_k - step_term/2 + tol. Holds for every weight choice against
// any feasible comparison point.
inline VerificationReport verify_step_decrease(const ConvergenceHistory& h) {
  detail::require_bregman(h);
  VerificationReport rep;
  rep.steps = h.records.size() - 1;
  for (std::size_t j = 0; j + 1 < h.records.size(); ++j) {
    const double d0 = *h.records[j].bregman;
    const double d1 = *h.records[j + 1].bregman;
    const double bound = d0 - 0.5 * h.records[j].step_term + detail::cert_tol(d0);
    if (!(d1 <= bound))
      rep.violations.push_back({CertCheck::StepDecrease, j, d1, bound});
  }
  return rep;
}

// Checks (a), (b) and, when per-step factors are present, (c):
//   (b) D_{k+1} <= (1 - q) D_k + tol      (full-residual weighting)
//   (c) D_{k+1} <= (1 - q_k) D_k + tol    (adaptive selection)
inline VerificationReport verify_certificates(const ConvergenceHistory& h,
                                              const RateCertificate& cert) {
  VerificationReport rep = verify_step_decrease(h);
  if (cert.per_step_q && cert.per_step_q->size() != rep.steps)
    throw std::invalid_argument("verify_certificates: per-step factor count mismatch");
  for (std::size_t j = 0; j + 1 < h.records.size(); ++j) {
    const double d0 = *h.records[j].bregman;
    const double d1 = *h.records[j + 1].bregman;
    const double tol = detail::cert_tol(d0);
    const double global_bound = (1.0 - cert.q) * d0 + tol;
    if (!(d1 <= global_bound))
      rep.violations.push_back({CertCheck::GlobalRate, j, d1, global_bound});
    if (cert.per_step_q) {
      const double step_bound = (1.0 - (*cert.per_step_q)[j]) * d0 + tol;
      if (!(d1 <= step_bound))
        rep.violations.push_back({CertCheck::PerStepRate, j, d1, step_bound});
    }
  }
  return rep;
}

}  // namespace skz
