#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace skz {

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

// Row-access matrix used by all row-action solvers. Storage is either
// row-major dense or CSR; construction picks dense when at least 25% of the
// entries are stored. Squared row norms and the squared Frobenius norm are
// cached at construction, so fro_norm_sq() is exactly the sum of the
// row_norm_sq() values.
class RowMatrix {
public:
  static RowMatrix dense(std::size_t m, std::size_t n,
                         std::vector<double> row_major) {
    check_shape(m, n);
    if (row_major.size() != m * n)
      throw std::invalid_argument("RowMatrix::dense: value count does not match shape");
    return RowMatrix(m, n, DenseStorage{std::move(row_major)});
  }

  static RowMatrix from_triplets(std::size_t m, std::size_t n,
                                 std::span<const Triplet> entries) {
    check_shape(m, n);
    // Coalesce duplicates by summing; triplet order must not matter.
    std::vector<double> acc(m * n, 0.0);
    std::vector<unsigned char> seen(m * n, 0);
    std::size_t stored = 0;
    for (const Triplet& t : entries) {
      if (t.row >= m || t.col >= n)
        throw std::invalid_argument("RowMatrix::from_triplets: index out of range");
      const std::size_t p = t.row * n + t.col;
      if (!seen[p]) {
        seen[p] = 1;
        ++stored;
      }
      acc[p] += t.value;
    }
    if (stored * 4 >= m * n)
      return dense(m, n, std::move(acc));
    CsrStorage csr;
    csr.row_ptr.assign(m + 1, 0);
    csr.col.reserve(stored);
    csr.val.reserve(stored);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (seen[i * n + j]) {
          csr.col.push_back(j);
          csr.val.push_back(acc[i * n + j]);
        }
      }
      csr.row_ptr[i + 1] = csr.col.size();
    }
    return RowMatrix(m, n, std::move(csr));
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  bool is_dense() const { return std::holds_alternative<DenseStorage>(storage_); }

  double row_norm_sq(std::size_t i) const {
    check_row(i);
    return row_norm_sq_[i];
  }

  double fro_norm_sq() const { return fro_norm_sq_; }

  // <a_i, x>
  double row_dot(std::size_t i, std::span<const double> x) const {
    check_row(i);
    if (x.size() != n_)
      throw std::invalid_argument("RowMatrix::row_dot: bad vector length");
    double s = 0.0;
    if (const auto* d = std::get_if<DenseStorage>(&storage_)) {
      const double* a = d->values.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) s += a[j] * x[j];
    } else {
      const auto& c = std::get<CsrStorage>(storage_);
      for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
        s += c.val[p] * x[c.col[p]];
    }
    return s;
  }

  // y += coef * a_i
  void axpy_row(std::size_t i, double coef, std::span<double> y) const {
    check_row(i);
    if (y.size() != n_)
      throw std::invalid_argument("RowMatrix::axpy_row: bad vector length");
    if (const auto* d = std::get_if<DenseStorage>(&storage_)) {
      const double* a = d->values.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) y[j] += coef * a[j];
    } else {
      const auto& c = std::get<CsrStorage>(storage_);
      for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
        y[c.col[p]] += coef * c.val[p];
    }
  }

  // out = A x
  void apply_into(std::span<const double> x, std::span<double> out) const {
    if (x.size() != n_ || out.size() != m_)
      throw std::invalid_argument("RowMatrix::apply_into: bad vector length");
    for (std::size_t i = 0; i < m_; ++i) out[i] = row_dot_unchecked(i, x);
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(m_);
    apply_into(x, out);
    return out;
  }

  // out = A^T eta; zero coefficients contribute nothing and are skipped.
  void transpose_apply_into(std::span<const double> eta, std::span<double> out) const {
    if (eta.size() != m_ || out.size() != n_)
      throw std::invalid_argument("RowMatrix::transpose_apply_into: bad vector length");
    for (double& v : out) v = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (eta[i] != 0.0) axpy_row_unchecked(i, eta[i], out);
    }
  }

  std::vector<double> transpose_apply(std::span<const double> eta) const {
    std::vector<double> out(n_);
    transpose_apply_into(eta, out);
    return out;
  }

  // out = b - A x
  void residual_into(std::span<const double> x, std::span<const double> b,
                     std::span<double> out) const {
    if (b.size() != m_ || out.size() != m_)
      throw std::invalid_argument("RowMatrix::residual_into: bad vector length");
    if (x.size() != n_)
      throw std::invalid_argument("RowMatrix::residual_into: bad vector length");
    for (std::size_t i = 0; i < m_; ++i) out[i] = b[i] - row_dot_unchecked(i, x);
  }

  std::vector<double> residual(std::span<const double> x,
                               std::span<const double> b) const {
    std::vector<double> out(m_);
    residual_into(x, b, out);
    return out;
  }

  std::vector<double> row_dense(std::size_t i) const {
    check_row(i);
    std::vector<double> out(n_, 0.0);
    axpy_row_unchecked(i, 1.0, out);
    return out;
  }

  std::vector<double> to_dense() const {
    if (const auto* d = std::get_if<DenseStorage>(&storage_)) return d->values;
    std::vector<double> out(m_ * n_, 0.0);
    const auto& c = std::get<CsrStorage>(storage_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
        out[i * n_ + c.col[p]] = c.val[p];
    return out;
  }

  std::size_t stored_entries() const {
    if (is_dense()) return m_ * n_;
    return std::get<CsrStorage>(storage_).val.size();
  }

  // Stored entries in row-major order, suitable for coordinate-format output.
  std::vector<Triplet> entries() const {
    std::vector<Triplet> out;
    out.reserve(stored_entries());
    if (const auto* d = std::get_if<DenseStorage>(&storage_)) {
      for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
          if (d->values[i * n_ + j] != 0.0)
            out.push_back({i, j, d->values[i * n_ + j]});
    } else {
      const auto& c = std::get<CsrStorage>(storage_);
      for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
          out.push_back({i, c.col[p], c.val[p]});
    }
    return out;
  }

private:
  struct DenseStorage {
    std::vector<double> values;  // m*n, row-major
  };
  struct CsrStorage {
    std::vector<std::size_t> row_ptr;  // m+1
    std::vector<std::size_t> col;
    std::vector<double> val;
  };

  RowMatrix(std::size_t m, std::size_t n, std::variant<DenseStorage, CsrStorage> s)
      : m_(m), n_(n), storage_(std::move(s)) {
    row_norm_sq_.resize(m_);
    fro_norm_sq_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      double s2 = 0.0;
      if (const auto* d = std::get_if<DenseStorage>(&storage_)) {
        const double* a = d->values.data() + i * n_;
        for (std::size_t j = 0; j < n_; ++j) s2 += a[j] * a[j];
      } else {
        const auto& c = std::get<CsrStorage>(storage_);
        for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
          s2 += c.val[p] * c.val[p];
      }
      row_norm_sq_[i] = s2;
      fro_norm_sq_ += s2;
    }
  }

  static void check_shape(std::size_t m, std::size_t n) {
    if (m == 0 || n == 0)
      throw std::invalid_argument("RowMatrix: shape must be positive");
  }

  void check_row(std::size_t i) const {
    if (i >= m_) throw std::invalid_argument("RowMatrix: row index out of range");
  }

  double row_dot_unchecked(std::size_t i, std::span<const double> x) const {
    double s = 0.0;
    if (const auto* d = std::get_if<DenseStorage>(&storage_)) {
      const double* a = d->values.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) s += a[j] * x[j];
    } else {
      const auto& c = std::get<CsrStorage>(storage_);
      for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
        s += c.val[p] * x[c.col[p]];
    }
    return s;
  }

  void axpy_row_unchecked(std::size_t i, double coef, std::span<double> y) const {
    if (const auto* d = std::get_if<DenseStorage>(&storage_)) {
      const double* a = d->values.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) y[j] += coef * a[j];
    } else {
      const auto& c = std::get<CsrStorage>(storage_);
      for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
        y[c.col[p]] += coef * c.val[p];
    }
  }

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::variant<DenseStorage, CsrStorage> storage_;
  std::vector<double> row_norm_sq_;
  double fro_norm_sq_ = 0.0;
};

}  // namespace skz
