#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "skz/problem.hpp"
#include "skz/row_matrix.hpp"

namespace skz {

inline double vec_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vec_norm_sq(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double vec_norm(std::span<const double> a) { return std::sqrt(vec_norm_sq(a)); }

// Shortest decimal that round-trips the double exactly.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Metrics

// Relative squared error ||x - xref||^2 / ||xref||^2.
inline double rse(std::span<const double> x, std::span<const double> xref) {
  if (x.size() != xref.size()) throw std::invalid_argument("rse: length mismatch");
  const double denom = vec_norm_sq(xref);
  if (denom == 0.0) throw std::invalid_argument("rse: reference is zero");
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - xref[i];
    num += d * d;
  }
  return num / denom;
}

// 10*log10(sum x_i^2 / sum (x_i - xref_i)^2); the numerator is the energy of
// the current iterate. An essentially zero denominator reports +inf.
inline double snr_db(std::span<const double> x, std::span<const double> xref) {
  if (x.size() != xref.size()) throw std::invalid_argument("snr_db: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += x[i] * x[i];
    const double d = x[i] - xref[i];
    den += d * d;
  }
  if (den < 1e-300) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

// ---------------------------------------------------------------------------
// Generators

namespace detail {

// nnz distinct indices from [0, n), ascending. Partial Fisher-Yates keeps the
// draw count (and so the rng state) independent of n.
inline std::vector<std::size_t> sample_support(std::size_t n, std::size_t nnz,
                                               std::mt19937_64& rng) {
  if (nnz > n) throw std::invalid_argument("sample_support: nnz exceeds dimension");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < nnz; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(nnz);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<double> planted_vector(std::size_t n, std::size_t nnz,
                                          std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n, 0.0);
  for (std::size_t j : sample_support(n, nnz, rng)) x[j] = gauss(rng);
  return x;
}

}  // namespace detail

inline std::vector<double> make_consistent_rhs(const RowMatrix& a,
                                               std::span<const double> xhat) {
  return a.apply(xhat);
}

// Dense i.i.d. standard normal A with a planted nnz-sparse solution and
// consistent right-hand side.
inline Problem gen_gaussian(std::size_t m, std::size_t n, std::size_t nnz,
                            std::uint64_t seed, double lambda = 1.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> vals(m * n);
  for (double& v : vals) v = gauss(rng);
  Problem p{RowMatrix::dense(m, n, std::move(vals)), {}, RegParam(lambda), {}, {}};
  std::vector<double> xhat = detail::planted_vector(n, nnz, rng);
  p.b = make_consistent_rhs(p.a, xhat);
  p.reference = std::move(xhat);
  p.meta.generator = "gaussian";
  p.meta.seed = seed;
  p.meta.planted_nnz = nnz;
  return p;
}

// Sparse A with row_nnz standard-normal entries per row at distinct random
// columns; mirrors the shape/density of small least-squares test matrices.
inline Problem gen_sparse(std::size_t m, std::size_t n, std::size_t row_nnz,
                          std::size_t nnz, std::uint64_t seed,
                          double lambda = 1.5) {
  if (row_nnz == 0 || row_nnz > n)
    throw std::invalid_argument("gen_sparse: row_nnz out of range");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Triplet> trip;
  trip.reserve(m * row_nnz);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j : detail::sample_support(n, row_nnz, rng))
      trip.push_back({i, j, gauss(rng)});
  }
  Problem p{RowMatrix::from_triplets(m, n, trip), {}, RegParam(lambda), {}, {}};
  std::vector<double> xhat = detail::planted_vector(n, nnz, rng);
  p.b = make_consistent_rhs(p.a, xhat);
  p.reference = std::move(xhat);
  p.meta.generator = "sparse";
  p.meta.seed = seed;
  p.meta.planted_nnz = nnz;
  return p;
}

// b + e with e Gaussian scaled so that ||e|| = level * ||b|| exactly.
inline std::vector<double> add_noise(std::span<const double> b, double level,
                                     std::uint64_t seed) {
  if (!(level >= 0.0) || !std::isfinite(level))
    throw std::invalid_argument("add_noise: level must be finite and nonnegative");
  std::vector<double> out(b.begin(), b.end());
  if (level == 0.0) return out;
  const double bn = vec_norm(b);
  if (bn == 0.0) throw std::invalid_argument("add_noise: zero right-hand side");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> e(b.size());
  for (double& v : e) v = gauss(rng);
  const double en = vec_norm(e);
  if (en == 0.0) throw std::runtime_error("add_noise: degenerate noise draw");
  const double scale = level * bn / en;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * e[i];
  return out;
}

// ---------------------------------------------------------------------------
// Matrix Market I/O (coordinate and array, real/integer/pattern fields,
// general/symmetric/skew-symmetric; complex data is rejected).

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] inline void mm_fail(const std::string& what) {
  throw std::runtime_error("matrix market: " + what);
}

// Next line that is neither blank nor a comment.
inline bool mm_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    std::size_t p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos) continue;
    if (line[p] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline RowMatrix matrix_market_read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) detail::mm_fail("empty file");
  std::istringstream head(line);
  std::string banner, object, format, field, symmetry;
  head >> banner >> object >> format >> field >> symmetry;
  if (detail::lower(banner) != "%%matrixmarket") detail::mm_fail("missing banner");
  if (detail::lower(object) != "matrix") detail::mm_fail("unsupported object '" + object + "'");
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (format != "coordinate" && format != "array")
    detail::mm_fail("unsupported format '" + format + "'");
  if (field == "complex") detail::mm_fail("complex data is not supported");
  if (field != "real" && field != "integer" && field != "pattern")
    detail::mm_fail("unsupported field '" + field + "'");
  if (symmetry == "hermitian") detail::mm_fail("hermitian data is not supported");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    detail::mm_fail("unsupported symmetry '" + symmetry + "'");
  if (field == "pattern" && format == "array")
    detail::mm_fail("pattern field requires coordinate format");

  if (!detail::mm_data_line(in, line)) detail::mm_fail("missing size line");
  std::istringstream size(line);
  long long mi = -1, ni = -1, ki = -1;
  size >> mi >> ni;
  if (format == "coordinate") size >> ki;
  if (size.fail() || mi <= 0 || ni <= 0 || (format == "coordinate" && ki < 0))
    detail::mm_fail("malformed size line");
  const auto m = static_cast<std::size_t>(mi);
  const auto n = static_cast<std::size_t>(ni);
  if (symmetry != "general" && m != n)
    detail::mm_fail("symmetric data requires a square matrix");

  std::vector<Triplet> trip;
  if (format == "coordinate") {
    const auto nnz = static_cast<std::size_t>(ki);
    trip.reserve(symmetry == "general" ? nnz : 2 * nnz);
    for (std::size_t e = 0; e < nnz; ++e) {
      if (!detail::mm_data_line(in, line)) detail::mm_fail("truncated entry list");
      std::istringstream entry(line);
      long long ri = 0, ci = 0;
      double v = 1.0;
      entry >> ri >> ci;
      if (field != "pattern") entry >> v;
      if (entry.fail()) detail::mm_fail("malformed entry");
      if (ri < 1 || ci < 1 || static_cast<std::size_t>(ri) > m ||
          static_cast<std::size_t>(ci) > n)
        detail::mm_fail("entry index out of range");
      const auto r = static_cast<std::size_t>(ri) - 1;
      const auto c = static_cast<std::size_t>(ci) - 1;
      if (symmetry == "symmetric") {
        if (r < c) detail::mm_fail("symmetric entry above the diagonal");
        trip.push_back({r, c, v});
        if (r != c) trip.push_back({c, r, v});
      } else if (symmetry == "skew-symmetric") {
        if (r <= c) detail::mm_fail("skew-symmetric entry on or above the diagonal");
        trip.push_back({r, c, v});
        trip.push_back({c, r, -v});
      } else {
        trip.push_back({r, c, v});
      }
    }
  } else {
    // Array data is column-major; symmetric variants store the lower
    // triangle (with the diagonal, except skew-symmetric).
    auto read_value = [&](double& v) {
      if (!detail::mm_data_line(in, line)) detail::mm_fail("truncated array data");
      std::istringstream entry(line);
      entry >> v;
      if (entry.fail()) detail::mm_fail("malformed array value");
    };
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t r0 = 0;
      if (symmetry == "symmetric") r0 = c;
      if (symmetry == "skew-symmetric") r0 = c + 1;
      for (std::size_t r = r0; r < m; ++r) {
        double v = 0.0;
        read_value(v);
        trip.push_back({r, c, v});
        if (symmetry == "symmetric" && r != c) trip.push_back({c, r, v});
        if (symmetry == "skew-symmetric") trip.push_back({c, r, -v});
      }
    }
  }
  return RowMatrix::from_triplets(m, n, trip);
}

inline RowMatrix matrix_market_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("matrix market: cannot open " + path.string());
  return matrix_market_read(in);
}

inline void matrix_market_write(std::ostream& out, const RowMatrix& a) {
  const std::vector<Triplet> trip = a.entries();
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << trip.size() << '\n';
  for (const Triplet& t : trip)
    out << t.row + 1 << ' ' << t.col + 1 << ' ' << fmt_double(t.value) << '\n';
  if (!out) throw std::runtime_error("matrix market: write failed");
}

inline void matrix_market_write(const std::filesystem::path& path, const RowMatrix& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("matrix market: cannot open " + path.string());
  matrix_market_write(out, a);
}

// ---------------------------------------------------------------------------
// Problem bundles: a directory holding A.mtx, b.txt (one decimal per line),
// optional xhat.txt, and meta.json.

namespace detail {

inline void write_vector(const std::filesystem::path& path,
                         std::span<const double> v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("bundle: cannot open " + path.string());
  for (double x : v) out << fmt_double(x) << '\n';
  if (!out) throw std::runtime_error("bundle: write failed for " + path.string());
}

inline std::vector<double> read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("bundle: cannot open " + path.string());
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos) continue;
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(line.substr(p), &used);
    } catch (const std::exception&) {
      throw std::runtime_error("bundle: bad number in " + path.string());
    }
    v.push_back(x);
  }
  return v;
}

}  // namespace detail

inline void save_bundle(const std::filesystem::path& dir, const Problem& p) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  matrix_market_write(dir / "A.mtx", p.a);
  detail::write_vector(dir / "b.txt", p.b);
  if (p.reference) detail::write_vector(dir / "xhat.txt", *p.reference);
  nlohmann::json meta;
  meta["lambda"] = p.lambda.value();
  meta["generator"] = p.meta.generator;
  meta["source"] = p.meta.source;
  meta["seed"] = p.meta.seed;
  meta["noise_level"] = p.meta.noise_level;
  meta["planted_nnz"] = p.meta.planted_nnz;
  meta["rows"] = p.a.rows();
  meta["cols"] = p.a.cols();
  std::ofstream out(dir / "meta.json");
  if (!out) throw std::runtime_error("bundle: cannot open meta.json");
  out << meta.dump(2) << '\n';
}

inline Problem load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  RowMatrix a = matrix_market_read(dir / "A.mtx");
  std::vector<double> b = detail::read_vector(dir / "b.txt");
  if (b.size() != a.rows())
    throw std::runtime_error("bundle: b.txt length does not match the matrix");

  double lambda = 1.5;
  ProblemMeta meta;
  if (fs::exists(dir / "meta.json")) {
    std::ifstream in(dir / "meta.json");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("bundle: bad meta.json: ") + e.what());
    }
    lambda = j.value("lambda", 1.5);
    meta.generator = j.value("generator", std::string{});
    meta.source = j.value("source", std::string{});
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.noise_level = j.value("noise_level", 0.0);
    meta.planted_nnz = j.value("planted_nnz", std::size_t{0});
  }

  Problem p{std::move(a), std::move(b), RegParam(lambda), {}, std::move(meta)};
  if (fs::exists(dir / "xhat.txt")) {
    std::vector<double> xhat = detail::read_vector(dir / "xhat.txt");
    if (xhat.size() != p.a.cols())
      throw std::runtime_error("bundle: xhat.txt length does not match the matrix");
    // A noiseless bundle must actually be consistent with its reference.
    if (p.meta.noise_level == 0.0) {
      const std::vector<double> r = p.a.residual(xhat, p.b);
      if (vec_norm(r) > 1e-10 * vec_norm(p.b))
        throw std::runtime_error("bundle: reference does not satisfy A*xhat = b");
    }
    p.reference = std::move(xhat);
  }
  return p;
}

}  // namespace skz
