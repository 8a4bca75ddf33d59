#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "skz/bregman.hpp"
#include "skz/problem.hpp"
#include "skz/problems.hpp"
#include "skz/row_matrix.hpp"

namespace skz {

// ---------------------------------------------------------------------------
// Iteration state. Invariants: x = S_lambda(x_star), r = b - A*x, and
// residual_norm_sq = ||r||^2 as accumulated over r in index order.

struct SolverState {
  std::size_t k = 0;
  std::vector<double> x_star;
  std::vector<double> x;
  std::vector<double> r;
  double residual_norm_sq = 0.0;
};

inline SolverState initial_state(const Problem& p) {
  if (p.b.size() != p.a.rows())
    throw std::invalid_argument("initial_state: b length does not match the matrix");
  if (p.reference && p.reference->size() != p.a.cols())
    throw std::invalid_argument("initial_state: reference length does not match the matrix");
  SolverState s;
  s.x_star.assign(p.a.cols(), 0.0);
  s.x.assign(p.a.cols(), 0.0);
  s.r = p.b;
  s.residual_norm_sq = vec_norm_sq(s.r);
  return s;
}

// ---------------------------------------------------------------------------
// Surrogate weights. A weight eta defines the hyperplane <A^T eta, x> =
// <eta, b> that the next dual iterate is projected onto.

struct DenseWeight {
  std::vector<double> values;  // length m
};

struct SparseWeight {
  std::vector<std::size_t> rows;  // ascending
  std::vector<double> values;
};

using Weight = std::variant<DenseWeight, SparseWeight>;

inline double weight_dot(const Weight& w, std::span<const double> v) {
  if (const auto* d = std::get_if<DenseWeight>(&w)) {
    if (d->values.size() != v.size())
      throw std::invalid_argument("weight_dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += d->values[i] * v[i];
    return s;
  }
  const auto& sp = std::get<SparseWeight>(w);
  double s = 0.0;
  for (std::size_t p = 0; p < sp.rows.size(); ++p) {
    if (sp.rows[p] >= v.size())
      throw std::invalid_argument("weight_dot: row index out of range");
    s += sp.values[p] * v[sp.rows[p]];
  }
  return s;
}

inline void weight_transpose_apply_into(const RowMatrix& a, const Weight& w,
                                        std::span<double> out) {
  if (const auto* d = std::get_if<DenseWeight>(&w)) {
    a.transpose_apply_into(d->values, out);
    return;
  }
  const auto& sp = std::get<SparseWeight>(w);
  if (out.size() != a.cols())
    throw std::invalid_argument("weight_transpose_apply: bad output length");
  for (double& v : out) v = 0.0;
  for (std::size_t p = 0; p < sp.rows.size(); ++p)
    a.axpy_row(sp.rows[p], sp.values[p], out);
}

inline std::vector<double> weight_transpose_apply(const RowMatrix& a, const Weight& w) {
  std::vector<double> out(a.cols());
  weight_transpose_apply_into(a, w, out);
  return out;
}

// ---------------------------------------------------------------------------
// Weight strategies.

struct Residual {};                       // eta = r_k
struct PartialResidual { double theta; }; // eta = residual restricted to tau_k
struct GreedyRow {};                      // eta = e_i, i maximizing |r_i|^2/||a_i||^2
struct RandomRow { std::uint64_t seed = 0; };  // eta = e_i, P(i) ~ ||a_i||^2
struct CyclicRow { std::size_t start = 0; };   // eta = e_i, i sweeping in order
struct GaussianRow { std::uint64_t seed = 0; };  // eta ~ N(0, I_m)

using WeightStrategy =
    std::variant<Residual, PartialResidual, GreedyRow, RandomRow, CyclicRow, GaussianRow>;

inline std::string strategy_name(const WeightStrategy& s) {
  struct Visitor {
    std::string operator()(const Residual&) const { return "shskr"; }
    std::string operator()(const PartialResidual&) const { return "shskpr"; }
    std::string operator()(const GreedyRow&) const { return "greedy"; }
    std::string operator()(const RandomRow&) const { return "rsk"; }
    std::string operator()(const CyclicRow&) const { return "cyclic"; }
    std::string operator()(const GaussianRow&) const { return "gaussian"; }
  };
  return std::visit(Visitor{}, s);
}

inline std::vector<double> weight_residual(const SolverState& s) { return s.r; }

// Largest |r_i|^2/||a_i||^2 over rows with nonzero norm; the row achieving it
// is the greedy pick. Zero rows never participate.
namespace detail {

struct RatioScan {
  double max_ratio = -1.0;
  std::size_t argmax = 0;
  bool any = false;
};

inline RatioScan scan_ratios(const SolverState& s, const RowMatrix& a) {
  RatioScan out;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double nsq = a.row_norm_sq(i);
    if (nsq == 0.0) continue;
    const double ratio = (s.r[i] * s.r[i]) / nsq;
    if (!out.any || ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.argmax = i;
      out.any = true;
    }
  }
  if (!out.any)
    throw std::invalid_argument("weight selection: matrix has no nonzero row");
  return out;
}

}  // namespace detail

// epsilon_k = theta * max_i{|r_i|^2/||a_i||^2} / ||r||^2 + (1-theta)/||A||_F^2
inline double epsilon_threshold(const SolverState& s, const RowMatrix& a, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw std::invalid_argument("epsilon_threshold: theta must lie in [0,1]");
  if (s.residual_norm_sq == 0.0)
    throw std::invalid_argument("epsilon_threshold: zero residual");
  const detail::RatioScan scan = detail::scan_ratios(s, a);
  return theta * (scan.max_ratio / s.residual_norm_sq) + (1.0 - theta) / a.fro_norm_sq();
}

// tau = { i : |r_i|^2 >= epsilon * ||r||^2 * ||a_i||^2 }, zero rows excluded.
// The threshold is clamped to the best ratio when rounding pushes it a hair
// above: exact arithmetic keeps epsilon_k * ||r||^2 at or below the maximum,
// so the clamp only undoes floating-point noise and the set stays nonempty.
// A threshold genuinely above every ratio still raises.
inline std::vector<std::size_t> index_set_tau(const SolverState& s, const RowMatrix& a,
                                              double epsilon) {
  if (s.residual_norm_sq == 0.0)
    throw std::invalid_argument("index_set_tau: zero residual");
  const detail::RatioScan scan = detail::scan_ratios(s, a);
  if (scan.max_ratio == 0.0)
    throw std::runtime_error("index_set_tau: residual is supported on zero rows");
  double threshold = epsilon * s.residual_norm_sq;
  if (threshold > scan.max_ratio) {
    if (threshold <= scan.max_ratio * (1.0 + 1e-12))
      threshold = scan.max_ratio;
    else
      throw std::runtime_error("index_set_tau: threshold excludes every row");
  }
  std::vector<std::size_t> tau;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double nsq = a.row_norm_sq(i);
    if (nsq == 0.0) continue;
    if ((s.r[i] * s.r[i]) / nsq >= threshold) tau.push_back(i);
  }
  if (tau.empty())
    throw std::logic_error("index_set_tau: empty selection");
  return tau;
}

inline SparseWeight weight_partial_residual(const SolverState& s, const RowMatrix& a,
                                            double theta) {
  const double eps = epsilon_threshold(s, a, theta);
  SparseWeight w;
  w.rows = index_set_tau(s, a, eps);
  w.values.reserve(w.rows.size());
  for (std::size_t i : w.rows) w.values.push_back(s.r[i]);
  return w;
}

inline std::size_t greedy_row_index(const SolverState& s, const RowMatrix& a) {
  if (s.residual_norm_sq == 0.0)
    throw std::invalid_argument("greedy_row_index: zero residual");
  return detail::scan_ratios(s, a).argmax;
}

inline SparseWeight weight_single_row(std::size_t i) { return SparseWeight{{i}, {1.0}}; }

// ---------------------------------------------------------------------------
// One iteration: project the dual iterate onto the surrogate hyperplane and
// shrink. step_term receives (eta'r)^2 / ||A'eta||^2, the quantity whose half
// bounds the Bregman decrease of the step.

inline constexpr double kStepDegeneracyTol = 1e-28;

class DegenerateDirection : public std::runtime_error {
public:
  explicit DegenerateDirection(double norm_sq)
      : std::runtime_error("shsk_step: surrogate direction is numerically zero"),
        norm_sq_(norm_sq) {}
  double direction_norm_sq() const { return norm_sq_; }

private:
  double norm_sq_;
};

inline SolverState shsk_step(const SolverState& s, const Weight& w, const Problem& p,
                             double& step_term) {
  const std::size_t n = p.a.cols();
  if (s.x_star.size() != n || s.x.size() != n || s.r.size() != p.a.rows())
    throw std::invalid_argument("shsk_step: state does not match the problem");
  std::vector<double> dir(n);
  weight_transpose_apply_into(p.a, w, dir);
  const double denom = vec_norm_sq(dir);
  if (!(denom > kStepDegeneracyTol)) throw DegenerateDirection(denom);
  const double eta_r = weight_dot(w, s.r);
  const double coef = eta_r / denom;
  step_term = eta_r * eta_r / denom;

  SolverState next;
  next.k = s.k + 1;
  next.x_star.resize(n);
  for (std::size_t j = 0; j < n; ++j) next.x_star[j] = s.x_star[j] + coef * dir[j];
  next.x.resize(n);
  soft_shrinkage_into(next.x_star, p.lambda, next.x);
  next.r.resize(p.a.rows());
  p.a.residual_into(next.x, p.b, next.r);
  next.residual_norm_sq = vec_norm_sq(next.r);
  return next;
}

inline SolverState shsk_step(const SolverState& s, const Weight& w, const Problem& p) {
  double ignored = 0.0;
  return shsk_step(s, w, p, ignored);
}

// ---------------------------------------------------------------------------
// Stopping and history.

enum class StopReason { RseTol, ResTol, MaxIters, ExactResidual };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::RseTol: return "rse_tol";
    case StopReason::ResTol: return "res_tol";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::ExactResidual: return "exact_residual";
  }
  return "unknown";
}

struct StopCriteria {
  std::size_t max_iters = 100000;
  double rse_tol = 1e-6;   // applies when a reference is available
  double res_tol = 1e-8;   // relative residual, applies otherwise

  void validate() const {
    if (!(rse_tol >= 0.0) || !std::isfinite(rse_tol) || !(res_tol >= 0.0) ||
        !std::isfinite(res_tol))
      throw std::invalid_argument("StopCriteria: tolerances must be finite and nonnegative");
  }
};

struct HistoryRecord {
  std::size_t k = 0;
  double residual_norm = 0.0;
  std::optional<double> rse;      // reference available
  std::optional<double> bregman;  // Bregman distance to the reference
  // (eta' r)^2 / ||A' eta||^2 for the step taken FROM this iterate; zero on
  // the final record.
  double step_term = 0.0;
  double wall_time_s = 0.0;
  // Selection data of the partial-residual rule, kept in memory only.
  std::optional<double> epsilon;
  std::optional<std::vector<std::size_t>> tau;
};

struct ConvergenceHistory {
  std::vector<HistoryRecord> records;
};

struct RunOptions {
  bool record_bregman = true;
  // tau can be large on dense selections; recording it is opt-in.
  bool record_selection = false;
};

struct RunResult {
  SolverState state;
  ConvergenceHistory history;
  StopReason reason = StopReason::MaxIters;
};

// ---------------------------------------------------------------------------
// Driver.

namespace detail {

// Mutable per-run selection machinery; strategy structs themselves are
// value parameters and stay untouched.
struct StrategyEngine {
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss{0.0, 1.0};
  std::discrete_distribution<std::size_t> row_dist;
  std::size_t cursor = 0;

  explicit StrategyEngine(const WeightStrategy& strat, const RowMatrix& a) {
    if (const auto* rr = std::get_if<RandomRow>(&strat)) {
      rng.seed(rr->seed);
      std::vector<double> weights(a.rows());
      for (std::size_t i = 0; i < a.rows(); ++i) weights[i] = a.row_norm_sq(i);
      row_dist = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
    } else if (const auto* g = std::get_if<GaussianRow>(&strat)) {
      rng.seed(g->seed);
    } else if (const auto* c = std::get_if<CyclicRow>(&strat)) {
      cursor = c->start;
    }
  }

  std::size_t next_cyclic(const RowMatrix& a) {
    for (std::size_t tried = 0; tried < a.rows(); ++tried) {
      const std::size_t i = cursor % a.rows();
      cursor = i + 1;
      if (a.row_norm_sq(i) > 0.0) return i;
    }
    throw std::invalid_argument("weight selection: matrix has no nonzero row");
  }

  DenseWeight next_gaussian(std::size_t m) {
    DenseWeight w;
    w.values.resize(m);
    for (double& v : w.values) v = gauss(rng);
    return w;
  }
};

}  // namespace detail

inline RunResult run(const Problem& p, const WeightStrategy& strategy,
                     const StopCriteria& stop = {}, const RunOptions& options = {}) {
  stop.validate();
  if (const auto* pr = std::get_if<PartialResidual>(&strategy)) {
    if (!(pr->theta >= 0.0 && pr->theta <= 1.0))
      throw std::invalid_argument("run: theta must lie in [0,1]");
  }
  for (std::size_t i = 0; i < p.a.rows(); ++i) {
    if (p.a.row_norm_sq(i) == 0.0 && p.b[i] != 0.0)
      throw std::invalid_argument("run: zero row with nonzero b makes the system inconsistent");
  }

  const bool has_ref = p.reference && vec_norm_sq(*p.reference) > 0.0;
  const double b_norm = vec_norm(p.b);
  detail::StrategyEngine engine(strategy, p.a);

  RunResult out;
  SolverState s = initial_state(p);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  while (true) {
    HistoryRecord rec;
    rec.k = s.k;
    rec.residual_norm = std::sqrt(s.residual_norm_sq);
    if (has_ref) {
      rec.rse = rse(s.x, *p.reference);
      if (options.record_bregman)
        rec.bregman = bregman_distance(s.x_star, s.x, *p.reference, p.lambda);
    }
    rec.wall_time_s = elapsed();

    std::optional<StopReason> reason;
    if (s.residual_norm_sq == 0.0)
      reason = StopReason::ExactResidual;
    else if (has_ref && *rec.rse < stop.rse_tol)
      reason = StopReason::RseTol;
    else if (!has_ref && rec.residual_norm <= stop.res_tol * b_norm)
      reason = StopReason::ResTol;
    else if (s.k >= stop.max_iters)
      reason = StopReason::MaxIters;
    if (reason) {
      out.history.records.push_back(std::move(rec));
      out.state = std::move(s);
      out.reason = *reason;
      return out;
    }

    Weight w;
    bool degenerate_stop = false;
    SolverState next;
    try {
      if (std::holds_alternative<Residual>(strategy)) {
        w = DenseWeight{s.r};
        next = shsk_step(s, w, p, rec.step_term);
      } else if (const auto* pr = std::get_if<PartialResidual>(&strategy)) {
        const double eps = epsilon_threshold(s, p.a, pr->theta);
        SparseWeight sw;
        sw.rows = index_set_tau(s, p.a, eps);
        sw.values.reserve(sw.rows.size());
        for (std::size_t i : sw.rows) sw.values.push_back(s.r[i]);
        if (options.record_selection) {
          rec.epsilon = eps;
          rec.tau = sw.rows;
        }
        w = std::move(sw);
        next = shsk_step(s, w, p, rec.step_term);
      } else if (std::holds_alternative<GreedyRow>(strategy)) {
        w = weight_single_row(greedy_row_index(s, p.a));
        next = shsk_step(s, w, p, rec.step_term);
      } else if (std::holds_alternative<RandomRow>(strategy)) {
        w = weight_single_row(engine.row_dist(engine.rng));
        next = shsk_step(s, w, p, rec.step_term);
      } else if (std::holds_alternative<CyclicRow>(strategy)) {
        w = weight_single_row(engine.next_cyclic(p.a));
        next = shsk_step(s, w, p, rec.step_term);
      } else {
        // A Gaussian draw can land in the null space of A'; redraw a few
        // times before giving up.
        bool stepped = false;
        for (int attempt = 0; attempt <= 8 && !stepped; ++attempt) {
          w = engine.next_gaussian(p.a.rows());
          try {
            next = shsk_step(s, w, p, rec.step_term);
            stepped = true;
          } catch (const DegenerateDirection&) {
            if (attempt == 8) throw;
          }
        }
      }
    } catch (const DegenerateDirection&) {
      if (std::holds_alternative<GaussianRow>(strategy)) throw;
      // Deterministic selections reached a direction with no usable energy;
      // nothing further can change, so the residual is converged.
      degenerate_stop = true;
    }

    if (degenerate_stop) {
      rec.step_term = 0.0;
      out.history.records.push_back(std::move(rec));
      out.state = std::move(s);
      out.reason = StopReason::ExactResidual;
      return out;
    }
    out.history.records.push_back(std::move(rec));
    s = std::move(next);
  }
}

// ---------------------------------------------------------------------------
// History CSV. Optional fields are left empty. Selection data never goes to
// disk. Under identical inputs and flags every column except wall_time_s is
// reproduced byte for byte.

inline void write_history_csv(std::ostream& out, const ConvergenceHistory& h) {
  out << "k,residual_norm,rse,bregman,step_term,wall_time_s\n";
  for (const HistoryRecord& r : h.records) {
    out << r.k << ',' << fmt_double(r.residual_norm) << ',';
    if (r.rse) out << fmt_double(*r.rse);
    out << ',';
    if (r.bregman) out << fmt_double(*r.bregman);
    out << ',' << fmt_double(r.step_term) << ',' << fmt_double(r.wall_time_s) << '\n';
  }
  if (!out) throw std::runtime_error("history: write failed");
}

inline ConvergenceHistory read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("history: empty stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,residual_norm,rse,bregman,step_term,wall_time_s")
    throw std::runtime_error("history: unexpected header");
  ConvergenceHistory h;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6)
      throw std::runtime_error("history: bad field count at line " + std::to_string(lineno));
    auto num = [&](const std::string& f) {
      try {
        std::size_t used = 0;
        const double v = std::stod(f, &used);
        if (used != f.size()) throw std::invalid_argument(f);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("history: bad number at line " + std::to_string(lineno));
      }
    };
    HistoryRecord r;
    r.k = static_cast<std::size_t>(num(fields[0]));
    r.residual_norm = num(fields[1]);
    if (!fields[2].empty()) r.rse = num(fields[2]);
    if (!fields[3].empty()) r.bregman = num(fields[3]);
    r.step_term = num(fields[4]);
    r.wall_time_s = num(fields[5]);
    h.records.push_back(std::move(r));
  }
  return h;
}

}  // namespace skz
