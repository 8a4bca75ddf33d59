// Command line front end: generate problem bundles, solve them with a chosen
// weight strategy, benchmark strategies side by side, and check convergence
// certificates against recorded histories.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <skz/skz.hpp>

namespace {

struct SolveFlags {
  std::string bundle;
  std::string strategy;
  std::optional<double> theta;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100000;
  double rse_tol = 1e-6;
  double res_tol = 1e-8;
  std::string history_path;
};

skz::WeightStrategy make_strategy(const std::string& name,
                                  const std::optional<double>& theta,
                                  std::uint64_t seed) {
  if (theta && name != "shskpr")
    throw std::invalid_argument("--theta only applies to the shskpr strategy");
  if (name == "shskr") return skz::Residual{};
  if (name == "shskpr") {
    if (!theta) throw std::invalid_argument("shskpr requires --theta");
    return skz::PartialResidual{*theta};
  }
  if (name == "greedy") return skz::GreedyRow{};
  if (name == "rsk") return skz::RandomRow{seed};
  if (name == "cyclic") return skz::CyclicRow{};
  if (name == "gaussian") return skz::GaussianRow{seed};
  throw std::invalid_argument("unknown strategy '" + name +
                              "' (expected shskr|shskpr|greedy|rsk|cyclic|gaussian)");
}

struct SolveOutcome {
  std::size_t iters = 0;
  double cpu_s = 0.0;
  std::optional<double> final_rse;
  skz::StopReason reason = skz::StopReason::MaxIters;
};

SolveOutcome run_once(const skz::Problem& p, const skz::WeightStrategy& strat,
                      const skz::StopCriteria& stop, skz::ConvergenceHistory* keep) {
  skz::RunResult res = skz::run(p, strat, stop);
  SolveOutcome o;
  o.iters = res.state.k;
  o.cpu_s = res.history.records.back().wall_time_s;
  o.final_rse = res.history.records.back().rse;
  o.reason = res.reason;
  if (keep) *keep = std::move(res.history);
  return o;
}

std::string rse_field(const std::optional<double>& r) {
  return r ? skz::fmt_double(*r) : "nan";
}

int cmd_solve(const SolveFlags& f) {
  const skz::Problem p = skz::load_bundle(f.bundle);
  const skz::WeightStrategy strat = make_strategy(f.strategy, f.theta, f.seed);
  const skz::StopCriteria stop{f.max_iters, f.rse_tol, f.res_tol};
  skz::ConvergenceHistory hist;
  const SolveOutcome o = run_once(p, strat, stop, &hist);
  if (!f.history_path.empty()) {
    std::ofstream out(f.history_path);
    if (!out) throw std::runtime_error("cannot open " + f.history_path);
    skz::write_history_csv(out, hist);
  }
  std::cout << f.strategy << ',' << o.iters << ',' << skz::fmt_double(o.cpu_s) << ','
            << rse_field(o.final_rse) << ',' << skz::to_string(o.reason) << '\n';
  return 0;
}

struct GenerateFlags {
  std::string bundle;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t nnz = 0;
  std::size_t row_nnz = 2;
  std::uint64_t seed = 0;
  double lambda = 1.5;
  double noise = 0.0;
  std::string generator = "gaussian";
};

int cmd_generate(const GenerateFlags& f) {
  skz::Problem p = (f.generator == "sparse")
                       ? skz::gen_sparse(f.rows, f.cols, f.row_nnz, f.nnz, f.seed, f.lambda)
                       : skz::gen_gaussian(f.rows, f.cols, f.nnz, f.seed, f.lambda);
  if (f.noise > 0.0) {
    p.b = skz::add_noise(p.b, f.noise, f.seed + 1);
    p.meta.noise_level = f.noise;
  }
  skz::save_bundle(f.bundle, p);
  std::cout << "wrote " << f.bundle << ": m=" << p.a.rows() << " n=" << p.a.cols()
            << " stored=" << p.a.stored_entries()
            << " |b|=" << skz::fmt_double(skz::vec_norm(p.b)) << '\n';
  return 0;
}

struct BenchFlags {
  std::vector<std::string> bundles;
  std::string strategies;
  std::optional<double> theta;
  std::uint64_t seed = 0;
  std::size_t repeats = 5;
  std::size_t max_iters = 100000;
  double rse_tol = 1e-6;
  double res_tol = 1e-8;
  std::string out_path;
};

bool is_randomized(const std::string& name) {
  return name == "rsk" || name == "gaussian";
}

// Lower median: the value at index (count-1)/2 after sorting, so the
// iteration column always reports an observed count.
template <typename T>
T lower_median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

int cmd_bench(const BenchFlags& f) {
  std::vector<std::string> names;
  {
    std::stringstream ss(f.strategies);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) names.push_back(item);
  }
  if (names.empty()) throw std::invalid_argument("--strategies is empty");

  std::ostringstream table;
  table << "bundle,strategy,IT,CPU_s,final_rse\n";
  for (const std::string& dir : f.bundles) {
    const skz::Problem p = skz::load_bundle(dir);
    const skz::StopCriteria stop{f.max_iters, f.rse_tol, f.res_tol};
    for (const std::string& name : names) {
      const std::size_t reps = is_randomized(name) ? std::max<std::size_t>(1, f.repeats) : 1;
      std::vector<std::size_t> iters;
      std::vector<double> cpu;
      std::optional<double> last_rse;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const skz::WeightStrategy strat = make_strategy(name, f.theta, f.seed + rep);
        const SolveOutcome o = run_once(p, strat, stop, nullptr);
        iters.push_back(o.iters);
        cpu.push_back(o.cpu_s);
        last_rse = o.final_rse;
      }
      table << dir << ',' << name << ',' << lower_median(iters) << ','
            << skz::fmt_double(lower_median(cpu)) << ',' << rse_field(last_rse) << '\n';
    }
  }
  if (f.out_path.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream out(f.out_path);
    if (!out) throw std::runtime_error("cannot open " + f.out_path);
    out << table.str();
  }
  return 0;
}

struct BoundsFlags {
  std::string bundle;
  std::size_t n_limit = 15;
  std::string history_path;
};

int cmd_bounds(const BoundsFlags& f) {
  const skz::Problem p = skz::load_bundle(f.bundle);
  if (!p.reference)
    throw std::runtime_error("bounds require a reference solution (xhat.txt)");
  const skz::RateCertificate cert =
      skz::make_certificate(p.a, *p.reference, p.lambda, f.n_limit);
  std::cout << "nu = " << skz::fmt_double(cert.nu) << '\n';
  std::cout << "q = " << skz::fmt_double(cert.q) << '\n';
  if (cert.q_tilde)
    std::cout << "q_tilde = " << skz::fmt_double(*cert.q_tilde) << '\n';
  else
    std::cout << "q_tilde = not applicable (rank-deficient)\n";

  if (f.history_path.empty()) return 0;
  std::ifstream in(f.history_path);
  if (!in) throw std::runtime_error("cannot open " + f.history_path);
  const skz::ConvergenceHistory h = skz::read_history_csv(in);
  // The CSV carries no selection data, so the per-step factors stay off; the
  // global rate presumes a full-residual run.
  const skz::VerificationReport rep = skz::verify_certificates(h, cert);
  std::cout << "checked " << rep.steps << " steps: " << rep.violations.size()
            << " violations\n";
  std::size_t shown = 0;
  for (const skz::CertViolation& v : rep.violations) {
    if (++shown > 10) {
      std::cout << "  ...\n";
      break;
    }
    std::cout << "  step " << v.step << ' ' << skz::to_string(v.check)
              << ": D_next=" << skz::fmt_double(v.lhs)
              << " bound=" << skz::fmt_double(v.rhs) << '\n';
  }
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surrogate hyperplane sparse Kaczmarz solvers"};
  app.require_subcommand(1);

  GenerateFlags gf;
  CLI::App* gen = app.add_subcommand("generate", "write a problem bundle");
  gen->add_option("bundle", gf.bundle, "output directory")->required();
  gen->add_option("--rows", gf.rows, "row count")->required();
  gen->add_option("--cols", gf.cols, "column count")->required();
  gen->add_option("--nnz", gf.nnz, "nonzeros in the planted solution")->required();
  gen->add_option("--seed", gf.seed, "rng seed");
  gen->add_option("--lambda", gf.lambda, "l1 regularization weight");
  gen->add_option("--noise", gf.noise, "relative noise level on b");
  gen->add_option("--generator", gf.generator, "gaussian|sparse")
      ->check(CLI::IsMember({"gaussian", "sparse"}));
  gen->add_option("--row-nnz", gf.row_nnz, "entries per row (sparse generator)");

  SolveFlags sf;
  CLI::App* solve = app.add_subcommand("solve", "run one strategy on a bundle");
  solve->add_option("bundle", sf.bundle, "bundle directory")->required();
  solve->add_option("--strategy", sf.strategy, "shskr|shskpr|greedy|rsk|cyclic|gaussian")
      ->required();
  double theta_val = 0.0;
  CLI::Option* theta_opt =
      solve->add_option("--theta", theta_val, "adaptivity in [0,1] (shskpr only)");
  solve->add_option("--seed", sf.seed, "seed for randomized strategies");
  solve->add_option("--max-iters", sf.max_iters, "iteration cap");
  solve->add_option("--rse-tol", sf.rse_tol, "stop when RSE falls below (with reference)");
  solve->add_option("--res-tol", sf.res_tol, "relative residual stop (no reference)");
  solve->add_option("--history", sf.history_path, "write per-iteration CSV here");

  BenchFlags bf;
  CLI::App* bench = app.add_subcommand("bench", "compare strategies on bundles");
  bench->add_option("bundles", bf.bundles, "bundle directories")->required();
  bench->add_option("--strategies", bf.strategies, "comma separated strategy list")
      ->required();
  double btheta_val = 0.0;
  CLI::Option* btheta_opt =
      bench->add_option("--theta", btheta_val, "adaptivity in [0,1] (shskpr only)");
  bench->add_option("--seed", bf.seed, "base seed for randomized strategies");
  bench->add_option("--repeats", bf.repeats, "repeats for randomized strategies");
  bench->add_option("--max-iters", bf.max_iters, "iteration cap");
  bench->add_option("--rse-tol", bf.rse_tol, "RSE stop");
  bench->add_option("--res-tol", bf.res_tol, "relative residual stop");
  bench->add_option("--out", bf.out_path, "write the table here instead of stdout");

  BoundsFlags xf;
  CLI::App* bounds = app.add_subcommand("bounds", "print certificates, check a history");
  bounds->add_option("bundle", xf.bundle, "bundle directory")->required();
  bounds->add_option("--n-limit", xf.n_limit, "column enumeration limit");
  bounds->add_option("--history", xf.history_path, "history CSV to verify");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gf);
    if (solve->parsed()) {
      if (*theta_opt) sf.theta = theta_val;
      return cmd_solve(sf);
    }
    if (bench->parsed()) {
      if (*btheta_opt) bf.theta = btheta_val;
      return cmd_bench(bf);
    }
    if (bounds->parsed()) return cmd_bounds(xf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
