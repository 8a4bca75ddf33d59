#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("skz_cli_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CmdResult run_cli(const TempDir& tmp, const std::string& args) {
  const fs::path out = tmp.path / "stdout.txt";
  const fs::path err = tmp.path / "stderr.txt";
  const std::string cmd = std::string(SKZ_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int rc = std::system(cmd.c_str());
  CmdResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = slurp(out);
  res.err = slurp(err);
  return res;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Drop the wall-time column from a history CSV so the rest can be compared
// byte for byte.
std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t last = line.rfind(',');
    out << line.substr(0, last) << '\n';
  }
  return out.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("generate then solve produces a summary line and a history") {
  TempDir tmp;
  const std::string bundle = (tmp.path / "bundle").string();
  const CmdResult gen = run_cli(
      tmp, "generate " + bundle + " --rows 30 --cols 15 --nnz 2 --seed 4");
  REQUIRE(gen.exit_code == 0);
  REQUIRE(fs::exists(fs::path(bundle) / "A.mtx"));
  REQUIRE(fs::exists(fs::path(bundle) / "b.txt"));
  REQUIRE(fs::exists(fs::path(bundle) / "xhat.txt"));
  REQUIRE(fs::exists(fs::path(bundle) / "meta.json"));

  const std::string hist = (tmp.path / "h.csv").string();
  const CmdResult solve =
      run_cli(tmp, "solve " + bundle + " --strategy shskr --history " + hist);
  REQUIRE(solve.exit_code == 0);
  const auto fields = split(solve.out.substr(0, solve.out.find('\n')), ',');
  REQUIRE(fields.size() == 5);
  REQUIRE(fields[0] == "shskr");
  const std::size_t iters = std::stoul(fields[1]);
  REQUIRE(iters > 0);
  REQUIRE(std::stod(fields[2]) >= 0.0);
  REQUIRE(std::stod(fields[3]) < 1e-6);
  REQUIRE(fields[4] == "rse_tol");

  const std::string csv = slurp(hist);
  const auto lines = split(csv, '\n');
  REQUIRE(lines[0] == "k,residual_norm,rse,bregman,step_term,wall_time_s");
  // one record per iterate, trailing newline splits one empty tail
  REQUIRE(lines.size() == iters + 3);
}

TEST_CASE("equal flags reproduce the history byte for byte except wall time") {
  TempDir tmp;
  const std::string bundle = (tmp.path / "bundle").string();
  REQUIRE(run_cli(tmp, "generate " + bundle +
                           " --rows 25 --cols 12 --nnz 2 --seed 9")
              .exit_code == 0);
  const std::string h1 = (tmp.path / "h1.csv").string();
  const std::string h2 = (tmp.path / "h2.csv").string();
  REQUIRE(run_cli(tmp, "solve " + bundle + " --strategy rsk --seed 7 --history " + h1)
              .exit_code == 0);
  REQUIRE(run_cli(tmp, "solve " + bundle + " --strategy rsk --seed 7 --history " + h2)
              .exit_code == 0);
  REQUIRE(strip_wall_time(slurp(h1)) == strip_wall_time(slurp(h2)));
  REQUIRE(slurp(h1).size() > 100);
}

TEST_CASE("theta is demanded exactly when the strategy is shskpr") {
  TempDir tmp;
  const std::string bundle = (tmp.path / "bundle").string();
  REQUIRE(run_cli(tmp, "generate " + bundle +
                           " --rows 20 --cols 10 --nnz 2 --seed 1")
              .exit_code == 0);

  const CmdResult missing = run_cli(tmp, "solve " + bundle + " --strategy shskpr");
  REQUIRE(missing.exit_code != 0);
  REQUIRE(missing.err.find("theta") != std::string::npos);

  const CmdResult stray =
      run_cli(tmp, "solve " + bundle + " --strategy shskr --theta 0.5");
  REQUIRE(stray.exit_code != 0);

  const CmdResult ok =
      run_cli(tmp, "solve " + bundle + " --strategy shskpr --theta 0.5");
  REQUIRE(ok.exit_code == 0);
  REQUIRE(ok.out.rfind("shskpr,", 0) == 0);
}

TEST_CASE("unknown strategies and missing bundles fail cleanly") {
  TempDir tmp;
  const CmdResult bad =
      run_cli(tmp, "solve " + (tmp.path / "nope").string() + " --strategy shskr");
  REQUIRE(bad.exit_code == 1);
  REQUIRE_FALSE(bad.err.empty());

  const std::string bundle = (tmp.path / "bundle").string();
  REQUIRE(run_cli(tmp, "generate " + bundle +
                           " --rows 10 --cols 5 --nnz 1 --seed 2")
              .exit_code == 0);
  const CmdResult unknown = run_cli(tmp, "solve " + bundle + " --strategy sgd");
  REQUIRE(unknown.exit_code == 1);
  REQUIRE(unknown.err.find("unknown strategy") != std::string::npos);

  REQUIRE(run_cli(tmp, "").exit_code != 0);
}

TEST_CASE("a zero right-hand side solves in zero iterations") {
  TempDir tmp;
  const fs::path bundle = tmp.path / "zero";
  fs::create_directories(bundle);
  write_file(bundle / "A.mtx",
             "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 1\n");
  write_file(bundle / "b.txt", "0\n0\n");
  write_file(bundle / "meta.json", "{\"lambda\": 1.5}\n");
  const CmdResult solve = run_cli(tmp, "solve " + bundle.string() + " --strategy shskr");
  REQUIRE(solve.exit_code == 0);
  const auto fields = split(solve.out.substr(0, solve.out.find('\n')), ',');
  REQUIRE(fields[1] == "0");
  REQUIRE(fields[4] == "exact_residual");
  REQUIRE(fields[3] == "nan");  // no reference, no rse
}

TEST_CASE("bench tabulates bundles times strategies") {
  TempDir tmp;
  const std::string b1 = (tmp.path / "b1").string();
  const std::string b2 = (tmp.path / "b2").string();
  REQUIRE(run_cli(tmp, "generate " + b1 + " --rows 20 --cols 10 --nnz 2 --seed 5")
              .exit_code == 0);
  REQUIRE(run_cli(tmp, "generate " + b2 + " --rows 24 --cols 12 --nnz 2 --seed 6")
              .exit_code == 0);
  const CmdResult bench = run_cli(
      tmp, "bench " + b1 + " " + b2 + " --strategies shskr,greedy,rsk --repeats 3");
  REQUIRE(bench.exit_code == 0);
  const auto lines = split(bench.out, '\n');
  REQUIRE(lines[0] == "bundle,strategy,IT,CPU_s,final_rse");
  REQUIRE(lines.size() == 1 + 6 + 1);  // header, 2 bundles x 3 strategies, tail
  REQUIRE(lines[1].rfind(b1 + ",shskr,", 0) == 0);
  REQUIRE(lines[4].rfind(b2 + ",shskr,", 0) == 0);
}

TEST_CASE("bounds prints certificates and verifies a clean history") {
  TempDir tmp;
  const std::string bundle = (tmp.path / "bundle").string();
  REQUIRE(run_cli(tmp, "generate " + bundle + " --rows 14 --cols 7 --nnz 2 --seed 8")
              .exit_code == 0);

  const CmdResult plain = run_cli(tmp, "bounds " + bundle);
  REQUIRE(plain.exit_code == 0);
  REQUIRE(plain.out.find("nu = ") != std::string::npos);
  REQUIRE(plain.out.find("q = ") != std::string::npos);
  REQUIRE(plain.out.find("q_tilde = ") != std::string::npos);

  const std::string hist = (tmp.path / "h.csv").string();
  REQUIRE(run_cli(tmp, "solve " + bundle + " --strategy shskr --history " + hist)
              .exit_code == 0);
  const CmdResult check = run_cli(tmp, "bounds " + bundle + " --history " + hist);
  REQUIRE(check.exit_code == 0);
  REQUIRE(check.out.find(" 0 violations") != std::string::npos);
}

TEST_CASE("bounds flags a corrupted history with a nonzero exit") {
  TempDir tmp;
  const std::string bundle = (tmp.path / "bundle").string();
  REQUIRE(run_cli(tmp, "generate " + bundle + " --rows 14 --cols 7 --nnz 2 --seed 12")
              .exit_code == 0);
  const std::string hist = (tmp.path / "h.csv").string();
  REQUIRE(run_cli(tmp, "solve " + bundle + " --strategy shskr --history " + hist)
              .exit_code == 0);

  // Scale one bregman cell far upward.
  std::istringstream in(slurp(hist));
  std::ostringstream out;
  std::string line;
  std::getline(in, line);
  out << line << '\n';
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (rows == 2) {
      auto f = split(line, ',');
      f[3] = "1e30";
      out << f[0] << ',' << f[1] << ',' << f[2] << ',' << f[3] << ',' << f[4] << ','
          << f[5] << '\n';
    } else {
      out << line << '\n';
    }
  }
  write_file(hist, out.str());

  const CmdResult check = run_cli(tmp, "bounds " + bundle + " --history " + hist);
  REQUIRE(check.exit_code == 1);
  REQUIRE(check.out.find("violations") != std::string::npos);
  REQUIRE(check.out.find(" 0 violations") == std::string::npos);
}

TEST_CASE("bounds reports when the condition-number rate does not apply") {
  TempDir tmp;
  const fs::path bundle = tmp.path / "flat";
  fs::create_directories(bundle);
  write_file(bundle / "A.mtx",
             "%%MatrixMarket matrix coordinate real general\n"
             "2 2 4\n1 1 1\n1 2 1\n2 1 1\n2 2 1\n");
  write_file(bundle / "b.txt", "2\n2\n");
  write_file(bundle / "xhat.txt", "1\n1\n");
  write_file(bundle / "meta.json", "{\"lambda\": 1.5}\n");
  const CmdResult res = run_cli(tmp, "bounds " + bundle.string());
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("q_tilde = not applicable") != std::string::npos);
}

TEST_CASE("bounds without a reference is an error") {
  TempDir tmp;
  const fs::path bundle = tmp.path / "noref";
  fs::create_directories(bundle);
  write_file(bundle / "A.mtx",
             "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 1\n");
  write_file(bundle / "b.txt", "1\n1\n");
  write_file(bundle / "meta.json", "{\"lambda\": 1.5}\n");
  const CmdResult res = run_cli(tmp, "bounds " + bundle.string());
  REQUIRE(res.exit_code == 1);
  REQUIRE(res.err.find("reference") != std::string::npos);
}
