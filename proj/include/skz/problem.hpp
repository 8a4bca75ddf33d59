#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skz/bregman.hpp"
#include "skz/row_matrix.hpp"

namespace skz {

// Provenance of a problem instance: either generator parameters or the
// source file a matrix was read from. noise_level is relative to ||b||_2.
struct ProblemMeta {
  std::string generator;  // "gaussian", "sparse", "file", ...
  std::string source;     // file path when loaded from disk
  std::uint64_t seed = 0;
  double noise_level = 0.0;
  std::size_t planted_nnz = 0;
};

struct Problem {
  RowMatrix a;
  std::vector<double> b;
  RegParam lambda{1.5};
  // Planted solution when known; enables RSE tracking and Bregman
  // certificates against the true minimizer.
  std::optional<std::vector<double>> reference;
  ProblemMeta meta;
};

}  // namespace skz
