#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <skz/row_matrix.hpp>
#include <skz/spectral.hpp>

TEST_CASE("diagonal matrix spectrum") {
  const skz::RowMatrix a = skz::RowMatrix::dense(2, 2, {3, 0, 0, 1});
  const skz::SpectralSummary s = skz::spectral_summary(a);
  REQUIRE_THAT(s.sigma_max, Catch::Matchers::WithinAbs(3.0, 1e-12));
  REQUIRE_THAT(s.sigma_min, Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(s.sigma_min_nonzero, Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE(s.rank == 2);
}

TEST_CASE("rank deficiency is detected at the scaled tolerance") {
  const skz::RowMatrix a = skz::RowMatrix::dense(2, 2, {1, 1, 1, 1});
  const skz::SpectralSummary s = skz::spectral_summary(a);
  REQUIRE_THAT(s.sigma_max, Catch::Matchers::WithinAbs(2.0, 1e-12));
  REQUIRE(s.rank == 1);
  REQUIRE_THAT(s.sigma_min_nonzero, Catch::Matchers::WithinAbs(2.0, 1e-12));
  REQUIRE(s.sigma_min <= 1e-14);
}

TEST_CASE("singular diagonal keeps the nonzero floor") {
  const skz::RowMatrix a = skz::RowMatrix::dense(2, 2, {3, 0, 0, 0});
  const skz::SpectralSummary s = skz::spectral_summary(a);
  REQUIRE(s.rank == 1);
  REQUIRE_THAT(s.sigma_min_nonzero, Catch::Matchers::WithinAbs(3.0, 1e-12));
}

TEST_CASE("zero matrix has no spectral data") {
  const skz::RowMatrix a = skz::RowMatrix::dense(2, 2, {0, 0, 0, 0});
  REQUIRE_THROWS_AS(skz::spectral_summary(a), std::invalid_argument);
}

TEST_CASE("size guard rejects matrices beyond the small dimension cap") {
  const skz::RowMatrix a = skz::RowMatrix::dense(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  REQUIRE_THROWS_AS(skz::spectral_summary(a, 2), std::invalid_argument);
  REQUIRE_NOTHROW(skz::spectral_summary(a, 3));
}

TEST_CASE("wide and tall shapes agree with their transposes") {
  const skz::RowMatrix wide = skz::RowMatrix::dense(1, 3, {1, 2, 2});
  const skz::SpectralSummary sw = skz::spectral_summary(wide);
  REQUIRE_THAT(sw.sigma_max, Catch::Matchers::WithinAbs(3.0, 1e-12));
  REQUIRE(sw.rank == 1);

  const skz::RowMatrix tall = skz::RowMatrix::dense(3, 1, {1, 2, 2});
  const skz::SpectralSummary st = skz::spectral_summary(tall);
  REQUIRE_THAT(st.sigma_max, Catch::Matchers::WithinAbs(3.0, 1e-12));
  REQUIRE(st.rank == 1);
}

TEST_CASE("frobenius energy brackets the extreme singular values") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> vals(12 * 8);
  for (double& v : vals) v = gauss(rng);
  const skz::RowMatrix a = skz::RowMatrix::dense(12, 8, std::move(vals));
  const skz::SpectralSummary s = skz::spectral_summary(a);
  REQUIRE(s.rank == 8);
  REQUIRE(s.sigma_max * s.sigma_max <= a.fro_norm_sq() * (1 + 1e-12));
  REQUIRE(a.fro_norm_sq() <= 8 * s.sigma_max * s.sigma_max * (1 + 1e-12));
  REQUIRE(s.sigma_min > 0.0);
  REQUIRE(s.sigma_min_nonzero >= s.sigma_min);
}
