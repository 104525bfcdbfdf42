#include "blindsr2d/denoiser.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace blindsr2d;
using namespace blindsr2d::testing;

namespace {

// Single atom at (0.13, 0.67) with unit amplitude.
Fixture single_atom_fixture(int N, std::uint64_t seed) {
  Fixture fx = random_fixture(N, 2, 1, seed);
  fx.truth.shifts = {{0.13, 0.67}};
  fx.truth.amplitudes = {1.0};
  return fx;
}

}  // namespace

TEST(SelectMu, NoiselessFloor) {
  const auto fx = random_fixture(7, 2, 1, 1);
  EXPECT_EQ(select_mu(0.0, fx.D, 7, 1.2), 1e-8);
  EXPECT_EQ(select_mu(0.0, fx.D, 7, 1.2, 3e-5), 3e-5);
}

TEST(SelectMu, FormulaAndLinearity) {
  const auto fx = random_fixture(7, 2, 1, 2);
  const double sigma = std::sqrt(0.15);
  const double expect = 6.0 * 1.2 * sigma * fx.D.D.norm() * std::sqrt(std::log(7.0));
  EXPECT_NEAR(select_mu(sigma, fx.D, 7, 1.2), expect, 1e-12 * expect);
  EXPECT_NEAR(select_mu(2 * sigma, fx.D, 7, 1.2), 2 * expect, 1e-12 * expect);
  EXPECT_THROW(select_mu(sigma, fx.D, 1, 1.2), InvalidArgument);
  EXPECT_THROW(select_mu(-1.0, fx.D, 7, 1.2), InvalidArgument);
}

TEST(Mse, TrivialCases) {
  Rng gen(3);
  const SampleVector a = random_cvec(9, gen);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_NEAR(mse(a + SampleVector::Ones(9), a), 1.0, 1e-14);
  const SampleVector b = random_cvec(9, gen);
  double acc = 0.0;
  for (int i = 0; i < 9; ++i) acc += std::norm(a(i) - b(i));
  EXPECT_NEAR(mse(a, b), acc / 9.0, 1e-14);
  EXPECT_THROW(mse(a, random_cvec(7, gen)), DimensionMismatch);
}

TEST(Denoise, NoiselessLimitReproducesInput) {
  const auto fx = single_atom_fixture(4, 4);
  const LiftingFamily fam(fx.D, fx.dims);
  const SampleVector y = synth_clean(fam, fx.truth);
  DenoiseConfig cfg;
  cfg.sigma = 0.0;
  const DenoiseResult r = denoise(y, fam, cfg);
  EXPECT_EQ(r.status, SolverStatus::converged);
  EXPECT_NEAR(r.mu, 1e-8 * y.norm(), 1e-20);
  EXPECT_LE(mse(r.y_hat, y), 1e-6);
}

TEST(Denoise, LargerMuShrinksMore) {
  const auto fx = single_atom_fixture(4, 5);
  const LiftingFamily fam(fx.D, fx.dims);
  const SampleVector y = add_noise(synth_clean(fam, fx.truth), 0.05, 6);
  double prev = std::numeric_limits<double>::infinity();
  for (double mu : {0.5, 2.0, 5.0, 1e3}) {
    DenoiseConfig cfg;
    cfg.mu_override = mu;
    const DenoiseResult r = denoise(y, fam, cfg);
    ASSERT_EQ(r.status, SolverStatus::converged) << mu;
    const double n = r.y_hat.norm();
    EXPECT_LE(n, prev + 1e-4 * y.norm()) << mu;
    prev = n;
  }
  EXPECT_LT(prev, 1e-4 * y.norm());
}

TEST(Denoise, ScalingCovariance) {
  const auto fx = single_atom_fixture(4, 7);
  const LiftingFamily fam(fx.D, fx.dims);
  const SampleVector y = add_noise(synth_clean(fam, fx.truth), 0.02, 8);
  DenoiseConfig cfg;
  cfg.sigma = 0.05;
  cfg.lambda = 1.0;
  const DenoiseResult a = denoise(y, fam, cfg);
  const double alpha = 3.0;
  cfg.sigma *= alpha;
  const DenoiseResult b = denoise(alpha * y, fam, cfg);
  EXPECT_NEAR(b.mu, alpha * a.mu, 1e-12 * b.mu);
  EXPECT_LT((b.q - alpha * a.q).norm(), 1e-4 * (alpha * a.q).norm());
}

TEST(Denoise, RejectsLambdaBelowOne) {
  const auto fx = single_atom_fixture(4, 9);
  const LiftingFamily fam(fx.D, fx.dims);
  DenoiseConfig cfg;
  cfg.lambda = 0.5;
  EXPECT_THROW(denoise(SampleVector::Zero(9), fam, cfg), InvalidArgument);
}

TEST(Optimality, ZeroDual) {
  const auto fx = single_atom_fixture(4, 10);
  const LiftingFamily fam(fx.D, fx.dims);
  DenoiseResult r;
  r.q = SampleVector::Zero(9);
  r.y_hat = SampleVector::Zero(9);
  const auto rep = check_optimality(r, fam, 1.7, default_grid_M(4));
  EXPECT_EQ(rep.dual_norm, 0.0);
  EXPECT_EQ(rep.gap_a, -1.7);
}

TEST(Optimality, ConvergedSolveIsCertified) {
  const auto fx = single_atom_fixture(5, 11);
  const LiftingFamily fam(fx.D, fx.dims);
  const SampleVector y = add_noise(synth_clean(fam, fx.truth), 0.15, 12);
  DenoiseConfig cfg;
  cfg.mu_override = 0.25 * select_mu(std::sqrt(0.15), fx.D, 5, 1.2);
  const DenoiseResult r = denoise(y, fam, cfg);
  ASSERT_EQ(r.status, SolverStatus::converged);
  // Inflation (1 - 4 pi N / M)^{-1/2} stays below 1 + 5e-3 at this grid size.
  const auto rep = check_optimality(r, fam, r.mu, 6400);
  EXPECT_LE(rep.gap_a, 1e-2 * r.mu);
}

TEST(Optimality, GroundTruthPlugIn) {
  const auto fx = single_atom_fixture(5, 13);
  const LiftingFamily fam(fx.D, fx.dims);
  const SampleVector y = synth_clean(fam, fx.truth);
  DenoiseConfig cfg;
  // Small mu keeps the amplitude shrinkage of the estimate below the tolerance.
  cfg.mu_override = 0.004;
  const DenoiseResult r = denoise(y, fam, cfg);
  ASSERT_EQ(r.status, SolverStatus::converged);
  const std::vector<CVec> products{fx.truth.amplitudes[0] * fx.truth.orientations[0]};
  const auto rep = check_optimality(r, fam, r.mu, 400, &products);
  ASSERT_TRUE(rep.surrogate_available);
  EXPECT_NEAR(rep.inner_q_yhat, r.mu * rep.atomic_surrogate, 1e-3 * r.mu * rep.atomic_surrogate);
}

TEST(DenoiseCsv, HeaderAndRows) {
  DenoiseResult r;
  r.mu = 0.5;
  r.lambda = 1.2;
  r.sigma2 = 0.1;
  r.status = SolverStatus::converged;
  const SampleVector y = SampleVector::Constant(3, cd(1.0, -1.0));
  r.y_hat = y;
  r.q = SampleVector::Zero(3);
  std::ostringstream os;
  write_denoise_csv(os, y, r);
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines[0], "# mu=0.5");
  EXPECT_EQ(lines[3], "# status=converged");
  EXPECT_EQ(lines[4], "p,y_re,y_im,yhat_re,yhat_im,q_re,q_im");
  EXPECT_EQ(lines[5], "-1,1,-1,1,-1,0,0");
}
