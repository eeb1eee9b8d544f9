#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spikedict/io.hpp"
#include "spikedict/network.hpp"
#include "spikedict/oracle.hpp"

#include "testutil.hpp"

#include <random>
#include <sstream>

using namespace spikedict;

namespace {

StageConfig tuned_stage(InputMode mode = InputMode::spiking) {
  StageConfig cfg;
  cfg.window = 20.0;
  cfg.warmup = 40.0;
  cfg.sim.tau_s = 1.5;
  cfg.input_mode = mode;
  return cfg;
}

}  // namespace

TEST_CASE("configure_from_dictionary: identity dictionary") {
  const NetworkParams p = configure_from_dictionary(MatrixXd::Identity(2, 2), 0.0);
  CHECK(p.F.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(p.B.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(p.H.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(p.L.isApprox(VectorXd::Constant(2, -1.0)));
}

TEST_CASE("configure_from_dictionary is feedback-consistent by construction") {
  std::mt19937_64 rng(1);
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(7, 12, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.2);
  CHECK((p.H - p.F * p.B).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(p.B.isApprox(p.F.transpose()));
  CHECK(consistency_residual(p).relative == 0.0);
  for (int i = 0; i < p.code_dim(); ++i)
    CHECK(p.H(i, i) == doctest::Approx(1.0)); // unit-norm columns
}

TEST_CASE("configure_from_dictionary rejects zero-norm columns") {
  MatrixXd D = MatrixXd::Zero(4, 2);
  D(0, 0) = 1.0;
  CHECK_THROWS_AS(configure_from_dictionary(D, 0.1), std::invalid_argument);
}

TEST_CASE("random_init honors the stated invariants") {
  const NetworkParams p = random_init(16, 24, 7);
  p.validate();
  CHECK(p.H.diagonal().isApprox(VectorXd::Ones(24)));
  CHECK(p.L.isApprox(-VectorXd::Ones(24)));
  CHECK((p.F.array() <= 1.0 / 4.0).all()); // 1/sqrt(16)
  CHECK((p.H.array() <= 1.0).all());

  const NetworkParams q = random_init(16, 24, 8);
  CHECK((p.F - q.F).lpNorm<Eigen::Infinity>() > 0.0);
  CHECK(consistency_residual(p).relative > 0.1);
  CHECK((p.F - p.B.transpose()).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("zero input silences the network") {
  std::mt19937_64 rng(2);
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(6, 9, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.3);
  for (InputMode mode : {InputMode::spiking, InputMode::analytic}) {
    const StageRun run = run_feedforward(p, VectorXd::Zero(6), tuned_stage(mode));
    CHECK(run.readout.y.isZero());
    CHECK(run.readout.z.isZero());
  }
}

TEST_CASE("feedforward equilibrium matches the sparse-coding oracle") {
  std::mt19937_64 rng(3);
  const int m = 12, n = 18;
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(m, n, rng);
  const double lambda = 0.1;
  const NetworkParams p = configure_from_dictionary(D, lambda);
  for (InputMode mode : {InputMode::spiking, InputMode::analytic}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::mt19937_64 trial_rng(100 + trial);
      const VectorXd x = testutil::random_uniform_vector(m, 0.0, 0.5, trial_rng);
      const StageRun run = run_feedforward(p, x, tuned_stage(mode));
      const SparseCode oracle = solve_sparse_code(D, x, lambda);
      CHECK((run.readout.z - oracle.a).lpNorm<Eigen::Infinity>() <= 0.1 + 1e-9);
    }
  }
}

TEST_CASE("a lambda above every projection silences the code layer") {
  std::mt19937_64 rng(4);
  const int m = 8, n = 6;
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(m, n, rng);
  const VectorXd x = testutil::random_uniform_vector(m, 0.0, 0.5, rng);
  const double lambda = (D.transpose() * x).maxCoeff() + 0.05; // g_ii = 1
  const NetworkParams p = configure_from_dictionary(D, lambda);
  const StageRun run = run_feedforward(p, x, tuned_stage());
  CHECK(run.readout.z.isZero());
  CHECK(solve_sparse_code(D, x, lambda).a.isZero());
}

TEST_CASE("stage-1 input rates track the input within one quantum") {
  std::mt19937_64 rng(5);
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(10, 14, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.1);
  const VectorXd x = testutil::random_uniform_vector(10, 0.0, 0.9, rng);
  const StageRun run = run_feedforward(p, x, tuned_stage());
  CHECK((run.readout.y - x).lpNorm<Eigen::Infinity>() <= 0.05 + 1e-9);
}

TEST_CASE("stage-1 readout satisfies the steady-state balance") {
  std::mt19937_64 rng(6);
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(10, 14, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.1);
  const VectorXd x = testutil::random_uniform_vector(10, 0.0, 0.5, rng);
  const StageRun run = run_feedforward(p, x, tuned_stage());

  // residual of e = F x + lambda L - H z, branch-weighted as in the
  // equilibrium condition
  const VectorXd e = p.F * x + p.lambda * p.L - p.H * run.readout.z;
  double residual = 0.0;
  for (int i = 0; i < p.code_dim(); ++i)
    residual = std::max(residual, run.readout.z[i] > 0.0 ? std::abs(e[i]) : std::max(e[i], 0.0));
  CHECK(residual <= 3.0 * 0.05 + 1e-9);
}

TEST_CASE("consistent feedback leaves the code layer untouched") {
  std::mt19937_64 rng(7);
  const int m = 16, n = 32;
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(m, n, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.1, 0.5);
  const StageConfig cfg = tuned_stage();
  for (int trial = 0; trial < 5; ++trial) {
    std::mt19937_64 trial_rng(200 + trial);
    const VectorXd x = testutil::random_uniform_vector(m, 0.0, 0.5, trial_rng);
    StageRun s1 = run_feedforward(p, x, cfg);
    StageRun s2 = run_feedback(p, x, std::move(s1.state), cfg);
    CHECK((s2.readout.z - s1.readout.z).lpNorm<Eigen::Infinity>() <= 0.1 + 1e-9);

    const VectorXd shift =
        (s2.readout.y - s1.readout.y) - p.gamma * (p.B * s1.readout.z - x);
    CHECK(shift.lpNorm<Eigen::Infinity>() <= 0.1 + 1e-9);
  }
}

TEST_CASE("stage-2 imbalance identity for consistent parameters") {
  std::mt19937_64 rng(8);
  const int m = 10, n = 12;
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(m, n, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.1, 0.5);
  const VectorXd x = testutil::random_uniform_vector(m, 0.0, 0.5, rng);
  const StageConfig cfg = tuned_stage();
  StageRun s1 = run_feedforward(p, x, cfg);
  StageRun s2 = run_feedback(p, x, std::move(s1.state), cfg);

  const VectorXd expected = (1.0 - p.gamma) * (p.F * x + p.lambda * p.L - p.H * s2.readout.z);
  CHECK((s2.readout.e - expected).lpNorm<Eigen::Infinity>() <= 5.0 * 0.05);
}

TEST_CASE("imbalance reorganization identity holds for any parameters") {
  const NetworkParams p = random_init(12, 16, 9, /*gamma=*/0.2, /*lambda=*/0.1);
  std::mt19937_64 rng(10);
  const VectorXd x = testutil::random_uniform_vector(12, 0.0, 0.5, rng);
  const StageConfig cfg = tuned_stage();
  StageRun s1 = run_feedforward(p, x, cfg);
  StageRun s2 = run_feedback(p, x, std::move(s1.state), cfg);

  const VectorXd lhs = p.gamma * (p.H - p.F * p.B) * s2.readout.z;
  const VectorXd rhs = -s2.readout.e + (1.0 - p.gamma) * s1.readout.e -
                       (1.0 - p.gamma) * p.H * (s2.readout.z - s1.readout.z);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 5.0 * 0.05);
}

TEST_CASE("gamma = 0 feedback stage repeats the feedforward equilibrium") {
  std::mt19937_64 rng(11);
  const MatrixXd D = testutil::random_nonneg_unit_dictionary(8, 10, rng);
  const NetworkParams p = configure_from_dictionary(D, 0.1, 0.0);
  const VectorXd x = testutil::random_uniform_vector(8, 0.0, 0.5, rng);
  const StageConfig cfg = tuned_stage();
  StageRun s1 = run_feedforward(p, x, cfg);
  StageRun s2 = run_feedback(p, x, std::move(s1.state), cfg);
  CHECK((s2.readout.z - s1.readout.z).lpNorm<Eigen::Infinity>() <= 0.05 + 1e-9);
  CHECK((s2.readout.y - s1.readout.y).lpNorm<Eigen::Infinity>() <= 0.05 + 1e-9);
}

TEST_CASE("run_feedback requires a carry state and a valid gamma") {
  const NetworkParams p = random_init(4, 5, 1);
  std::mt19937_64 rng(12);
  const VectorXd x = testutil::random_uniform_vector(4, 0.0, 0.5, rng);
  CHECK_THROWS_AS(run_feedback(p, x, SimState{}, tuned_stage()), std::invalid_argument);

  NetworkParams bad = p;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(run_feedforward(bad, x, tuned_stage()), std::invalid_argument);
  bad.gamma = -0.1;
  CHECK_THROWS_AS(run_feedforward(bad, x, tuned_stage()), std::invalid_argument);
}

TEST_CASE("consistency scatter pairs cover every entry") {
  const NetworkParams p = random_init(6, 8, 2);
  const MatrixXd pairs = consistency_scatter(p);
  REQUIRE(pairs.rows() == 64);
  const MatrixXd fb = p.F * p.B;
  CHECK(pairs(0, 0) == doctest::Approx(fb(0, 0)));
  CHECK(pairs(0, 1) == doctest::Approx(p.H(0, 0)));
  CHECK(pairs(63, 1) == doctest::Approx(p.H(7, 7)));
}

TEST_CASE("consistency residual flags an all-zero product") {
  NetworkParams p = random_init(4, 5, 3);
  p.F.setZero();
  const ConsistencyReport rep = consistency_residual(p);
  CHECK(rep.fb_zero);
  CHECK(rep.relative == doctest::Approx(rep.absolute));
}

TEST_CASE("stage readout CSV carries the documented schema") {
  StageReadout r;
  r.stage = Stage::feedback;
  r.y = (VectorXd(2) << 0.5, 0.25).finished();
  r.z = (VectorXd(1) << 0.75).finished();
  r.e = (VectorXd(1) << -0.125).finished();
  std::ostringstream os;
  write_readout_csv(r, os);
  const std::string text = os.str();
  CHECK(text.find("stage,layer,neuron_id,rate,imbalance\n") == 0);
  CHECK(text.find("feedback,input,0,0.5,\n") != std::string::npos);
  CHECK(text.find("feedback,code,0,0.75,-0.125\n") != std::string::npos);
}
