#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spikedict/sim.hpp"

#include "testutil.hpp"

#include <cmath>
#include <random>

using namespace spikedict;

namespace {

LifSimulator flat_sim(const MatrixXd& w, const VectorXd& theta, const VectorXd& b,
                      SimParams p = {}) {
  NeuronPopulation pop;
  pop.thresholds = theta;
  pop.external_drive = b;
  return LifSimulator(w, pop, p);
}

}  // namespace

TEST_CASE("single free neuron fires at rate b/theta") {
  auto sim = flat_sim(MatrixXd::Zero(1, 1), VectorXd::Ones(1), VectorXd::Ones(1));
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  CHECK(std::abs(r.rates[0] - 1.0) <= 0.05); // within one rate quantum
  CHECK(r.mean_current[0] == doctest::Approx(1.0));
}

TEST_CASE("no drive, no spikes") {
  auto sim = flat_sim(MatrixXd::Zero(3, 3), VectorXd::Ones(3), VectorXd::Zero(3));
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  CHECK(r.rates.isZero());
  CHECK(s.spike_log.empty());
}

TEST_CASE("mutual inhibition settles on the balance solution") {
  // a = b + W a with theta = 1: a1 = 14/15, a2 = 2/15
  MatrixXd w(2, 2);
  w << 0.0, -0.5, -0.5, 0.0;
  VectorXd b(2);
  b << 1.0, 0.6;
  auto sim = flat_sim(w, VectorXd::Ones(2), b);
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  CHECK(std::abs(r.rates[0] - 14.0 / 15.0) <= 0.05 + 1e-12);
  CHECK(std::abs(r.rates[1] - 2.0 / 15.0) <= 0.05 + 1e-12);
}

TEST_CASE("rates are quantized to spike counts over the window") {
  std::mt19937_64 rng(3);
  const int n = 5;
  MatrixXd w = MatrixXd::Zero(n, n);
  std::uniform_real_distribution<double> wdist(0.0, 0.3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) w(i, j) = -wdist(rng);
  auto sim = flat_sim(w, VectorXd::Ones(n), testutil::random_uniform_vector(n, 0.0, 1.0, rng));
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  for (int i = 0; i < n; ++i) {
    const double counts = r.rates[i] * r.window();
    CHECK(counts == doctest::Approx(std::round(counts)).epsilon(1e-9));
  }
}

TEST_CASE("inhibited neuron stays silent with imbalance b") {
  auto sim = flat_sim(MatrixXd::Zero(1, 1), VectorXd::Ones(1), VectorXd::Constant(1, -0.4));
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  CHECK(r.rates[0] == 0.0);
  CHECK(r.imbalance[0] == doctest::Approx(-0.4));
  CHECK(balance_residual(r, sim.population().thresholds) == 0.0);
}

TEST_CASE("random inhibitory network meets the enumerated equilibrium") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wdist(0.0, 0.4);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 3;
    MatrixXd w = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) w(i, j) = -wdist(rng);
    const VectorXd theta = testutil::random_uniform_vector(n, 0.8, 1.2, rng);
    const VectorXd b = testutil::random_uniform_vector(n, -0.2, 0.9, rng);

    auto exact = testutil::enumerate_equilibrium(w, theta, b);
    REQUIRE(exact.has_value());

    auto sim = flat_sim(w, theta, b);
    SimState s = sim.make_state();
    RateReadout r = sim.run_window(s, s.t + 20.0 + 20.0, 20.0);
    for (int i = 0; i < n; ++i) CHECK(std::abs(r.rates[i] - (*exact)[i]) <= 0.1 + 1e-12);
    CHECK(balance_residual(r, theta) <= 3.0 * r.rate_quantum());
  }
}

TEST_CASE("balance residual: converged single neuron") {
  auto sim = flat_sim(MatrixXd::Zero(1, 1), VectorXd::Ones(1), VectorXd::Ones(1));
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  CHECK(balance_residual(r, sim.population().thresholds) <= 0.06);
}

TEST_CASE("balance residual: all-silent network is exactly balanced") {
  auto sim = flat_sim(MatrixXd::Zero(2, 2), VectorXd::Ones(2),
                      (VectorXd(2) << -0.1, 0.0).finished());
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  CHECK(balance_residual(r, sim.population().thresholds) == 0.0);
}

TEST_CASE("balance residual shrinks with the window") {
  MatrixXd w(2, 2);
  w << 0.0, -0.5, -0.5, 0.0;
  VectorXd b(2);
  b << 1.0, 0.6;
  const VectorXd theta = VectorXd::Ones(2);

  auto sim = flat_sim(w, theta, b);
  SimState s1 = sim.make_state();
  const double short_res = balance_residual(sim.run_window(s1, 1.0), theta);
  SimState s2 = sim.make_state();
  const double long_res = balance_residual(sim.run_window(s2, 20.0), theta);
  CHECK(long_res < short_res);
}

TEST_CASE("charge accounting is exact bookkeeping") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wdist(-0.4, 0.1);
  const int n = 4;
  MatrixXd w = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) w(i, j) = wdist(rng);
  const VectorXd theta = testutil::random_uniform_vector(n, 0.5, 1.5, rng);
  const VectorXd b = testutil::random_uniform_vector(n, 0.0, 1.2, rng);

  SUBCASE("threshold subtraction releases exactly theta per spike") {
    auto sim = flat_sim(w, theta, b);
    SimState s = sim.make_state();
    sim.run_window(s, 20.0);
    for (int i = 0; i < n; ++i) {
      const double released = theta[i] * s.spike_count[i];
      CHECK(s.charge_released[i] == doctest::Approx(released).epsilon(1e-12));
      CHECK(s.u_accum[i] == doctest::Approx(released + s.v[i]).epsilon(1e-9));
    }
  }

  SUBCASE("reset to zero balances against the logged released charge") {
    SimParams p;
    p.reset_to_zero = true;
    auto sim = flat_sim(w, theta, b, p);
    SimState s = sim.make_state();
    sim.run_window(s, 20.0);
    for (int i = 0; i < n; ++i) {
      CHECK(s.u_accum[i] == doctest::Approx(s.charge_released[i] + s.v[i]).epsilon(1e-9));
      CHECK(s.charge_released[i] >= theta[i] * s.spike_count[i] - 1e-12);
    }
  }
}

TEST_CASE("imbalance identity holds by construction") {
  MatrixXd w(2, 2);
  w << 0.0, -0.3, -0.2, 0.0;
  auto sim = flat_sim(w, VectorXd::Ones(2), (VectorXd(2) << 0.9, 0.7).finished());
  SimState s = sim.make_state();
  RateReadout r = sim.run_window(s, 20.0);
  for (int i = 0; i < 2; ++i)
    CHECK(r.imbalance[i] ==
          doctest::Approx(r.mean_current[i] - r.rates[i] * 1.0).epsilon(1e-15));
}

TEST_CASE("trace decays exponentially between spikes") {
  auto sim = flat_sim(MatrixXd::Zero(1, 1), VectorXd::Ones(1), VectorXd::Constant(1, 0.3));
  SimState s = sim.make_state();
  // force one spike, then watch the decay
  while (s.spike_log.empty()) sim.step(s);
  const double r0 = s.trace[0];
  const double decay = std::exp(-sim.params().dt / sim.params().tau_s);
  double expected = r0;
  for (int k = 0; k < 10; ++k) {
    sim.step(s);
    expected *= decay;
    if (!s.spike_log.empty() && s.spike_log.back().time == s.t) break; // next spike
    CHECK(s.trace[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("identical runs produce bit-identical spike logs") {
  std::mt19937_64 rng(7);
  const int n = 6;
  MatrixXd w = MatrixXd::Zero(n, n);
  std::uniform_real_distribution<double> wdist(-0.3, 0.05);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) w(i, j) = wdist(rng);
  const VectorXd b = testutil::random_uniform_vector(n, 0.0, 1.0, rng);

  auto run_once = [&] {
    auto sim = flat_sim(w, VectorXd::Ones(n), b);
    SimState s = sim.make_state();
    sim.run_window(s, 40.0);
    return s.spike_log;
  };
  const auto log1 = run_once();
  const auto log2 = run_once();
  REQUIRE(log1.size() == log2.size());
  CHECK(log1 == log2);
}

TEST_CASE("runaway guard names the offending neuron") {
  SimParams p;
  p.dt = 1.0 / 256.0;
  p.max_rate = 100.0;
  auto sim = flat_sim(MatrixXd::Zero(2, 2), VectorXd::Ones(2),
                      (VectorXd(2) << 0.5, 400.0).finished(), p);
  SimState s = sim.make_state();
  try {
    sim.run_window(s, 20.0);
    FAIL("expected RunawayRatesError");
  } catch (const RunawayRatesError& e) {
    CHECK(e.neuron == 1);
    CHECK(std::string(e.what()).find("neuron 1") != std::string::npos);
  }
}

TEST_CASE("step rejects dt or population mismatches") {
  CHECK_THROWS_AS(flat_sim(MatrixXd::Zero(2, 2), VectorXd::Zero(2), VectorXd::Zero(2)),
                  std::invalid_argument); // zero thresholds
  SimParams bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(flat_sim(MatrixXd::Zero(1, 1), VectorXd::Ones(1), VectorXd::Zero(1), bad),
                  std::invalid_argument);
  auto sim = flat_sim(MatrixXd::Zero(1, 1), VectorXd::Ones(1), VectorXd::Zero(1));
  SimState wrong = SimState::zero(3);
  CHECK_THROWS_AS(sim.step(wrong), std::invalid_argument);
  SimState s = sim.make_state();
  CHECK_THROWS_AS(sim.run_window(s, 10.0, /*warmup=*/20.0), std::invalid_argument);
}
