#include "spikedict/network.hpp"

#include <cmath>
#include <random>

namespace spikedict {

void NetworkParams::validate() const {
  const int m = input_dim();
  const int n = code_dim();
  if (F.rows() != n || F.cols() != m) throw std::invalid_argument("params: F must be N x M");
  if (B.rows() != m || B.cols() != n) throw std::invalid_argument("params: B must be M x N");
  if (H.rows() != n || H.cols() != n) throw std::invalid_argument("params: H must be N x N");
  if (L.size() != n) throw std::invalid_argument("params: L must have N entries");
  if ((F.array() < 0.0).any() || (B.array() < 0.0).any())
    throw std::invalid_argument("params: F and B must be nonnegative");
  if ((L.array() > 0.0).any()) throw std::invalid_argument("params: L must be nonpositive");
  for (int i = 0; i < n; ++i) {
    if (H(i, i) <= 0.0) throw std::invalid_argument("params: thresholds (diag H) must be positive");
    for (int j = 0; j < n; ++j)
      if (i != j && H(i, j) < 0.0)
        throw std::invalid_argument("params: off-diagonal H must be nonnegative");
  }
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("params: gamma must lie in [0, 1)");
  if (lambda < 0.0) throw std::invalid_argument("params: lambda must be nonnegative");
}

NetworkParams configure_from_dictionary(const MatrixXd& D, double lambda, double gamma) {
  const int n = static_cast<int>(D.cols());
  for (int j = 0; j < n; ++j)
    if (D.col(j).norm() <= 0.0)
      throw std::invalid_argument("configure_from_dictionary: zero-norm dictionary column " +
                                  std::to_string(j));
  if ((D.array() < 0.0).any())
    throw std::invalid_argument("configure_from_dictionary: dictionary must be nonnegative");

  NetworkParams p;
  p.F = D.transpose();
  p.B = D;
  p.H = D.transpose() * D;
  p.L = -p.H.diagonal();
  p.gamma = gamma;
  p.lambda = lambda;
  p.validate();
  return p;
}

NetworkParams random_init(int input_dim, int code_dim, std::uint64_t seed, double gamma,
                          double lambda) {
  if (input_dim < 1 || code_dim < 1) throw std::invalid_argument("random_init: dims must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double ff_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double lat_scale = 2.0 / static_cast<double>(code_dim);

  NetworkParams p;
  p.F.resize(code_dim, input_dim);
  for (int i = 0; i < code_dim; ++i)
    for (int j = 0; j < input_dim; ++j) p.F(i, j) = ff_scale * unit(rng);
  p.B.resize(input_dim, code_dim);
  for (int i = 0; i < input_dim; ++i)
    for (int j = 0; j < code_dim; ++j) p.B(i, j) = ff_scale * unit(rng);
  p.H.resize(code_dim, code_dim);
  for (int i = 0; i < code_dim; ++i)
    for (int j = 0; j < code_dim; ++j) p.H(i, j) = i == j ? 1.0 : lat_scale * unit(rng);
  p.L = -p.H.diagonal();
  p.gamma = gamma;
  p.lambda = lambda;
  p.validate();
  return p;
}

namespace {

// Full spiking network: inputs [0, M), bias at M, code layer [M+1, M+1+N).
LifSimulator make_spiking_sim(const NetworkParams& p, const VectorXd& x, Stage stage,
                              const SimParams& sim) {
  const int m = p.input_dim();
  const int n = p.code_dim();
  const int total = m + 1 + n;
  const double scale = stage == Stage::feedback ? 1.0 - p.gamma : 1.0;

  MatrixXd w = MatrixXd::Zero(total, total);
  w.block(m + 1, 0, n, m) = p.F;
  w.block(m + 1, m, n, 1) = p.L;
  w.block(m + 1, m + 1, n, n) = -(p.H - MatrixXd(p.H.diagonal().asDiagonal()));
  if (stage == Stage::feedback) w.block(0, m + 1, m, n) = p.gamma * p.B;

  NeuronPopulation pop;
  pop.thresholds = VectorXd::Ones(total);
  pop.thresholds.tail(n) = p.H.diagonal();
  pop.external_drive = VectorXd::Zero(total);
  pop.external_drive.head(m) = scale * x;
  pop.external_drive[m] = scale * p.lambda;

  return LifSimulator(std::move(w), std::move(pop), sim);
}

// Analytic input mode reduces both stages to the flat lateral network over
// the code layer: constant drive plus, in the feedback stage, the gamma F B
// loop folded into the weights.
LifSimulator make_analytic_sim(const NetworkParams& p, const VectorXd& x, Stage stage,
                               const SimParams& sim) {
  const VectorXd base_drive = p.F * x + p.lambda * p.L;

  MatrixXd w = -(p.H - MatrixXd(p.H.diagonal().asDiagonal()));
  NeuronPopulation pop;
  pop.thresholds = p.H.diagonal();
  if (stage == Stage::feedforward) {
    pop.external_drive = base_drive;
  } else {
    // gamma F B keeps its diagonal: a neuron's own spikes return through the
    // input layer as a genuine self synapse.
    w += p.gamma * (p.F * p.B);
    pop.external_drive = (1.0 - p.gamma) * base_drive;
  }
  return LifSimulator(std::move(w), std::move(pop), sim);
}

StageRun run_stage(const NetworkParams& params, const VectorXd& x, Stage stage, SimState state,
                   const StageConfig& cfg) {
  params.validate();
  if (x.size() != params.input_dim())
    throw std::invalid_argument("run_stage: input size does not match the network");
  if ((x.array() < 0.0).any())
    throw std::invalid_argument("run_stage: inputs must be nonnegative rates");

  const int m = params.input_dim();
  const int n = params.code_dim();

  StageRun out;
  out.readout.stage = stage;

  if (cfg.input_mode == InputMode::spiking) {
    LifSimulator sim = make_spiking_sim(params, x, stage, cfg.sim);
    if (state.size() == 0) state = sim.make_state();
    RateReadout r = sim.run_window(state, state.t + cfg.warmup + cfg.window, cfg.warmup);
    out.readout.y = r.rates.head(m);
    out.readout.z = r.rates.tail(n);
    out.readout.e = r.imbalance.tail(n);
  } else {
    LifSimulator sim = make_analytic_sim(params, x, stage, cfg.sim);
    if (state.size() == 0) state = sim.make_state();
    RateReadout r = sim.run_window(state, state.t + cfg.warmup + cfg.window, cfg.warmup);
    out.readout.z = r.rates;
    out.readout.e = r.imbalance;
    out.readout.y = stage == Stage::feedforward
                        ? x
                        : ((1.0 - params.gamma) * x + params.gamma * (params.B * out.readout.z));
  }
  out.state = std::move(state);
  return out;
}

}  // namespace

StageRun run_feedforward(const NetworkParams& params, const VectorXd& x, const StageConfig& cfg) {
  return run_stage(params, x, Stage::feedforward, SimState{}, cfg);
}

StageRun run_feedback(const NetworkParams& params, const VectorXd& x, SimState carry,
                      const StageConfig& cfg) {
  if (carry.size() == 0)
    throw std::invalid_argument("run_feedback: carry state required (run the feedforward stage first)");
  return run_stage(params, x, Stage::feedback, std::move(carry), cfg);
}

ConsistencyReport consistency_residual(const NetworkParams& params) {
  const MatrixXd fb = params.F * params.B;
  ConsistencyReport rep;
  rep.absolute = (params.H - fb).norm();
  const double denom = fb.norm();
  if (denom <= 0.0) {
    rep.fb_zero = true;
    rep.relative = rep.absolute;
  } else {
    rep.relative = rep.absolute / denom;
  }
  return rep;
}

MatrixXd consistency_scatter(const NetworkParams& params) {
  const MatrixXd fb = params.F * params.B;
  const int n = params.code_dim();
  MatrixXd pairs(n * n, 2);
  long row = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      pairs(row, 0) = fb(i, j);
      pairs(row, 1) = params.H(i, j);
      ++row;
    }
  return pairs;
}

}  // namespace spikedict
