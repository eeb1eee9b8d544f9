#include "spikedict/sim.hpp"

#include <cmath>
#include <sstream>

namespace spikedict {

void NeuronPopulation::validate() const {
  if (thresholds.size() != external_drive.size())
    throw std::invalid_argument("population: thresholds and external_drive sizes differ");
  if (thresholds.size() == 0) throw std::invalid_argument("population: empty");
  if ((thresholds.array() <= 0.0).any())
    throw std::invalid_argument("population: thresholds must be strictly positive");
  if (!external_drive.allFinite())
    throw std::invalid_argument("population: external drive must be finite");
}

SimState SimState::zero(int n) {
  SimState s;
  s.v = VectorXd::Zero(n);
  s.trace = VectorXd::Zero(n);
  s.u_accum = VectorXd::Zero(n);
  s.charge_released = VectorXd::Zero(n);
  s.spike_count = VectorXi::Zero(n);
  s.unit_count = VectorXi::Zero(n);
  return s;
}

RunawayRatesError::RunawayRatesError(int neuron_id, double at_time, double limit)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "runaway rates: neuron " << neuron_id << " exceeded " << limit
           << " spikes per unit time at t=" << at_time;
        return os.str();
      }()),
      neuron(neuron_id),
      time(at_time) {}

LifSimulator::LifSimulator(MatrixXd weights, NeuronPopulation pop, SimParams params)
    : weights_(std::move(weights)), pop_(std::move(pop)), params_(params) {
  pop_.validate();
  if (weights_.rows() != pop_.count() || weights_.cols() != pop_.count())
    throw std::invalid_argument("simulator: weight matrix does not match population size");
  if (params_.dt <= 0.0) throw std::invalid_argument("simulator: dt must be positive");
  if (params_.tau_s <= 0.0) throw std::invalid_argument("simulator: tau_s must be positive");
  decay_ = std::exp(-params_.dt / params_.tau_s);
}

void LifSimulator::step_impl(SimState& state, VectorXd& syn_current,
                             std::vector<int>* fired) const {
  const int n = pop_.count();
  const double dt = params_.dt;
  const double impulse = 1.0 / params_.tau_s;

  state.trace *= decay_;
  syn_current *= decay_;

  state.t += dt;

  // runaway guard buckets by unit time
  const auto bucket = static_cast<std::int64_t>(std::floor(state.t - 0.5 * dt));
  if (bucket != state.unit_index) {
    state.unit_index = bucket;
    state.unit_count.setZero();
  }

  for (int i = 0; i < n; ++i) {
    const double mu = pop_.external_drive[i] + syn_current[i];
    const double charge = mu * dt;
    state.v[i] += charge;
    state.u_accum[i] += charge;
  }

  for (int i = 0; i < n; ++i) {
    if (state.v[i] < pop_.thresholds[i]) continue;
    if (params_.reset_to_zero) {
      state.charge_released[i] += state.v[i];
      state.v[i] = 0.0;
    } else {
      state.charge_released[i] += pop_.thresholds[i];
      state.v[i] -= pop_.thresholds[i];
    }
    state.spike_count[i] += 1;
    state.spike_log.push_back({i, state.t});
    state.trace[i] += impulse;
    syn_current += weights_.col(i) * impulse;
    if (fired) fired->push_back(i);
    if (++state.unit_count[i] > params_.max_rate)
      throw RunawayRatesError(i, state.t, params_.max_rate);
  }
}

std::vector<int> LifSimulator::step(SimState& state) const {
  if (state.size() != pop_.count())
    throw std::invalid_argument("step: state size does not match population");
  std::vector<int> fired;
  VectorXd syn_current = weights_ * state.trace;
  step_impl(state, syn_current, &fired);
  return fired;
}

long LifSimulator::steps_for(double span) const {
  const double raw = span / params_.dt;
  const long n = std::lround(raw);
  if (n < 0 || std::abs(raw - static_cast<double>(n)) > 1e-6)
    throw std::invalid_argument("run_window: dt does not divide the requested span");
  return n;
}

RateReadout LifSimulator::run_window(SimState& state, double t_end, double warmup) const {
  if (state.size() != pop_.count())
    throw std::invalid_argument("run_window: state size does not match population");
  if (warmup < 0.0) throw std::invalid_argument("run_window: negative warmup");
  const double t_entry = state.t;
  if (t_end <= t_entry + warmup)
    throw std::invalid_argument("run_window: window must have positive length");

  const long warm_steps = steps_for(warmup);
  const long measure_steps = steps_for(t_end - t_entry - warmup);

  VectorXd syn_current = weights_ * state.trace;
  for (long k = 0; k < warm_steps; ++k) step_impl(state, syn_current, nullptr);

  const VectorXd u0 = state.u_accum;
  const VectorXi c0 = state.spike_count;
  const double t_start = state.t;
  for (long k = 0; k < measure_steps; ++k) step_impl(state, syn_current, nullptr);

  RateReadout out;
  out.t_start = t_start;
  out.t_end = state.t;
  const double window = static_cast<double>(measure_steps) * params_.dt;
  out.rates = (state.spike_count - c0).cast<double>() / window;
  out.mean_current = (state.u_accum - u0) / window;
  out.imbalance = out.mean_current - pop_.thresholds.cwiseProduct(out.rates);
  return out;
}

double balance_residual(const RateReadout& readout, const VectorXd& thresholds) {
  if (thresholds.size() != readout.rates.size())
    throw std::invalid_argument("balance_residual: size mismatch");
  double worst = 0.0;
  for (int i = 0; i < readout.rates.size(); ++i) {
    const double d = readout.imbalance[i];
    const double violation = readout.rates[i] > 0.0 ? std::abs(d) : std::max(d, 0.0);
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace spikedict
