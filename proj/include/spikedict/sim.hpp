#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikedict {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Fixed-step integration parameters shared by every simulation run.
struct SimParams {
  double dt = 1.0 / 32.0;
  double tau_s = 1.0;      // synaptic filter time constant
  double max_rate = 100.0; // spikes per unit time before the runaway guard trips

  // Reset convention on firing. Subtracting the threshold conserves the
  // membrane charge exactly (each spike releases theta_i), which keeps the
  // imbalance bookkeeping exact and the equilibrium rates unbiased at finite
  // dt. reset_to_zero discards the overshoot above threshold instead.
  bool reset_to_zero = false;
};

struct NeuronPopulation {
  VectorXd thresholds;     // strictly positive
  VectorXd external_drive; // constant soma current b

  int count() const { return static_cast<int>(thresholds.size()); }
  void validate() const;
};

struct Spike {
  int neuron;
  double time;
  bool operator==(const Spike&) const = default;
};

struct SimState {
  VectorXd v;               // membrane potentials
  VectorXd trace;           // filtered output (alpha * sigma)(t)
  VectorXd u_accum;         // running integral of the soma current
  VectorXd charge_released; // total membrane charge released through spikes
  VectorXi spike_count;     // total spikes per neuron
  std::vector<Spike> spike_log;
  double t = 0.0;

  // runaway-rate guard bookkeeping: spikes within the current unit interval
  VectorXi unit_count;
  std::int64_t unit_index = -1;

  static SimState zero(int n);
  int size() const { return static_cast<int>(v.size()); }
};

struct RateReadout {
  VectorXd rates;        // spike counts over the window / window length
  VectorXd mean_current; // u_accum delta / window length
  VectorXd imbalance;    // mean_current - thresholds .* rates
  double t_start = 0.0;
  double t_end = 0.0;

  double window() const { return t_end - t_start; }
  double rate_quantum() const { return 1.0 / window(); }
};

class RunawayRatesError : public std::runtime_error {
 public:
  RunawayRatesError(int neuron_id, double at_time, double limit);
  int neuron;
  double time;
};

/// Integrate-and-fire network with fixed weights, constant external drive and
/// exponentially filtered synaptic currents. Weight entry (i, j) is the
/// synapse from neuron j onto neuron i; diagonal entries act as self
/// synapses.
class LifSimulator {
 public:
  LifSimulator(MatrixXd weights, NeuronPopulation pop, SimParams params = {});

  /// One integration step; returns the ids of neurons that fired.
  std::vector<int> step(SimState& state) const;

  /// Advance until state.t == t_end and report windowed rates. The window
  /// starts after `warmup` time units of unmeasured settling; rates and mean
  /// currents cover [entry_t + warmup, t_end].
  RateReadout run_window(SimState& state, double t_end, double warmup = 0.0) const;

  SimState make_state() const { return SimState::zero(pop_.count()); }

  const MatrixXd& weights() const { return weights_; }
  const NeuronPopulation& population() const { return pop_; }
  const SimParams& params() const { return params_; }

 private:
  // syn_current caches weights * trace and is updated incrementally: a full
  // matvec per step would dominate the run time.
  void step_impl(SimState& state, VectorXd& syn_current, std::vector<int>* fired) const;
  long steps_for(double span) const;

  MatrixXd weights_;
  NeuronPopulation pop_;
  SimParams params_;
  double decay_;
};

/// Violation of the steady-state equilibrium condition: |imbalance| for
/// active neurons, max(imbalance, 0) for silent ones, maximised over the
/// population.
double balance_residual(const RateReadout& readout, const VectorXd& thresholds);

}  // namespace spikedict
