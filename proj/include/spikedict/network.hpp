#pragma once

#include "spikedict/sim.hpp"

#include <cstdint>
#include <utility>

namespace spikedict {

/// Synaptic state of the two-layer dictionary-learning network. H packs the
/// sparse-code layer's firing thresholds on its diagonal and the negated
/// lateral weights off it (h_ij = -w_ij >= 0), so the equilibrium imbalance
/// reads e = F x + lambda L - H z.
struct NetworkParams {
  MatrixXd F;    // code_dim x input_dim, feedforward, >= 0
  MatrixXd B;    // input_dim x code_dim, feedback (applied scaled by gamma), >= 0
  MatrixXd H;    // code_dim x code_dim
  VectorXd L;    // code_dim, bias synapses, <= 0
  double gamma = 0.5;  // feedback gain, in [0, 1)
  double lambda = 0.1; // sparsity level = bias neuron drive

  int input_dim() const { return static_cast<int>(B.rows()); }
  int code_dim() const { return static_cast<int>(F.rows()); }
  VectorXd thresholds() const { return H.diagonal(); }
  void validate() const;
};

/// Network solving the nonnegative sparse coding problem for dictionary D:
/// F = D^T, B = D, H = D^T D, L = -diag(H). Feedback-consistent and symmetric
/// by construction.
NetworkParams configure_from_dictionary(const MatrixXd& D, double lambda, double gamma = 0.5);

/// Asymmetric, inconsistent starting point: F, B ~ U[0, 1/sqrt(M)], thresholds
/// 1, lateral weights ~ U[0, 2/N], L = -diag(H).
NetworkParams random_init(int input_dim, int code_dim, std::uint64_t seed, double gamma = 0.5,
                          double lambda = 0.1);

enum class Stage { feedforward, feedback };

/// spiking: input and bias neurons are integrate-and-fire units driving the
/// code layer through the same synaptic filter. analytic: the code layer is
/// simulated while input/bias rates are replaced by their exact equilibria.
enum class InputMode { spiking, analytic };

struct StageConfig {
  double window = 20.0;
  double warmup = 0.0; // settling time discarded before the measured window
  SimParams sim;       // dt, tau_s, guards, reset convention
  InputMode input_mode = InputMode::spiking;
};

struct StageReadout {
  VectorXd y; // input-layer rates
  VectorXd z; // sparse-code rates
  VectorXd e; // sparse-code imbalances over the measured window
  Stage stage = Stage::feedforward;
};

struct StageRun {
  StageReadout readout;
  SimState state; // carry into the feedback stage
};

StageRun run_feedforward(const NetworkParams& params, const VectorXd& x, const StageConfig& cfg);

/// Continues from the feedforward SimState. External drives are rescaled to
/// (1-gamma) x and (1-gamma) lambda while the feedback synapses gamma B come
/// online.
StageRun run_feedback(const NetworkParams& params, const VectorXd& x, SimState carry,
                      const StageConfig& cfg);

struct ConsistencyReport {
  double relative = 0.0; // ||H - FB||_F / ||FB||_F
  double absolute = 0.0; // ||H - FB||_F
  bool fb_zero = false;  // FB vanished; `relative` falls back to `absolute`
};

ConsistencyReport consistency_residual(const NetworkParams& params);

/// Scatter pairs ((FB)_ij, h_ij), one row per matrix entry.
MatrixXd consistency_scatter(const NetworkParams& params);

// Index layout of the spiking two-layer simulation.
inline int input_neuron(int j) { return j; }
inline int bias_neuron(const NetworkParams& p) { return p.input_dim(); }
inline int code_neuron(const NetworkParams& p, int i) { return p.input_dim() + 1 + i; }

}  // namespace spikedict
