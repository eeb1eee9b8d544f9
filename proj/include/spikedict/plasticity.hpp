#pragma once

#include "spikedict/network.hpp"

#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace spikedict {

struct LearnRates {
  double eta_f = 0.01;
  double eta_b = 0.01;
  double eta_h = 0.32; // ratio eta_h = 32 eta_f
  double eta_sgd = 0.01;
  double decay_f = 0.0;
  double decay_b = 0.0;
  double decay_h = 0.0;
};

/// Hebbian updates driven by the input-layer rate shift between stages:
///   f_ij += eta_f z2_i (y1_j - y2_j) - decay_f f_ij
///   b_ij += eta_b (y1_i - y2_i) z2_j - decay_b b_ij
/// followed by truncation at zero.
void update_ff_fb(MatrixXd& F, MatrixXd& B, const VectorXd& y1, const VectorXd& y2,
                  const VectorXd& z2, const LearnRates& rates);

/// Synaptically local estimate of grad_H 0.5 ||(H - FB) z||^2 from the stage
/// imbalances: (1/gamma) (-e2 + (1-gamma) e1 - (1-gamma) H (z2 - z1)) z2^T.
MatrixXd grad_H(const MatrixXd& H, const VectorXd& e1, const VectorXd& e2, const VectorXd& z1,
                const VectorXd& z2, double gamma);

enum class DecayMode {
  full,     // H <- H - eta grad - decay H
  diagonal, // decay applied to the thresholds only
};

struct HProjection {
  double theta_min = 0.05; // thresholds never clamp below this
  DecayMode decay_mode = DecayMode::full;
};

void update_H(MatrixXd& H, const MatrixXd& grad, double eta_h, double decay_h,
              const HProjection& proj = {});

/// Projected SGD baseline step: D <- Pi_C[D - eta (D a - x) a^T] where Pi_C
/// clamps negatives and renormalizes columns; columns that collapse to zero
/// are reseeded from the current sample (or randomly if the sample is zero).
void sgd_step(MatrixXd& D, const VectorXd& x, const VectorXd& a_star, double eta,
              std::mt19937_64& rng);

enum class TrainMode { simultaneous, two_phase };

struct TrainConfig {
  LearnRates rates;
  StageConfig stage;
  TrainMode mode = TrainMode::simultaneous;
  long consistency_samples = 0; // two_phase: F and B stay frozen this long
  HProjection projection;

  // Guard limits. h_step_cap keeps the rank-one H update contractive on hot
  // samples: the applied rate is min(eta_h, h_step_cap / ||z2||^2). Set <= 0
  // to disable.
  double h_step_cap = 1.0;

  // two_phase extras: Kaczmarz-style normalized steps eta_h / (1 + ||z2||^2)
  // and a late 1/t anneal of both step and decay.
  bool normalized_h_step = false;
  long anneal_after = -1;
  double anneal_tau = 100.0;

  // metrics cadence
  long eval_every = 0;               // 0 = never evaluate the held-out objective
  std::optional<MatrixXd> heldout;   // rows are samples
  long heldout_cap = 200;            // at most this many held-out rows per eval
};

struct MetricsRow {
  long sample_idx = 0;
  double consistency_residual = 0.0;
  double mean_threshold = 0.0;
  std::optional<double> heldout_objective;
};

struct SampleEvent {
  long sample_idx;
  const StageReadout& feedforward;
  const StageReadout& feedback;
  const NetworkParams& params; // state after this sample's updates
};

using TrainObserver = std::function<void(const SampleEvent&)>;

class TrainDivergedError : public std::runtime_error {
 public:
  TrainDivergedError(long sample_idx, const std::string& detail);
  long sample_idx;
};

struct TrainResult {
  NetworkParams params;
  std::vector<MetricsRow> metrics;
};

/// Online training: per sample, run the feedforward and feedback stages and
/// apply the local rules. Samples are the rows of `stream`, visited once in
/// order.
TrainResult train_snn(NetworkParams params, const MatrixXd& stream, const TrainConfig& config,
                      const TrainObserver& observer = {});

/// Bisect a shared decay (decay_f = decay_b = decay_h) until the mean firing
/// threshold after `calibration_samples` samples lands inside
/// [target_lo, target_hi]. Returns the calibrated decay.
double calibrate_decay(const NetworkParams& params, const MatrixXd& stream,
                       const TrainConfig& config, long calibration_samples = 1000,
                       double target_lo = 0.8, double target_hi = 1.2, double decay_lo = 1e-6,
                       double decay_hi = 2e-2, int max_bisections = 12);

}  // namespace spikedict
