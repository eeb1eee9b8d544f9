#include "spikedict/plasticity.hpp"

#include "spikedict/oracle.hpp"

#include <cmath>
#include <sstream>

namespace spikedict {

void update_ff_fb(MatrixXd& F, MatrixXd& B, const VectorXd& y1, const VectorXd& y2,
                  const VectorXd& z2, const LearnRates& rates) {
  const int n = static_cast<int>(F.rows());
  const int m = static_cast<int>(F.cols());
  if (B.rows() != m || B.cols() != n || y1.size() != m || y2.size() != m || z2.size() != n)
    throw std::invalid_argument("update_ff_fb: dimension mismatch");

  const VectorXd dy = y1 - y2;
  F += rates.eta_f * (z2 * dy.transpose());
  F -= rates.decay_f * F;
  F = F.cwiseMax(0.0);

  B += rates.eta_b * (dy * z2.transpose());
  B -= rates.decay_b * B;
  B = B.cwiseMax(0.0);
}

MatrixXd grad_H(const MatrixXd& H, const VectorXd& e1, const VectorXd& e2, const VectorXd& z1,
                const VectorXd& z2, double gamma) {
  const int n = static_cast<int>(H.rows());
  if (H.cols() != n || e1.size() != n || e2.size() != n || z1.size() != n || z2.size() != n)
    throw std::invalid_argument("grad_H: dimension mismatch");
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("grad_H: gamma must lie in (0, 1); the feedback stage is required");

  const VectorXd local = (-e2 + (1.0 - gamma) * e1 - (1.0 - gamma) * (H * (z2 - z1))) / gamma;
  return local * z2.transpose();
}

void update_H(MatrixXd& H, const MatrixXd& grad, double eta_h, double decay_h,
              const HProjection& proj) {
  if (grad.rows() != H.rows() || grad.cols() != H.cols())
    throw std::invalid_argument("update_H: gradient shape mismatch");

  H -= eta_h * grad;
  if (decay_h != 0.0) {
    if (proj.decay_mode == DecayMode::full)
      H -= decay_h * H;
    else
      H.diagonal() -= decay_h * H.diagonal();
  }
  VectorXd diag = H.diagonal();
  H = H.cwiseMax(0.0);
  H.diagonal() = diag.cwiseMax(proj.theta_min);
}

void sgd_step(MatrixXd& D, const VectorXd& x, const VectorXd& a_star, double eta,
              std::mt19937_64& rng) {
  if (D.rows() != x.size() || D.cols() != a_star.size())
    throw std::invalid_argument("sgd_step: dimension mismatch");

  D -= eta * ((D * a_star - x) * a_star.transpose());
  D = D.cwiseMax(0.0);
  for (int j = 0; j < D.cols(); ++j) {
    const double nrm = D.col(j).norm();
    if (nrm > 1e-12) {
      D.col(j) /= nrm;
      continue;
    }
    // dead atom: reseed from the sample, falling back to a random direction
    VectorXd seed = x.cwiseMax(0.0);
    double snrm = seed.norm();
    if (snrm <= 1e-12) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (long i = 0; i < seed.size(); ++i) seed[i] = unit(rng);
      snrm = seed.norm();
    }
    D.col(j) = seed / snrm;
  }
}

TrainDivergedError::TrainDivergedError(long idx, const std::string& detail)
    : std::runtime_error("training diverged at sample " + std::to_string(idx) + ": " + detail),
      sample_idx(idx) {}

namespace {

double heldout_objective_now(const NetworkParams& params, const TrainConfig& cfg) {
  const MatrixXd& ho = *cfg.heldout;
  const long rows = std::min<long>(ho.rows(), cfg.heldout_cap > 0 ? cfg.heldout_cap : ho.rows());
  return dict_objective(params.F.transpose(), ho.topRows(rows), params.lambda);
}

}  // namespace

TrainResult train_snn(NetworkParams params, const MatrixXd& stream, const TrainConfig& config,
                      const TrainObserver& observer) {
  params.validate();
  if (stream.rows() == 0) throw std::invalid_argument("train_snn: empty sample stream");
  if (stream.cols() != params.input_dim())
    throw std::invalid_argument("train_snn: sample dimension does not match the network");

  TrainResult out;
  out.metrics.reserve(stream.rows());

  for (long p = 0; p < stream.rows(); ++p) {
    const VectorXd x = stream.row(p);

    StageReadout ff, fb;
    try {
      StageRun s1 = run_feedforward(params, x, config.stage);
      StageRun s2 = run_feedback(params, x, std::move(s1.state), config.stage);
      ff = std::move(s1.readout);
      fb = std::move(s2.readout);
    } catch (const RunawayRatesError& e) {
      std::ostringstream os;
      os << e.what() << "; thresholds mean " << params.H.diagonal().mean();
      throw TrainDivergedError(p, os.str());
    }

    const bool update_forward =
        config.mode == TrainMode::simultaneous || p >= config.consistency_samples;

    double anneal = 1.0;
    if (config.anneal_after >= 0 && p >= config.anneal_after)
      anneal = 1.0 / (1.0 + static_cast<double>(p - config.anneal_after) / config.anneal_tau);

    if (update_forward) {
      LearnRates scaled = config.rates;
      scaled.eta_f *= anneal;
      scaled.eta_b *= anneal;
      scaled.decay_f *= anneal;
      scaled.decay_b *= anneal;
      update_ff_fb(params.F, params.B, ff.y, fb.y, fb.z, scaled);
    }

    const MatrixXd grad = grad_H(params.H, ff.e, fb.e, ff.z, fb.z, params.gamma);
    const double zz = fb.z.squaredNorm();
    double eta_h = config.rates.eta_h;
    if (config.normalized_h_step) eta_h = config.rates.eta_h / (1.0 + zz);
    if (config.h_step_cap > 0.0 && zz > 0.0) eta_h = std::min(eta_h, config.h_step_cap / zz);
    update_H(params.H, grad, eta_h * anneal, config.rates.decay_h * anneal, config.projection);
    params.L = -params.H.diagonal();

    MetricsRow row;
    row.sample_idx = p;
    row.consistency_residual = consistency_residual(params).relative;
    row.mean_threshold = params.H.diagonal().mean();
    if (config.eval_every > 0 && config.heldout && (p + 1) % config.eval_every == 0)
      row.heldout_objective = heldout_objective_now(params, config);
    out.metrics.push_back(std::move(row));

    if (observer) observer(SampleEvent{p, ff, fb, params});
  }

  out.params = std::move(params);
  return out;
}

double calibrate_decay(const NetworkParams& params, const MatrixXd& stream,
                       const TrainConfig& config, long calibration_samples, double target_lo,
                       double target_hi, double decay_lo, double decay_hi, int max_bisections) {
  if (calibration_samples < 1) throw std::invalid_argument("calibrate_decay: need samples");
  const long rows = std::min<long>(calibration_samples, stream.rows());

  auto mean_threshold_at = [&](double decay) {
    TrainConfig probe = config;
    probe.rates.decay_f = probe.rates.decay_b = probe.rates.decay_h = decay;
    probe.eval_every = 0;
    TrainResult r = train_snn(params, stream.topRows(rows), probe);
    return r.params.H.diagonal().mean();
  };

  double lo = decay_lo, hi = decay_hi;
  double mid = std::sqrt(lo * hi);
  for (int it = 0; it < max_bisections; ++it) {
    mid = std::sqrt(lo * hi);
    const double mean_th = mean_threshold_at(mid);
    if (mean_th > target_hi)
      lo = mid; // thresholds too high: decay harder
    else if (mean_th < target_lo)
      hi = mid;
    else
      return mid;
  }
  return mid;
}

}  // namespace spikedict
