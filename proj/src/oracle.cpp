#include "spikedict/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace spikedict {

namespace {

void check_problem(const MatrixXd& D, const VectorXd& x, double lambda) {
  if (D.rows() != x.size()) throw std::invalid_argument("solve: dimension mismatch");
  if (lambda < 0.0) throw std::invalid_argument("solve: lambda must be nonnegative");
  for (int j = 0; j < D.cols(); ++j)
    if (D.col(j).squaredNorm() <= 0.0)
      throw std::invalid_argument("solve: dictionary column " + std::to_string(j) + " is zero");
}

double kkt_from_precomputed(const VectorXd& c, const MatrixXd& G, double lambda,
                            const VectorXd& a, const VectorXd& ga) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double slack = c[i] - lambda * G(i, i) - ga[i];
    if (a[i] > 0.0)
      worst = std::max(worst, std::abs(slack));
    else
      worst = std::max(worst, std::max(slack + G(i, i) * a[i], 0.0));
  }
  return worst;
}

}  // namespace

SparseCode solve_sparse_code(const MatrixXd& D, const VectorXd& x, double lambda,
                             const SolveOptions& opts) {
  check_problem(D, x, lambda);
  if (opts.tol <= 0.0) throw std::invalid_argument("solve: tol must be positive");
  const int n = static_cast<int>(D.cols());
  const long max_updates = opts.max_updates > 0 ? opts.max_updates : 10000L * n;

  const MatrixXd G = D.transpose() * D;
  const VectorXd c = D.transpose() * x;

  SparseCode out;
  out.a = VectorXd::Zero(n);
  if (opts.warm_start) {
    if (opts.warm_start->size() != n) throw std::invalid_argument("solve: warm start size");
    out.a = opts.warm_start->cwiseMax(0.0);
  }
  VectorXd ga = G * out.a;

  while (out.iterations < max_updates) {
    for (int i = 0; i < n && out.iterations < max_updates; ++i, ++out.iterations) {
      const double gii = G(i, i);
      const double target = (c[i] - lambda * gii - ga[i] + gii * out.a[i]) / gii;
      const double ai = std::max(0.0, target);
      if (ai != out.a[i]) {
        ga += G.col(i) * (ai - out.a[i]);
        out.a[i] = ai;
      }
    }
    out.kkt_residual = kkt_from_precomputed(c, G, lambda, out.a, ga);
    if (out.kkt_residual <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) out.kkt_residual = kkt_from_precomputed(c, G, lambda, out.a, ga);
  out.objective = weighted_objective(D, x, lambda, out.a);
  return out;
}

double sparse_kkt_residual(const MatrixXd& D, const VectorXd& x, double lambda,
                           const VectorXd& a) {
  check_problem(D, x, lambda);
  if (a.size() != D.cols()) throw std::invalid_argument("kkt: code size mismatch");
  if ((a.array() < 0.0).any()) throw std::invalid_argument("kkt: code must be nonnegative");
  const MatrixXd G = D.transpose() * D;
  return kkt_from_precomputed(D.transpose() * x, G, lambda, a, G * a);
}

double weighted_objective(const MatrixXd& D, const VectorXd& x, double lambda, const VectorXd& a) {
  const VectorXd g = D.colwise().squaredNorm();
  return 0.5 * (x - D * a).squaredNorm() + lambda * g.dot(a);
}

double l1_objective(const MatrixXd& D, const VectorXd& x, double lambda, const VectorXd& a) {
  return 0.5 * (x - D * a).squaredNorm() + lambda * a.lpNorm<1>();
}

DictObjective evaluate_dictionary(const MatrixXd& D, const MatrixXd& samples, double lambda,
                                  const SolveOptions& opts) {
  if (samples.rows() == 0) throw std::invalid_argument("evaluate_dictionary: empty dataset");
  if (samples.cols() != D.rows())
    throw std::invalid_argument("evaluate_dictionary: sample dimension mismatch");
  DictObjective out;
  for (long i = 0; i < samples.rows(); ++i) {
    const VectorXd x = samples.row(i);
    const SparseCode code = solve_sparse_code(D, x, lambda, opts);
    if (!code.converged) ++out.not_converged;
    out.l1_mean += l1_objective(D, x, lambda, code.a);
    out.weighted_mean += code.objective;
  }
  out.l1_mean /= static_cast<double>(samples.rows());
  out.weighted_mean /= static_cast<double>(samples.rows());
  return out;
}

double dict_objective(const MatrixXd& D, const MatrixXd& samples, double lambda) {
  return evaluate_dictionary(D, samples, lambda).l1_mean;
}

double recovery_score(const MatrixXd& d_true, const MatrixXd& d_learned, double corr_threshold) {
  if (d_true.rows() != d_learned.rows())
    throw std::invalid_argument("recovery_score: dimension mismatch");
  const int nt = static_cast<int>(d_true.cols());
  const int nl = static_cast<int>(d_learned.cols());
  if (nt == 0) throw std::invalid_argument("recovery_score: no reference atoms");

  MatrixXd tn = d_true;
  MatrixXd ln = d_learned;
  for (int j = 0; j < nt; ++j) {
    const double nrm = tn.col(j).norm();
    if (nrm > 0.0) tn.col(j) /= nrm;
  }
  for (int j = 0; j < nl; ++j) {
    const double nrm = ln.col(j).norm();
    if (nrm > 0.0) ln.col(j) /= nrm;
  }
  MatrixXd corr = tn.transpose() * ln;

  std::vector<bool> used_t(nt, false), used_l(nl, false);
  int matched = 0;
  for (int round = 0; round < std::min(nt, nl); ++round) {
    double best = -1.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < nt; ++i) {
      if (used_t[i]) continue;
      for (int j = 0; j < nl; ++j) {
        if (used_l[j]) continue;
        if (corr(i, j) > best) {
          best = corr(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    used_t[bi] = true;
    used_l[bj] = true;
    if (best >= corr_threshold) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(nt);
}

}  // namespace spikedict
