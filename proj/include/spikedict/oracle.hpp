#pragma once

#include <Eigen/Dense>

#include <optional>

namespace spikedict {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Solution of the nonnegative sparse coding problem
///   min_{a >= 0} 0.5 ||x - D a||^2 + lambda sum_j g_jj a_j,   G = D^T D.
struct SparseCode {
  VectorXd a;
  double objective = 0.0;     // weighted-penalty objective at a
  double kkt_residual = 0.0;
  long iterations = 0;        // coordinate updates performed
  bool converged = false;
};

struct SolveOptions {
  double tol = 1e-8;
  long max_updates = 0; // 0 means 10000 * N coordinate updates
  std::optional<VectorXd> warm_start;
};

/// Cyclic coordinate descent with closed-form nonnegative soft-threshold
/// updates; stops once the KKT residual drops below tol.
SparseCode solve_sparse_code(const MatrixXd& D, const VectorXd& x, double lambda,
                             const SolveOptions& opts = {});

/// Max violation of the optimality condition at a: |d_i^T x - lambda g_ii -
/// (G a)_i| on the active set, positive part excluding the self term off it.
double sparse_kkt_residual(const MatrixXd& D, const VectorXd& x, double lambda, const VectorXd& a);

double weighted_objective(const MatrixXd& D, const VectorXd& x, double lambda, const VectorXd& a);
double l1_objective(const MatrixXd& D, const VectorXd& x, double lambda, const VectorXd& a);

struct DictObjective {
  double l1_mean = 0.0;       // learning objective: 0.5||x-Da||^2 + lambda ||a||_1
  double weighted_mean = 0.0; // coding objective with the lambda g_jj penalty
  long not_converged = 0;
};

/// Mean sparse-coding loss over a dataset (rows are samples), codes computed
/// by solve_sparse_code.
DictObjective evaluate_dictionary(const MatrixXd& D, const MatrixXd& samples, double lambda,
                                  const SolveOptions& opts = {});

double dict_objective(const MatrixXd& D, const MatrixXd& samples, double lambda);

/// Greedy max-correlation matching without replacement; returns the fraction
/// of reference atoms matched at cosine >= corr_threshold.
double recovery_score(const MatrixXd& d_true, const MatrixXd& d_learned, double corr_threshold);

}  // namespace spikedict
