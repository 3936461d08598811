#pragma once

// One-layer linear-attention analysis lab: closed-form error leading term,
// Bayes posterior, and deterministic chunk-reduced Monte Carlo estimators
// for the error rate and for train/test noise-mismatch agreement.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "defined/rng.hpp"

namespace defined {

/// Binary Gaussian mixture task: labels +-1 with equal probability,
/// y | x=1 ~ N(mu1, Lambda), y | x=-1 ~ N(mu0, Lambda).
struct BinaryGaussianTask {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
  Eigen::MatrixXd lambda;

  /// Checks Lambda is symmetric positive definite and the equal-Mahalanobis
  /// condition mu0' Lambda^-1 mu0 = mu1' Lambda^-1 mu1 (tolerance 1e-10).
  void validate() const;
};

struct LabeledPair {
  Eigen::VectorXd y;
  int x;  // -1 or +1
};

struct PromptSample {
  std::vector<LabeledPair> pairs;
  Eigen::VectorXd y_query;
  int x_query;
};

/// k labeled pairs plus one query, all i.i.d. from the task.
PromptSample sample_prompt(const BinaryGaussianTask& task, long k, Rng& rng);

/// Sigmoid of the bilinear prediction of the one-layer linear model:
/// S( ((1/k) sum_i x_i y_i^T) W y_query ).
double linear_tf_output(const Eigen::MatrixXd& w, const std::vector<LabeledPair>& pairs,
                        const Eigen::VectorXd& y_query);

/// Exact Bayes posterior P(x=1 | y_query) = S((mu1-mu0)' Lambda^-1 y_query),
/// valid under the equal-Mahalanobis condition (validated).
double bayes_posterior(const BinaryGaussianTask& task, const Eigen::VectorXd& y_query);

/// Closed-form leading term of the expected squared posterior deviation:
/// (1/k) (S'(a))^2 [ (u' Lambda^-1 q)^2 / 4 + 4 q' Lambda^-1 q ],
/// a = (mu1-mu0)' Lambda^-1 q, u = 2(mu1+mu0), S' = S(1-S).
double error_leading_term(const BinaryGaussianTask& task, const Eigen::VectorXd& y_query,
                          long k);

struct McResult {
  double value = 0.0;
  double std_error = 0.0;
  long n_trials = 0;
};

/// Monte Carlo of E[(model output - Bayes posterior)^2] at the optimal weight
/// W = 2 Lambda^-1, over fresh k-pair prompts with y_query held fixed.
/// Compensated, chunk-ordered summation: the result depends only on
/// (task, y_query, k, n_trials, seed), not on the worker count.
McResult prediction_error_mc(const BinaryGaussianTask& task, const Eigen::VectorXd& y_query,
                             long k, long n_trials, std::uint64_t seed);

/// Fraction of trials where the threshold rule on the mismatched model
/// S(xi^-2 (2/k) sum_i x_i y_i^T y_query) agrees with the optimal predictor
/// sign((mu1-mu0)' y_query).  Test covariance must be isotropic sigma2 * I;
/// the model was "trained" at noise xi2 (only the scale differs).
McResult mismatch_agreement(double train_xi2, const BinaryGaussianTask& test_task,
                            long k, long n_trials, std::uint64_t seed);

}  // namespace defined
