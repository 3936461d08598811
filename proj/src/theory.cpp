#include "defined/theory.hpp"

#include <cmath>
#include <stdexcept>

#include "defined/threading.hpp"

namespace defined {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int draw_label(Rng& rng) { return rng.uniform() < 0.5 ? 1 : -1; }

Eigen::MatrixXd chol_factor(const BinaryGaussianTask& task) {
  Eigen::LLT<Eigen::MatrixXd> llt(task.lambda);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("task: Lambda is not positive definite");
  return llt.matrixL();
}

/// Draws one pair and returns x * (y . w) without materializing y.
/// Consumes exactly the same RNG draws as the full-pair sampler:
/// one uniform (label), then d gaussians.
double pair_projection(Rng& rng, const Eigen::VectorXd& v, double a0, double a1) {
  int x = draw_label(rng);
  double dot = 0.0;
  for (long j = 0; j < v.size(); ++j) dot += rng.gaussian() * v(j);
  return x * ((x > 0 ? a1 : a0) + dot);
}

struct Kahan {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

constexpr long kMcChunks = 256;

}  // namespace

void BinaryGaussianTask::validate() const {
  const long d = mu0.size();
  if (mu1.size() != d || lambda.rows() != d || lambda.cols() != d)
    throw std::invalid_argument("task: dimension mismatch");
  if (!lambda.isApprox(lambda.transpose(), 1e-12))
    throw std::invalid_argument("task: Lambda is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("task: Lambda is not positive definite");
  double q0 = mu0.dot(llt.solve(mu0));
  double q1 = mu1.dot(llt.solve(mu1));
  if (std::abs(q0 - q1) > 1e-10 * std::max(1.0, std::max(std::abs(q0), std::abs(q1))))
    throw std::invalid_argument(
        "task: equal-Mahalanobis condition violated (mu0'L^-1 mu0 != mu1'L^-1 mu1)");
}

PromptSample sample_prompt(const BinaryGaussianTask& task, long k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_prompt: k must be >= 1");
  const long d = task.mu0.size();
  Eigen::MatrixXd chol = chol_factor(task);
  PromptSample out;
  out.pairs.reserve(static_cast<std::size_t>(k));
  Eigen::VectorXd g(d);
  auto draw = [&](LabeledPair& p) {
    p.x = draw_label(rng);
    for (long j = 0; j < d; ++j) g(j) = rng.gaussian();
    p.y = (p.x > 0 ? task.mu1 : task.mu0) + chol * g;
  };
  for (long i = 0; i < k; ++i) {
    LabeledPair p;
    draw(p);
    out.pairs.push_back(std::move(p));
  }
  LabeledPair q;
  draw(q);
  out.y_query = std::move(q.y);
  out.x_query = q.x;
  return out;
}

double linear_tf_output(const Eigen::MatrixXd& w, const std::vector<LabeledPair>& pairs,
                        const Eigen::VectorXd& y_query) {
  if (pairs.empty()) throw std::invalid_argument("linear_tf_output: no pairs");
  const long d = y_query.size();
  if (w.rows() != d || w.cols() != d)
    throw std::invalid_argument("linear_tf_output: W dimension mismatch");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  for (const auto& p : pairs) {
    if (p.y.size() != d) throw std::invalid_argument("linear_tf_output: pair dimension");
    m += static_cast<double>(p.x) * p.y;
  }
  m /= static_cast<double>(pairs.size());
  return sigmoid(m.dot(w * y_query));
}

double bayes_posterior(const BinaryGaussianTask& task, const Eigen::VectorXd& y_query) {
  task.validate();
  Eigen::LLT<Eigen::MatrixXd> llt(task.lambda);
  return sigmoid((task.mu1 - task.mu0).dot(llt.solve(y_query)));
}

double error_leading_term(const BinaryGaussianTask& task, const Eigen::VectorXd& y_query,
                          long k) {
  if (k < 1) throw std::invalid_argument("error_leading_term: k must be >= 1");
  task.validate();
  Eigen::LLT<Eigen::MatrixXd> llt(task.lambda);
  Eigen::VectorXd lam_inv_q = llt.solve(y_query);
  double a = (task.mu1 - task.mu0).dot(lam_inv_q);
  double s = sigmoid(a);
  double sp = s * (1.0 - s);
  Eigen::VectorXd u = 2.0 * (task.mu1 + task.mu0);
  double term_u = u.dot(lam_inv_q);
  double term_q = y_query.dot(lam_inv_q);
  return (sp * sp) * (term_u * term_u / 4.0 + 4.0 * term_q) / static_cast<double>(k);
}

McResult prediction_error_mc(const BinaryGaussianTask& task, const Eigen::VectorXd& y_query,
                             long k, long n_trials, std::uint64_t seed) {
  if (k < 1 || n_trials < 1) throw std::invalid_argument("prediction_error_mc: bad k/n");
  task.validate();
  Eigen::LLT<Eigen::MatrixXd> llt(task.lambda);
  Eigen::MatrixXd chol = chol_factor(task);

  // Optimal weight W = 2 Lambda^-1; only the projection W q enters.
  Eigen::VectorXd wq = 2.0 * llt.solve(y_query);
  Eigen::VectorXd v = chol.transpose() * wq;  // g . v == (chol g) . wq
  const double a0 = task.mu0.dot(wq);
  const double a1 = task.mu1.dot(wq);
  const double post = bayes_posterior(task, y_query);
  const double inv_k = 1.0 / static_cast<double>(k);

  const long chunks = std::min<long>(kMcChunks, n_trials);
  std::vector<Kahan> z_sum(static_cast<std::size_t>(chunks));
  std::vector<Kahan> z2_sum(static_cast<std::size_t>(chunks));
  Rng base(seed);

  parallel_chunks(n_trials, chunks, [&](long chunk, long begin, long end) {
    Kahan zs, z2s;
    for (long trial = begin; trial < end; ++trial) {
      Rng rng = base.fork(static_cast<std::uint64_t>(trial));
      double acc = 0.0;
      for (long i = 0; i < k; ++i) acc += pair_projection(rng, v, a0, a1);
      double out = sigmoid(acc * inv_k);
      double z = (out - post) * (out - post);
      zs.add(z);
      z2s.add(z * z);
    }
    z_sum[static_cast<std::size_t>(chunk)] = zs;
    z2_sum[static_cast<std::size_t>(chunk)] = z2s;
  });

  Kahan total, total2;
  for (long c = 0; c < chunks; ++c) {
    total.add(z_sum[static_cast<std::size_t>(c)].sum);
    total2.add(z2_sum[static_cast<std::size_t>(c)].sum);
  }
  McResult res;
  res.n_trials = n_trials;
  res.value = total.sum / static_cast<double>(n_trials);
  if (n_trials > 1) {
    double var = (total2.sum / n_trials - res.value * res.value) *
                 (static_cast<double>(n_trials) / (n_trials - 1));
    res.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(n_trials));
  }
  return res;
}

McResult mismatch_agreement(double train_xi2, const BinaryGaussianTask& test_task,
                            long k, long n_trials, std::uint64_t seed) {
  if (k < 1 || n_trials < 1) throw std::invalid_argument("mismatch_agreement: bad k/n");
  if (train_xi2 <= 0.0) throw std::invalid_argument("mismatch_agreement: xi2 must be > 0");
  test_task.validate();
  const long d = test_task.mu0.size();
  const double s2 = test_task.lambda(0, 0);
  if (!(test_task.lambda - s2 * Eigen::MatrixXd::Identity(d, d)).isZero(1e-12))
    throw std::invalid_argument("mismatch_agreement: test covariance must be isotropic");

  Eigen::MatrixXd chol = chol_factor(test_task);
  Eigen::VectorXd mu_diff = test_task.mu1 - test_task.mu0;

  const long chunks = std::min<long>(kMcChunks, n_trials);
  std::vector<long> agree(static_cast<std::size_t>(chunks), 0);
  Rng base(seed);

  parallel_chunks(n_trials, chunks, [&](long chunk, long begin, long end) {
    long count = 0;
    Eigen::VectorXd g(d), y_q(d), v(d);
    for (long trial = begin; trial < end; ++trial) {
      Rng rng = base.fork(static_cast<std::uint64_t>(trial));
      // Query drawn from the mixture (label consumed, then d gaussians).
      int xq = draw_label(rng);
      for (long j = 0; j < d; ++j) g(j) = rng.gaussian();
      y_q = (xq > 0 ? test_task.mu1 : test_task.mu0) + chol * g;

      v = chol.transpose() * y_q;
      const double a0 = test_task.mu0.dot(y_q);
      const double a1 = test_task.mu1.dot(y_q);
      double acc = 0.0;
      for (long i = 0; i < k; ++i) acc += pair_projection(rng, v, a0, a1);
      // S(xi^-2 (2/k) acc) > 1/2  <=>  acc > 0 (xi2 only scales the argument).
      double tf_val = 2.0 * acc / (static_cast<double>(k) * train_xi2);
      int tf_label = tf_val > 0.0 ? 1 : -1;
      int opt_label = mu_diff.dot(y_q) > 0.0 ? 1 : -1;
      if (tf_label == opt_label) ++count;
    }
    agree[static_cast<std::size_t>(chunk)] = count;
  });

  long total = 0;
  for (long c : agree) total += c;
  McResult res;
  res.n_trials = n_trials;
  res.value = static_cast<double>(total) / static_cast<double>(n_trials);
  res.std_error = std::sqrt(res.value * (1.0 - res.value) / static_cast<double>(n_trials));
  return res;
}

}  // namespace defined
