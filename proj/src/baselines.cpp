#include "defined/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace defined {

LmmseResult lmmse_estimate(const PilotBlock& block) {
  if (block.X.cols() != block.Y.cols())
    throw std::invalid_argument("pilot block: X and Y column counts differ");
  if (block.X.cols() < 1) throw std::invalid_argument("pilot block: needs m >= 1");
  if (block.sigma2 < 0.0) throw std::invalid_argument("pilot block: sigma2 < 0");

  const long n_t = block.X.rows();
  CMat gram = block.X * block.X.adjoint();
  gram.diagonal().array() += block.sigma2;
  CMat yxh = block.Y * block.X.adjoint();

  LmmseResult res;
  if (block.sigma2 > 0.0) {
    // Hermitian positive definite by construction.
    res.H_hat = gram.llt().solve(yxh.adjoint()).adjoint();
    return res;
  }
  Eigen::FullPivLU<CMat> lu(gram);
  if (lu.rank() == n_t) {
    res.H_hat = lu.solve(yxh.adjoint()).adjoint();
    return res;
  }
  // Degenerate noiseless case with rank-deficient pilots: pseudo-inverse.
  Eigen::JacobiSVD<CMat> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
  CVec inv_sv = CVec::Zero(n_t);
  double tol = 1e-13 * static_cast<double>(n_t) * svd.singularValues()(0);
  for (long i = 0; i < n_t; ++i)
    if (svd.singularValues()(i) > tol) inv_sv(i) = 1.0 / svd.singularValues()(i);
  res.H_hat = yxh * (svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().adjoint());
  res.used_pinv = true;
  return res;
}

long project_detect(const CMat& H_hat, const CVec& y, const Constellation& c, int n_t) {
  if (H_hat.rows() != y.size()) throw std::invalid_argument("project_detect: shape mismatch");
  if (H_hat.cols() != n_t) throw std::invalid_argument("project_detect: H_hat/n_t mismatch");
  long total = joint_count(c, n_t);
  long best = 0;
  double best_d = -1.0;
  for (long i = 0; i < total; ++i) {
    CVec x = joint_symbol(c, i, n_t).per_antenna;
    double d = (H_hat * x - y).squaredNorm();
    if (best_d < 0.0 || d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<long> mmse_df_detect(const Frame& frame, const Constellation& c, int n_t) {
  if (frame.k < 1) throw std::invalid_argument("mmse_df_detect: k must be >= 1");
  const int n_r = static_cast<int>(frame.task.H.rows());
  const int T = frame.T;

  CMat X(n_t, T);
  CMat Y(n_r, T);
  for (int t = 0; t < frame.k; ++t) {
    X.col(t) = joint_symbol(c, frame.x_indices[static_cast<std::size_t>(t)], n_t).per_antenna;
    Y.col(t) = frame.y[static_cast<std::size_t>(t)];
  }

  std::vector<long> decisions;
  decisions.reserve(static_cast<std::size_t>(T - frame.k));
  for (int t = frame.k; t < T; ++t) {
    PilotBlock block{X.leftCols(t), Y.leftCols(t), frame.task.sigma2};
    CMat h_hat = lmmse_estimate(block).H_hat;
    long idx = project_detect(h_hat, frame.y[static_cast<std::size_t>(t)], c, n_t);
    decisions.push_back(idx);
    // Feed the decision back as if it were a clean pilot.
    X.col(t) = joint_symbol(c, idx, n_t).per_antenna;
    Y.col(t) = frame.y[static_cast<std::size_t>(t)];
  }
  return decisions;
}

int mlsd_default_cap(Modulation m) {
  switch (m) {
    case Modulation::BPSK: return 12;
    case Modulation::QPSK: return 8;
    default: return 0;  // non-PSK: unsupported anyway
  }
}

std::vector<long> mlsd_detect(const std::vector<cxd>& y, double sigma2,
                              const Constellation& c, long first_symbol, int t_cap) {
  const int T = static_cast<int>(y.size());
  if (T < 1) throw std::invalid_argument("mlsd_detect: empty sequence");
  if (!c.is_psk())
    throw std::invalid_argument("mlsd_detect: only PSK constellations are supported");
  if (t_cap <= 0) t_cap = mlsd_default_cap(c.scheme);
  if (T > t_cap)
    throw ComplexityError("mlsd_detect: T exceeds the exhaustive-search cap");
  if (first_symbol < 0 || first_symbol >= c.size())
    throw std::out_of_range("mlsd_detect: first_symbol out of range");

  const int C = c.size();
  const int free_slots = T - 1;
  long n_seq = 1;
  for (int i = 0; i < free_slots; ++i) n_seq *= C;

  std::vector<long> digits(static_cast<std::size_t>(T), 0);
  digits[0] = first_symbol;
  std::vector<long> best_digits;
  double best_obj = 0.0;
  bool have_best = false;

  // Enumerate in lexicographic order of (S_2, ..., S_T) and keep strict
  // improvements only, so ties resolve to the smallest index vector.
  for (long seq = 0; seq < n_seq; ++seq) {
    long rem = seq;
    for (int slot = free_slots - 1; slot >= 0; --slot) {
      digits[static_cast<std::size_t>(slot + 1)] = rem % C;
      rem /= C;
    }
    cxd inner(0.0, 0.0);
    double s_norm2 = 0.0;
    for (int t = 0; t < T; ++t) {
      cxd s = c.points[static_cast<std::size_t>(digits[static_cast<std::size_t>(t)])];
      inner += s * std::conj(y[static_cast<std::size_t>(t)]);
      s_norm2 += std::norm(s);
    }
    double obj;
    if (sigma2 > 0.0) {
      obj = std::norm(inner) / (sigma2 * s_norm2 + sigma2 * sigma2) -
            std::log(s_norm2 + sigma2);
    } else {
      // sigma2 -> 0 limit: the matched-filter term dominates.
      obj = std::norm(inner) / s_norm2;
    }
    if (!have_best || obj > best_obj) {
      have_best = true;
      best_obj = obj;
      best_digits = digits;
    }
  }
  return best_digits;
}

}  // namespace defined
