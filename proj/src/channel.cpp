#include "defined/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace defined {

Fading parse_fading(const std::string& name) {
  if (name == "rayleigh") return Fading::Rayleigh;
  if (name == "rician") return Fading::Rician;
  throw std::invalid_argument("unknown fading model: " + name);
}

std::string fading_name(Fading f) {
  return f == Fading::Rayleigh ? "rayleigh" : "rician";
}

double sigma2_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

ChannelTask sample_task(Fading fading, double kappa, SnrRange snr, int n_t, int n_r,
                        Rng& rng) {
  if (n_t < 1 || n_r < 1) throw std::invalid_argument("antenna counts must be >= 1");
  if (snr.lo_db > snr.hi_db) throw std::invalid_argument("SNR range: lo > hi");
  if (fading == Fading::Rician && kappa < 0.0)
    throw std::invalid_argument("Rician kappa must be >= 0");

  ChannelTask task;
  task.fading = fading;
  task.kappa = fading == Fading::Rician ? kappa : 0.0;
  task.H.resize(n_r, n_t);
  for (int r = 0; r < n_r; ++r) {
    for (int t = 0; t < n_t; ++t) {
      if (fading == Fading::Rayleigh) {
        task.H(r, t) = rng.cgaussian(1.0);
      } else {
        // Unit mean-square split between a random-phase LoS part and a
        // scattered CN(0,1) part.  kappa -> inf degenerates to pure LoS.
        double los = std::sqrt(kappa / (kappa + 1.0));
        double nlos = std::sqrt(1.0 / (kappa + 1.0));
        double theta = rng.uniform(0.0, 6.283185307179586476925286766559);
        cxd phase(std::cos(theta), std::sin(theta));
        task.H(r, t) = los * phase + nlos * rng.cgaussian(1.0);
      }
    }
  }
  double snr_db = snr.lo_db == snr.hi_db ? snr.lo_db : rng.uniform(snr.lo_db, snr.hi_db);
  task.sigma2 = sigma2_from_snr_db(snr_db);
  return task;
}

Frame generate_frame(const ChannelTask& task, const Constellation& c, int n_t, int T,
                     int k, Rng& rng) {
  if (k < 1 || k >= T) throw std::invalid_argument("pilot count must satisfy 1 <= k < T");
  if (task.H.cols() != n_t) throw std::invalid_argument("task/antenna mismatch");

  long n_joint = joint_count(c, n_t);
  int n_r = static_cast<int>(task.H.rows());

  Frame f;
  f.task = task;
  f.T = T;
  f.k = k;
  f.x_indices.resize(static_cast<std::size_t>(T));
  f.y.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    long idx = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(n_joint)));
    f.x_indices[static_cast<std::size_t>(t)] = idx;
    CVec x = joint_symbol(c, idx, n_t).per_antenna;
    CVec noise(n_r);
    for (int r = 0; r < n_r; ++r)
      noise(r) = task.sigma2 > 0.0 ? rng.cgaussian(task.sigma2) : cxd(0.0, 0.0);
    f.y[static_cast<std::size_t>(t)] = task.H * x + noise;
  }
  return f;
}

}  // namespace defined
