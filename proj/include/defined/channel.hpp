#pragma once

#include <string>
#include <vector>

#include "defined/common.hpp"
#include "defined/constellation.hpp"
#include "defined/rng.hpp"

namespace defined {

enum class Fading { Rayleigh, Rician };

Fading parse_fading(const std::string& name);  // "rayleigh", "rician"
std::string fading_name(Fading f);

/// One coherence block: the channel matrix and the noise level, both held
/// constant for the duration of a frame.
struct ChannelTask {
  CMat H;         // n_r x n_t
  double sigma2;  // noise variance per receive dimension (complex), SNR = 1/sigma2
  Fading fading = Fading::Rayleigh;
  double kappa = 0.0;  // Rician K-factor; ignored for Rayleigh
};

/// SNR sampling range in dB; sigma2 = 10^(-snr_db/10).
struct SnrRange {
  double lo_db;
  double hi_db;
};

double sigma2_from_snr_db(double snr_db);

/// Draw a task: H per the fading model (Rayleigh CN(0,1) entries; Rician
/// sqrt(k/(k+1)) e^{j theta} + sqrt(1/(k+1)) CN(0,1) per entry, theta uniform),
/// SNR_dB uniform on [lo, hi].
ChannelTask sample_task(Fading fading, double kappa, SnrRange snr, int n_t, int n_r,
                        Rng& rng);

/// One task's sequence of (x_t, y_t) pairs with pilot count k.
struct Frame {
  ChannelTask task;
  int T = 0;
  int k = 0;
  std::vector<long> x_indices;  // joint-symbol indices, length T
  std::vector<CVec> y;          // received vectors, length T
};

/// y_t = H x_t + z_t with x_t uniform over joint symbols and z_t
/// circularly-symmetric complex Gaussian, variance sigma2 per complex entry.
Frame generate_frame(const ChannelTask& task, const Constellation& c, int n_t, int T,
                     int k, Rng& rng);

}  // namespace defined
