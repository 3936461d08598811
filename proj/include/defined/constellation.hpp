#pragma once

#include <string>
#include <vector>

#include "defined/common.hpp"

namespace defined {

enum class Modulation { BPSK, QPSK, QAM16, QAM64 };

Modulation parse_modulation(const std::string& name);  // "bpsk", "qpsk", "16qam", "64qam"
std::string modulation_name(Modulation m);

/// Modulation alphabet normalized to unit average symbol energy.
///
/// Labeling convention (SER is the metric, so any fixed bijection works):
///  * BPSK: index 0 -> +1, index 1 -> -1.
///  * Square QAM (QPSK/16QAM/64QAM): row-major over (I-level, Q-level),
///    both axes ascending; levels are odd integers scaled by 1/sqrt(E_avg).
struct Constellation {
  Modulation scheme;
  std::vector<cxd> points;
  double scale;  // per-axis normalization factor applied to the integer grid

  int size() const { return static_cast<int>(points.size()); }
  /// True when all points have unit modulus (BPSK/QPSK).
  bool is_psk() const;
};

Constellation build_constellation(Modulation scheme);

/// One joint symbol across n_t transmit antennas: a single class index in
/// [0, C^n_t) plus the per-antenna constellation points scaled by 1/sqrt(n_t)
/// (uniform power split, unit total transmit power).
struct JointSymbol {
  long index;
  CVec per_antenna;
};

/// C^n_t as a long; throws std::overflow_error if it cannot be represented.
long joint_count(const Constellation& c, int n_t);

/// Mixed-radix decode, antenna 0 least significant.
JointSymbol joint_symbol(const Constellation& c, long index, int n_t);

/// Inverse of joint_symbol: nearest per-antenna digit match -> index.
long joint_index(const Constellation& c, const CVec& per_antenna);

/// All C^n_t joint-symbol vectors in index order.
std::vector<CVec> joint_candidates(const Constellation& c, int n_t);

/// Index minimizing ||candidates[i] - y_eff||^2; ties -> lowest index.
int nearest_joint_symbol(const CVec& y_eff, const std::vector<CVec>& candidates);

}  // namespace defined
