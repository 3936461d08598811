#include "defined/constellation.hpp"

#include <cmath>
#include <stdexcept>

namespace defined {

Modulation parse_modulation(const std::string& name) {
  if (name == "bpsk") return Modulation::BPSK;
  if (name == "qpsk") return Modulation::QPSK;
  if (name == "16qam") return Modulation::QAM16;
  if (name == "64qam") return Modulation::QAM64;
  throw std::invalid_argument("unknown modulation: " + name);
}

std::string modulation_name(Modulation m) {
  switch (m) {
    case Modulation::BPSK: return "bpsk";
    case Modulation::QPSK: return "qpsk";
    case Modulation::QAM16: return "16qam";
    case Modulation::QAM64: return "64qam";
  }
  throw std::logic_error("bad modulation enum");
}

bool Constellation::is_psk() const {
  for (const auto& p : points)
    if (std::abs(std::abs(p) - 1.0) > 1e-12) return false;
  return true;
}

Constellation build_constellation(Modulation scheme) {
  Constellation c;
  c.scheme = scheme;
  if (scheme == Modulation::BPSK) {
    c.scale = 1.0;
    c.points = {cxd(1.0, 0.0), cxd(-1.0, 0.0)};
    return c;
  }
  // Square QAM with per-axis levels {-(M-1), ..., -1, +1, ..., M-1}.
  // Average energy of the integer grid is 2(M^2-1)/3, hence the scale.
  int m_levels;
  switch (scheme) {
    case Modulation::QPSK: m_levels = 2; break;
    case Modulation::QAM16: m_levels = 4; break;
    case Modulation::QAM64: m_levels = 8; break;
    default: throw std::logic_error("bad modulation enum");
  }
  double avg_energy = 2.0 * (m_levels * m_levels - 1) / 3.0;
  c.scale = 1.0 / std::sqrt(avg_energy);
  c.points.reserve(static_cast<std::size_t>(m_levels) * m_levels);
  for (int i = 0; i < m_levels; ++i) {
    double re = (2 * i - (m_levels - 1)) * c.scale;
    for (int q = 0; q < m_levels; ++q) {
      double im = (2 * q - (m_levels - 1)) * c.scale;
      c.points.emplace_back(re, im);
    }
  }
  return c;
}

long joint_count(const Constellation& c, int n_t) {
  if (n_t < 1) throw std::invalid_argument("n_t must be >= 1");
  long total = 1;
  for (int a = 0; a < n_t; ++a) {
    if (total > (1L << 56) / c.size()) throw std::overflow_error("joint symbol space too large");
    total *= c.size();
  }
  return total;
}

JointSymbol joint_symbol(const Constellation& c, long index, int n_t) {
  long total = joint_count(c, n_t);
  if (index < 0 || index >= total)
    throw std::out_of_range("joint symbol index out of range");
  JointSymbol js;
  js.index = index;
  js.per_antenna.resize(n_t);
  double power_split = 1.0 / std::sqrt(static_cast<double>(n_t));
  long rem = index;
  for (int a = 0; a < n_t; ++a) {
    long digit = rem % c.size();
    rem /= c.size();
    js.per_antenna(a) = c.points[static_cast<std::size_t>(digit)] * power_split;
  }
  return js;
}

long joint_index(const Constellation& c, const CVec& per_antenna) {
  int n_t = static_cast<int>(per_antenna.size());
  double power_split = 1.0 / std::sqrt(static_cast<double>(n_t));
  long index = 0;
  long radix = 1;
  for (int a = 0; a < n_t; ++a) {
    cxd unscaled = per_antenna(a) / power_split;
    int best = 0;
    double best_d = std::norm(unscaled - c.points[0]);
    for (int i = 1; i < c.size(); ++i) {
      double d = std::norm(unscaled - c.points[static_cast<std::size_t>(i)]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    index += best * radix;
    radix *= c.size();
  }
  return index;
}

std::vector<CVec> joint_candidates(const Constellation& c, int n_t) {
  long total = joint_count(c, n_t);
  std::vector<CVec> out;
  out.reserve(static_cast<std::size_t>(total));
  for (long i = 0; i < total; ++i) out.push_back(joint_symbol(c, i, n_t).per_antenna);
  return out;
}

int nearest_joint_symbol(const CVec& y_eff, const std::vector<CVec>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("candidate list is empty");
  int best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != y_eff.size())
      throw std::invalid_argument("candidate dimension mismatch");
    double d = (candidates[i] - y_eff).squaredNorm();
    if (best_d < 0.0 || d < best_d) {  // strict < keeps the lowest index on ties
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace defined
