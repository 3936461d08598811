#pragma once

#include <optional>
#include <string>
#include <vector>

#include "defined/baselines.hpp"
#include "defined/channel.hpp"
#include "defined/net.hpp"

namespace defined {

/// Testing modes.  The *_DF methods detect sequentially with argmax decision
/// feedback after k pilots; the *_ICL / MMSE_Pk methods detect the next
/// symbol from m clean pairs at every pilot count m.  ICL_* vs DEFINED_*
/// differ only in which checkpoint is evaluated; the harness code is shared.
enum class EvalMethod {
  MmsePk,
  MmseDf,
  Mlsd,
  IclIcl,
  IclDf,
  DefinedDf,
  DefinedIcl,
};

EvalMethod parse_eval_method(const std::string& name);
std::string eval_method_name(EvalMethod m);
bool method_uses_model(EvalMethod m);
bool method_is_df(EvalMethod m);

struct EvalConfig {
  EvalMethod method = EvalMethod::MmsePk;
  Modulation mod = Modulation::QAM16;
  int n_t = 1;
  int n_r = 1;
  double snr_db = 30.0;
  int k = 1;  // pilot count for DF testing
  int T = 31;
  long n_prompts = 8000;
  std::string ckpt_path;
  std::uint64_t seed = 0;
  Fading fading = Fading::Rayleigh;
  double kappa = 0.0;
  int mlsd_cap = 0;  // 0 = per-modulation default

  void validate() const;
};

struct CurvePoint {
  int length;  // context length (DF) or pilot count (ICL-style)
  double ser;
  double std_error;
  long n = 0;  // detection trials behind this point
};

struct EvalCurve {
  EvalConfig cfg;
  std::vector<CurvePoint> points;
  std::optional<double> gain;  // DF gain percentage when defined
};

/// gain_DF = (SER_k - SER_{T-1}) / SER_k * 100.  Absent when the curve lacks
/// either length or when SER_k = 0.
std::optional<double> gain_df(const EvalCurve& curve, int k);

/// The shared per-method frame stream: frames depend only on
/// (seed, index, geometry), never on the method, so curves from different
/// methods pair up frame-for-frame when seeds match.
Frame eval_frame(const EvalConfig& cfg, const Constellation& c, long index);

/// Sequential DF decisions of the model on one frame: detect x_{t+1} from the
/// prompt built so far, feed the argmax back (or the true label when
/// oracle_feedback is set), repeat.  Returns T-k decisions.
std::vector<long> model_df_decisions(const Params<float>& params, const Frame& frame,
                                     int k, bool oracle_feedback = false);

/// One causal forward over the clean prompt; returns the argmax decision at
/// every y-position (position m is the detection of x_{m+1} from m pairs).
std::vector<long> model_icl_decisions(const Params<float>& params, const Frame& frame);

EvalCurve run_eval(const EvalConfig& cfg);
EvalCurve run_mlsd_eval(const EvalConfig& cfg);

}  // namespace defined
