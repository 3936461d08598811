#include "defined/eval.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "defined/checkpoint.hpp"
#include "defined/threading.hpp"

namespace defined {

namespace {

constexpr std::uint64_t kStreamEvalFrames = 0x45;

double binom_stderr(double p, long n) {
  return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

constexpr long kEvalChunks = 64;

}  // namespace

EvalMethod parse_eval_method(const std::string& name) {
  if (name == "mmse" || name == "mmse-pk") return EvalMethod::MmsePk;
  if (name == "mmse-df") return EvalMethod::MmseDf;
  if (name == "mlsd") return EvalMethod::Mlsd;
  if (name == "icl" || name == "icl-icl") return EvalMethod::IclIcl;
  if (name == "icl-df") return EvalMethod::IclDf;
  if (name == "defined" || name == "defined-df") return EvalMethod::DefinedDf;
  if (name == "defined-icl") return EvalMethod::DefinedIcl;
  throw std::invalid_argument("unknown eval method: " + name);
}

std::string eval_method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::MmsePk: return "mmse-pk";
    case EvalMethod::MmseDf: return "mmse-df";
    case EvalMethod::Mlsd: return "mlsd";
    case EvalMethod::IclIcl: return "icl-icl";
    case EvalMethod::IclDf: return "icl-df";
    case EvalMethod::DefinedDf: return "defined-df";
    case EvalMethod::DefinedIcl: return "defined-icl";
  }
  throw std::logic_error("bad eval method enum");
}

bool method_uses_model(EvalMethod m) {
  return m == EvalMethod::IclIcl || m == EvalMethod::IclDf ||
         m == EvalMethod::DefinedDf || m == EvalMethod::DefinedIcl;
}

bool method_is_df(EvalMethod m) {
  return m == EvalMethod::MmseDf || m == EvalMethod::IclDf || m == EvalMethod::DefinedDf;
}

void EvalConfig::validate() const {
  if (n_prompts < 1) throw std::invalid_argument("eval: n_prompts must be >= 1");
  if (T < 2) throw std::invalid_argument("eval: T must be >= 2");
  if (k < 1 || k >= T) throw std::invalid_argument("eval: pilots must satisfy 1 <= k < T");
  if (method_uses_model(method) && ckpt_path.empty())
    throw std::invalid_argument("eval: model methods need a checkpoint (--ckpt)");
  if (method == EvalMethod::Mlsd) {
    if (n_t != 1 || n_r != 1)
      throw std::invalid_argument("eval: mlsd supports SISO only");
    if (!build_constellation(mod).is_psk())
      throw std::invalid_argument("eval: mlsd supports PSK constellations only");
  }
}

std::optional<double> gain_df(const EvalCurve& curve, int k) {
  const CurvePoint* at_k = nullptr;
  const CurvePoint* at_end = nullptr;
  int want_end = curve.cfg.T - 1;
  for (const auto& p : curve.points) {
    if (p.length == k) at_k = &p;
    if (p.length == want_end) at_end = &p;
  }
  if (!at_k || !at_end || at_k->ser <= 0.0) return std::nullopt;
  return (at_k->ser - at_end->ser) / at_k->ser * 100.0;
}

Frame eval_frame(const EvalConfig& cfg, const Constellation& c, long index) {
  Rng rng = Rng(cfg.seed).fork(kStreamEvalFrames).fork(static_cast<std::uint64_t>(index));
  ChannelTask task = sample_task(cfg.fading, cfg.kappa, SnrRange{cfg.snr_db, cfg.snr_db},
                                 cfg.n_t, cfg.n_r, rng);
  return generate_frame(task, c, cfg.n_t, cfg.T, cfg.k, rng);
}

std::vector<long> model_df_decisions(const Params<float>& params, const Frame& frame,
                                     int k, bool oracle_feedback) {
  if (k < 1 || k >= frame.T) throw std::invalid_argument("model_df_decisions: bad k");
  std::vector<PairYX> pairs;
  pairs.reserve(static_cast<std::size_t>(frame.T - 1));
  for (int t = 0; t < k; ++t)
    pairs.push_back({frame.y[static_cast<std::size_t>(t)],
                     frame.x_indices[static_cast<std::size_t>(t)]});
  std::vector<long> decisions;
  decisions.reserve(static_cast<std::size_t>(frame.T - k));
  for (int t = k; t < frame.T; ++t) {
    long dec = predict(params, pairs, frame.y[static_cast<std::size_t>(t)]).second;
    decisions.push_back(dec);
    if (t + 1 < frame.T) {
      long fed = oracle_feedback ? frame.x_indices[static_cast<std::size_t>(t)] : dec;
      pairs.push_back({frame.y[static_cast<std::size_t>(t)], fed});
    }
  }
  return decisions;
}

std::vector<long> model_icl_decisions(const Params<float>& params, const Frame& frame) {
  std::vector<PairYX> pairs;
  pairs.reserve(static_cast<std::size_t>(frame.T - 1));
  for (int t = 0; t + 1 < frame.T; ++t)
    pairs.push_back({frame.y[static_cast<std::size_t>(t)],
                     frame.x_indices[static_cast<std::size_t>(t)]});
  TokenSeq<float> seq =
      tokenize<float>(params.cfg, pairs, &frame.y[static_cast<std::size_t>(frame.T - 1)]);
  MatX<float> logits = forward(params, seq);
  std::vector<long> decisions(static_cast<std::size_t>(logits.rows()));
  for (long r = 0; r < logits.rows(); ++r) {
    long best = 0;
    for (long j = 1; j < logits.cols(); ++j)
      if (logits(r, j) > logits(r, best)) best = j;
    decisions[static_cast<std::size_t>(r)] = best;
  }
  return decisions;
}

EvalCurve run_eval(const EvalConfig& cfg) {
  cfg.validate();
  if (cfg.method == EvalMethod::Mlsd) return run_mlsd_eval(cfg);

  Constellation c = build_constellation(cfg.mod);
  Params<float> params;
  if (method_uses_model(cfg.method)) {
    params = load_checkpoint<float>(cfg.ckpt_path);
    if (params.cfg.mod != cfg.mod || params.cfg.n_t != cfg.n_t || params.cfg.n_r != cfg.n_r)
      throw std::invalid_argument("eval: checkpoint geometry does not match the request");
    if (cfg.T > params.cfg.T_max)
      throw std::invalid_argument("eval: T exceeds the checkpoint's T_max");
  }

  const bool df_mode = method_is_df(cfg.method);
  const int first_len = df_mode ? cfg.k : 1;
  const int n_lengths = cfg.T - first_len;  // lengths first_len .. T-1

  const long chunks = std::min<long>(kEvalChunks, cfg.n_prompts);
  std::vector<std::vector<long>> errs(static_cast<std::size_t>(chunks),
                                      std::vector<long>(static_cast<std::size_t>(n_lengths), 0));

  parallel_chunks(cfg.n_prompts, chunks, [&](long chunk, long begin, long end) {
    auto& e = errs[static_cast<std::size_t>(chunk)];
    for (long idx = begin; idx < end; ++idx) {
      Frame frame = eval_frame(cfg, c, idx);
      if (df_mode) {
        std::vector<long> dec;
        if (cfg.method == EvalMethod::MmseDf) {
          dec = mmse_df_detect(frame, c, cfg.n_t);
        } else {
          dec = model_df_decisions(params, frame, cfg.k);
        }
        // Decision j detects x at position k+j (0-based) from k+j pairs.
        for (std::size_t j = 0; j < dec.size(); ++j)
          if (dec[j] != frame.x_indices[static_cast<std::size_t>(cfg.k) + j]) ++e[j];
      } else if (cfg.method == EvalMethod::MmsePk) {
        CMat x_mat(cfg.n_t, cfg.T);
        CMat y_mat(cfg.n_r, cfg.T);
        for (int t = 0; t < cfg.T; ++t) {
          x_mat.col(t) =
              joint_symbol(c, frame.x_indices[static_cast<std::size_t>(t)], cfg.n_t).per_antenna;
          y_mat.col(t) = frame.y[static_cast<std::size_t>(t)];
        }
        for (int m = 1; m < cfg.T; ++m) {
          PilotBlock block{x_mat.leftCols(m), y_mat.leftCols(m), frame.task.sigma2};
          CMat h_hat = lmmse_estimate(block).H_hat;
          long dec = project_detect(h_hat, frame.y[static_cast<std::size_t>(m)], c, cfg.n_t);
          if (dec != frame.x_indices[static_cast<std::size_t>(m)]) ++e[static_cast<std::size_t>(m - 1)];
        }
      } else {
        std::vector<long> dec = model_icl_decisions(params, frame);
        // Row m is the detection of x_{m+1} from m clean pairs; skip m = 0.
        for (int m = 1; m < cfg.T; ++m)
          if (dec[static_cast<std::size_t>(m)] != frame.x_indices[static_cast<std::size_t>(m)])
            ++e[static_cast<std::size_t>(m - 1)];
      }
    }
  });

  EvalCurve curve;
  curve.cfg = cfg;
  curve.points.resize(static_cast<std::size_t>(n_lengths));
  for (int j = 0; j < n_lengths; ++j) {
    long total_err = 0;
    for (long ch = 0; ch < chunks; ++ch) total_err += errs[static_cast<std::size_t>(ch)][static_cast<std::size_t>(j)];
    double p = static_cast<double>(total_err) / static_cast<double>(cfg.n_prompts);
    curve.points[static_cast<std::size_t>(j)] =
        {first_len + j, p, binom_stderr(p, cfg.n_prompts), cfg.n_prompts};
  }
  if (df_mode) curve.gain = gain_df(curve, cfg.k);
  return curve;
}

EvalCurve run_mlsd_eval(const EvalConfig& cfg) {
  cfg.validate();
  Constellation c = build_constellation(cfg.mod);
  int cap = cfg.mlsd_cap > 0 ? cfg.mlsd_cap : mlsd_default_cap(cfg.mod);
  int t_hi = std::min(cfg.T, cap);
  if (cfg.T > cap)
    std::cerr << "mlsd: block lengths " << cap + 1 << ".." << cfg.T
              << " exceed the exhaustive-search cap; omitting those points\n";

  EvalCurve curve;
  curve.cfg = cfg;
  Rng base = Rng(cfg.seed).fork(kStreamEvalFrames);

  for (int t_len = 2; t_len <= t_hi; ++t_len) {
    const long chunks = std::min<long>(kEvalChunks, cfg.n_prompts);
    std::vector<long> errs(static_cast<std::size_t>(chunks), 0);
    Rng t_base = base.fork(static_cast<std::uint64_t>(t_len));
    parallel_chunks(cfg.n_prompts, chunks, [&](long chunk, long begin, long end) {
      long e = 0;
      for (long idx = begin; idx < end; ++idx) {
        Rng rng = t_base.fork(static_cast<std::uint64_t>(idx));
        ChannelTask task = sample_task(cfg.fading, cfg.kappa,
                                       SnrRange{cfg.snr_db, cfg.snr_db}, 1, 1, rng);
        Frame frame = generate_frame(task, c, 1, t_len, 1, rng);
        std::vector<cxd> y_seq(static_cast<std::size_t>(t_len));
        for (int t = 0; t < t_len; ++t) y_seq[static_cast<std::size_t>(t)] = frame.y[static_cast<std::size_t>(t)](0);
        std::vector<long> dec =
            mlsd_detect(y_seq, task.sigma2, c, frame.x_indices[0], cap);
        for (int t = 1; t < t_len; ++t)
          if (dec[static_cast<std::size_t>(t)] != frame.x_indices[static_cast<std::size_t>(t)]) ++e;
      }
      errs[static_cast<std::size_t>(chunk)] = e;
    });
    long total_err = 0;
    for (long e : errs) total_err += e;
    long n = cfg.n_prompts * (t_len - 1);
    double p = static_cast<double>(total_err) / static_cast<double>(n);
    curve.points.push_back({t_len - 1, p, binom_stderr(p, n), n});
  }
  curve.gain = gain_df(curve, cfg.k);
  return curve;
}

}  // namespace defined
