#pragma once

#include <string>
#include <vector>

#include "defined/channel.hpp"
#include "defined/net.hpp"

namespace defined {

/// Context-length curriculum: stage s trains with
/// min(T, T_start + s * T_step) pairs, advancing every epochs_per_stage epochs.
struct CurriculumConfig {
  bool enabled = true;
  int T_start = 11;
  int T_step = 5;
  int epochs_per_stage = 2;
};

struct TrainConfig {
  ModelConfig model;
  Fading fading = Fading::Rayleigh;
  double kappa = 0.0;
  SnrRange snr{25.0, 35.0};
  int T = 31;  // pairs per frame (<= model.T_max)
  int batch_size = 512;
  int steps_pretrain = 4000;
  int steps_finetune = 2000;
  int epoch_steps = 1000;  // fresh data every step; an "epoch" is a step count
  double alpha = 0.7;      // finetune loss weight on the DF term
  std::vector<int> k_df_choices{1, 2, 3, 4};
  int df_refresh = 1;      // steps between frozen-snapshot refreshes
  double lr = 3e-4;
  int warmup = 500;
  double clip_norm = 1.0;
  CurriculumConfig curriculum;
  double plateau_rel_improvement = 0.01;  // phase-1 early stop threshold (<= 0 disables)
  std::uint64_t seed = 0;
  std::string ckpt_path;  // saved at curriculum stage boundaries and at the end
  bool run_pretrain = true;
  bool run_finetune = true;

  void validate() const {
    model.validate();
    if (T < 2 || T > model.T_max) throw std::invalid_argument("train: T out of range");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("train: alpha not in [0,1]");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
    if (curriculum.T_start > T) throw std::invalid_argument("train: T_start > T");
    for (int k : k_df_choices)
      if (k < 1 || k >= T) throw std::invalid_argument("train: k_df must satisfy 1 <= k < T");
    if (k_df_choices.empty()) throw std::invalid_argument("train: k_df_choices empty");
  }
};

/// Pairs per frame at `step` (1-based): stage s = floor(epochs_done /
/// epochs_per_stage) trains with min(T, T_start + s * T_step); the full
/// length T when the curriculum is disabled.
int curriculum_pairs(const TrainConfig& cfg, long step);

struct TraceRow {
  long step;
  int phase;  // 1 = pretrain, 2 = finetune
  double loss;
};

struct TrainResult {
  Params<float> params;
  std::vector<TraceRow> trace;
  bool diverged = false;
  long pretrain_steps = 0;
  long finetune_steps = 0;
};

/// Clean in-context sequences: pairs (y_1,x_1)..(y_{T-1},x_{T-1}) plus the
/// query y_T, supervised at every y-position (including zero context).
template <class S>
Batch<S> clean_batch(const ModelConfig& cfg, const std::vector<Frame>& frames) {
  Batch<S> batch;
  batch.reserve(frames.size());
  for (const Frame& f : frames) {
    std::vector<PairYX> pairs;
    pairs.reserve(static_cast<std::size_t>(f.T - 1));
    for (int t = 0; t + 1 < f.T; ++t)
      pairs.push_back({f.y[static_cast<std::size_t>(t)], f.x_indices[static_cast<std::size_t>(t)]});
    SupervisedSeq<S> ex;
    ex.seq = tokenize<S>(cfg, pairs, &f.y[static_cast<std::size_t>(f.T - 1)]);
    ex.targets = f.x_indices;
    batch.push_back(std::move(ex));
  }
  return batch;
}

/// Mean cross-entropy over all positions of clean prompts (one causal forward
/// per frame scores every position).
template <class S>
S icl_loss(const Params<S>& params, const std::vector<Frame>& frames) {
  return batch_loss(params, clean_batch<S>(params.cfg, frames));
}

/// Decision-feedback prompts plus the pilot count that built them.
template <class S>
struct DfBatch {
  Batch<S> batch;
  int k = 0;
};

/// Build DF prompts with a frozen model: positions 1..k carry true pilots;
/// each later x-token is the frozen model's argmax decision given the prompt
/// so far (T-k-1 sequential forwards per frame).  Targets stay the TRUE
/// labels on positions k+1..T; earlier positions are unsupervised.
/// `oracle_feedback` substitutes ground truth for every decision (models a
/// perfect frozen model; used by tests and the feedback-pathway checks).
template <class S>
DfBatch<S> generate_df_prompts(const Params<S>& frozen, const std::vector<Frame>& frames,
                               int k, bool oracle_feedback = false) {
  DfBatch<S> out;
  out.k = k;
  out.batch.reserve(frames.size());
  for (const Frame& f : frames) {
    if (k < 1 || k >= f.T) throw std::invalid_argument("generate_df_prompts: bad k");
    std::vector<PairYX> pairs;
    pairs.reserve(static_cast<std::size_t>(f.T - 1));
    for (int t = 0; t < k; ++t)
      pairs.push_back({f.y[static_cast<std::size_t>(t)], f.x_indices[static_cast<std::size_t>(t)]});
    for (int t = k; t + 1 < f.T; ++t) {
      long fed;
      if (oracle_feedback) {
        fed = f.x_indices[static_cast<std::size_t>(t)];
      } else {
        fed = predict(frozen, pairs, f.y[static_cast<std::size_t>(t)]).second;
      }
      pairs.push_back({f.y[static_cast<std::size_t>(t)], fed});
    }
    SupervisedSeq<S> ex;
    ex.seq = tokenize<S>(frozen.cfg, pairs, &f.y[static_cast<std::size_t>(f.T - 1)]);
    ex.targets.assign(f.x_indices.begin(), f.x_indices.end());
    for (int t = 0; t < k; ++t) ex.targets[static_cast<std::size_t>(t)] = -1;
    out.batch.push_back(std::move(ex));
  }
  return out;
}

/// Mean cross-entropy over positions k+1..T of DF prompts (divisor N(T-k)).
template <class S>
S df_loss(const Params<S>& params, const DfBatch<S>& df, int k) {
  if (df.k != k) throw std::invalid_argument("df_loss: prompts built with a different k");
  for (const auto& ex : df.batch) {
    for (std::size_t r = 0; r < ex.targets.size(); ++r) {
      bool supervised = ex.targets[r] >= 0;
      if (supervised != (r >= static_cast<std::size_t>(k)))
        throw std::invalid_argument("df_loss: mask does not match k");
    }
  }
  return batch_loss(params, df.batch);
}

/// alpha * df_loss + (1 - alpha) * icl_loss, both on the given batches.
template <class S>
S finetune_loss(const Params<S>& params, const Batch<S>& clean, const DfBatch<S>& df,
                double alpha, int k) {
  S l_df = df_loss(params, df, k);
  S l_icl = batch_loss(params, clean);
  return static_cast<S>(alpha) * l_df + static_cast<S>(1.0 - alpha) * l_icl;
}

/// Two-phase optimization: ICL pretraining with the context-length curriculum,
/// then decision-feedback fine-tuning against prompts regenerated from a
/// frozen snapshot.  Returns the loss trace; on NaN loss stops immediately
/// with `diverged` set (partial trace preserved).
TrainResult train(const TrainConfig& cfg, const Params<float>* init = nullptr);

}  // namespace defined
