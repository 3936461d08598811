#include "defined/training.hpp"

#include <cmath>
#include <iostream>

#include "defined/checkpoint.hpp"

namespace defined {

namespace {

// Stream ids for the per-purpose RNG forks (arbitrary fixed tags).
constexpr std::uint64_t kStreamInit = 0x11;
constexpr std::uint64_t kStreamPretrainData = 0x21;
constexpr std::uint64_t kStreamFinetuneData = 0x22;
constexpr std::uint64_t kStreamKdf = 0x31;

std::vector<Frame> sample_frames(const TrainConfig& cfg, const Constellation& c, Rng base,
                                 long step, int T_cur) {
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(cfg.batch_size));
  Rng step_rng = base.fork(static_cast<std::uint64_t>(step));
  for (int i = 0; i < cfg.batch_size; ++i) {
    Rng frame_rng = step_rng.fork(static_cast<std::uint64_t>(i));
    ChannelTask task = sample_task(cfg.fading, cfg.kappa, cfg.snr, cfg.model.n_t,
                                   cfg.model.n_r, frame_rng);
    frames.push_back(generate_frame(task, c, cfg.model.n_t, T_cur, 1, frame_rng));
  }
  return frames;
}

}  // namespace

int curriculum_pairs(const TrainConfig& cfg, long step) {
  if (!cfg.curriculum.enabled) return cfg.T;
  long epochs_done = (step - 1) / cfg.epoch_steps;
  long stage = epochs_done / cfg.curriculum.epochs_per_stage;
  long t = cfg.curriculum.T_start + stage * cfg.curriculum.T_step;
  return static_cast<int>(std::min<long>(t, cfg.T));
}

TrainResult train(const TrainConfig& cfg, const Params<float>* init) {
  cfg.validate();
  Constellation c = build_constellation(cfg.model.mod);
  Rng root(cfg.seed);

  TrainResult res;
  if (init) {
    if (!(init->cfg == cfg.model))
      throw std::invalid_argument("train: initial params config mismatch");
    res.params = *init;
  } else {
    Rng init_rng = root.fork(kStreamInit);
    res.params = Params<float>::init(cfg.model, init_rng);
  }

  Params<float> grads = Params<float>::zeros(cfg.model);

  // ---- Phase 1: ICL pretraining with the context-length curriculum ----
  if (cfg.run_pretrain && cfg.steps_pretrain > 0) {
    Adam<float> opt(cfg.model, cfg.lr, cfg.warmup, cfg.clip_norm);
    Rng data_rng = root.fork(kStreamPretrainData);
    double epoch_sum = 0.0;
    long epoch_count = 0;
    double prev_epoch_mean = -1.0;
    bool prev_epoch_full_t = false;
    long last_stage = -1;

    for (long step = 1; step <= cfg.steps_pretrain; ++step) {
      int t_cur = curriculum_pairs(cfg, step);
      std::vector<Frame> frames = sample_frames(cfg, c, data_rng, step, t_cur);
      Batch<float> batch = clean_batch<float>(cfg.model, frames);
      float loss;
      try {
        loss = batch_loss_and_grads(res.params, batch, grads);
      } catch (const NumericError&) {
        // Blown-up activations are divergence, same as a NaN loss.
        res.diverged = true;
        res.pretrain_steps = step;
        return res;
      }
      res.trace.push_back({step, 1, static_cast<double>(loss)});
      res.pretrain_steps = step;
      if (!std::isfinite(loss)) {
        res.diverged = true;
        return res;
      }
      opt.step(res.params, grads);

      epoch_sum += loss;
      ++epoch_count;
      long stage = cfg.curriculum.enabled
                       ? ((step - 1) / cfg.epoch_steps) / cfg.curriculum.epochs_per_stage
                       : 0;
      if (stage != last_stage && last_stage >= 0 && !cfg.ckpt_path.empty())
        save_checkpoint(cfg.ckpt_path, res.params);
      last_stage = stage;

      if (step % cfg.epoch_steps == 0) {
        double mean = epoch_sum / static_cast<double>(epoch_count);
        bool full_t = t_cur == cfg.T;
        // Stop just before the plateau: once the curriculum has reached full
        // length and an epoch improves the mean loss by less than the
        // threshold, further pretraining is mostly flat.  A non-positive
        // threshold disables the early stop.
        if (cfg.plateau_rel_improvement > 0.0 && full_t && prev_epoch_full_t &&
            prev_epoch_mean > 0.0 &&
            (prev_epoch_mean - mean) / prev_epoch_mean < cfg.plateau_rel_improvement) {
          break;
        }
        prev_epoch_mean = mean;
        prev_epoch_full_t = full_t;
        epoch_sum = 0.0;
        epoch_count = 0;
      }
    }
    if (!cfg.ckpt_path.empty()) save_checkpoint(cfg.ckpt_path, res.params);
  }

  // ---- Phase 2: decision-feedback fine-tuning ----
  if (cfg.run_finetune && cfg.steps_finetune > 0) {
    Adam<float> opt(cfg.model, cfg.lr, cfg.warmup, cfg.clip_norm);
    Rng data_rng = root.fork(kStreamFinetuneData);
    Rng kdf_rng = root.fork(kStreamKdf);
    Params<float> frozen = res.params;
    Params<float> g_df = Params<float>::zeros(cfg.model);
    Params<float> g_icl = Params<float>::zeros(cfg.model);

    for (long step = 1; step <= cfg.steps_finetune; ++step) {
      if ((step - 1) % std::max(1, cfg.df_refresh) == 0) frozen = res.params;
      int k = cfg.k_df_choices[static_cast<std::size_t>(
          kdf_rng.uniform_index(cfg.k_df_choices.size()))];
      std::vector<Frame> frames = sample_frames(cfg, c, data_rng, step, cfg.T);
      float loss;
      try {
        DfBatch<float> df = generate_df_prompts(frozen, frames, k);
        Batch<float> clean = clean_batch<float>(cfg.model, frames);
        float l_df = batch_loss_and_grads(res.params, df.batch, g_df);
        float l_icl = batch_loss_and_grads(res.params, clean, g_icl);
        loss = static_cast<float>(cfg.alpha) * l_df +
               static_cast<float>(1.0 - cfg.alpha) * l_icl;
      } catch (const NumericError&) {
        res.diverged = true;
        res.finetune_steps = step;
        return res;
      }
      grads.set_zero();
      grads.axpy(static_cast<float>(cfg.alpha), g_df);
      grads.axpy(static_cast<float>(1.0 - cfg.alpha), g_icl);

      res.trace.push_back({step, 2, static_cast<double>(loss)});
      res.finetune_steps = step;
      if (!std::isfinite(loss)) {
        res.diverged = true;
        return res;
      }
      opt.step(res.params, grads);
    }
    if (!cfg.ckpt_path.empty()) save_checkpoint(cfg.ckpt_path, res.params);
  }

  return res;
}

}  // namespace defined
