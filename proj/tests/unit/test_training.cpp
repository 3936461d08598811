#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "defined/checkpoint.hpp"
#include "defined/training.hpp"

using namespace defined;

namespace {

ModelConfig micro_model(Modulation mod = Modulation::BPSK, int t_max = 8) {
  ModelConfig m;
  m.mod = mod;
  m.n_t = 1;
  m.n_r = 1;
  m.d_e = 8;
  m.n_layers = 1;
  m.n_heads = 2;
  m.d_ff = 16;
  m.T_max = t_max;
  return m;
}

TrainConfig micro_train(Modulation mod = Modulation::BPSK) {
  TrainConfig cfg;
  cfg.model = micro_model(mod);
  cfg.snr = {15.0, 15.0};
  cfg.T = 4;
  cfg.batch_size = 8;
  cfg.steps_pretrain = 30;
  cfg.steps_finetune = 10;
  cfg.epoch_steps = 10;
  cfg.k_df_choices = {1};
  cfg.warmup = 5;
  cfg.curriculum.T_start = 2;
  cfg.curriculum.T_step = 1;
  cfg.curriculum.epochs_per_stage = 1;
  cfg.plateau_rel_improvement = 0.0;  // never early-stop unless asked
  cfg.seed = 42;
  return cfg;
}

std::vector<Frame> sample_test_frames(const ModelConfig& m, int n, int T, int k,
                                      std::uint64_t seed, double sigma2 = 0.05) {
  Constellation c = build_constellation(m.mod);
  Rng rng(seed);
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) {
    ChannelTask task = sample_task(Fading::Rayleigh, 0.0, {13.0, 13.0}, m.n_t, m.n_r, rng);
    task.sigma2 = sigma2;
    frames.push_back(generate_frame(task, c, m.n_t, T, k, rng));
  }
  return frames;
}

template <class S>
Params<S> spread_params(const ModelConfig& m, std::uint64_t seed) {
  Rng rng(seed);
  Params<S> p = Params<S>::init(m, rng);
  p.for_each_tensor([&](const TensorRef<S>& t) {
    for (long i = 0; i < t.size(); ++i) t.data[i] += static_cast<S>(0.1 * rng.gaussian());
  });
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("clean_batch: every position supervised with the true labels") {
  ModelConfig m = micro_model(Modulation::QPSK);
  auto frames = sample_test_frames(m, 3, 5, 1, 900);
  auto batch = clean_batch<double>(m, frames);
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& ex = batch[i];
    CHECK(ex.seq.tokens.rows() == 2 * 4 + 1);
    CHECK(ex.seq.y_rows.size() == 5);
    CHECK(ex.targets == frames[i].x_indices);
    // y-token re/im match the frame observations
    for (int t = 0; t < 5; ++t) {
      int row = ex.seq.y_rows[static_cast<std::size_t>(t)];
      CHECK(ex.seq.tokens(row, 0) ==
            doctest::Approx(frames[i].y[static_cast<std::size_t>(t)](0).real()));
    }
  }
}

TEST_CASE("icl_loss: zero parameters score at chance") {
  ModelConfig m = micro_model(Modulation::QPSK);
  auto frames = sample_test_frames(m, 4, 4, 1, 901);
  auto p = Params<double>::zeros(m);
  CHECK(icl_loss(p, frames) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("icl_loss: single frame with one pair matches a hand sum") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto frames = sample_test_frames(m, 1, 2, 1, 902);
  auto p = spread_params<double>(m, 903);

  const Frame& f = frames[0];
  std::vector<PairYX> pairs = {{f.y[0], f.x_indices[0]}};
  auto seq = tokenize<double>(m, pairs, &f.y[1]);
  MatX<double> logits = forward(p, seq);
  auto ce = [&](long row, long tgt) {
    double mx = std::max(logits(row, 0), logits(row, 1));
    double z = std::exp(logits(row, 0) - mx) + std::exp(logits(row, 1) - mx);
    return std::log(z) - (logits(row, tgt) - mx);
  };
  double want = 0.5 * (ce(0, f.x_indices[0]) + ce(1, f.x_indices[1]));
  CHECK(icl_loss(p, frames) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("icl_loss: invariant to frame order in the batch") {
  ModelConfig m = micro_model(Modulation::QPSK);
  auto frames = sample_test_frames(m, 4, 4, 1, 904);
  auto p = spread_params<double>(m, 905);
  double base = icl_loss(p, frames);
  std::reverse(frames.begin(), frames.end());
  CHECK(icl_loss(p, frames) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("df prompts: pilots true, later tokens replay the frozen model") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto frozen = spread_params<float>(m, 906);
  auto frames = sample_test_frames(m, 2, 6, 2, 907, /*sigma2=*/0.5);
  const int k = 2;
  auto df = generate_df_prompts(frozen, frames, k);
  CHECK(df.k == k);
  REQUIRE(df.batch.size() == 2);

  for (std::size_t i = 0; i < 2; ++i) {
    const Frame& f = frames[i];
    const auto& ex = df.batch[i];
    // Masking: positions 1..k unsupervised, k+1..T carry the true labels.
    for (int t = 0; t < f.T; ++t) {
      long want = t < k ? -1 : f.x_indices[static_cast<std::size_t>(t)];
      CHECK(ex.targets[static_cast<std::size_t>(t)] == want);
    }
    // Replay the sequential decision loop through the public predict API.
    std::vector<PairYX> replay;
    for (int t = 0; t < k; ++t) replay.push_back({f.y[static_cast<std::size_t>(t)], f.x_indices[static_cast<std::size_t>(t)]});
    for (int t = k; t + 1 < f.T; ++t) {
      long fed = predict(frozen, replay, f.y[static_cast<std::size_t>(t)]).second;
      replay.push_back({f.y[static_cast<std::size_t>(t)], fed});
    }
    auto want_seq = tokenize<float>(m, replay, &f.y[static_cast<std::size_t>(f.T - 1)]);
    CHECK(ex.seq.tokens == want_seq.tokens);
  }
}

TEST_CASE("df prompts: oracle feedback reproduces the clean token stream") {
  ModelConfig m = micro_model(Modulation::QPSK);
  auto frozen = spread_params<float>(m, 908);
  auto frames = sample_test_frames(m, 3, 5, 1, 909);
  auto df = generate_df_prompts(frozen, frames, 2, /*oracle_feedback=*/true);
  auto clean = clean_batch<float>(m, frames);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(df.batch[i].seq.tokens == clean[i].seq.tokens);
    // ... but the supervision mask still skips the pilot region.
    CHECK(df.batch[i].targets[0] == -1);
    CHECK(df.batch[i].targets[1] == -1);
    CHECK(df.batch[i].targets[2] == clean[i].targets[2]);
  }
}

TEST_CASE("df prompts: k = T-1 leaves only the query supervised") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto frozen = spread_params<float>(m, 910);
  auto frames = sample_test_frames(m, 2, 4, 1, 911);
  auto df = generate_df_prompts(frozen, frames, 3);
  auto clean = clean_batch<float>(m, frames);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(df.batch[i].seq.tokens == clean[i].seq.tokens);  // no decisions fed
    for (int t = 0; t < 3; ++t) CHECK(df.batch[i].targets[static_cast<std::size_t>(t)] == -1);
    CHECK(df.batch[i].targets[3] == frames[i].x_indices[3]);
  }
}

TEST_CASE("df prompts: pilot count is validated") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto frozen = spread_params<float>(m, 912);
  auto frames = sample_test_frames(m, 1, 4, 1, 913);
  CHECK_THROWS_AS(generate_df_prompts(frozen, frames, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_df_prompts(frozen, frames, 4), std::invalid_argument);
}

TEST_CASE("df_loss: rejects mismatched k or a tampered mask") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto frozen = spread_params<float>(m, 914);
  auto frames = sample_test_frames(m, 2, 5, 1, 915);
  auto df = generate_df_prompts(frozen, frames, 2);
  CHECK_NOTHROW(df_loss(frozen, df, 2));
  CHECK_THROWS_AS(df_loss(frozen, df, 3), std::invalid_argument);
  df.batch[0].targets[0] = 1;  // pilot positions must stay unsupervised
  CHECK_THROWS_AS(df_loss(frozen, df, 2), std::invalid_argument);
}

TEST_CASE("df_loss: averages over the feedback region only") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto p = spread_params<double>(m, 916);
  auto frames = sample_test_frames(m, 2, 5, 1, 917);
  const int k = 2;
  auto df = generate_df_prompts(p, frames, k);

  double total = 0.0;
  long count = 0;
  for (const auto& ex : df.batch) {
    MatX<double> logits = forward(p, ex.seq);
    for (long r = 0; r < logits.rows(); ++r) {
      long tgt = ex.targets[static_cast<std::size_t>(r)];
      if (tgt < 0) continue;
      double mx = std::max(logits(r, 0), logits(r, 1));
      double z = std::exp(logits(r, 0) - mx) + std::exp(logits(r, 1) - mx);
      total += std::log(z) - (logits(r, tgt) - mx);
      ++count;
    }
  }
  CHECK(count == 2 * (5 - k));  // N (T - k) supervised positions
  CHECK(df_loss(p, df, k) == doctest::Approx(total / count).epsilon(1e-12));
}

TEST_CASE("finetune_loss: endpoints and affine mixing") {
  ModelConfig m = micro_model(Modulation::BPSK);
  auto p = spread_params<double>(m, 918);
  auto frames = sample_test_frames(m, 3, 5, 1, 919);
  auto clean = clean_batch<double>(m, frames);
  auto df = generate_df_prompts(p, frames, 2);

  double l_df = df_loss(p, df, 2);
  double l_icl = batch_loss(p, clean);
  CHECK(finetune_loss(p, clean, df, 1.0, 2) == doctest::Approx(l_df).epsilon(1e-12));
  CHECK(finetune_loss(p, clean, df, 0.0, 2) == doctest::Approx(l_icl).epsilon(1e-12));
  CHECK(finetune_loss(p, clean, df, 0.7, 2) ==
        doctest::Approx(0.7 * l_df + 0.3 * l_icl).epsilon(1e-12));
  // Affine in alpha: l(0.3) + l(0.7) == 2 l(0.5)
  CHECK(finetune_loss(p, clean, df, 0.3, 2) + finetune_loss(p, clean, df, 0.7, 2) ==
        doctest::Approx(2.0 * finetune_loss(p, clean, df, 0.5, 2)).epsilon(1e-12));
}

TEST_CASE("curriculum schedule: stages advance by epochs and cap at T") {
  TrainConfig cfg;
  cfg.model = micro_model();
  cfg.model.T_max = 31;
  cfg.T = 31;
  cfg.epoch_steps = 1000;
  cfg.curriculum = {true, 11, 5, 2};
  CHECK(curriculum_pairs(cfg, 1) == 11);
  CHECK(curriculum_pairs(cfg, 2000) == 11);   // last step of stage 0
  CHECK(curriculum_pairs(cfg, 2001) == 16);   // stage 1
  CHECK(curriculum_pairs(cfg, 4001) == 21);
  CHECK(curriculum_pairs(cfg, 6001) == 26);
  CHECK(curriculum_pairs(cfg, 8001) == 31);
  CHECK(curriculum_pairs(cfg, 10001) == 31);  // capped at T
  cfg.curriculum.enabled = false;
  CHECK(curriculum_pairs(cfg, 1) == 31);
}

TEST_CASE("train config validation") {
  TrainConfig cfg = micro_train();
  CHECK_NOTHROW(cfg.validate());
  cfg.T = cfg.model.T_max + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = micro_train();
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = micro_train();
  cfg.k_df_choices = {4};  // k >= T
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = micro_train();
  cfg.k_df_choices.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = micro_train();
  cfg.curriculum.T_start = cfg.T + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("train: micro run completes both phases and reduces the loss") {
  TrainConfig cfg = micro_train();
  TrainResult res = train(cfg);
  CHECK_FALSE(res.diverged);
  CHECK(res.pretrain_steps == 30);
  CHECK(res.finetune_steps == 10);
  REQUIRE(res.trace.size() == 40);
  for (std::size_t i = 0; i < 30; ++i) CHECK(res.trace[i].phase == 1);
  for (std::size_t i = 30; i < 40; ++i) CHECK(res.trace[i].phase == 2);
  for (const auto& row : res.trace) CHECK(std::isfinite(row.loss));
  CHECK(res.params.all_finite());

  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += res.trace[static_cast<std::size_t>(i)].loss;
    last += res.trace[static_cast<std::size_t>(25 + i)].loss;
  }
  CHECK(last < first);  // shrinking pretrain loss on fresh data
}

TEST_CASE("train: same seed reproduces the trace and weights bitwise") {
  TrainConfig cfg = micro_train();
  cfg.steps_pretrain = 6;
  cfg.steps_finetune = 4;
  TrainResult a = train(cfg);
  TrainResult b = train(cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].loss == b.trace[i].loss);
    CHECK(a.trace[i].step == b.trace[i].step);
  }
  std::vector<const float*> bs;
  b.params.for_each_tensor([&](const TensorRef<float>& t) { bs.push_back(t.data); });
  std::size_t idx = 0;
  bool same = true;
  a.params.for_each_tensor([&](const TensorRef<float>& t) {
    for (long i = 0; i < t.size(); ++i)
      if (t.data[i] != bs[idx][i]) same = false;
    ++idx;
  });
  CHECK(same);

  cfg.seed = 43;
  TrainResult other = train(cfg);
  CHECK(other.trace[0].loss != a.trace[0].loss);
}

TEST_CASE("train: warm start from explicit weights and config mismatch checks") {
  TrainConfig cfg = micro_train();
  cfg.run_pretrain = false;
  cfg.run_finetune = false;
  auto init = spread_params<float>(cfg.model, 930);
  TrainResult res = train(cfg, &init);
  // A no-op schedule must return the initial weights untouched.
  std::vector<const float*> got;
  res.params.for_each_tensor([&](const TensorRef<float>& t) { got.push_back(t.data); });
  std::size_t idx = 0;
  bool same = true;
  init.for_each_tensor([&](const TensorRef<float>& t) {
    for (long i = 0; i < t.size(); ++i)
      if (t.data[i] != got[idx][i]) same = false;
    ++idx;
  });
  CHECK(same);

  auto wrong = spread_params<float>(micro_model(Modulation::QPSK), 931);
  CHECK_THROWS_AS(train(cfg, &wrong), std::invalid_argument);
}

TEST_CASE("train: plateau stop ends pretraining at the second full-length epoch") {
  TrainConfig cfg = micro_train();
  cfg.curriculum.enabled = false;  // full length from the start
  cfg.steps_pretrain = 50;
  cfg.steps_finetune = 0;
  cfg.epoch_steps = 5;
  cfg.plateau_rel_improvement = 1.0;  // any epoch counts as a plateau
  TrainResult res = train(cfg);
  CHECK(res.pretrain_steps == 10);
}

TEST_CASE("train: checkpoints written at stage boundaries are loadable") {
  TrainConfig cfg = micro_train();
  cfg.steps_pretrain = 25;  // crosses two stage boundaries (epochs of 10)
  cfg.steps_finetune = 3;
  auto path = std::filesystem::temp_directory_path() / "defined-train-ckpt.bin";
  cfg.ckpt_path = path.string();
  TrainResult res = train(cfg);
  REQUIRE(std::filesystem::exists(path));
  auto loaded = load_checkpoint<float>(path.string());
  CHECK(loaded.cfg == cfg.model);
  // Final save happens after finetuning: stored weights equal the result.
  std::vector<const float*> ls;
  loaded.for_each_tensor([&](const TensorRef<float>& t) { ls.push_back(t.data); });
  std::size_t idx = 0;
  bool same = true;
  res.params.for_each_tensor([&](const TensorRef<float>& t) {
    for (long i = 0; i < t.size(); ++i)
      if (t.data[i] != ls[idx][i]) same = false;
    ++idx;
  });
  CHECK(same);
  std::filesystem::remove(path);
}

TEST_CASE("train: blown-up weights report divergence instead of throwing") {
  TrainConfig cfg = micro_train();
  cfg.steps_pretrain = 5;
  cfg.steps_finetune = 0;
  // Finite but absurd warm start: the first forward pass overflows float and
  // must surface as `diverged`, never as an exception.
  auto init = spread_params<float>(cfg.model, 932);
  init.layers[0].w1.setConstant(1e20f);
  init.layers[0].w2.setConstant(1e20f);
  CHECK(init.all_finite());
  TrainResult res = train(cfg, &init);
  CHECK(res.diverged);
  CHECK(res.pretrain_steps == 1);
}

TEST_SUITE_END();
