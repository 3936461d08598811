// Command-line front end: train / eval / theory / describe / compare.
//
// Every run that writes files also writes "<out>.manifest", a flat key=value
// record of the fully-resolved configuration, seed, code version, timestamps,
// and output paths.  Manifest keys match the long flag names, so a manifest
// (or any flat key=value file) can be fed back through --config to replay a
// run; explicit flags always win over config-file values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defined/checkpoint.hpp"
#include "defined/common.hpp"
#include "defined/csv.hpp"
#include "defined/eval.hpp"
#include "defined/manifest.hpp"
#include "defined/theory.hpp"
#include "defined/threading.hpp"
#include "defined/training.hpp"

namespace {

using namespace defined;

std::string fmt(double v, int precision = 17) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

template <class T>
std::string join_commas(const std::vector<T>& values) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) ss << ",";
    ss << values[i];
  }
  return ss.str();
}

/// Shared manifest skeleton; `finish` stamps the end time and writes the
/// manifest next to the primary output.
RunManifest start_manifest(const std::string& subcommand) {
  RunManifest m;
  m.set("subcommand", subcommand);
  m.set("version", kVersion);
  m.set("threads", std::to_string(max_threads()));
  m.set("start", utc_timestamp_now());
  return m;
}

void finish_manifest(RunManifest& m, const std::string& primary_out,
                     const std::vector<std::string>& outputs) {
  m.set("end", utc_timestamp_now());
  m.set("outputs", join_commas(outputs));
  m.save(primary_out + ".manifest");
}

/// Binary Gaussian mixture with means +-e1 and isotropic covariance
/// scale * I_d; the geometry behind both theory subcommands.
BinaryGaussianTask canonical_task(int d, double scale) {
  BinaryGaussianTask task;
  task.mu1 = Eigen::VectorXd::Zero(d);
  task.mu1(0) = 1.0;
  task.mu0 = -task.mu1;
  task.lambda = scale * Eigen::MatrixXd::Identity(d, d);
  return task;
}

/// Fixed query point (0.125, 0.0625, 0, ...).  At the default covariance
/// scale its Bayes logit is 1: close enough to the boundary that the
/// posterior is sensitive to the prompt, yet where the sigmoid's
/// higher-order terms nearly cancel, so the O(1/k) leading term dominates
/// the measured error already at k = 10.
Eigen::VectorXd canonical_query(int d) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(d);
  q(0) = 0.125;
  if (d > 1) q(1) = 0.0625;
  return q;
}

struct TrainArgs {
  std::string phase = "both";
  std::string mod = "16qam";
  int n_t = 1;
  int n_r = 1;
  int d_e = 64;
  int layers = 8;
  int heads = 8;
  int d_ff = 256;
  int t_max = 31;
  double snr_lo = 25.0;
  double snr_hi = 35.0;
  std::string fading = "rayleigh";
  double kappa = 0.0;
  int T = 31;
  int batch = 512;
  int steps = 4000;
  int steps_finetune = 2000;
  int epoch_steps = 1000;
  double alpha = 0.7;
  std::vector<int> k_df{1, 2, 3, 4};
  int df_refresh = 1;
  double lr = 3e-4;
  int warmup = 500;
  double clip = 1.0;
  bool curriculum = true;
  int t_start = 11;
  int t_step = 5;
  int epochs_per_stage = 2;
  double plateau = 0.01;
  std::uint64_t seed = 0;
  std::string init;
  std::string ckpt;
  std::string out;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.model.mod = parse_modulation(a.mod);
  cfg.model.n_t = a.n_t;
  cfg.model.n_r = a.n_r;
  cfg.model.d_e = a.d_e;
  cfg.model.n_layers = a.layers;
  cfg.model.n_heads = a.heads;
  cfg.model.d_ff = a.d_ff;
  cfg.model.T_max = a.t_max;
  cfg.fading = parse_fading(a.fading);
  cfg.kappa = a.kappa;
  cfg.snr = {a.snr_lo, a.snr_hi};
  cfg.T = a.T;
  cfg.batch_size = a.batch;
  cfg.steps_pretrain = a.steps;
  cfg.steps_finetune = a.steps_finetune;
  cfg.epoch_steps = a.epoch_steps;
  cfg.alpha = a.alpha;
  cfg.k_df_choices = a.k_df;
  cfg.df_refresh = a.df_refresh;
  cfg.lr = a.lr;
  cfg.warmup = a.warmup;
  cfg.clip_norm = a.clip;
  cfg.curriculum.enabled = a.curriculum;
  cfg.curriculum.T_start = a.t_start;
  cfg.curriculum.T_step = a.t_step;
  cfg.curriculum.epochs_per_stage = a.epochs_per_stage;
  cfg.plateau_rel_improvement = a.plateau;
  cfg.seed = a.seed;
  cfg.ckpt_path = a.ckpt;
  cfg.run_pretrain = a.phase != "finetune";
  cfg.run_finetune = a.phase != "pretrain";
  cfg.validate();
  if (a.phase == "finetune" && a.init.empty())
    throw std::invalid_argument("train: --phase finetune requires --init CKPT");

  std::optional<Params<float>> init;
  if (!a.init.empty()) init = load_checkpoint<float>(a.init);

  RunManifest m = start_manifest("train");
  m.set("phase", a.phase);
  m.set("mod", a.mod);
  m.set("nt", std::to_string(a.n_t));
  m.set("nr", std::to_string(a.n_r));
  m.set("d-e", std::to_string(a.d_e));
  m.set("layers", std::to_string(a.layers));
  m.set("heads", std::to_string(a.heads));
  m.set("d-ff", std::to_string(a.d_ff));
  m.set("t-max", std::to_string(a.t_max));
  m.set("snr-lo", fmt(a.snr_lo));
  m.set("snr-hi", fmt(a.snr_hi));
  m.set("fading", a.fading);
  m.set("kappa", fmt(a.kappa));
  m.set("T", std::to_string(a.T));
  m.set("batch", std::to_string(a.batch));
  m.set("steps", std::to_string(a.steps));
  m.set("steps-finetune", std::to_string(a.steps_finetune));
  m.set("epoch-steps", std::to_string(a.epoch_steps));
  m.set("alpha", fmt(a.alpha));
  m.set("k-df", join_commas(a.k_df));
  m.set("df-refresh", std::to_string(a.df_refresh));
  m.set("lr", fmt(a.lr));
  m.set("warmup", std::to_string(a.warmup));
  m.set("clip", fmt(a.clip));
  m.set("curriculum", a.curriculum ? "true" : "false");
  m.set("t-start", std::to_string(a.t_start));
  m.set("t-step", std::to_string(a.t_step));
  m.set("epochs-per-stage", std::to_string(a.epochs_per_stage));
  m.set("plateau", fmt(a.plateau));
  m.set("seed", std::to_string(a.seed));
  if (!a.init.empty()) m.set("init", a.init);
  m.set("ckpt", a.ckpt);
  std::string out = a.out.empty() ? a.ckpt + ".trace.csv" : a.out;
  m.set("out", out);

  TrainResult res = train(cfg, init ? &*init : nullptr);
  write_trace_csv(out, res.trace);

  m.set("diverged", res.diverged ? "true" : "false");
  m.set("pretrain-steps-run", std::to_string(res.pretrain_steps));
  m.set("finetune-steps-run", std::to_string(res.finetune_steps));
  finish_manifest(m, out, {a.ckpt, out});

  auto last_loss = [&res](int phase) -> std::optional<double> {
    for (auto it = res.trace.rbegin(); it != res.trace.rend(); ++it)
      if (it->phase == phase) return it->loss;
    return std::nullopt;
  };
  if (auto l = last_loss(1))
    std::cout << "pretrain: " << res.pretrain_steps << " steps  last loss " << fmt(*l, 6) << "\n";
  if (auto l = last_loss(2))
    std::cout << "finetune: " << res.finetune_steps << " steps  last loss " << fmt(*l, 6) << "\n";
  if (res.diverged)
    std::cerr << "warning: training diverged after "
              << (res.finetune_steps > 0 ? res.finetune_steps : res.pretrain_steps)
              << " steps of the failing phase; partial trace kept\n";
  std::cout << "checkpoint: " << a.ckpt << "\n";
  std::cout << "trace: " << out << "  (+ manifest)\n";
  return 0;
}

struct EvalArgs {
  std::string method;
  std::string mod;
  int n_t = 1;
  int n_r = 1;
  double snr = 30.0;
  int pilots = 1;
  int T = 31;
  long prompts = 8000;
  std::string ckpt;
  std::uint64_t seed = 0;
  std::string fading = "rayleigh";
  double kappa = 0.0;
  int mlsd_cap = 0;
  std::string out;
};

int run_eval_cmd(const EvalArgs& a) {
  EvalConfig cfg;
  cfg.method = parse_eval_method(a.method);
  cfg.mod = parse_modulation(a.mod);
  cfg.n_t = a.n_t;
  cfg.n_r = a.n_r;
  cfg.snr_db = a.snr;
  cfg.k = a.pilots;
  cfg.T = a.T;
  cfg.n_prompts = a.prompts;
  cfg.ckpt_path = a.ckpt;
  cfg.seed = a.seed;
  cfg.fading = parse_fading(a.fading);
  cfg.kappa = a.kappa;
  cfg.mlsd_cap = a.mlsd_cap;
  cfg.validate();

  RunManifest m = start_manifest("eval");
  m.set("method", a.method);
  m.set("mod", a.mod);
  m.set("nt", std::to_string(a.n_t));
  m.set("nr", std::to_string(a.n_r));
  m.set("snr", fmt(a.snr));
  m.set("pilots", std::to_string(a.pilots));
  m.set("T", std::to_string(a.T));
  m.set("prompts", std::to_string(a.prompts));
  if (!a.ckpt.empty()) m.set("ckpt", a.ckpt);
  m.set("seed", std::to_string(a.seed));
  m.set("fading", a.fading);
  m.set("kappa", fmt(a.kappa));
  m.set("mlsd-cap", std::to_string(a.mlsd_cap));
  m.set("out", a.out);

  EvalCurve curve = run_eval(cfg);
  write_curve_csv(a.out, curve);
  finish_manifest(m, a.out, {a.out});

  std::cout << "method: " << eval_method_name(cfg.method) << "  mod: " << a.mod
            << "  snr: " << fmt(a.snr, 6) << " dB  points: " << curve.points.size() << "\n";
  if (!curve.points.empty()) {
    const auto& f = curve.points.front();
    const auto& b = curve.points.back();
    std::cout << "ser: length " << f.length << " -> " << fmt(f.ser, 6) << ", length " << b.length
              << " -> " << fmt(b.ser, 6) << "\n";
  }
  if (curve.gain) std::cout << "gain_df: " << fmt(*curve.gain, 6) << "%\n";
  std::cout << "wrote: " << a.out << "  (+ manifest)\n";
  return 0;
}

struct TheoryArgs {
  int d = 2;
  double lambda = 0.25;
  double xi2 = 0.25;
  double sigma2 = 0.25;
  std::vector<long> k_grid{10, 100, 1000, 10000};
  long trials = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_thm1(const TheoryArgs& a) {
  BinaryGaussianTask task = canonical_task(a.d, a.lambda);
  task.validate();
  Eigen::VectorXd q = canonical_query(a.d);

  RunManifest m = start_manifest("theory thm1");
  m.set("d", std::to_string(a.d));
  m.set("lambda", fmt(a.lambda));
  m.set("k-grid", join_commas(a.k_grid));
  m.set("trials", std::to_string(a.trials));
  m.set("seed", std::to_string(a.seed));
  m.set("out", a.out);

  std::ofstream os(a.out, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + a.out);
  os << "k,mc_error,stderr,leading_term,ratio\n";
  os.precision(12);
  std::vector<double> ln_k, ln_err;
  for (long k : a.k_grid) {
    McResult mc = prediction_error_mc(task, q, k, a.trials, a.seed);
    double lead = error_leading_term(task, q, k);
    os << k << "," << mc.value << "," << mc.std_error << "," << lead << ","
       << mc.value / lead << "\n";
    ln_k.push_back(std::log(static_cast<double>(k)));
    ln_err.push_back(std::log(mc.value));
    std::cout << "k=" << k << "  mc_error=" << fmt(mc.value, 6)
              << "  leading=" << fmt(lead, 6) << "  ratio=" << fmt(mc.value / lead, 4) << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + a.out);
  os.close();
  finish_manifest(m, a.out, {a.out});

  if (ln_k.size() >= 2) {
    double mk = 0, me = 0;
    for (std::size_t i = 0; i < ln_k.size(); ++i) mk += ln_k[i], me += ln_err[i];
    mk /= static_cast<double>(ln_k.size());
    me /= static_cast<double>(ln_k.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ln_k.size(); ++i) {
      num += (ln_k[i] - mk) * (ln_err[i] - me);
      den += (ln_k[i] - mk) * (ln_k[i] - mk);
    }
    std::cout << "log-log slope: " << fmt(num / den, 4) << "\n";
  }
  std::cout << "wrote: " << a.out << "  (+ manifest)\n";
  return 0;
}

int run_thm2(const TheoryArgs& a) {
  BinaryGaussianTask task = canonical_task(a.d, a.sigma2);
  task.validate();

  RunManifest m = start_manifest("theory thm2");
  m.set("d", std::to_string(a.d));
  m.set("xi2", fmt(a.xi2));
  m.set("sigma2", fmt(a.sigma2));
  m.set("k-grid", join_commas(a.k_grid));
  m.set("trials", std::to_string(a.trials));
  m.set("seed", std::to_string(a.seed));
  m.set("out", a.out);

  std::ofstream os(a.out, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + a.out);
  os << "k,agreement,stderr\n";
  os.precision(12);
  double last = 0.0;
  for (long k : a.k_grid) {
    McResult mc = mismatch_agreement(a.xi2, task, k, a.trials, a.seed);
    os << k << "," << mc.value << "," << mc.std_error << "\n";
    std::cout << "k=" << k << "  agreement=" << fmt(mc.value, 6) << "\n";
    last = mc.value;
  }
  if (!os) throw std::runtime_error("write failed: " + a.out);
  os.close();
  finish_manifest(m, a.out, {a.out});

  if (!a.k_grid.empty())
    std::cout << "agreement at k=" << a.k_grid.back() << ": " << fmt(last, 6) << "\n";
  std::cout << "wrote: " << a.out << "  (+ manifest)\n";
  return 0;
}

struct DescribeArgs {
  std::string ckpt;
  std::string mod = "16qam";
  int n_t = 1;
  int n_r = 1;
  int d_e = 64;
  int layers = 8;
  int heads = 8;
  int d_ff = 256;
  int t_max = 31;
};

int run_describe(const DescribeArgs& a) {
  ModelConfig cfg;
  if (!a.ckpt.empty()) {
    cfg = peek_checkpoint_config(a.ckpt);
    std::cout << "checkpoint: " << a.ckpt << "\n";
  } else {
    cfg.mod = parse_modulation(a.mod);
    cfg.n_t = a.n_t;
    cfg.n_r = a.n_r;
    cfg.d_e = a.d_e;
    cfg.n_layers = a.layers;
    cfg.n_heads = a.heads;
    cfg.d_ff = a.d_ff;
    cfg.T_max = a.t_max;
  }
  cfg.validate();
  long params = Params<float>::zeros(cfg).param_count();
  std::cout << "modulation: " << modulation_name(cfg.mod) << "\n"
            << "antennas: " << cfg.n_t << "x" << cfg.n_r << "\n"
            << "d_e: " << cfg.d_e << "\n"
            << "layers: " << cfg.n_layers << "\n"
            << "heads: " << cfg.n_heads << "\n"
            << "d_ff: " << cfg.d_ff << "\n"
            << "T_max: " << cfg.T_max << "\n"
            << "classes: " << cfg.n_classes() << "\n"
            << "token_width: " << cfg.input_dim() << "\n"
            << "parameters: " << params << "\n";
  return 0;
}

int run_compare(const std::vector<std::string>& inputs, const std::string& out) {
  RunManifest m = start_manifest("compare");
  m.set("inputs", join_commas(inputs));
  m.set("out", out);
  write_compare_csv(out, inputs);
  finish_manifest(m, out, {out});
  std::cout << "wrote: " << out << "  (+ manifest)\n";
  return 0;
}

/// --config on every subcommand: flat key=value text (same format as a run
/// manifest) merged under explicit flags.
void add_config(CLI::App* sub, std::string& target) {
  sub->add_option("--config", target,
                  "flat key=value file merged under explicit flags (flags win; "
                  "unknown keys ignored, so a run manifest replays directly)");
}

/// Applies the config file to every option of `sub` that was not given on the
/// command line.  Keys name the long flags without the leading dashes;
/// unknown keys are skipped.
void merge_config_file(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : RunManifest::load(path).entries) {
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) opt = sub->get_option_no_throw(key);  // positionals
    if (opt == nullptr || opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

/// Required-flag check deferred until after the config merge, so a config
/// value can satisfy it.
void require_value(bool present, const std::string& what) {
  if (!present) throw std::invalid_argument(what + " is required (flag or config key)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Symbol-detection workbench for block-fading channels: in-context "
      "Transformer detector, classical baselines, and analysis tools."};
  app.require_subcommand(1);
  app.footer("Environment:\n  DEFINED_THREADS  caps worker threads (default: all hardware threads)");
  app.set_version_flag("--version", std::string(kVersion));

  // ---- train ----------------------------------------------------------
  TrainArgs ta;
  std::string train_cfg_file;
  CLI::App* train = app.add_subcommand(
      "train", "Two-phase optimization: in-context pretraining with a context-length "
               "curriculum, then decision-feedback fine-tuning");
  add_config(train, train_cfg_file);
  train->add_option("--phase", ta.phase, "pretrain | finetune | both")
      ->check(CLI::IsMember({"pretrain", "finetune", "both"}))
      ->capture_default_str();
  train->add_option("--mod", ta.mod, "bpsk | qpsk | 16qam | 64qam")->capture_default_str();
  train->add_option("--nt", ta.n_t, "transmit antennas")->capture_default_str();
  train->add_option("--nr", ta.n_r, "receive antennas")->capture_default_str();
  train->add_option("--d-e", ta.d_e, "embedding width")->capture_default_str();
  train->add_option("--layers", ta.layers, "decoder layers")->capture_default_str();
  train->add_option("--heads", ta.heads, "attention heads")->capture_default_str();
  train->add_option("--d-ff", ta.d_ff, "feed-forward width")->capture_default_str();
  train->add_option("--t-max", ta.t_max, "maximum pairs per frame")->capture_default_str();
  train->add_option("--snr-lo", ta.snr_lo, "training SNR range low (dB)")->capture_default_str();
  train->add_option("--snr-hi", ta.snr_hi, "training SNR range high (dB)")->capture_default_str();
  train->add_option("--fading", ta.fading, "rayleigh | rician")
      ->check(CLI::IsMember({"rayleigh", "rician"}))
      ->capture_default_str();
  train->add_option("--kappa", ta.kappa, "Rician K-factor")->capture_default_str();
  train->add_option("--T", ta.T, "pairs per training frame")->capture_default_str();
  train->add_option("--batch", ta.batch, "frames per step")->capture_default_str();
  train->add_option("--steps", ta.steps, "pretraining steps")->capture_default_str();
  train->add_option("--steps-finetune", ta.steps_finetune, "fine-tuning steps")
      ->capture_default_str();
  train->add_option("--epoch-steps", ta.epoch_steps, "steps per epoch (fresh data every step)")
      ->capture_default_str();
  train->add_option("--alpha", ta.alpha, "fine-tune weight on the decision-feedback loss")
      ->capture_default_str();
  train->add_option("--k-df", ta.k_df, "pilot counts sampled during fine-tuning")
      ->delimiter(',')
      ->capture_default_str();
  train->add_option("--df-refresh", ta.df_refresh, "steps between frozen-snapshot refreshes")
      ->capture_default_str();
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--warmup", ta.warmup, "linear warmup steps")->capture_default_str();
  train->add_option("--clip", ta.clip, "gradient-norm clip (0 disables)")->capture_default_str();
  train->add_option("--curriculum", ta.curriculum, "context-length curriculum on/off")
      ->capture_default_str();
  train->add_option("--t-start", ta.t_start, "curriculum starting pairs")->capture_default_str();
  train->add_option("--t-step", ta.t_step, "curriculum pairs added per stage")
      ->capture_default_str();
  train->add_option("--epochs-per-stage", ta.epochs_per_stage, "epochs per curriculum stage")
      ->capture_default_str();
  train->add_option("--plateau", ta.plateau,
                    "relative-improvement threshold for the pretraining early stop (0 disables)")
      ->capture_default_str();
  train->add_option("--seed", ta.seed, "RNG seed")->capture_default_str();
  train->add_option("--init", ta.init, "warm-start checkpoint (required for --phase finetune)");
  train->add_option("--ckpt", ta.ckpt, "output checkpoint path");
  train->add_option("--out", ta.out, "loss-trace CSV path (default: <ckpt>.trace.csv)");

  // ---- eval -----------------------------------------------------------
  EvalArgs ea;
  std::string eval_cfg_file;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Symbol-error-rate sweep over context length for one detection method");
  add_config(eval_cmd, eval_cfg_file);
  eval_cmd->add_option("--method", ea.method,
                       "mmse | mmse-df | mlsd | icl | icl-df | defined | defined-icl");
  eval_cmd->add_option("--mod", ea.mod, "bpsk | qpsk | 16qam | 64qam");
  eval_cmd->add_option("--nt", ea.n_t, "transmit antennas")->capture_default_str();
  eval_cmd->add_option("--nr", ea.n_r, "receive antennas")->capture_default_str();
  eval_cmd->add_option("--snr", ea.snr, "test SNR (dB)")->capture_default_str();
  eval_cmd->add_option("--pilots", ea.pilots, "pilot count k for decision-feedback testing")
      ->capture_default_str();
  eval_cmd->add_option("--T", ea.T, "pairs per frame")->capture_default_str();
  eval_cmd->add_option("--prompts", ea.prompts, "frames to evaluate")->capture_default_str();
  eval_cmd->add_option("--ckpt", ea.ckpt, "model checkpoint (model-backed methods)");
  eval_cmd->add_option("--seed", ea.seed, "RNG seed (same seed pairs frames across methods)")
      ->capture_default_str();
  eval_cmd->add_option("--fading", ea.fading, "rayleigh | rician")
      ->check(CLI::IsMember({"rayleigh", "rician"}))
      ->capture_default_str();
  eval_cmd->add_option("--kappa", ea.kappa, "Rician K-factor")->capture_default_str();
  eval_cmd->add_option("--mlsd-cap", ea.mlsd_cap,
                       "max exhaustive-search block length (0 = per-modulation default)")
      ->capture_default_str();
  eval_cmd->add_option("--out", ea.out, "output curve CSV");

  // ---- theory ---------------------------------------------------------
  TheoryArgs tha;
  std::string thm1_cfg_file, thm2_cfg_file;
  CLI::App* theory = app.add_subcommand(
      "theory", "Numerical checks of the one-layer linear-attention analysis");
  theory->require_subcommand(1);
  CLI::App* thm1 = theory->add_subcommand(
      "thm1", "Monte-Carlo posterior-deviation error vs the closed-form O(1/k) leading term");
  add_config(thm1, thm1_cfg_file);
  thm1->add_option("--d", tha.d, "input dimension (means fixed at +-e1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  thm1->add_option("--lambda", tha.lambda, "isotropic covariance scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  thm1->add_option("--k-grid", tha.k_grid, "context lengths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  thm1->add_option("--trials", tha.trials, "Monte-Carlo trials per k")->capture_default_str();
  thm1->add_option("--seed", tha.seed, "RNG seed")->capture_default_str();
  thm1->add_option("--out", tha.out, "output CSV (k, mc_error, stderr, leading_term, ratio)");
  CLI::App* thm2 = theory->add_subcommand(
      "thm2", "Agreement of the noise-mismatched threshold rule with the optimal predictor");
  add_config(thm2, thm2_cfg_file);
  thm2->add_option("--d", tha.d, "input dimension (means fixed at +-e1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  thm2->add_option("--xi2", tha.xi2, "training noise variance the model assumes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  thm2->add_option("--sigma2", tha.sigma2, "true test noise variance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  thm2->add_option("--k-grid", tha.k_grid, "context lengths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  thm2->add_option("--trials", tha.trials, "Monte-Carlo trials per k")->capture_default_str();
  thm2->add_option("--seed", tha.seed, "RNG seed")->capture_default_str();
  thm2->add_option("--out", tha.out, "output CSV (k, agreement, stderr)");

  // ---- describe -------------------------------------------------------
  DescribeArgs da;
  std::string describe_cfg_file;
  CLI::App* describe = app.add_subcommand(
      "describe", "Print a model configuration and its exact parameter count");
  add_config(describe, describe_cfg_file);
  describe->add_option("--ckpt", da.ckpt, "read the configuration from a checkpoint");
  describe->add_option("--mod", da.mod, "bpsk | qpsk | 16qam | 64qam")->capture_default_str();
  describe->add_option("--nt", da.n_t, "transmit antennas")->capture_default_str();
  describe->add_option("--nr", da.n_r, "receive antennas")->capture_default_str();
  describe->add_option("--d-e", da.d_e, "embedding width")->capture_default_str();
  describe->add_option("--layers", da.layers, "decoder layers")->capture_default_str();
  describe->add_option("--heads", da.heads, "attention heads")->capture_default_str();
  describe->add_option("--d-ff", da.d_ff, "feed-forward width")->capture_default_str();
  describe->add_option("--t-max", da.t_max, "maximum pairs per frame")->capture_default_str();

  // ---- compare --------------------------------------------------------
  std::vector<std::string> cmp_inputs;
  std::string cmp_out, cmp_cfg_file;
  CLI::App* compare = app.add_subcommand(
      "compare", "Join curve CSVs into one wide CSV keyed on context length");
  add_config(compare, cmp_cfg_file);
  compare->add_option("inputs", cmp_inputs, "curve CSVs to join")->delimiter(',');
  compare->add_option("--out", cmp_out, "output wide CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      merge_config_file(train, train_cfg_file);
      require_value(!ta.ckpt.empty(), "train: --ckpt");
      return run_train(ta);
    }
    if (*eval_cmd) {
      merge_config_file(eval_cmd, eval_cfg_file);
      require_value(!ea.method.empty(), "eval: --method");
      require_value(!ea.mod.empty(), "eval: --mod");
      require_value(!ea.out.empty(), "eval: --out");
      return run_eval_cmd(ea);
    }
    if (*thm1) {
      merge_config_file(thm1, thm1_cfg_file);
      require_value(!tha.out.empty(), "theory thm1: --out");
      return run_thm1(tha);
    }
    if (*thm2) {
      merge_config_file(thm2, thm2_cfg_file);
      require_value(!tha.out.empty(), "theory thm2: --out");
      return run_thm2(tha);
    }
    if (*describe) {
      merge_config_file(describe, describe_cfg_file);
      return run_describe(da);
    }
    if (*compare) {
      merge_config_file(compare, cmp_cfg_file);
      require_value(!cmp_inputs.empty(), "compare: inputs");
      require_value(!cmp_out.empty(), "compare: --out");
      return run_compare(cmp_inputs, cmp_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
