// Python bindings for the detection workbench: constellations, channel
// sampling, the classical baselines, the Transformer detector (load /
// predict / train), the evaluation harness, and the linear-attention
// analysis functions.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "defined/baselines.hpp"
#include "defined/channel.hpp"
#include "defined/checkpoint.hpp"
#include "defined/common.hpp"
#include "defined/constellation.hpp"
#include "defined/csv.hpp"
#include "defined/eval.hpp"
#include "defined/net.hpp"
#include "defined/rng.hpp"
#include "defined/theory.hpp"
#include "defined/training.hpp"

namespace py = pybind11;
using namespace defined;

namespace {

ModelConfig make_model_config(const std::string& mod, int n_t, int n_r, int d_e, int layers,
                              int heads, int d_ff, int t_max) {
  ModelConfig cfg;
  cfg.mod = parse_modulation(mod);
  cfg.n_t = n_t;
  cfg.n_r = n_r;
  cfg.d_e = d_e;
  cfg.n_layers = layers;
  cfg.n_heads = heads;
  cfg.d_ff = d_ff;
  cfg.T_max = t_max;
  cfg.validate();
  return cfg;
}

py::dict config_to_dict(const ModelConfig& cfg) {
  py::dict d;
  d["mod"] = modulation_name(cfg.mod);
  d["n_t"] = cfg.n_t;
  d["n_r"] = cfg.n_r;
  d["d_e"] = cfg.d_e;
  d["layers"] = cfg.n_layers;
  d["heads"] = cfg.n_heads;
  d["d_ff"] = cfg.d_ff;
  d["t_max"] = cfg.T_max;
  return d;
}

std::vector<PairYX> make_context(const CMat& ys, const std::vector<long>& xs) {
  if (ys.cols() != static_cast<long>(xs.size()))
    throw std::invalid_argument("context: ys must have one column per label");
  std::vector<PairYX> context;
  context.reserve(xs.size());
  for (long t = 0; t < ys.cols(); ++t) context.push_back({ys.col(t), xs[static_cast<std::size_t>(t)]});
  return context;
}

/// Thin handle over the float-precision parameter set.
struct Model {
  Params<float> params;

  static Model load(const std::string& path) { return Model{load_checkpoint<float>(path)}; }
  void save(const std::string& path) const { save_checkpoint(path, params); }

  py::tuple predict_one(const CMat& ys, const std::vector<long>& xs, const CVec& y_query) const {
    auto [probs, arg] = predict(params, make_context(ys, xs), y_query);
    return py::make_tuple(Eigen::VectorXd(probs.template cast<double>()), arg);
  }
};

BinaryGaussianTask make_task(const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1,
                             const Eigen::MatrixXd& lambda) {
  BinaryGaussianTask task{mu0, mu1, lambda};
  task.validate();
  return task;
}

py::dict curve_to_dict(const EvalCurve& curve) {
  py::dict d;
  py::list points;
  for (const auto& p : curve.points) {
    py::dict row;
    row["length"] = p.length;
    row["ser"] = p.ser;
    row["stderr"] = p.std_error;
    row["n"] = p.n;
    points.append(row);
  }
  d["points"] = points;
  d["gain_df"] = curve.gain ? py::object(py::float_(*curve.gain)) : py::object(py::none());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Symbol-detection workbench: decision-feedback in-context Transformer "
            "detector, classical baselines, and the linear-attention theory lab.";
  m.attr("__version__") = kVersion;

  // ---- constellations -------------------------------------------------
  m.def(
      "constellation",
      [](const std::string& mod) {
        const Constellation c = build_constellation(parse_modulation(mod));
        CVec points(c.size());
        for (int i = 0; i < c.size(); ++i) points(i) = c.points[static_cast<std::size_t>(i)];
        return points;
      },
      py::arg("mod"),
      "Unit-average-energy alphabet for 'bpsk' | 'qpsk' | '16qam' | '64qam'.");
  m.def(
      "joint_symbol",
      [](const std::string& mod, long index, int n_t) {
        return joint_symbol(build_constellation(parse_modulation(mod)), index, n_t).per_antenna;
      },
      py::arg("mod"), py::arg("index"), py::arg("n_t") = 1,
      "Per-antenna transmit vector for one joint-symbol index (1/sqrt(n_t) power split).");

  // ---- channel ----------------------------------------------------------
  m.def(
      "sample_task",
      [](double snr_lo, double snr_hi, int n_t, int n_r, const std::string& fading, double kappa,
         std::uint64_t seed) {
        Rng rng(seed);
        ChannelTask task = sample_task(parse_fading(fading), kappa, {snr_lo, snr_hi}, n_t, n_r, rng);
        py::dict d;
        d["H"] = task.H;
        d["sigma2"] = task.sigma2;
        return d;
      },
      py::arg("snr_lo"), py::arg("snr_hi"), py::arg("n_t") = 1, py::arg("n_r") = 1,
      py::arg("fading") = "rayleigh", py::arg("kappa") = 0.0, py::arg("seed") = 0,
      "Draw one coherence block: fading matrix H plus noise level sigma2.");
  m.def(
      "generate_frame",
      [](const CMat& H, double sigma2, const std::string& mod, int T, int k, std::uint64_t seed) {
        ChannelTask task{H, sigma2, Fading::Rayleigh, 0.0};
        const Constellation c = build_constellation(parse_modulation(mod));
        Rng rng(seed);
        Frame f = generate_frame(task, c, static_cast<int>(H.cols()), T, k, rng);
        CMat ys(H.rows(), T);
        for (int t = 0; t < T; ++t) ys.col(t) = f.y[static_cast<std::size_t>(t)];
        py::dict d;
        d["x"] = f.x_indices;
        d["y"] = ys;
        return d;
      },
      py::arg("H"), py::arg("sigma2"), py::arg("mod"), py::arg("T"), py::arg("k") = 1,
      py::arg("seed") = 0,
      "Simulate y_t = H x_t + z_t for T uniform joint symbols; returns indices and receives.");

  // ---- classical baselines ---------------------------------------------
  m.def(
      "lmmse_estimate",
      [](const CMat& X, const CMat& Y, double sigma2) {
        LmmseResult r = lmmse_estimate({X, Y, sigma2});
        return py::make_tuple(r.H_hat, r.used_pinv);
      },
      py::arg("X"), py::arg("Y"), py::arg("sigma2"),
      "Regularized channel estimate Y X^H (X X^H + sigma2 I)^-1 -> (H_hat, used_pinv).");
  m.def(
      "project_detect",
      [](const CMat& H_hat, const CVec& y, const std::string& mod, int n_t) {
        return project_detect(H_hat, y, build_constellation(parse_modulation(mod)), n_t);
      },
      py::arg("H_hat"), py::arg("y"), py::arg("mod"), py::arg("n_t") = 1,
      "Nearest joint symbol under the estimated channel (exhaustive argmin).");
  m.def(
      "mmse_df_detect",
      [](const std::vector<long>& x, const CMat& ys, double sigma2, int k, const std::string& mod) {
        Frame f;
        f.task = {CMat::Zero(ys.rows(), 1), sigma2, Fading::Rayleigh, 0.0};
        f.T = static_cast<int>(ys.cols());
        f.k = k;
        f.x_indices = x;
        for (long t = 0; t < ys.cols(); ++t) f.y.push_back(ys.col(t));
        const Constellation c = build_constellation(parse_modulation(mod));
        return mmse_df_detect(f, c, 1);
      },
      py::arg("x"), py::arg("y"), py::arg("sigma2"), py::arg("k"), py::arg("mod"),
      "Decision-directed detection after k pilots (SISO); returns the T-k decisions.");
  m.def(
      "mlsd_detect",
      [](const std::vector<cxd>& y, double sigma2, const std::string& mod, long first_symbol,
         int cap) {
        const Constellation c = build_constellation(parse_modulation(mod));
        return mlsd_detect(y, sigma2, c, first_symbol, cap > 0 ? cap : mlsd_default_cap(c.scheme));
      },
      py::arg("y"), py::arg("sigma2"), py::arg("mod"), py::arg("first_symbol") = 0,
      py::arg("cap") = 0,
      "Non-coherent ML sequence detection for SISO PSK with the first symbol pinned.");

  // ---- transformer detector ----------------------------------------------
  py::class_<Model>(m, "Model", "Float-precision detector checkpoint handle.")
      .def_static("load", &Model::load, py::arg("path"))
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("config", [](const Model& mdl) { return config_to_dict(mdl.params.cfg); })
      .def_property_readonly("param_count", [](const Model& mdl) { return mdl.params.param_count(); })
      .def("predict", &Model::predict_one, py::arg("ys"), py::arg("xs"), py::arg("y_query"),
           "Class probabilities and argmax decision for the query given (ys, xs) context.");

  m.def(
      "param_count",
      [](const std::string& mod, int n_t, int n_r, int d_e, int layers, int heads, int d_ff,
         int t_max) {
        return Params<float>::zeros(make_model_config(mod, n_t, n_r, d_e, layers, heads, d_ff, t_max))
            .param_count();
      },
      py::arg("mod") = "16qam", py::arg("n_t") = 1, py::arg("n_r") = 1, py::arg("d_e") = 64,
      py::arg("layers") = 8, py::arg("heads") = 8, py::arg("d_ff") = 256, py::arg("t_max") = 31,
      "Exact trainable-parameter count for a model geometry.");

  m.def(
      "train",
      [](const std::string& ckpt, const std::string& mod, int n_t, int n_r, int d_e, int layers,
         int heads, int d_ff, int t_max, double snr_lo, double snr_hi, int T, int batch, int steps,
         int steps_finetune, int epoch_steps, double alpha, const std::vector<int>& k_df, double lr,
         int warmup, double clip, bool curriculum, int t_start, int t_step, int epochs_per_stage,
         double plateau, std::uint64_t seed, const std::string& phase, const std::string& init) {
        TrainConfig cfg;
        cfg.model = make_model_config(mod, n_t, n_r, d_e, layers, heads, d_ff, t_max);
        cfg.snr = {snr_lo, snr_hi};
        cfg.T = T;
        cfg.batch_size = batch;
        cfg.steps_pretrain = steps;
        cfg.steps_finetune = steps_finetune;
        cfg.epoch_steps = epoch_steps;
        cfg.alpha = alpha;
        cfg.k_df_choices = k_df;
        cfg.lr = lr;
        cfg.warmup = warmup;
        cfg.clip_norm = clip;
        cfg.curriculum.enabled = curriculum;
        cfg.curriculum.T_start = t_start;
        cfg.curriculum.T_step = t_step;
        cfg.curriculum.epochs_per_stage = epochs_per_stage;
        cfg.plateau_rel_improvement = plateau;
        cfg.seed = seed;
        cfg.ckpt_path = ckpt;
        cfg.run_pretrain = phase != "finetune";
        cfg.run_finetune = phase != "pretrain";
        cfg.validate();
        std::optional<Params<float>> warm;
        if (!init.empty()) warm = load_checkpoint<float>(init);
        TrainResult res;
        {
          py::gil_scoped_release release;
          res = train(cfg, warm ? &*warm : nullptr);
        }
        py::list trace;
        for (const auto& row : res.trace)
          trace.append(py::make_tuple(row.step, row.phase, row.loss));
        py::dict d;
        d["trace"] = trace;
        d["diverged"] = res.diverged;
        d["pretrain_steps"] = res.pretrain_steps;
        d["finetune_steps"] = res.finetune_steps;
        d["ckpt"] = ckpt;
        return d;
      },
      py::arg("ckpt"), py::arg("mod") = "16qam", py::arg("n_t") = 1, py::arg("n_r") = 1,
      py::arg("d_e") = 64, py::arg("layers") = 8, py::arg("heads") = 8, py::arg("d_ff") = 256,
      py::arg("t_max") = 31, py::arg("snr_lo") = 25.0, py::arg("snr_hi") = 35.0, py::arg("T") = 31,
      py::arg("batch") = 512, py::arg("steps") = 4000, py::arg("steps_finetune") = 2000,
      py::arg("epoch_steps") = 1000, py::arg("alpha") = 0.7,
      py::arg("k_df") = std::vector<int>{1, 2, 3, 4}, py::arg("lr") = 3e-4, py::arg("warmup") = 500,
      py::arg("clip") = 1.0, py::arg("curriculum") = true, py::arg("t_start") = 11,
      py::arg("t_step") = 5, py::arg("epochs_per_stage") = 2, py::arg("plateau") = 0.01,
      py::arg("seed") = 0, py::arg("phase") = "both", py::arg("init") = std::string(),
      "Two-phase training (in-context pretraining + decision-feedback fine-tuning); "
      "writes the checkpoint and returns the loss trace.");

  // ---- evaluation harness -------------------------------------------------
  m.def(
      "run_eval",
      [](const std::string& method, const std::string& mod, int n_t, int n_r, double snr,
         int pilots, int T, long prompts, const std::string& ckpt, std::uint64_t seed,
         const std::string& fading, double kappa, int mlsd_cap) {
        EvalConfig cfg;
        cfg.method = parse_eval_method(method);
        cfg.mod = parse_modulation(mod);
        cfg.n_t = n_t;
        cfg.n_r = n_r;
        cfg.snr_db = snr;
        cfg.k = pilots;
        cfg.T = T;
        cfg.n_prompts = prompts;
        cfg.ckpt_path = ckpt;
        cfg.seed = seed;
        cfg.fading = parse_fading(fading);
        cfg.kappa = kappa;
        cfg.mlsd_cap = mlsd_cap;
        cfg.validate();
        EvalCurve curve;
        {
          py::gil_scoped_release release;
          curve = run_eval(cfg);
        }
        return curve_to_dict(curve);
      },
      py::arg("method"), py::arg("mod"), py::arg("n_t") = 1, py::arg("n_r") = 1,
      py::arg("snr") = 30.0, py::arg("pilots") = 1, py::arg("T") = 31, py::arg("prompts") = 8000,
      py::arg("ckpt") = std::string(), py::arg("seed") = 0, py::arg("fading") = "rayleigh",
      py::arg("kappa") = 0.0, py::arg("mlsd_cap") = 0,
      "Symbol-error-rate curve over context length; same seed pairs frames across methods.");

  // ---- linear-attention analysis ------------------------------------------
  m.def(
      "bayes_posterior",
      [](const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1, const Eigen::MatrixXd& lambda,
         const Eigen::VectorXd& q) { return bayes_posterior(make_task(mu0, mu1, lambda), q); },
      py::arg("mu0"), py::arg("mu1"), py::arg("lambda"), py::arg("q"),
      "Exact posterior P(x=1 | y_query) for the binary Gaussian mixture.");
  m.def(
      "error_leading_term",
      [](const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1, const Eigen::MatrixXd& lambda,
         const Eigen::VectorXd& q, long k) {
        return error_leading_term(make_task(mu0, mu1, lambda), q, k);
      },
      py::arg("mu0"), py::arg("mu1"), py::arg("lambda"), py::arg("q"), py::arg("k"),
      "Closed-form 1/k leading term of the expected squared posterior deviation.");
  m.def(
      "prediction_error_mc",
      [](const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1, const Eigen::MatrixXd& lambda,
         const Eigen::VectorXd& q, long k, long trials, std::uint64_t seed) {
        McResult r = prediction_error_mc(make_task(mu0, mu1, lambda), q, k, trials, seed);
        return py::make_tuple(r.value, r.std_error);
      },
      py::arg("mu0"), py::arg("mu1"), py::arg("lambda"), py::arg("q"), py::arg("k"),
      py::arg("trials"), py::arg("seed") = 0,
      "Monte-Carlo posterior deviation of the optimal one-layer linear model -> (value, stderr).");
  m.def(
      "mismatch_agreement",
      [](double xi2, const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1,
         const Eigen::MatrixXd& lambda, long k, long trials, std::uint64_t seed) {
        McResult r = mismatch_agreement(xi2, make_task(mu0, mu1, lambda), k, trials, seed);
        return py::make_tuple(r.value, r.std_error);
      },
      py::arg("xi2"), py::arg("mu0"), py::arg("mu1"), py::arg("lambda"), py::arg("k"),
      py::arg("trials"), py::arg("seed") = 0,
      "Agreement rate of the noise-mismatched threshold rule with the optimal predictor.");
}
