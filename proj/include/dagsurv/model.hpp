#pragma once

// DAGSurv: a conditional VAE for discrete-time survival whose encoder and
// decoder pass through the linear SEM of a known weighted DAG.
//
//   encoder   mu_Z = f_e([x, t/M]) (I - A)          (row layout of Z^T = (I - A^T) f_e(X~^T))
//   sample    z    = mu_Z + eps,  eps ~ N(0, I)
//   decoder   h    = g([x, z]) (I - A)^{-1}          (row layout of (I - A^T)^{-1} g(.))
//             pmf  = softmax(f_d(h))                  over bins 0..M
//
// Every batch tensor is sample-major: one row per instance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dagsurv/autodiff.hpp"
#include "dagsurv/errors.hpp"
#include "dagsurv/graph.hpp"
#include "dagsurv/metrics.hpp"
#include "dagsurv/synthgen.hpp"

namespace dagsurv {

enum class Activation { ReLU, SELU };

inline std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "selu"; }

inline Activation parse_activation(const std::string& s) {
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "relu") return Activation::ReLU;
  if (lower == "selu") return Activation::SELU;
  throw ConfigError("unknown activation '" + s + "' (expected relu or selu)");
}

inline ad::Value activate(const ad::Value& v, Activation a) {
  return a == Activation::ReLU ? ad::relu(v) : ad::selu(v);
}

// ---- MLP -----------------------------------------------------------------

struct Linear {
  ad::Parameter weight;  // in x out
  ad::Parameter bias;    // 1 x out
};

// in -> hidden_layers x (Linear + activation) -> Linear -> out.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::string name, Eigen::Index in, int hidden_layers, Eigen::Index hidden, Eigen::Index out,
      Activation act, std::mt19937_64& rng)
      : act_(act) {
    if (hidden_layers < 0 || (hidden_layers > 0 && hidden < 1))
      throw ConfigError(name + ": invalid layer configuration");
    Eigen::Index width = in;
    for (int k = 0; k <= hidden_layers; ++k) {
      const Eigen::Index next = k == hidden_layers ? out : hidden;
      layers_.push_back(make_linear(name + "." + std::to_string(k), width, next, rng));
      width = next;
    }
  }

  // `track` selects whether parameters are recorded for differentiation.
  ad::Value forward(ad::Tape& tape, ad::Value x, bool track) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      auto& l = layers_[k];
      auto w = track ? tape.param(l.weight) : tape.constant(l.weight.value);
      auto b = track ? tape.param(l.bias) : tape.constant(l.bias.value);
      x = ad::add_row(ad::matmul(x, w), b);
      if (k + 1 < layers_.size()) x = activate(x, act_);
    }
    return x;
  }

  std::vector<ad::Parameter*> parameters() {
    std::vector<ad::Parameter*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  Eigen::Index in_width() const { return layers_.front().weight.value.rows(); }
  Eigen::Index out_width() const { return layers_.back().weight.value.cols(); }

 private:
  // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  static Linear make_linear(const std::string& name, Eigen::Index in, Eigen::Index out,
                            std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(in, out), b(1, out);
    for (Eigen::Index j = 0; j < out; ++j)
      for (Eigen::Index i = 0; i < in; ++i) w(i, j) = u(rng);
    for (Eigen::Index j = 0; j < out; ++j) b(0, j) = u(rng);
    return {ad::Parameter(name + ".weight", std::move(w)), ad::Parameter(name + ".bias", std::move(b))};
  }

  std::vector<Linear> layers_;
  Activation act_ = Activation::ReLU;
};

// ---- SEM transforms as differentiable ops ---------------------------------

// Z = H (I - A): each row is (I - A^T) applied to that instance's node vector.
inline ad::Value sem_encode(const Dag& dag, const ad::Value& h) {
  ad::Tape& t = *h.tape();
  Matrix out = sem_backward(dag, h.data().transpose()).transpose();
  std::size_t ih = h.id();
  return t.record(std::move(out), "sem_encode", {ih}, [&dag, ih](ad::Tape& tp, std::size_t self) {
    if (tp.needs_grad(ih))
      tp.accumulate(ih, sem_backward_adjoint(dag, tp.grad(self).transpose()).transpose());
  });
}

// R = M (I - A)^{-1}: each row is (I - A^T)^{-1} applied to that instance.
inline ad::Value sem_decode(const Dag& dag, const ad::Value& m) {
  ad::Tape& t = *m.tape();
  Matrix out = sem_forward(dag, m.data().transpose()).transpose();
  std::size_t im = m.id();
  return t.record(std::move(out), "sem_decode", {im}, [&dag, im](ad::Tape& tp, std::size_t self) {
    if (tp.needs_grad(im))
      tp.accumulate(im, sem_forward_adjoint(dag, tp.grad(self).transpose()).transpose());
  });
}

// ---- model ---------------------------------------------------------------

struct ModelConfig {
  int encoder_layers = 5;
  int encoder_hidden = 128;
  int decoder_layers = 3;
  int decoder_hidden = 64;
  // The mixer g: [x, z] (2L+1) -> L+1. Zero hidden width means "use
  // decoder_hidden".
  int mixer_layers = 1;
  int mixer_hidden = 0;
  Activation activation = Activation::ReLU;
  // false skips both SEM transforms (a plain CVAE).
  bool use_sem = true;
};

// Per-covariate affine standardization fitted on the training set.
struct Standardizer {
  Matrix mean;   // 1 x L
  Matrix scale;  // 1 x L

  static Standardizer identity(Eigen::Index l) {
    return {Matrix::Zero(1, l), Matrix::Ones(1, l)};
  }

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    s.scale.resize(1, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double var = (x.col(j).array() - s.mean(0, j)).square().mean();
      double sd = std::sqrt(var);
      s.scale(0, j) = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    return (x.rowwise() - mean.row(0)).array().rowwise() / scale.row(0).array();
  }
};

class DagSurvModel {
 public:
  DagSurvModel(Dag dag, int horizon, ModelConfig cfg, std::uint64_t seed)
      : dag_(std::move(dag)), horizon_(horizon), cfg_(cfg) {
    if (dag_.num_nodes() < 2) throw DimensionError("model needs at least one covariate");
    if (horizon_ < 1) throw ConfigError("horizon must be >= 1");
    const auto nodes = static_cast<Eigen::Index>(dag_.num_nodes());
    const Eigen::Index l = nodes - 1;
    const int mixer_hidden = cfg_.mixer_hidden > 0 ? cfg_.mixer_hidden : cfg_.decoder_hidden;
    std::mt19937_64 rng(seed);
    encoder_ = Mlp("encoder", nodes, cfg_.encoder_layers, cfg_.encoder_hidden, nodes,
                   cfg_.activation, rng);
    mixer_ = Mlp("mixer", l + nodes, cfg_.mixer_layers, mixer_hidden, nodes, cfg_.activation, rng);
    decoder_ = Mlp("decoder", nodes, cfg_.decoder_layers, cfg_.decoder_hidden, horizon_ + 1,
                   cfg_.activation, rng);
    standardizer_ = Standardizer::identity(l);
  }

  const Dag& dag() const { return dag_; }
  std::size_t num_covariates() const { return dag_.num_nodes() - 1; }
  std::size_t latent_dim() const { return dag_.num_nodes(); }
  int horizon() const { return horizon_; }
  const ModelConfig& config() const { return cfg_; }
  ModelConfig& config() { return cfg_; }

  Mlp& encoder() { return encoder_; }
  Mlp& mixer() { return mixer_; }
  Mlp& decoder() { return decoder_; }

  const Standardizer& standardizer() const { return standardizer_; }
  void set_standardizer(Standardizer s) { standardizer_ = std::move(s); }

  // Bin grid the model was trained on; used to bin evaluation data.
  const TimeGrid& grid() const { return grid_; }
  void set_grid(const TimeGrid& g) { grid_ = g; }

  std::vector<ad::Parameter*> parameters() {
    std::vector<ad::Parameter*> out;
    for (auto* m : {&encoder_, &mixer_, &decoder_})
      for (auto* p : m->parameters()) out.push_back(p);
    return out;
  }

  std::vector<Matrix> snapshot() {
    std::vector<Matrix> out;
    for (auto* p : parameters()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Matrix>& values) {
    auto ps = parameters();
    if (values.size() != ps.size()) throw DimensionError("snapshot does not match model");
    for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value = values[k];
  }

  // x_aug: B x (L+1) = [standardized covariates, t / M]. Returns mu_Z.
  ad::Value encode(ad::Tape& tape, const ad::Value& x_aug, bool track = true) {
    if (static_cast<std::size_t>(x_aug.cols()) != latent_dim())
      throw DimensionError("encoder input must have L+1 = " + std::to_string(latent_dim()) +
                           " columns");
    auto h = encoder_.forward(tape, x_aug, track);
    return cfg_.use_sem ? sem_encode(dag_, h) : h;
  }

  // x: B x L standardized covariates, z: B x (L+1). Returns the pmf, B x (M+1).
  ad::Value decode(ad::Tape& tape, const ad::Value& x, const ad::Value& z, bool track = true) {
    return ad::softmax_rows(decode_logits(tape, x, z, track));
  }

  ad::Value decode_logits(ad::Tape& tape, const ad::Value& x, const ad::Value& z,
                          bool track = true) {
    if (static_cast<std::size_t>(x.cols()) != num_covariates())
      throw DimensionError("decoder covariates must have L columns");
    if (static_cast<std::size_t>(z.cols()) != latent_dim())
      throw DimensionError("latent code must have L+1 columns");
    auto m = mixer_.forward(tape, ad::concat_cols(x, z), track);
    auto h = cfg_.use_sem ? sem_decode(dag_, m) : m;
    return decoder_.forward(tape, h, track);
  }

 private:
  Dag dag_;
  int horizon_;
  ModelConfig cfg_;
  Mlp encoder_, mixer_, decoder_;
  Standardizer standardizer_;
  TimeGrid grid_;
};

// ---- survival distribution -----------------------------------------------

struct SurvivalPrediction {
  Eigen::RowVectorXd pmf;  // length M+1

  // F(k) = sum_{j <= k} pmf_j
  Eigen::RowVectorXd cdf() const {
    Eigen::RowVectorXd f(pmf.size());
    double acc = 0.0;
    for (Eigen::Index k = 0; k < pmf.size(); ++k) {
      acc += pmf(k);
      f(k) = acc;
    }
    return f;
  }

  // S(k) = 1 - F(k)
  Eigen::RowVectorXd survival() const { return (1.0 - cdf().array()).matrix(); }
};

// Row-wise cumulative sums: the cdf for every instance.
inline Matrix cdf_rows(const Matrix& pmf) {
  Matrix f(pmf.rows(), pmf.cols());
  for (Eigen::Index r = 0; r < pmf.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < pmf.cols(); ++k) {
      acc += pmf(r, k);
      f(r, k) = acc;
    }
  }
  return f;
}

inline constexpr double kLogFloor = 1e-8;

// delta ln(pmf[t]) + (1 - delta) ln(1 - F(t)), each log argument floored by +1e-8.
inline double survival_log_likelihood(const SurvivalPrediction& pred, int t_bin, int delta) {
  if (t_bin < 0 || t_bin >= pred.pmf.size()) throw DimensionError("t_bin outside [0, M]");
  if (delta == 1) return std::log(pred.pmf(t_bin) + kLogFloor);
  // S(t) as the tail sum; 1 - F(t) cancels badly near the last bin.
  const Eigen::Index tail = pred.pmf.size() - t_bin - 1;
  return std::log(pred.pmf.tail(tail).sum() + kLogFloor);
}

// KL(N(mu, I) || N(0, I)) = |mu|^2 / 2.
inline double kl_term(std::span<const double> mu) {
  double s = 0.0;
  for (double m : mu) s += m * m;
  return 0.5 * s;
}

// ---- batches and the ELBO -------------------------------------------------

struct Batch {
  Matrix x;                 // B x L standardized covariates
  std::vector<int> t_bins;  // B
  std::vector<int> events;  // B

  std::size_t size() const { return t_bins.size(); }
};

inline Batch make_batch(const DagSurvModel& model, const SurvivalDataset& ds,
                        std::span<const std::size_t> idx) {
  if (!ds.discretized()) throw Error("dataset must be discretized before training");
  if (ds.num_covariates() != model.num_covariates())
    throw DimensionError("dataset has " + std::to_string(ds.num_covariates()) +
                         " covariates, model expects " + std::to_string(model.num_covariates()));
  Batch b;
  Matrix raw(static_cast<Eigen::Index>(idx.size()), ds.covariates.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    raw.row(static_cast<Eigen::Index>(k)) = ds.covariates.row(static_cast<Eigen::Index>(idx[k]));
    int bin = ds.time_bins[idx[k]];
    if (bin > model.horizon()) throw DimensionError("time bin beyond the model horizon");
    b.t_bins.push_back(bin);
    b.events.push_back(ds.events[idx[k]]);
  }
  b.x = model.standardizer().apply(raw);
  return b;
}

inline Batch make_batch(const DagSurvModel& model, const SurvivalDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(model, ds, idx);
}

struct LossParts {
  ad::Value loss;       // 1x1
  ad::Value mu;         // B x (L+1)
  ad::Value pmf;        // B x (M+1)
  double mean_log_likelihood = 0.0;
  double mean_kl = 0.0;
};

// loss = -(mean log-likelihood - kl_weight * mean KL), with z = mu + noise.
// `noise` is B x (L+1); pass zeros for the deterministic z = mu path.
inline LossParts elbo_loss(ad::Tape& tape, DagSurvModel& model, const Batch& batch,
                           const Matrix& noise, double kl_weight) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (b == 0) throw EmptyDatasetError("empty batch");
  const Eigen::Index width = model.horizon() + 1;
  const auto nodes = static_cast<Eigen::Index>(model.latent_dim());
  if (noise.rows() != b || noise.cols() != nodes) throw DimensionError("noise has wrong shape");

  Matrix x_aug(b, nodes);
  x_aug.leftCols(nodes - 1) = batch.x;
  Matrix event_mask = Matrix::Zero(b, width);
  Matrix after_mask = Matrix::Zero(b, width);
  Matrix delta(b, 1), one_minus_delta(b, 1);
  for (Eigen::Index r = 0; r < b; ++r) {
    const int t = batch.t_bins[static_cast<std::size_t>(r)];
    x_aug(r, nodes - 1) = static_cast<double>(t) / static_cast<double>(model.horizon());
    event_mask(r, t) = 1.0;
    after_mask.row(r).tail(width - t - 1).setOnes();
    delta(r, 0) = batch.events[static_cast<std::size_t>(r)];
    one_minus_delta(r, 0) = 1.0 - delta(r, 0);
  }

  auto mu = model.encode(tape, tape.constant(std::move(x_aug)));
  auto z = ad::add(mu, tape.constant(noise));
  auto pmf = model.decode(tape, tape.constant(batch.x), z);

  auto f = ad::row_sum(ad::mul_const(pmf, event_mask));
  auto surv = ad::row_sum(ad::mul_const(pmf, after_mask));
  auto log_f = ad::log(ad::add_scalar(f, kLogFloor));
  auto log_s = ad::log(ad::add_scalar(surv, kLogFloor));
  auto ll = ad::add(ad::mul_const(log_f, delta), ad::mul_const(log_s, one_minus_delta));
  auto mean_ll = ad::mean(ll);
  auto mean_kl = ad::scale(ad::sum_squares(mu), 0.5 / static_cast<double>(b));
  auto loss = ad::scale(ad::sub(mean_ll, ad::scale(mean_kl, kl_weight)), -1.0);
  return {loss, mu, pmf, mean_ll.scalar(), mean_kl.scalar()};
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n01(rng);
  return m;
}

// z = mu + eps, eps ~ N(0, I) drawn from `seed`.
inline Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix eps = standard_normal(mu.size(), 1, rng);
  return mu + eps.col(0);
}


// ---- prediction ----------------------------------------------------------

// Averages the pmf over `num_latent_samples` draws z ~ N(0, I); zero draws
// means the single deterministic z = 0. `x_raw` is N x L, unstandardized.
// Returns N x (M+1).
inline Matrix predict_pmf(DagSurvModel& model, const Matrix& x_raw, int num_latent_samples,
                          std::uint64_t seed) {
  if (static_cast<std::size_t>(x_raw.cols()) != model.num_covariates())
    throw DimensionError("expected " + std::to_string(model.num_covariates()) + " covariates");
  if (num_latent_samples < 0) throw ConfigError("num_latent_samples must be >= 0");
  const Eigen::Index n = x_raw.rows();
  const auto nodes = static_cast<Eigen::Index>(model.latent_dim());
  const Matrix x = model.standardizer().apply(x_raw);
  std::mt19937_64 rng(seed);
  const int draws = std::max(1, num_latent_samples);
  Matrix acc = Matrix::Zero(n, model.horizon() + 1);
  for (int d = 0; d < draws; ++d) {
    Matrix z = num_latent_samples == 0 ? Matrix::Zero(n, nodes) : standard_normal(n, nodes, rng);
    ad::Tape tape;
    auto pmf = model.decode(tape, tape.constant(x), tape.constant(std::move(z)), false);
    acc += pmf.data();
  }
  if (draws > 1) acc /= static_cast<double>(draws);
  return acc;
}

// Single-instance convenience wrapper around predict_pmf.
inline SurvivalPrediction predict(DagSurvModel& model, const Eigen::RowVectorXd& x_raw,
                                  int num_latent_samples, std::uint64_t seed) {
  Matrix x = x_raw;
  return {predict_pmf(model, x, num_latent_samples, seed).row(0)};
}

// C_td of the model on a discretized dataset, risk F(t_i | x_j).
inline double evaluate_ctd(DagSurvModel& model, const SurvivalDataset& ds, int num_latent_samples,
                           std::uint64_t seed) {
  Matrix cdf = cdf_rows(predict_pmf(model, ds.covariates, num_latent_samples, seed));
  return ctd(cdf, ds.time_bins, ds.events);
}

// ---- training ------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 256;
  int epochs = 500;
  int patience = 20;
  // Early stopping is not considered before this many epochs; at lr 1e-5 the
  // validation C_td sits on its initial plateau for roughly 100 epochs.
  int min_epochs = 150;
  std::uint64_t seed = 0;
  double kl_weight = 1.0;
  // Latent draws averaged when scoring the validation set after each epoch.
  int val_latent_samples = 8;
  bool standardize = true;

  void check() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(kl_weight >= 0.0)) throw ConfigError("kl_weight must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (epochs < 0 || patience < 1) throw ConfigError("need epochs >= 0 and patience >= 1");
    if (min_epochs < 0) throw ConfigError("min_epochs must be >= 0");
    if (val_latent_samples < 0) throw ConfigError("val_latent_samples must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ctd = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;  // -1: no epoch ran, parameters are the initial ones
  double best_val_ctd = std::numeric_limits<double>::quiet_NaN();
};

// Minibatch Adam on the negative ELBO. After each epoch the validation C_td
// is computed; the best-scoring parameters are kept and, once `min_epochs`
// have run, training stops after `patience` epochs without improvement.
// Deterministic given config.seed.
inline TrainResult train(DagSurvModel& model, const SurvivalDataset& train_set,
                         const SurvivalDataset& val_set, const TrainConfig& cfg) {
  cfg.check();
  if (train_set.size() == 0) throw EmptyDatasetError("training set is empty");
  if (val_set.size() == 0) throw EmptyDatasetError("validation set is empty");
  if (!train_set.discretized() || !val_set.discretized())
    throw Error("datasets must be discretized before training");

  TrainResult result;
  if (cfg.epochs == 0) return result;

  if (cfg.standardize) model.set_standardizer(Standardizer::fit(train_set.covariates));
  model.set_grid(train_set.grid);

  const auto nodes = static_cast<Eigen::Index>(model.latent_dim());
  std::mt19937_64 rng(cfg.seed);
  auto params = model.parameters();
  ad::Adam opt(params, ad::AdamOptions{cfg.lr});
  const std::uint64_t val_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto best = model.snapshot();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Batch batch = make_batch(model, train_set, idx);
      Matrix noise = standard_normal(static_cast<Eigen::Index>(batch.size()), nodes, rng);
      ad::Tape tape;
      opt.zero_grad();
      auto parts = elbo_loss(tape, model, batch, noise, cfg.kl_weight);
      tape.backward(parts.loss);
      opt.step();
      loss_sum += parts.loss.scalar() * static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_ctd = evaluate_ctd(model, val_set, cfg.val_latent_samples, val_seed);
    result.history.push_back(rec);
    if (!std::isfinite(rec.train_loss)) throw Error("training diverged: non-finite loss");

    if (result.best_epoch < 0 || rec.val_ctd > result.best_val_ctd) {
      result.best_epoch = epoch;
      result.best_val_ctd = rec.val_ctd;
      best = model.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience && epoch + 1 >= cfg.min_epochs) {
      break;
    }
  }
  model.restore(best);
  return result;
}

inline std::string format_history_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,val_ctd\n";
  for (const auto& e : r.history)
    out += std::to_string(e.epoch) + ',' + io::format_double(e.train_loss) + ',' +
           io::format_double(e.val_ctd) + '\n';
  return out;
}

}  // namespace dagsurv
