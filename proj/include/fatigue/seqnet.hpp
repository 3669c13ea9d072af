#pragma once

// Sequence regressors over variable-length feature sequences:
//   lstm      readout(h_T)
//   lstm_sa   readout(z_T), z_T = V softmax(K^T q_T / sqrt(D_a))
//   lstm_csa  lstm_sa trained with L = (y_hat - y)^2 + lambda * T * sum_t |a_t - a_{t-1}|
// Gradients are computed by hand (BPTT) and verified by central differences.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fatigue/common.hpp"

namespace fatigue::seqnet {

enum class Variant { lstm, lstm_sa, lstm_csa };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::lstm: return "lstm";
    case Variant::lstm_sa: return "lstm_sa";
    case Variant::lstm_csa: return "lstm_csa";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : {Variant::lstm, Variant::lstm_sa, Variant::lstm_csa})
    if (variant_name(v) == s) return v;
  return std::nullopt;
}

inline bool has_attention(Variant v) { return v != Variant::lstm; }

// Gate blocks are stacked [input; forget; candidate; output].
struct LstmParams {
  Eigen::MatrixXd Wx;  // 4H x D
  Eigen::MatrixXd Wh;  // 4H x H
  Eigen::VectorXd b;   // 4H
};

struct AttentionParams {
  Eigen::MatrixXd Wq, Wk, Wv;  // each A x H
};

struct Params {
  LstmParams lstm;
  std::optional<AttentionParams> attn;
  Eigen::VectorXd readout_w;
  double readout_b = 0.0;

  // Every trainable tensor as a flat view, in a fixed order.
  std::vector<std::span<double>> tensors() {
    std::vector<std::span<double>> t;
    auto add = [&](auto& m) { t.emplace_back(m.data(), static_cast<std::size_t>(m.size())); };
    add(lstm.Wx), add(lstm.Wh), add(lstm.b);
    if (attn) add(attn->Wq), add(attn->Wk), add(attn->Wv);
    add(readout_w);
    t.emplace_back(&readout_b, 1);
    return t;
  }

  std::size_t size() {
    std::size_t n = 0;
    for (auto s : tensors()) n += s.size();
    return n;
  }

  Params zeros_like() const {
    Params z;
    z.lstm.Wx = Eigen::MatrixXd::Zero(lstm.Wx.rows(), lstm.Wx.cols());
    z.lstm.Wh = Eigen::MatrixXd::Zero(lstm.Wh.rows(), lstm.Wh.cols());
    z.lstm.b = Eigen::VectorXd::Zero(lstm.b.size());
    if (attn)
      z.attn = AttentionParams{Eigen::MatrixXd::Zero(attn->Wq.rows(), attn->Wq.cols()),
                               Eigen::MatrixXd::Zero(attn->Wk.rows(), attn->Wk.cols()),
                               Eigen::MatrixXd::Zero(attn->Wv.rows(), attn->Wv.cols())};
    z.readout_w = Eigen::VectorXd::Zero(readout_w.size());
    return z;
  }
};

struct SeqModel {
  Variant variant = Variant::lstm;
  int input_dim = 0;
  int hidden = 128;
  int attn_dim = 128;
  double lambda_csa = 0.1;
  Params params;
  Eigen::VectorXd input_mean;   // per-feature standardization from training rows
  Eigen::VectorXd input_scale;
};

// Shapes only; values zero. Use init_params for a trainable start.
inline SeqModel make_model(Variant v, int input_dim, int hidden, int attn_dim, double lambda_csa = 0.1) {
  SeqModel m;
  m.variant = v;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.attn_dim = attn_dim;
  m.lambda_csa = lambda_csa;
  m.params.lstm.Wx = Eigen::MatrixXd::Zero(4 * hidden, input_dim);
  m.params.lstm.Wh = Eigen::MatrixXd::Zero(4 * hidden, hidden);
  m.params.lstm.b = Eigen::VectorXd::Zero(4 * hidden);
  if (has_attention(v))
    m.params.attn = AttentionParams{Eigen::MatrixXd::Zero(attn_dim, hidden), Eigen::MatrixXd::Zero(attn_dim, hidden),
                                    Eigen::MatrixXd::Zero(attn_dim, hidden)};
  m.params.readout_w = Eigen::VectorXd::Zero(has_attention(v) ? attn_dim : hidden);
  m.input_mean = Eigen::VectorXd::Zero(input_dim);
  m.input_scale = Eigen::VectorXd::Ones(input_dim);
  return m;
}

// uniform(-1/sqrt(H), 1/sqrt(H)) everywhere, then forget-gate bias = 1.
inline void init_params(SeqModel& m, std::uint64_t seed, double scale = 0.0) {
  const double a = scale > 0.0 ? scale : 1.0 / std::sqrt(static_cast<double>(m.hidden));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-a, a);
  for (auto t : m.params.tensors())
    for (double& v : t) v = u(rng);
  m.params.lstm.b.segment(m.hidden, m.hidden).setOnes();
}

// ---------------------------------------------------------------------------
// Forward pieces

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace detail

struct LstmCache {
  Eigen::MatrixXd xs;                     // D x T inputs as columns
  Eigen::MatrixXd i, f, g, o, c, tc, h;  // H x T each
};

// X is T x D (already standardized). Returns every hidden state (columns of
// cache.h) plus what backprop needs.
inline LstmCache lstm_forward(const Eigen::MatrixXd& X, const LstmParams& p) {
  const Eigen::Index H = p.Wh.cols();
  if (X.cols() != p.Wx.cols()) throw ShapeError("lstm_forward: input width does not match parameters");
  if (X.rows() < 1) throw ShapeError("lstm_forward: empty sequence");
  const Eigen::Index T = X.rows();
  LstmCache k;
  k.xs = X.transpose();
  Eigen::MatrixXd pre = p.Wx * k.xs;
  pre.colwise() += p.b;
  for (auto* m : {&k.i, &k.f, &k.g, &k.o, &k.c, &k.tc, &k.h}) m->resize(H, T);
  Eigen::VectorXd hprev = Eigen::VectorXd::Zero(H), cprev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd z(4 * H);
  for (Eigen::Index t = 0; t < T; ++t) {
    z.noalias() = pre.col(t) + p.Wh * hprev;
    for (Eigen::Index j = 0; j < H; ++j) {
      const double ig = detail::sigmoid(z(j));
      const double fg = detail::sigmoid(z(H + j));
      const double gg = std::tanh(z(2 * H + j));
      const double og = detail::sigmoid(z(3 * H + j));
      const double c = fg * cprev(j) + ig * gg;
      const double tc = std::tanh(c);
      k.i(j, t) = ig, k.f(j, t) = fg, k.g(j, t) = gg, k.o(j, t) = og;
      k.c(j, t) = c, k.tc(j, t) = tc, k.h(j, t) = og * tc;
    }
    hprev = k.h.col(t);
    cprev = k.c.col(t);
  }
  return k;
}

struct AttentionTrace {
  Eigen::VectorXd alpha;  // T, a probability vector
  Eigen::VectorXd z;      // A
  Eigen::VectorXd scores;  // pre-softmax, already divided by sqrt(A)
  Eigen::MatrixXd K, V;    // A x T
  Eigen::VectorXd q;       // A, last query column
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& s) {
  const double mx = s.maxCoeff();
  Eigen::VectorXd e = (s.array() - mx).exp();
  return e / e.sum();
}

// H is D_l x T (one column per step).
inline AttentionTrace self_attention(const Eigen::MatrixXd& H, const AttentionParams& a) {
  if (H.cols() < 1) throw ShapeError("self_attention: empty sequence");
  if (H.rows() != a.Wk.cols()) throw ShapeError("self_attention: hidden size mismatch");
  AttentionTrace tr;
  tr.K = a.Wk * H;
  tr.V = a.Wv * H;
  tr.q = a.Wq * H.col(H.cols() - 1);
  tr.scores = tr.K.transpose() * tr.q / std::sqrt(static_cast<double>(a.Wk.rows()));
  tr.alpha = softmax(tr.scores);
  tr.z = tr.V * tr.alpha;
  return tr;
}

// Sum of |a_t - a_{t-1}| over t = 2..T.
inline double total_variation(const Eigen::VectorXd& alpha) {
  double tv = 0.0;
  for (Eigen::Index t = 1; t < alpha.size(); ++t) tv += std::abs(alpha(t) - alpha(t - 1));
  return tv;
}

// Consistency penalty T * sum_{t=2..T} |a_t - a_{t-1}|.
inline double csa_penalty(const Eigen::VectorXd& alpha) {
  return static_cast<double>(alpha.size()) * total_variation(alpha);
}

inline double loss(double y_hat, double y, const AttentionTrace* trace, Variant v, double lambda_csa) {
  double l = (y_hat - y) * (y_hat - y);
  if (v == Variant::lstm_csa && trace) l += lambda_csa * csa_penalty(trace->alpha);
  return l;
}

struct Forward {
  LstmCache lstm;
  std::optional<AttentionTrace> attn;
  double y_hat = 0.0;
};

inline Forward forward_standardized(const SeqModel& m, const Eigen::MatrixXd& Xs) {
  Forward fw;
  fw.lstm = lstm_forward(Xs, m.params.lstm);
  if (has_attention(m.variant)) {
    if (!m.params.attn) throw ShapeError("attention variant without attention parameters");
    fw.attn = self_attention(fw.lstm.h, *m.params.attn);
    fw.y_hat = m.params.readout_w.dot(fw.attn->z) + m.params.readout_b;
  } else {
    fw.y_hat = m.params.readout_w.dot(fw.lstm.h.col(fw.lstm.h.cols() - 1)) + m.params.readout_b;
  }
  return fw;
}

inline Eigen::MatrixXd standardize_input(const SeqModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.input_dim) throw ShapeError("sequence width " + std::to_string(X.cols()) +
                                                " does not match model input " + std::to_string(m.input_dim));
  return (X.rowwise() - m.input_mean.transpose()).array().rowwise() / m.input_scale.transpose().array();
}

struct Prediction {
  double y_hat = 0.0;  // raw; clip at report time
  std::optional<AttentionTrace> trace;
};

inline Prediction predict_seq(const SeqModel& m, const Eigen::MatrixXd& X) {
  auto fw = forward_standardized(m, standardize_input(m, X));
  return {fw.y_hat, std::move(fw.attn)};
}

// ---------------------------------------------------------------------------
// Backward

namespace detail {
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

// d(loss)/d(params) for one standardized sample; returns the loss.
inline double loss_and_grad(const SeqModel& m, const Eigen::MatrixXd& Xs, double y, Params& grad) {
  const Forward fw = forward_standardized(m, Xs);
  const auto& p = m.params;
  const auto& k = fw.lstm;
  const Eigen::Index H = m.hidden, T = Xs.rows();
  grad = p.zeros_like();

  const double err = fw.y_hat - y;
  double total = err * err;
  const double dy = 2.0 * err;
  grad.readout_b = dy;

  Eigen::MatrixXd dH = Eigen::MatrixXd::Zero(H, T);
  if (fw.attn) {
    const auto& tr = *fw.attn;
    const auto& a = *p.attn;
    auto& ga = *grad.attn;
    grad.readout_w = dy * tr.z;
    const Eigen::VectorXd dz = dy * p.readout_w;
    Eigen::VectorXd dalpha = tr.V.transpose() * dz;
    if (m.variant == Variant::lstm_csa) {
      total += m.lambda_csa * csa_penalty(tr.alpha);
      const double scale = m.lambda_csa * static_cast<double>(T);
      for (Eigen::Index t = 0; t < T; ++t) {
        const double left = t > 0 ? detail::sign(tr.alpha(t) - tr.alpha(t - 1)) : 0.0;
        const double right = t + 1 < T ? detail::sign(tr.alpha(t + 1) - tr.alpha(t)) : 0.0;
        dalpha(t) += scale * (left - right);
      }
    }
    const Eigen::MatrixXd dV = dz * tr.alpha.transpose();
    const Eigen::VectorXd ds = tr.alpha.array() * (dalpha.array() - tr.alpha.dot(dalpha));
    const Eigen::VectorXd dsc = ds / std::sqrt(static_cast<double>(m.attn_dim));
    const Eigen::MatrixXd dK = tr.q * dsc.transpose();
    const Eigen::VectorXd dq = tr.K * dsc;
    ga.Wk.noalias() = dK * k.h.transpose();
    ga.Wv.noalias() = dV * k.h.transpose();
    ga.Wq.noalias() = dq * k.h.col(T - 1).transpose();
    dH.noalias() = a.Wk.transpose() * dK + a.Wv.transpose() * dV;
    dH.col(T - 1) += a.Wq.transpose() * dq;
  } else {
    grad.readout_w = dy * k.h.col(T - 1);
    dH.col(T - 1) = dy * p.readout_w;
  }

  // Backprop through time.
  Eigen::MatrixXd dZ(4 * H, T);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H), dc_next = Eigen::VectorXd::Zero(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    for (Eigen::Index j = 0; j < H; ++j) {
      const double dh = dH(j, t) + dh_next(j);
      const double ig = k.i(j, t), fg = k.f(j, t), gg = k.g(j, t), og = k.o(j, t), tc = k.tc(j, t);
      const double cprev = t > 0 ? k.c(j, t - 1) : 0.0;
      const double dc = dc_next(j) + dh * og * (1.0 - tc * tc);
      dZ(j, t) = dc * gg * ig * (1.0 - ig);
      dZ(H + j, t) = dc * cprev * fg * (1.0 - fg);
      dZ(2 * H + j, t) = dc * ig * (1.0 - gg * gg);
      dZ(3 * H + j, t) = dh * tc * og * (1.0 - og);
      dc_next(j) = dc * fg;
    }
    dh_next.noalias() = p.lstm.Wh.transpose() * dZ.col(t);
  }
  grad.lstm.Wx.noalias() = dZ * k.xs.transpose();
  grad.lstm.b = dZ.rowwise().sum();
  if (T > 1) grad.lstm.Wh.noalias() = dZ.rightCols(T - 1) * k.h.leftCols(T - 1).transpose();
  return total;
}

inline double sample_loss(const SeqModel& m, const Eigen::MatrixXd& Xs, double y) {
  const auto fw = forward_standardized(m, Xs);
  return loss(fw.y_hat, y, fw.attn ? &*fw.attn : nullptr, m.variant, m.lambda_csa);
}

// Central differences on every parameter of the full loss. Relative error
// uses max(|analytic|, |numeric|, 1e-12) as denominator.
inline double grad_check(const SeqModel& model, const Eigen::MatrixXd& X, double y, double eps = 1e-5) {
  SeqModel m = model;
  const Eigen::MatrixXd Xs = standardize_input(m, X);
  Params analytic;
  loss_and_grad(m, Xs, y, analytic);
  auto ga = analytic.tensors();
  auto params = m.params.tensors();
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      double& theta = params[t][i];
      const double saved = theta;
      theta = saved + eps;
      const double up = sample_loss(m, Xs, y);
      theta = saved - eps;
      const double down = sample_loss(m, Xs, y);
      theta = saved;
      const double num = (up - down) / (2.0 * eps);
      const double a = ga[t][i];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-12}));
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  Variant variant = Variant::lstm_csa;
  int hidden = 128;
  int attn_dim = 128;
  double lambda_csa = 0.1;
  double lr = 1e-3;
  int epochs = 100;
  int patience = 10;
  double clip_norm = 5.0;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

struct LogRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;  // NaN when there is no validation split
};

struct TrainResult {
  SeqModel model;
  std::vector<LogRow> log;
  int best_epoch = 0;
};

struct Sample {
  const Eigen::MatrixXd* X;  // T x D, raw (imputed) features
  double y;
};

namespace detail {

struct Adam {
  Params m, v;
  long step = 0;

  void update(Params& params, Params& grad, const TrainConfig& c) {
    ++step;
    const double b1t = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double b2t = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    auto pt = params.tensors(), gt = grad.tensors(), mt = m.tensors(), vt = v.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t)
      for (std::size_t i = 0; i < pt[t].size(); ++i) {
        const double g = gt[t][i];
        mt[t][i] = c.beta1 * mt[t][i] + (1.0 - c.beta1) * g;
        vt[t][i] = c.beta2 * vt[t][i] + (1.0 - c.beta2) * g * g;
        pt[t][i] -= c.lr * (mt[t][i] / b1t) / (std::sqrt(vt[t][i] / b2t) + c.adam_eps);
      }
  }
};

inline void clip_global_norm(Params& grad, double max_norm) {
  if (!(max_norm > 0.0)) return;
  double sq = 0.0;
  for (auto t : grad.tensors())
    for (double g : t) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm)
    for (auto t : grad.tensors())
      for (double& g : t) g *= max_norm / norm;
}

}  // namespace detail

// Fits input standardization on the training rows, holds out a validation
// split for early stopping by MAE, and returns the best-validation parameters.
inline TrainResult train(const std::vector<Sample>& data, const TrainConfig& cfg) {
  if (data.empty()) throw InputError("train: empty dataset");
  const auto d = data.front().X->cols();
  for (const auto& s : data)
    if (s.X->cols() != d || s.X->rows() < 1) throw ShapeError("train: inconsistent sequence widths");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = 0;
  if (data.size() >= 2 && cfg.val_fraction > 0.0)
    n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(data.size()))), 1, data.size() - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> tr(order.begin() + static_cast<long>(n_val), order.end());

  TrainResult res;
  SeqModel& m = res.model;
  m = make_model(cfg.variant, static_cast<int>(d), cfg.hidden, cfg.attn_dim, cfg.lambda_csa);

  // input standardization over every training row
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  double rows = 0.0, ysum = 0.0;
  for (auto i : tr) {
    sum += data[i].X->colwise().sum().transpose();
    rows += static_cast<double>(data[i].X->rows());
    ysum += data[i].y;
  }
  m.input_mean = sum / rows;
  for (auto i : tr) sq += (data[i].X->rowwise() - m.input_mean.transpose()).array().square().colwise().sum().matrix().transpose();
  m.input_scale = (sq / rows).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(m.input_scale(j) > 1e-12)) m.input_scale(j) = 1.0;

  init_params(m, derive_seed(cfg.seed, 1));
  m.params.readout_b = ysum / static_cast<double>(tr.size());

  std::vector<Eigen::MatrixXd> xs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) xs[i] = standardize_input(m, *data[i].X);

  detail::Adam adam{m.params.zeros_like(), m.params.zeros_like(), 0};
  Params grad;
  Params best = m.params;
  double best_mae = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(tr.begin(), tr.end(), rng);
    double total = 0.0;
    for (auto i : tr) {
      const double l = loss_and_grad(m, xs[i], data[i].y, grad);
      if (!std::isfinite(l)) throw TrainingError("training loss is not finite", epoch);
      total += l;
      detail::clip_global_norm(grad, cfg.clip_norm);
      adam.update(m.params, grad, cfg);
    }
    LogRow row{epoch, total / static_cast<double>(tr.size()), kMissing};
    if (!val.empty()) {
      double mae = 0.0;
      for (auto i : val) mae += std::abs(forward_standardized(m, xs[i]).y_hat - data[i].y);
      row.val_mae = mae / static_cast<double>(val.size());
      if (!std::isfinite(row.val_mae)) throw TrainingError("validation MAE is not finite", epoch);
      if (row.val_mae < best_mae) {
        best_mae = row.val_mae;
        best = m.params;
        res.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best > cfg.patience) {
        res.log.push_back(row);
        break;
      }
    } else {
      best = m.params;
      res.best_epoch = epoch;
    }
    res.log.push_back(row);
  }
  m.params = best;
  return res;
}

inline void write_log_csv(const std::vector<LogRow>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "epoch,train_loss,val_mae\n";
  for (const auto& r : log) out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_mae) << '\n';
}

// ---------------------------------------------------------------------------
// Checkpoint: JSON, format "fatigue-seqmodel" version 1. Tensors are stored
// row-major as {"rows", "cols", "data"}.

inline nlohmann::json tensor_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Eigen::MatrixXd tensor_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("tensor size mismatch in checkpoint");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline nlohmann::json to_json(const SeqModel& m) {
  nlohmann::json j;
  j["format"] = "fatigue-seqmodel";
  j["version"] = 1;
  j["variant"] = variant_name(m.variant);
  j["input_dim"] = m.input_dim;
  j["hidden"] = m.hidden;
  j["attn_dim"] = m.attn_dim;
  j["lambda_csa"] = m.lambda_csa;
  j["input_mean"] = tensor_json(m.input_mean);
  j["input_scale"] = tensor_json(m.input_scale);
  j["lstm"] = {{"Wx", tensor_json(m.params.lstm.Wx)}, {"Wh", tensor_json(m.params.lstm.Wh)}, {"b", tensor_json(m.params.lstm.b)}};
  if (m.params.attn)
    j["attention"] = {{"Wq", tensor_json(m.params.attn->Wq)}, {"Wk", tensor_json(m.params.attn->Wk)}, {"Wv", tensor_json(m.params.attn->Wv)}};
  j["readout"] = {{"w", tensor_json(m.params.readout_w)}, {"b", m.params.readout_b}};
  return j;
}

inline SeqModel seq_model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fatigue-seqmodel" || j.value("version", 0) != 1)
    throw ParseError("not a version-1 sequence model checkpoint");
  const auto v = parse_variant(j.at("variant").get<std::string>());
  if (!v) throw ParseError("unknown variant in checkpoint");
  SeqModel m = make_model(*v, j.at("input_dim").get<int>(), j.at("hidden").get<int>(), j.at("attn_dim").get<int>(),
                          j.at("lambda_csa").get<double>());
  m.input_mean = tensor_from_json(j.at("input_mean"));
  m.input_scale = tensor_from_json(j.at("input_scale"));
  m.params.lstm.Wx = tensor_from_json(j.at("lstm").at("Wx"));
  m.params.lstm.Wh = tensor_from_json(j.at("lstm").at("Wh"));
  m.params.lstm.b = tensor_from_json(j.at("lstm").at("b"));
  if (has_attention(*v)) {
    const auto& a = j.at("attention");
    m.params.attn = AttentionParams{tensor_from_json(a.at("Wq")), tensor_from_json(a.at("Wk")), tensor_from_json(a.at("Wv"))};
  }
  m.params.readout_w = tensor_from_json(j.at("readout").at("w"));
  m.params.readout_b = j.at("readout").at("b").get<double>();
  return m;
}

}  // namespace fatigue::seqnet
