#include "olinear/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "olinear/error.hpp"
#include "olinear/format.hpp"
#include "olinear/rng.hpp"

namespace olinear {

namespace {

constexpr std::uint64_t kShuffleStream = 1;

std::vector<double> horizon_weights(std::size_t tau, double exponent) {
  std::vector<double> w(tau);
  double sum = 0.0;
  for (std::size_t t = 0; t < tau; ++t) {
    w[t] = std::pow(static_cast<double>(t + 1), -exponent);
    sum += w[t];
  }
  const double scale = static_cast<double>(tau) / sum;
  for (double& x : w) x *= scale;
  return w;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

const char* to_string(LossKind k) noexcept {
  switch (k) {
    case LossKind::mae: return "mae";
    case LossKind::weighted_l1: return "weighted_l1";
    case LossKind::mse: return "mse";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "mae") return LossKind::mae;
  if (s == "weighted_l1") return LossKind::weighted_l1;
  if (s == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + s + "' (expected mae, weighted_l1 or mse)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (patience == 0 || patience > max_epochs) {
    throw ConfigError("patience must lie in [1, max_epochs]");
  }
  if (window_stride == 0) throw ConfigError("window_stride must be at least 1");
  if (!std::isfinite(horizon_weight_exponent)) throw ConfigError("horizon_weight_exponent must be finite");
}

LossResult loss_and_grad(const Tensor3& pred, const Tensor3& target, LossKind kind, double exponent) {
  if (!pred.same_shape(target)) throw ShapeError("loss: prediction and target shapes differ");
  LossResult r{0.0, Tensor3(pred.d0(), pred.d1(), pred.d2())};
  const auto count = static_cast<double>(pred.size());
  const std::size_t tau = pred.d2();
  const auto p = pred.values();
  const auto y = target.values();
  auto g = r.grad.values();
  switch (kind) {
    case LossKind::mae:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p[i] - y[i];
        r.loss += std::abs(e);
        g[i] = sign(e) / count;
      }
      break;
    case LossKind::weighted_l1: {
      const auto w = horizon_weights(tau, exponent);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p[i] - y[i];
        r.loss += w[i % tau] * std::abs(e);
        g[i] = w[i % tau] * sign(e) / count;
      }
      break;
    }
    case LossKind::mse:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p[i] - y[i];
        r.loss += e * e;
        g[i] = 2.0 * e / count;
      }
      break;
  }
  r.loss /= count;
  return r;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t step, const AdamOptions& o) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ShapeError("adam_update: buffer sizes differ");
  }
  if (step == 0) throw InputError("adam_update: step counts from 1");
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * grad[i];
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    if (o.lr == 0.0) continue;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
  }
}

AdamState make_adam_state(const Weights& w, const OLinearConfig& cfg) {
  AdamState s;
  visit_weights(w, cfg, [&](const std::string&, const Matrix& m, bool trainable) {
    if (!trainable) return;
    s.m.emplace_back(m.size(), 0.0);
    s.v.emplace_back(m.size(), 0.0);
  });
  return s;
}

void adam_step(OLinearParams& params, const GradientSet& grads, AdamState& state,
               const OLinearConfig& cfg, const AdamOptions& opts) {
  std::vector<std::span<const double>> g;
  visit_weights(grads.grads, cfg, [&](const std::string&, const Matrix& m, bool) { g.push_back(m.values()); });
  if (g.size() != state.m.size()) throw StateError("adam_step: optimizer state does not match parameters");
  ++state.step;
  std::size_t k = 0;
  visit_weights(params.weights, cfg, [&](const std::string&, Matrix& m, bool trainable) {
    if (!trainable) return;
    adam_update(m.values(), g[k], state.m[k], state.v[k], state.step, opts);
    ++k;
  });
}

double clip_global_norm(GradientSet& grads, const OLinearConfig& cfg, double max_norm) {
  double sq = 0.0;
  visit_weights(grads.grads, cfg, [&](const std::string&, const Matrix& m, bool) {
    for (double x : m.values()) sq += x * x;
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    visit_weights(grads.grads, cfg, [&](const std::string&, Matrix& m, bool) {
      for (double& x : m.values()) x *= scale;
    });
  }
  return norm;
}

Tensor3 predict_windows(const WindowBatch& windows, const OLinearParams& params,
                        const OLinearConfig& cfg, std::size_t chunk) {
  const std::size_t total = windows.size();
  Tensor3 out(total, cfg.n_variates, cfg.horizon);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < total; start += chunk) {
    const std::size_t stop = std::min(total, start + chunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const WindowBatch part = gather_windows(windows, idx);
    const Tensor3 p = predict(part.inputs, params, cfg);
    std::copy(p.values().begin(), p.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * cfg.n_variates * cfg.horizon));
  }
  return out;
}

TrainResult train(const TimeSeriesDataset& ds, const OLinearConfig& model_cfg,
                  const TrainConfig& tc, const PreparedBases& bases, const EpochCallback& on_epoch) {
  model_cfg.validate();
  tc.validate();
  if (ds.n_variates() != model_cfg.n_variates) {
    throw ConfigError("model expects " + std::to_string(model_cfg.n_variates) + " variates, dataset has " +
                      std::to_string(ds.n_variates()));
  }
  const WindowBatch train_windows =
      make_windows(ds, Split::train, model_cfg.lookback, model_cfg.horizon, tc.window_stride);
  const WindowBatch val_windows = make_windows(ds, Split::val, model_cfg.lookback, model_cfg.horizon, 1);

  OLinearParams params = init_params(model_cfg, bases.q_in, bases.q_out, &bases.corr_v, tc.seed);
  AdamState adam = make_adam_state(params.weights, model_cfg);
  const AdamOptions opts{tc.learning_rate, 0.9, 0.999, 1e-8};
  CounterRng rng(tc.seed, kShuffleStream);

  TrainResult result;
  result.best = params;
  double best_mae = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tc.batch_size);
      const auto idx = std::span<const std::size_t>(order).subspan(start, stop - start);
      const WindowBatch batch = gather_windows(train_windows, idx);
      auto fwd = forward(batch.inputs, params, model_cfg);
      const auto lr = loss_and_grad(fwd.predictions, batch.targets, tc.loss, tc.horizon_weight_exponent);
      if (!std::isfinite(lr.loss)) {
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += lr.loss * static_cast<double>(idx.size());
      GradientSet grads = backward(fwd.cache, params, lr.grad);
      const double gnorm = clip_global_norm(grads, model_cfg, tc.grad_clip);
      if (!std::isfinite(gnorm)) {
        throw NumericalError("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam_step(params, grads, adam, model_cfg, opts);
    }

    const Tensor3 val_pred = predict_windows(val_windows, params, model_cfg);
    const auto lv = loss_and_grad(val_pred, val_windows.targets, LossKind::mse);
    const auto la = loss_and_grad(val_pred, val_windows.targets, LossKind::mae);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), lv.loss, la.loss};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_mae < best_mae) {
      best_mae = rec.val_mae;
      result.best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= tc.patience) {
      result.stopped_early = epoch < tc.max_epochs;
      break;
    }
  }
  return result;
}

void write_history_csv(const std::string& path, std::span<const EpochRecord> history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write history file '" + path + "'");
  out << "epoch,train_loss,val_mse,val_mae\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_mse) << ','
        << format_double(r.val_mae) << '\n';
  }
  if (!out) throw IoError("failed writing history file '" + path + "'");
}

}  // namespace olinear
