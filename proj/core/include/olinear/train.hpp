#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "olinear/data.hpp"
#include "olinear/eval.hpp"
#include "olinear/model.hpp"
#include "olinear/transform.hpp"

namespace olinear {

/// weighted_l1 scales the absolute error at horizon step t by
/// (t + 1)^(-horizon_weight_exponent), normalized to mean 1 over the horizon.
/// This is a stand-in for a horizon-decay weighted L1 whose exact form is not
/// published; exponent 0 reduces it to mae.
enum class LossKind { mae, weighted_l1, mse };

[[nodiscard]] const char* to_string(LossKind k) noexcept;
[[nodiscard]] LossKind parse_loss_kind(const std::string& s);

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  LossKind loss = LossKind::weighted_l1;
  double horizon_weight_exponent = 0.5;
  std::uint64_t seed = 2024;
  double grad_clip = 5.0;  // global-norm clip; <= 0 disables
  std::size_t window_stride = 1;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  Tensor3 grad;  // d loss / d pred
};

LossResult loss_and_grad(const Tensor3& pred, const Tensor3& target, LossKind kind,
                         double exponent = 0.5);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a single tensor; `step` counts from 1.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t step, const AdamOptions& opts);

/// Moments for every trainable tensor, in visit_weights order.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const Weights& w, const OLinearConfig& cfg);

/// Updates every trainable tensor; frozen tensors and bases are untouched.
void adam_step(OLinearParams& params, const GradientSet& grads, AdamState& state,
               const OLinearConfig& cfg, const AdamOptions& opts);

/// Scales gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(GradientSet& grads, const OLinearConfig& cfg, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
};

struct TrainResult {
  OLinearParams best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Predicts every window of `windows` in chunks of `chunk`.
Tensor3 predict_windows(const WindowBatch& windows, const OLinearParams& params,
                        const OLinearConfig& cfg, std::size_t chunk = 256);

/// Per-epoch callback, e.g. for progress logging.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam over seeded shuffles of the train windows with early stopping on
/// validation MAE. Returns the parameters of the best validation epoch.
/// Throws NumericalError when the loss becomes non-finite.
TrainResult train(const TimeSeriesDataset& ds, const OLinearConfig& model_cfg,
                  const TrainConfig& train_cfg, const PreparedBases& bases,
                  const EpochCallback& on_epoch = {});

/// Writes "epoch,train_loss,val_mse,val_mae" with full round-trip precision.
void write_history_csv(const std::string& path, std::span<const EpochRecord> history);

}  // namespace olinear
