#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "olinear/linalg.hpp"

namespace olinear {

enum class Split { train, val, test };

[[nodiscard]] const char* to_string(Split s) noexcept;
[[nodiscard]] Split parse_split(const std::string& s);

/// Fractions of the series assigned to train and validation; test takes the rest.
struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
};

/// N-variate, M-step series. values is N x M (one row per variate).
struct TimeSeriesDataset {
  std::vector<std::string> names;
  Matrix values;
  std::size_t train_end = 0;
  std::size_t val_end = 0;

  [[nodiscard]] std::size_t n_variates() const noexcept { return values.rows(); }
  [[nodiscard]] std::size_t n_steps() const noexcept { return values.cols(); }

  /// Half-open column range [begin, end) of a split.
  [[nodiscard]] std::pair<std::size_t, std::size_t> range(Split s) const;
};

/// Builds a dataset from an in-memory N x M matrix and assigns split
/// boundaries as floor(ratio * M). Throws DataError on invalid boundaries.
TimeSeriesDataset make_dataset(std::vector<std::string> names, Matrix values, SplitRatios ratios);

struct CsvSchema {
  SplitRatios ratios;
  /// When nonzero, ingestion fails unless the training split holds at least
  /// this many steps (lookback + horizon).
  std::size_t min_train_steps = 0;
};

/// Reads a CSV whose first column is a timestamp (ISO-8601 or integer) and
/// whose remaining columns are decimal values. Errors carry the 1-based file
/// row (header is row 1) and column.
TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

struct Standardization {
  std::vector<double> mean;  // per variate
  std::vector<double> std;   // per variate; 1 for variates constant over train
};

/// Z-scores every variate in place using statistics of the training split only.
Standardization standardize(TimeSeriesDataset& ds);

/// inputs: B x N x T, targets: B x N x tau.
struct WindowBatch {
  Tensor3 inputs;
  Tensor3 targets;

  [[nodiscard]] std::size_t size() const noexcept { return inputs.d0(); }
};

[[nodiscard]] std::size_t window_count(std::size_t len, std::size_t lookback, std::size_t horizon,
                                       std::size_t stride);

/// Enumerates windows left to right inside one split; none crosses a split
/// boundary. Throws DataError when the split holds fewer than T + tau steps.
WindowBatch make_windows(const TimeSeriesDataset& ds, Split split, std::size_t lookback,
                         std::size_t horizon, std::size_t stride = 1);

/// Copies the windows listed in `indices` (in order) into a new batch.
WindowBatch gather_windows(const WindowBatch& all, std::span<const std::size_t> indices);

/// Symmetric, unit-diagonal correlation estimate.
struct CorrEstimate {
  Matrix matrix;
  std::size_t window = 0;
  double source_fraction = 1.0;
  std::size_t variates_used = 0;
};

/// Temporal correlation of `window_len` lagged copies of each variate over
/// the first `source_fraction` of the training split, averaged over variates.
/// Variates constant over the source region are skipped.
CorrEstimate lagged_temporal_corr(const TimeSeriesDataset& ds, std::size_t window_len,
                                  double source_fraction = 1.0);

/// N x N Pearson correlation across variates over the first
/// `source_fraction` of the training columns. Constant variates get zero
/// off-diagonal correlation.
CorrEstimate variate_corr(const TimeSeriesDataset& ds, double source_fraction = 1.0);

}  // namespace olinear
