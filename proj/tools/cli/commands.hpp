#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "olinear/data.hpp"
#include "olinear/eval.hpp"
#include "run_config.hpp"

namespace olinear::cli {

/// Loads the CSV named by rc.data_path, requiring room for one training
/// window, and standardizes it when rc.scale is set.
TimeSeriesDataset load_dataset(const RunConfig& rc, std::size_t lookback, std::size_t horizon);

/// Writes an aligned plain-text table of one metrics report.
void print_metrics(std::ostream& os, const std::string& label, const MetricsReport& m);

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& m);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

/// bases.olck, q_in.csv, q_out.csv and split_manifest.csv in rc.output_dir.
void cmd_prepare(const RunConfig& rc, std::ostream& log);

/// model.olck and history.csv in rc.output_dir; prints validation metrics.
MetricsReport cmd_train(const RunConfig& rc, std::ostream& log);

/// metrics_<split>.csv and predictions_<split>.csv in rc.output_dir.
/// An empty checkpoint path means <output_dir>/model.olck.
MetricsReport cmd_eval(const RunConfig& rc, const std::filesystem::path& checkpoint, Split split,
                       std::ostream& log);

/// One row per setting of `axis` (basis, normlin, csl or variant), every
/// setting trained from the same seed. Writes ablation_<axis>.csv.
struct AblationRow {
  std::string setting;
  std::size_t best_epoch = 0;
  MetricsReport val;
  MetricsReport test;
};
std::vector<AblationRow> cmd_ablate(const RunConfig& rc, const std::string& axis, std::ostream& log);

/// diagnostics.csv (NormLin rank per block) and inspect_summary.csv
/// (decorrelation of test windows, FLOPs comparison).
void cmd_inspect(const RunConfig& rc, const std::filesystem::path& checkpoint, std::ostream& log);

}  // namespace olinear::cli
