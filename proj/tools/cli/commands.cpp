#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "olinear/checkpoint.hpp"
#include "olinear/error.hpp"
#include "olinear/format.hpp"
#include "olinear/train.hpp"
#include "olinear/transform.hpp"

namespace olinear::cli {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

fs::path ensure_output_dir(const RunConfig& rc) {
  std::error_code ec;
  fs::create_directories(rc.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + rc.output_dir.string() + "': " + ec.message());
  return rc.output_dir;
}

// Run settings echoed into artifacts. output_dir is left out so that the
// same run written to two places produces identical bytes.
std::vector<std::pair<std::string, std::string>> run_echo(const RunConfig& rc) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& kv : entries(rc)) {
    if (kv.first == "output_dir") continue;
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> data_and_train_echo(const RunConfig& rc) {
  const auto model_keys = model_config_entries(rc.model);
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& kv : run_echo(rc)) {
    bool is_model = false;
    for (const auto& m : model_keys) is_model = is_model || m.first == kv.first;
    if (!is_model) out.push_back(std::move(kv));
  }
  return out;
}

OLinearConfig sized_model(const RunConfig& rc, const TimeSeriesDataset& ds) {
  OLinearConfig cfg = rc.model;
  cfg.n_variates = ds.n_variates();
  return cfg;
}

fs::path checkpoint_or_default(const RunConfig& rc, const fs::path& checkpoint) {
  return checkpoint.empty() ? rc.output_dir / "model.olck" : checkpoint;
}

MetricsReport evaluate(const TimeSeriesDataset& ds, Split split, const OLinearParams& params,
                       const OLinearConfig& cfg, Tensor3* preds_out = nullptr,
                       WindowBatch* windows_out = nullptr) {
  WindowBatch w = make_windows(ds, split, cfg.lookback, cfg.horizon, 1);
  Tensor3 preds = predict_windows(w, params, cfg);
  MetricsReport m = metrics(preds, w.targets);
  if (preds_out) *preds_out = std::move(preds);
  if (windows_out) *windows_out = std::move(w);
  return m;
}

struct TrainedRun {
  TrainResult result;
  OLinearConfig cfg;
};

TrainedRun fit(const RunConfig& rc, const TimeSeriesDataset& ds, std::ostream& log, const std::string& tag) {
  const OLinearConfig cfg = sized_model(rc, ds);
  const PreparedBases bases =
      prepare_bases(ds, cfg.basis_method, cfg.lookback, cfg.horizon, rc.q_source_fraction);
  auto on_epoch = [&](const EpochRecord& r) {
    log << tag << "epoch " << r.epoch << "  train_loss " << format_double(r.train_loss) << "  val_mse "
        << format_double(r.val_mse) << "  val_mae " << format_double(r.val_mae) << '\n';
  };
  return {train(ds, cfg, rc.train, bases, on_epoch), cfg};
}

}  // namespace

TimeSeriesDataset load_dataset(const RunConfig& rc, std::size_t lookback, std::size_t horizon) {
  CsvSchema schema;
  schema.ratios = rc.ratios;
  schema.min_train_steps = lookback + horizon;
  TimeSeriesDataset ds = load_csv(rc.data_path, schema);
  if (rc.scale) standardize(ds);
  return ds;
}

void print_metrics(std::ostream& os, const std::string& label, const MetricsReport& m) {
  const auto row = [&](const char* name, const std::string& value) {
    os << "  " << std::left << std::setw(22) << name << std::right << std::setw(24) << value << '\n';
  };
  os << label << '\n';
  row("mse", format_double(m.mse));
  row("mae", format_double(m.mae));
  row("r2", format_double(m.r2));
  row("pearson_r", format_double(m.pearson_r));
  row("mase", format_double(m.mase));
  row("n_windows", std::to_string(m.n_windows));
  row("r2_excluded_variates", std::to_string(m.r2_excluded_variates));
  row("r_excluded_pairs", std::to_string(m.r_excluded_pairs));
  row("mase_excluded_pairs", std::to_string(m.mase_excluded_pairs));
}

void write_metrics_csv(const fs::path& path, const MetricsReport& m) {
  auto out = open_out(path);
  out << "mse,mae,r2,pearson_r,mase,n_windows,r2_excluded_variates,r_excluded_pairs,mase_excluded_pairs\n"
      << format_double(m.mse) << ',' << format_double(m.mae) << ',' << format_double(m.r2) << ','
      << format_double(m.pearson_r) << ',' << format_double(m.mase) << ',' << m.n_windows << ','
      << m.r2_excluded_variates << ',' << m.r_excluded_pairs << ',' << m.mase_excluded_pairs << '\n';
  finish(out, path);
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << "c" << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
  finish(out, path);
}

void cmd_prepare(const RunConfig& rc, std::ostream& log) {
  const auto& mc = rc.model;
  const TimeSeriesDataset ds = load_dataset(rc, mc.lookback, mc.horizon);
  const PreparedBases pb = prepare_bases(ds, mc.basis_method, mc.lookback, mc.horizon, rc.q_source_fraction);
  const fs::path dir = ensure_output_dir(rc);

  CheckpointFile f;
  auto add_basis = [&](const std::string& name, const OrthoBasis& b) {
    f.tensors.push_back(to_record(name, b.q));
    if (b.eigenvalues) f.tensors.push_back(to_record(name + ".eigenvalues", Matrix(1, b.n, *b.eigenvalues)));
  };
  add_basis("q_in", pb.q_in);
  add_basis("q_out", pb.q_out);
  if (pb.corr_in) f.tensors.push_back(to_record("corr_in", pb.corr_in->matrix));
  if (pb.corr_out) f.tensors.push_back(to_record("corr_out", pb.corr_out->matrix));
  f.tensors.push_back(to_record("corr_v", pb.corr_v.matrix));
  f.config = run_echo(rc);
  f.config.emplace_back("n_variates", std::to_string(ds.n_variates()));
  f.config.emplace_back("q_in.method", to_string(pb.q_in.method));
  f.config.emplace_back("q_out.method", to_string(pb.q_out.method));
  write_checkpoint_file(dir / "bases.olck", f);
  write_matrix_csv(dir / "q_in.csv", pb.q_in.q);
  write_matrix_csv(dir / "q_out.csv", pb.q_out.q);

  const fs::path manifest = dir / "split_manifest.csv";
  auto out = open_out(manifest);
  out << "split,begin,end,steps,windows\n";
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto [b, e] = ds.range(s);
    out << to_string(s) << ',' << b << ',' << e << ',' << (e - b) << ','
        << window_count(e - b, mc.lookback, mc.horizon, 1) << '\n';
  }
  finish(out, manifest);

  log << "prepared " << to_string(mc.basis_method) << " bases (lookback " << mc.lookback << ", horizon "
      << mc.horizon << ") for " << ds.n_variates() << " variates x " << ds.n_steps() << " steps in "
      << dir.string() << '\n';
}

MetricsReport cmd_train(const RunConfig& rc, std::ostream& log) {
  const TimeSeriesDataset ds = load_dataset(rc, rc.model.lookback, rc.model.horizon);
  const TrainedRun run = fit(rc, ds, log, "");
  const fs::path dir = ensure_output_dir(rc);

  auto extra = data_and_train_echo(rc);
  extra.emplace_back("best_epoch", std::to_string(run.result.best_epoch));
  save_checkpoint(dir / "model.olck", run.result.best, run.cfg, extra);
  write_history_csv((dir / "history.csv").string(), run.result.history);

  const MetricsReport val = evaluate(ds, Split::val, run.result.best, run.cfg);
  log << "best epoch " << run.result.best_epoch << " of " << run.result.history.size()
      << (run.result.stopped_early ? " (stopped early)" : "") << '\n';
  print_metrics(log, "validation metrics", val);
  return val;
}

MetricsReport cmd_eval(const RunConfig& rc, const fs::path& checkpoint, Split split, std::ostream& log) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint_or_default(rc, checkpoint));
  const TimeSeriesDataset ds = load_dataset(rc, ck.config.lookback, ck.config.horizon);
  if (ds.n_variates() != ck.config.n_variates) {
    throw ConfigError("checkpoint expects " + std::to_string(ck.config.n_variates) + " variates, dataset has " +
                      std::to_string(ds.n_variates()));
  }
  Tensor3 preds;
  WindowBatch windows;
  const MetricsReport m = evaluate(ds, split, ck.params, ck.config, &preds, &windows);
  const fs::path dir = ensure_output_dir(rc);
  const std::string tag = to_string(split);
  write_metrics_csv(dir / ("metrics_" + tag + ".csv"), m);

  const fs::path dump = dir / ("predictions_" + tag + ".csv");
  auto out = open_out(dump);
  out << "window,variate,step,prediction,target\n";
  for (std::size_t w = 0; w < preds.d0(); ++w)
    for (std::size_t n = 0; n < preds.d1(); ++n)
      for (std::size_t t = 0; t < preds.d2(); ++t)
        out << w << ',' << n << ',' << t << ',' << format_double(preds(w, n, t)) << ','
            << format_double(windows.targets(w, n, t)) << '\n';
  finish(out, dump);

  print_metrics(log, tag + " metrics", m);
  return m;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& rc, const std::string& axis, std::ostream& log) {
  std::vector<std::pair<std::string, RunConfig>> settings;
  if (axis == "basis") {
    for (auto m : {BasisMethod::eigen, BasisMethod::fourier, BasisMethod::identity}) {
      RunConfig r = rc;
      r.model.basis_method = m;
      settings.emplace_back(to_string(m), r);
    }
  } else if (axis == "normlin") {
    for (auto t : {NormLinTransform::softplus, NormLinTransform::softmax, NormLinTransform::sigmoid,
                   NormLinTransform::relu, NormLinTransform::identity}) {
      for (auto n : {NormLinNorm::l1, NormLinNorm::l2}) {
        RunConfig r = rc;
        r.model.normlin_transform = t;
        r.model.normlin_norm = n;
        settings.emplace_back(std::string(to_string(t)) + "+" + to_string(n), r);
      }
    }
  } else if (axis == "csl") {
    for (bool pre : {true, false}) {
      for (bool post : {true, false}) {
        RunConfig r = rc;
        r.model.csl_pre_linear = pre;
        r.model.csl_post_linear = post;
        settings.emplace_back(std::string(pre ? "pre" : "no_pre") + "+" + (post ? "post" : "no_post"), r);
      }
    }
  } else if (axis == "variant") {
    for (auto v : {Variant::olinear, Variant::olinear_c}) {
      RunConfig r = rc;
      r.model.variant = v;
      settings.emplace_back(to_string(v), r);
    }
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (expected basis, normlin, csl or variant)");
  }

  const TimeSeriesDataset ds = load_dataset(rc, rc.model.lookback, rc.model.horizon);
  std::vector<AblationRow> rows;
  for (const auto& [name, r] : settings) {
    const TrainedRun run = fit(r, ds, log, "[" + name + "] ");
    AblationRow row;
    row.setting = name;
    row.best_epoch = run.result.best_epoch;
    row.val = evaluate(ds, Split::val, run.result.best, run.cfg);
    row.test = evaluate(ds, Split::test, run.result.best, run.cfg);
    rows.push_back(row);
  }

  const fs::path dir = ensure_output_dir(rc);
  const fs::path path = dir / ("ablation_" + axis + ".csv");
  auto out = open_out(path);
  out << "setting,best_epoch,val_mse,val_mae,test_mse,test_mae\n";
  for (const auto& row : rows) {
    out << row.setting << ',' << row.best_epoch << ',' << format_double(row.val.mse) << ','
        << format_double(row.val.mae) << ',' << format_double(row.test.mse) << ',' << format_double(row.test.mae)
        << '\n';
  }
  finish(out, path);

  log << std::left << std::setw(22) << "setting" << std::right << std::setw(14) << "val_mse" << std::setw(14)
      << "val_mae" << std::setw(14) << "test_mse" << std::setw(14) << "test_mae" << '\n';
  log << std::setprecision(6);
  for (const auto& row : rows) {
    log << std::left << std::setw(22) << row.setting << std::right << std::setw(14) << row.val.mse
        << std::setw(14) << row.val.mae << std::setw(14) << row.test.mse << std::setw(14) << row.test.mae << '\n';
  }
  return rows;
}

void cmd_inspect(const RunConfig& rc, const fs::path& checkpoint, std::ostream& log) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint_or_default(rc, checkpoint));
  const TimeSeriesDataset ds = load_dataset(rc, ck.config.lookback, ck.config.horizon);
  const fs::path dir = ensure_output_dir(rc);

  const auto ranks = weight_rank_diagnostic(ck.params, ck.config);
  const fs::path diag = dir / "diagnostics.csv";
  auto out = open_out(diag);
  out << "block,numerical_rank,effective_rank\n";
  for (const auto& r : ranks) out << r.block << ',' << r.numerical_rank << ',' << format_double(r.effective_rank) << '\n';
  finish(out, diag);

  const WindowBatch test = make_windows(ds, Split::test, ck.config.lookback, ck.config.horizon, 1);
  const double decor = decorrelation_score(test, ck.params.q_in);
  const double decor_raw = decorrelation_score(test, build_basis(nullptr, BasisMethod::identity, ck.config.lookback));
  const FlopsEstimate fl = flops_estimate(ck.config.n_variates, ck.config.model_dim, rc.attention_heads);

  const fs::path summary = dir / "inspect_summary.csv";
  auto s = open_out(summary);
  s << "key,value\n"
    << "basis_method," << to_string(ck.params.q_in.method) << '\n'
    << "decorrelation_basis," << format_double(decor) << '\n'
    << "decorrelation_identity," << format_double(decor_raw) << '\n'
    << "flops_normlin," << fl.normlin_module << '\n'
    << "flops_mhsa," << fl.mhsa << '\n'
    << "n_variates," << fl.n_variates << '\n'
    << "model_dim," << fl.model_dim << '\n'
    << "heads," << fl.heads << '\n';
  finish(s, summary);

  for (const auto& r : ranks) {
    log << "block " << r.block << "  numerical_rank " << r.numerical_rank << "  effective_rank "
        << format_double(r.effective_rank) << '\n';
  }
  log << "mean |corr| of test windows: " << format_double(decor_raw) << " raw, " << format_double(decor)
      << " after " << to_string(ck.params.q_in.method) << " basis\n";
  log << "FLOPs: normlin " << fl.normlin_module << ", mhsa " << fl.mhsa << '\n';
}

}  // namespace olinear::cli
