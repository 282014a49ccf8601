#include "olinear/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "olinear/error.hpp"

namespace olinear {

namespace {

constexpr double kRatioSlack = 1e-9;

std::size_t fraction_of(std::size_t n, double f) {
  return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + kRatioSlack));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2 ? 1 : 0;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

// Accepts "YYYY-MM-DD", optionally followed by 'T' or ' ' and HH:MM[:SS[.fff]].
std::optional<double> parse_iso8601(std::string_view s) {
  const std::string str(s);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  int consumed = 0;
  if (std::sscanf(str.c_str(), "%d-%d-%d%n", &y, &mo, &d, &consumed) != 3) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  std::string_view rest = std::string_view(str).substr(static_cast<std::size_t>(consumed));
  if (!rest.empty()) {
    if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
    const std::string tail(rest.substr(1));
    int n2 = 0;
    const int got = std::sscanf(tail.c_str(), "%d:%d%n", &h, &mi, &n2);
    if (got != 2) return std::nullopt;
    std::string_view sr = std::string_view(tail).substr(static_cast<std::size_t>(n2));
    if (!sr.empty()) {
      if (sr.front() != ':') return std::nullopt;
      sr.remove_prefix(1);
      if (sr.ends_with('Z')) sr.remove_suffix(1);
      const auto v = parse_number(sr);
      if (!v) return std::nullopt;
      sec = *v;
    }
  }
  const long long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    mx += x[t];
    my += y[t];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dx = x[t] - mx;
    const double dy = y[t] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// Verifies |c| <= 1 + 1e-9, clamps to [-1, 1] and pins the diagonal.
void finalize_corr(Matrix& c) {
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      double& v = c(i, j);
      if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-9) {
        throw NumericalError("correlation entry (" + std::to_string(i) + "," + std::to_string(j) +
                             ") out of range: " + std::to_string(v));
      }
      v = std::clamp(v, -1.0, 1.0);
    }
    c(i, i) = 1.0;
  }
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = i + 1; j < c.cols(); ++j) {
      const double avg = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = avg;
      c(j, i) = avg;
    }
  }
}

std::size_t source_columns(const TimeSeriesDataset& ds, double source_fraction) {
  if (!(source_fraction > 0.0 && source_fraction <= 1.0)) {
    throw InputError("source_fraction must lie in (0, 1], got " + std::to_string(source_fraction));
  }
  return fraction_of(ds.train_end, source_fraction);
}

}  // namespace

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

std::pair<std::size_t, std::size_t> TimeSeriesDataset::range(Split s) const {
  switch (s) {
    case Split::train: return {0, train_end};
    case Split::val: return {train_end, val_end};
    case Split::test: return {val_end, n_steps()};
  }
  return {0, 0};
}

TimeSeriesDataset make_dataset(std::vector<std::string> names, Matrix values, SplitRatios ratios) {
  if (names.size() != values.rows()) {
    throw DataError("dataset has " + std::to_string(values.rows()) + " variates but " +
                    std::to_string(names.size()) + " names");
  }
  if (!(ratios.train > 0.0 && ratios.val >= 0.0 && ratios.train + ratios.val <= 1.0 + kRatioSlack)) {
    throw ConfigError("split ratios must satisfy train > 0, val >= 0, train + val <= 1");
  }
  if (!all_finite(values.values())) throw DataError("dataset contains non-finite values");
  TimeSeriesDataset ds;
  ds.names = std::move(names);
  ds.values = std::move(values);
  const std::size_t m = ds.values.cols();
  ds.train_end = fraction_of(m, ratios.train);
  ds.val_end = std::min(m, fraction_of(m, ratios.train + ratios.val));
  if (ds.train_end == 0 || ds.train_end > ds.val_end) {
    throw DataError("split boundaries invalid for " + std::to_string(m) + " steps (train_end=" +
                    std::to_string(ds.train_end) + ", val_end=" + std::to_string(ds.val_end) + ")");
  }
  return ds;
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const auto header = split_fields(line);
  if (header.size() < 2) {
    throw DataError(path.string() + ": header needs a timestamp column and at least one variate");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  const std::size_t n = names.size();

  std::vector<std::vector<double>> columns;  // time-major while reading
  std::optional<double> prev_stamp;
  std::optional<bool> iso_stamps;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n + 1) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " + std::to_string(n + 1));
    }
    std::optional<double> stamp = parse_number(fields[0]);
    bool iso = false;
    if (!stamp) {
      stamp = parse_iso8601(fields[0]);
      iso = true;
    }
    if (!stamp) {
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      ", column 1: unparseable timestamp '" + std::string(fields[0]) + "'");
    }
    if (iso_stamps && *iso_stamps != iso) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ": mixed timestamp formats");
    }
    iso_stamps = iso;
    if (prev_stamp && !(*stamp > *prev_stamp)) {
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      ": timestamp not strictly increasing ('" + std::string(fields[0]) + "')");
    }
    prev_stamp = stamp;

    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = parse_number(fields[j + 1]);
      if (!v) {
        throw DataError(path.string() + ": row " + std::to_string(row) + ", column " +
                        std::to_string(j + 2) + " ('" + names[j] + "'): non-numeric value '" +
                        std::string(fields[j + 1]) + "'");
      }
      col[j] = *v;
    }
    columns.push_back(std::move(col));
  }
  if (columns.empty()) throw DataError(path.string() + ": no data rows");

  const std::size_t m = columns.size();
  Matrix values(n, m);
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t j = 0; j < n; ++j) values(j, t) = columns[t][j];

  auto ds = make_dataset(std::move(names), std::move(values), schema.ratios);
  if (schema.min_train_steps > 0 && ds.train_end < schema.min_train_steps) {
    throw DataError(path.string() + ": training split has " + std::to_string(ds.train_end) +
                    " steps, need at least " + std::to_string(schema.min_train_steps) +
                    " (lookback + horizon)");
  }
  return ds;
}

Standardization standardize(TimeSeriesDataset& ds) {
  const auto [b, e] = ds.range(Split::train);
  if (e - b < 2) throw DataError("standardization needs at least 2 training steps");
  Standardization st;
  for (std::size_t v = 0; v < ds.n_variates(); ++v) {
    auto row = ds.values.row(v);
    double mean = 0.0;
    for (std::size_t t = b; t < e; ++t) mean += row[t];
    mean /= static_cast<double>(e - b);
    double var = 0.0;
    for (std::size_t t = b; t < e; ++t) var += (row[t] - mean) * (row[t] - mean);
    double sd = std::sqrt(var / static_cast<double>(e - b));
    if (!(sd > 0.0)) sd = 1.0;
    for (double& x : row) x = (x - mean) / sd;
    st.mean.push_back(mean);
    st.std.push_back(sd);
  }
  return st;
}

std::size_t window_count(std::size_t len, std::size_t lookback, std::size_t horizon,
                         std::size_t stride) {
  if (stride == 0) throw InputError("window stride must be at least 1");
  if (len < lookback + horizon) return 0;
  return (len - lookback - horizon) / stride + 1;
}

WindowBatch make_windows(const TimeSeriesDataset& ds, Split split, std::size_t lookback,
                         std::size_t horizon, std::size_t stride) {
  if (lookback == 0 || horizon == 0) throw InputError("lookback and horizon must be positive");
  const auto [begin, end] = ds.range(split);
  const std::size_t len = end - begin;
  const std::size_t count = window_count(len, lookback, horizon, stride);
  if (count == 0) {
    throw DataError(std::string(to_string(split)) + " split has " + std::to_string(len) +
                    " steps, fewer than lookback + horizon = " + std::to_string(lookback + horizon));
  }
  const std::size_t n = ds.n_variates();
  WindowBatch wb{Tensor3(count, n, lookback), Tensor3(count, n, horizon)};
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t s = begin + w * stride;
    for (std::size_t v = 0; v < n; ++v) {
      const auto row = ds.values.row(v);
      std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(s), lookback, wb.inputs.fiber(w, v).begin());
      std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(s + lookback), horizon,
                  wb.targets.fiber(w, v).begin());
    }
  }
  return wb;
}

WindowBatch gather_windows(const WindowBatch& all, std::span<const std::size_t> indices) {
  const std::size_t n = all.inputs.d1();
  WindowBatch out{Tensor3(indices.size(), n, all.inputs.d2()),
                  Tensor3(indices.size(), n, all.targets.d2())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= all.size()) throw InputError("window index out of range");
    for (std::size_t v = 0; v < n; ++v) {
      std::ranges::copy(all.inputs.fiber(indices[i], v), out.inputs.fiber(i, v).begin());
      std::ranges::copy(all.targets.fiber(indices[i], v), out.targets.fiber(i, v).begin());
    }
  }
  return out;
}

CorrEstimate lagged_temporal_corr(const TimeSeriesDataset& ds, std::size_t window_len,
                                  double source_fraction) {
  if (window_len < 2) throw InputError("window_len must be at least 2");
  const std::size_t m = source_columns(ds, source_fraction);
  if (m <= window_len) {
    throw DataError("source region of " + std::to_string(m) + " training steps is too short for " +
                    "window length " + std::to_string(window_len));
  }
  const std::size_t len = m - window_len;
  if (len < 2) throw DataError("lagged series shorter than 2 steps");

  const std::size_t w = window_len;
  Matrix sum(w, w);
  std::size_t used = 0;
  std::vector<double> mean(w), centered(w * len);
  for (std::size_t j = 0; j < ds.n_variates(); ++j) {
    const auto row = ds.values.row(j).first(m);
    bool degenerate = false;
    for (std::size_t i = 0; i < w && !degenerate; ++i) {
      const auto s = row.subspan(i, len);
      degenerate = is_constant(s);
      double mu = 0.0;
      for (double x : s) mu += x;
      mean[i] = mu / static_cast<double>(len);
    }
    if (degenerate) continue;
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t t = 0; t < len; ++t) centered[i * len + t] = row[i + t] - mean[i];

    std::vector<double> ss(w);
    for (std::size_t i = 0; i < w; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < len; ++t) acc += centered[i * len + t] * centered[i * len + t];
      ss[i] = acc;
    }
    for (std::size_t p = 0; p < w; ++p) {
      for (std::size_t q = p; q < w; ++q) {
        double acc = 0.0;
        const double* a = centered.data() + p * len;
        const double* b = centered.data() + q * len;
        for (std::size_t t = 0; t < len; ++t) acc += a[t] * b[t];
        const double r = acc / std::sqrt(ss[p] * ss[q]);
        sum(p, q) += r;
        if (q != p) sum(q, p) += r;
      }
    }
    ++used;
  }
  if (used == 0) throw DataError("every variate is constant over the correlation source region");

  for (double& v : sum.values()) v /= static_cast<double>(used);
  finalize_corr(sum);
  return CorrEstimate{std::move(sum), window_len, source_fraction, used};
}

CorrEstimate variate_corr(const TimeSeriesDataset& ds, double source_fraction) {
  const std::size_t m = source_columns(ds, source_fraction);
  if (m < 2) throw DataError("variate correlation needs at least 2 training steps");
  const std::size_t n = ds.n_variates();
  Matrix c = Matrix::identity(n);
  std::vector<bool> constant(n);
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    constant[i] = is_constant(ds.values.row(i).first(m));
    if (!constant[i]) ++used;
  }
  if (used == 0) throw DataError("every variate is constant over the correlation source region");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = (constant[i] || constant[j])
                           ? 0.0
                           : pearson(ds.values.row(i).first(m), ds.values.row(j).first(m));
      c(i, j) = r;
      c(j, i) = r;
    }
  }
  finalize_corr(c);
  return CorrEstimate{std::move(c), n, source_fraction, used};
}

}  // namespace olinear
