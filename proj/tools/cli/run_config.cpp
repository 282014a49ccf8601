#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "olinear/error.hpp"
#include "olinear/format.hpp"

namespace olinear::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T x{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return x;
}

double parse_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(x)) {
    throw ConfigError("key '" + key + "' expects a finite number, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + v + "'");
}

std::string b(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define SIZE_FIELD(key, member)                                                               \
  {key,                                                                                       \
   {[](const RunConfig& r) { return std::to_string(r.member); },                             \
    [](RunConfig& r, const std::string& k, const std::string& v) {                           \
      r.member = parse_int<std::size_t>(k, v);                                                \
    }}}
#define REAL_FIELD(key, member)                                                               \
  {key,                                                                                       \
   {[](const RunConfig& r) { return format_double(r.member); },                              \
    [](RunConfig& r, const std::string& k, const std::string& v) { r.member = parse_real(k, v); }}}
#define BOOL_FIELD(key, member)                                                               \
  {key,                                                                                       \
   {[](const RunConfig& r) { return b(r.member); },                                          \
    [](RunConfig& r, const std::string& k, const std::string& v) { r.member = parse_bool(k, v); }}}
#define ENUM_FIELD(key, member, parser)                                                       \
  {key,                                                                                       \
   {[](const RunConfig& r) { return std::string(to_string(r.member)); },                     \
    [](RunConfig& r, const std::string&, const std::string& v) { r.member = parser(v); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      {"data_path",
       {[](const RunConfig& r) { return r.data_path.string(); },
        [](RunConfig& r, const std::string&, const std::string& v) { r.data_path = v; }}},
      {"output_dir",
       {[](const RunConfig& r) { return r.output_dir.string(); },
        [](RunConfig& r, const std::string&, const std::string& v) { r.output_dir = v; }}},
      REAL_FIELD("train_ratio", ratios.train),
      REAL_FIELD("val_ratio", ratios.val),
      REAL_FIELD("q_source_fraction", q_source_fraction),
      BOOL_FIELD("scale", scale),
      {"attention_heads",
       {[](const RunConfig& r) { return std::to_string(r.attention_heads); },
        [](RunConfig& r, const std::string& k, const std::string& v) {
          r.attention_heads = parse_int<std::uint64_t>(k, v);
        }}},
      SIZE_FIELD("lookback", model.lookback),
      SIZE_FIELD("horizon", model.horizon),
      SIZE_FIELD("embed_size", model.embed_size),
      SIZE_FIELD("model_dim", model.model_dim),
      SIZE_FIELD("n_blocks", model.n_blocks),
      ENUM_FIELD("normlin_transform", model.normlin_transform, parse_normlin_transform),
      ENUM_FIELD("normlin_norm", model.normlin_norm, parse_normlin_norm),
      BOOL_FIELD("csl_pre_linear", model.csl_pre_linear),
      BOOL_FIELD("csl_post_linear", model.csl_post_linear),
      ENUM_FIELD("variant", model.variant, parse_variant),
      ENUM_FIELD("olinear_c_transform", model.olinear_c_transform, parse_normlin_transform),
      ENUM_FIELD("basis_method", model.basis_method, parse_basis_method),
      REAL_FIELD("learning_rate", train.learning_rate),
      SIZE_FIELD("batch_size", train.batch_size),
      SIZE_FIELD("max_epochs", train.max_epochs),
      SIZE_FIELD("patience", train.patience),
      ENUM_FIELD("loss", train.loss, parse_loss_kind),
      REAL_FIELD("horizon_weight_exponent", train.horizon_weight_exponent),
      {"seed",
       {[](const RunConfig& r) { return std::to_string(r.train.seed); },
        [](RunConfig& r, const std::string& k, const std::string& v) {
          r.train.seed = parse_int<std::uint64_t>(k, v);
        }}},
      REAL_FIELD("grad_clip", train.grad_clip),
      SIZE_FIELD("window_stride", train.window_stride),
  };
  return f;
}

#undef SIZE_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD
#undef ENUM_FIELD

}  // namespace

void RunConfig::validate() const {
  if (data_path.empty()) throw ConfigError("data_path is required");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (!(ratios.train > 0.0) || !(ratios.val > 0.0) || ratios.train + ratios.val >= 1.0) {
    throw ConfigError("train_ratio and val_ratio must be positive with a sum below 1");
  }
  if (!(q_source_fraction > 0.0) || q_source_fraction > 1.0) {
    throw ConfigError("q_source_fraction must lie in (0, 1]");
  }
  if (attention_heads == 0) throw ConfigError("attention_heads must be at least 1");
  model.validate();
  train.validate();
}

std::vector<std::pair<std::string, std::string>> entries(const RunConfig& rc) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, f] : fields()) out.emplace_back(k, f.get(rc));
  return out;
}

void set_key(RunConfig& rc, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : fields()) {
    if (k == key) {
      f.set(rc, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_text(RunConfig& rc, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    try {
      set_key(rc, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_override(RunConfig& rc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_key(rc, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  RunConfig rc;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    apply_text(rc, text.str(), path.string());
  }
  for (const auto& o : overrides) apply_override(rc, o);
  rc.validate();
  return rc;
}

}  // namespace olinear::cli
