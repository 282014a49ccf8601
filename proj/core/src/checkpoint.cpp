#include "olinear/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "olinear/error.hpp"

namespace olinear {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'O', 'L', 'C', 'K'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  template <class T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void doubles(std::vector<double>& out, std::size_t n, const std::string& what) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) truncated(what);
    out.resize(n);
    if (n > 0) std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const std::string& what) {
    if (bytes_.size() - pos_ < n) truncated(what);
  }
  [[noreturn]] void truncated(const std::string& what) {
    throw IoError("checkpoint '" + path_ + "' is truncated while reading " + what);
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("checkpoint config is missing key '" + key + "'");
  return it->second;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || v.front() == '-') {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::string shape_text(const std::vector<std::uint64_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void load_tensor(const CheckpointFile& f, const std::string& name, Matrix& dst) {
  const TensorRecord* r = f.find(name);
  if (r == nullptr) throw IoError("checkpoint is missing tensor '" + name + "'");
  const std::vector<std::uint64_t> want{dst.rows(), dst.cols()};
  if (r->shape != want) {
    throw IoError("tensor '" + name + "' has shape " + shape_text(r->shape) + ", config expects " +
                  shape_text(want));
  }
  dst = to_matrix(*r);
}

void put_basis(CheckpointFile& f, const std::string& name, const OrthoBasis& b) {
  f.tensors.push_back(to_record(name, b.q));
  if (b.eigenvalues) {
    const Matrix ev(1, b.eigenvalues->size(), *b.eigenvalues);
    f.tensors.push_back(to_record(name + ".eigenvalues", ev));
  }
  f.config.emplace_back(name + ".method", to_string(b.method));
}

OrthoBasis get_basis(const CheckpointFile& f, const std::map<std::string, std::string>& kv,
                     const std::string& name, std::size_t n) {
  OrthoBasis b;
  b.method = parse_basis_method(require(kv, name + ".method"));
  b.n = n;
  b.q = Matrix(n, n);
  load_tensor(f, name, b.q);
  if (b.method == BasisMethod::eigen) {
    Matrix ev(1, n);
    load_tensor(f, name + ".eigenvalues", ev);
    b.eigenvalues = ev.data();
  }
  return b;
}

}  // namespace

const TensorRecord* CheckpointFile::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::map<std::string, std::string> CheckpointFile::config_map() const {
  return {config.begin(), config.end()};
}

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& t : file.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.data.size()) {
      throw ShapeError("tensor '" + t.name + "' holds " + std::to_string(t.data.size()) +
                       " values for shape " + shape_text(t.shape));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
  }
  std::string text;
  for (const auto& [k, v] : file.config) text += k + " = " + v + "\n";
  put<std::uint64_t>(out, text.size());
  out += text;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path.string() + "'");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());

  if (r.str(4, "magic") != std::string(kMagic, 4)) {
    throw IoError("'" + path.string() + "' is not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint '" + path.string() + "' has unsupported version " + std::to_string(version));
  }
  CheckpointFile f;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    const std::string idx = "tensor #" + std::to_string(i);
    t.name = r.str(r.get<std::uint32_t>(idx + " name length"), idx + " name");
    const auto rank = r.get<std::uint32_t>("rank of '" + t.name + "'");
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.get<std::uint64_t>("shape of '" + t.name + "'"));
      n *= t.shape.back();
    }
    r.doubles(t.data, n, "data of '" + t.name + "'");
    f.tensors.push_back(std::move(t));
  }
  const auto len = r.get<std::uint64_t>("config length");
  std::istringstream text(r.str(len, "config text"));
  if (!r.done()) throw IoError("checkpoint '" + path.string() + "' has trailing bytes");
  std::string line;
  while (std::getline(text, line)) {
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed config line '" + line + "' in checkpoint");
    f.config.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return f;
}

TensorRecord to_record(const std::string& name, const Matrix& m) {
  return {name, {m.rows(), m.cols()}, m.data()};
}

Matrix to_matrix(const TensorRecord& r) {
  if (r.shape.size() != 2) {
    throw IoError("tensor '" + r.name + "' has rank " + std::to_string(r.shape.size()) + ", expected 2");
  }
  return {static_cast<std::size_t>(r.shape[0]), static_cast<std::size_t>(r.shape[1]), r.data};
}

std::vector<std::pair<std::string, std::string>> model_config_entries(const OLinearConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"n_variates", std::to_string(c.n_variates)},
      {"lookback", std::to_string(c.lookback)},
      {"horizon", std::to_string(c.horizon)},
      {"embed_size", std::to_string(c.embed_size)},
      {"model_dim", std::to_string(c.model_dim)},
      {"n_blocks", std::to_string(c.n_blocks)},
      {"normlin_transform", to_string(c.normlin_transform)},
      {"normlin_norm", to_string(c.normlin_norm)},
      {"csl_pre_linear", b(c.csl_pre_linear)},
      {"csl_post_linear", b(c.csl_post_linear)},
      {"variant", to_string(c.variant)},
      {"olinear_c_transform", to_string(c.olinear_c_transform)},
      {"basis_method", to_string(c.basis_method)},
  };
}

OLinearConfig model_config_from(const std::map<std::string, std::string>& kv) {
  OLinearConfig c;
  c.n_variates = to_size("n_variates", require(kv, "n_variates"));
  c.lookback = to_size("lookback", require(kv, "lookback"));
  c.horizon = to_size("horizon", require(kv, "horizon"));
  c.embed_size = to_size("embed_size", require(kv, "embed_size"));
  c.model_dim = to_size("model_dim", require(kv, "model_dim"));
  c.n_blocks = to_size("n_blocks", require(kv, "n_blocks"));
  c.normlin_transform = parse_normlin_transform(require(kv, "normlin_transform"));
  c.normlin_norm = parse_normlin_norm(require(kv, "normlin_norm"));
  c.csl_pre_linear = to_bool("csl_pre_linear", require(kv, "csl_pre_linear"));
  c.csl_post_linear = to_bool("csl_post_linear", require(kv, "csl_post_linear"));
  c.variant = parse_variant(require(kv, "variant"));
  c.olinear_c_transform = parse_normlin_transform(require(kv, "olinear_c_transform"));
  c.basis_method = parse_basis_method(require(kv, "basis_method"));
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const OLinearParams& params, const OLinearConfig& cfg,
                     const std::vector<std::pair<std::string, std::string>>& extra_config) {
  CheckpointFile f;
  visit_weights(params.weights, cfg, [&](const std::string& name, const Matrix& m, bool) {
    f.tensors.push_back(to_record(name, m));
  });
  f.config = model_config_entries(cfg);
  put_basis(f, "q_in", params.q_in);
  put_basis(f, "q_out", params.q_out);
  f.config.insert(f.config.end(), extra_config.begin(), extra_config.end());
  write_checkpoint_file(path, f);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const CheckpointFile f = read_checkpoint_file(path);
  LoadedCheckpoint out;
  out.config_echo = f.config_map();
  out.config = model_config_from(out.config_echo);
  const OLinearConfig& cfg = out.config;

  // A freshly initialized model fixes the expected tensor names and shapes.
  CorrEstimate unit_corr{Matrix::identity(cfg.n_variates), cfg.n_variates, 1.0, cfg.n_variates};
  out.params = init_params(cfg, build_basis(nullptr, BasisMethod::identity, cfg.lookback),
                           build_basis(nullptr, BasisMethod::identity, cfg.horizon), &unit_corr, 0);
  std::size_t expected = 0;
  visit_weights(out.params.weights, cfg, [&](const std::string& name, Matrix& m, bool) {
    load_tensor(f, name, m);
    ++expected;
  });
  out.params.q_in = get_basis(f, out.config_echo, "q_in", cfg.lookback);
  out.params.q_out = get_basis(f, out.config_echo, "q_out", cfg.horizon);
  expected += 2 + (out.params.q_in.eigenvalues ? 1 : 0) + (out.params.q_out.eigenvalues ? 1 : 0);
  if (expected != f.tensors.size()) {
    for (const auto& t : f.tensors) {
      bool known = t.name == "q_in" || t.name == "q_out" || t.name == "q_in.eigenvalues" ||
                   t.name == "q_out.eigenvalues";
      visit_weights(out.params.weights, cfg,
                    [&](const std::string& name, const Matrix&, bool) { known = known || name == t.name; });
      if (!known) throw IoError("checkpoint holds unexpected tensor '" + t.name + "'");
    }
    throw IoError("checkpoint holds duplicate tensors");
  }
  return out;
}

}  // namespace olinear
