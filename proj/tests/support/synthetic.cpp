#include "synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "olinear/format.hpp"

namespace olinear::testing {

Matrix ar1_series(std::size_t n_variates, std::size_t steps, double rho, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innov = std::sqrt(1.0 - rho * rho);
  Matrix m(n_variates, steps);
  for (std::size_t v = 0; v < n_variates; ++v) {
    double x = normal(gen);
    for (std::size_t t = 0; t < steps; ++t) {
      m(v, t) = x;
      x = rho * x + innov * normal(gen);
    }
  }
  return m;
}

Matrix sinusoid_series(std::size_t n_variates, std::size_t steps, double period, double snr,
                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  // A unit-amplitude sine carries power 1/2.
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5 / snr));
  Matrix m(n_variates, steps);
  for (std::size_t v = 0; v < n_variates; ++v)
    for (std::size_t t = 0; t < steps; ++t) {
      const double phase = static_cast<double>(v) * std::numbers::pi / 3.0;
      m(v, t) = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase) + noise(gen);
    }
  return m;
}

Matrix white_noise(std::size_t n_variates, std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n_variates, steps);
  for (double& x : m.values()) x = normal(gen);
  return m;
}

TimeSeriesDataset as_dataset(const Matrix& values, SplitRatios ratios) {
  std::vector<std::string> names;
  for (std::size_t v = 0; v < values.rows(); ++v) names.push_back("v" + std::to_string(v));
  return make_dataset(std::move(names), values, ratios);
}

void write_csv(const std::filesystem::path& path, const Matrix& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t";
  for (std::size_t v = 0; v < values.rows(); ++v) out << ",v" << v;
  out << '\n';
  for (std::size_t t = 0; t < values.cols(); ++t) {
    out << t;
    for (std::size_t v = 0; v < values.rows(); ++v) out << ',' << format_double(values(v, t));
    out << '\n';
  }
}

Tensor3 random_tensor(std::size_t b, std::size_t n, std::size_t t, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor3 x(b, n, t);
  for (double& v : x.values()) v = u(gen);
  return x;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = u(gen);
  return m;
}

}  // namespace olinear::testing
