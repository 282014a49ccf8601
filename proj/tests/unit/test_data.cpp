#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "olinear/data.hpp"
#include "olinear/error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace olinear;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "olinear_data_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Dataset, SplitBoundariesFloor) {
  const auto ds = olinear::testing::as_dataset(Matrix(1, 10), {0.6, 0.2});
  EXPECT_EQ(ds.train_end, 6u);
  EXPECT_EQ(ds.val_end, 8u);
  EXPECT_EQ(ds.range(Split::test), (std::pair<std::size_t, std::size_t>{8, 10}));
}

TEST(Dataset, RejectsEmptySplits) {
  EXPECT_THROW(olinear::testing::as_dataset(Matrix(1, 3), {0.2, 0.2}), DataError);
}

TEST(Csv, LoadsNumericTimestamps) {
  const auto p = temp_file("ok.csv", "t,a,b\n0,1,2\n1,3,4\n2,5,6\n3,7,8\n4,9,10\n5,11,12\n6,13,14\n7,15,16\n8,17,18\n9,19,20\n");
  const auto ds = load_csv(p, {{0.6, 0.2}, 0});
  EXPECT_EQ(ds.n_variates(), 2u);
  EXPECT_EQ(ds.n_steps(), 10u);
  EXPECT_EQ(ds.names[1], "b");
  EXPECT_EQ(ds.values(1, 9), 20.0);
}

TEST(Csv, LoadsIsoTimestamps) {
  std::string s = "date,x\n";
  for (int h = 0; h < 10; ++h) s += "2016-07-01 0" + std::to_string(h) + ":00:00," + std::to_string(h) + "\n";
  const auto ds = load_csv(temp_file("iso.csv", s), {{0.6, 0.2}, 0});
  EXPECT_EQ(ds.n_steps(), 10u);
}

TEST(Csv, BadCellNamesRowAndColumn) {
  const auto p = temp_file("bad.csv", "t,a,b\n0,1,2\n1,3,oops\n2,5,6\n");
  const std::string msg = error_of([&] { load_csv(p, {{0.6, 0.2}, 0}); });
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
}

TEST(Csv, NonIncreasingTimestampsRejected) {
  const auto p = temp_file("order.csv", "t,a\n0,1\n2,1\n1,1\n3,1\n4,1\n");
  EXPECT_THROW(load_csv(p, {{0.6, 0.2}, 0}), DataError);
}

TEST(Csv, RaggedRowRejected) {
  const auto p = temp_file("ragged.csv", "t,a,b\n0,1,2\n1,3\n");
  EXPECT_THROW(load_csv(p, {{0.6, 0.2}, 0}), DataError);
}

TEST(Csv, TooShortForWindowRejected) {
  const auto p = temp_file("short.csv", "t,a\n0,1\n1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n7,8\n8,9\n9,10\n");
  EXPECT_THROW(load_csv(p, {{0.6, 0.2}, 12}), DataError);
}

TEST(Csv, MissingFileIsDataError) {
  EXPECT_THROW(load_csv("/definitely/not/here.csv", {}), DataError);
}

TEST(Windows, CountsAndStayInsideSplit) {
  Matrix v(1, 100);
  for (std::size_t t = 0; t < 100; ++t) v(0, t) = static_cast<double>(t);
  const auto ds = olinear::testing::as_dataset(v, {0.7, 0.1});
  const auto w = make_windows(ds, Split::train, 8, 4);
  EXPECT_EQ(w.size(), window_count(70, 8, 4, 1));
  EXPECT_EQ(w.size(), 59u);
  EXPECT_EQ(w.inputs(0, 0, 0), 0.0);
  EXPECT_EQ(w.targets(58, 0, 3), 69.0);

  const auto test = make_windows(ds, Split::test, 8, 4);
  EXPECT_EQ(test.inputs(0, 0, 0), 80.0);
  EXPECT_EQ(test.size(), 9u);

  const auto strided = make_windows(ds, Split::train, 8, 4, 5);
  EXPECT_EQ(strided.size(), 12u);
  EXPECT_EQ(strided.inputs(1, 0, 0), 5.0);

  EXPECT_THROW(make_windows(ds, Split::val, 8, 4), DataError);
}

TEST(Windows, GatherCopiesInOrder) {
  Matrix v(2, 40);
  for (std::size_t t = 0; t < 40; ++t) v(0, t) = v(1, t) = static_cast<double>(t);
  const auto ds = olinear::testing::as_dataset(v, {0.7, 0.1});
  const auto all = make_windows(ds, Split::train, 4, 2);
  const std::vector<std::size_t> idx{5, 0, 5};
  const auto g = gather_windows(all, idx);
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.inputs(0, 1, 0), 5.0);
  EXPECT_EQ(g.inputs(1, 0, 0), 0.0);
  EXPECT_EQ(g.targets(2, 0, 1), 10.0);
}

TEST(TemporalCorr, Ar1LagStructure) {
  const auto ds = olinear::testing::as_dataset(olinear::testing::ar1_series(3, 20000, 0.7, 11));
  const auto c = lagged_temporal_corr(ds, 6);
  EXPECT_EQ(c.window, 6u);
  EXPECT_EQ(c.variates_used, 3u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(c.matrix(i, i), 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(c.matrix(i, j), c.matrix(j, i));
      const double expect = std::pow(0.7, std::abs(static_cast<double>(i) - static_cast<double>(j)));
      EXPECT_NEAR(c.matrix(i, j), expect, 0.03);
    }
  }
}

TEST(TemporalCorr, SkipsConstantVariates) {
  Matrix v = olinear::testing::white_noise(2, 500, 3);
  for (std::size_t t = 0; t < 500; ++t) v(1, t) = 4.0;
  const auto c = lagged_temporal_corr(olinear::testing::as_dataset(v), 5);
  EXPECT_EQ(c.variates_used, 1u);
}

TEST(TemporalCorr, SourceFractionUsesPrefix) {
  const auto ds = olinear::testing::as_dataset(olinear::testing::ar1_series(1, 2000, 0.5, 4));
  const auto full = lagged_temporal_corr(ds, 4, 1.0);
  const auto part = lagged_temporal_corr(ds, 4, 0.1);
  EXPECT_EQ(part.source_fraction, 0.1);
  EXPECT_NE(full.matrix, part.matrix);
  EXPECT_THROW(lagged_temporal_corr(ds, 4, 0.0), InputError);
}

TEST(VariateCorr, MatchesTextbookPearson) {
  const Matrix v = olinear::testing::white_noise(3, 300, 9);
  const auto ds = olinear::testing::as_dataset(v);
  const auto c = variate_corr(ds);
  const auto [b, e] = ds.range(Split::train);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) {
        EXPECT_EQ(c.matrix(i, j), 1.0);
        continue;
      }
      const double ref = olinear::testing::textbook_pearson(v.row(i).subspan(b, e - b), v.row(j).subspan(b, e - b));
      EXPECT_NEAR(c.matrix(i, j), ref, 1e-12);
    }
}

TEST(VariateCorr, ConstantVariateHasZeroOffDiagonal) {
  Matrix v = olinear::testing::white_noise(2, 100, 2);
  for (std::size_t t = 0; t < 100; ++t) v(0, t) = 1.0;
  const auto c = variate_corr(olinear::testing::as_dataset(v));
  EXPECT_EQ(c.matrix(0, 1), 0.0);
  EXPECT_EQ(c.matrix(0, 0), 1.0);
}

TEST(Standardize, UsesTrainStatistics) {
  Matrix v(1, 10);
  for (std::size_t t = 0; t < 10; ++t) v(0, t) = static_cast<double>(t);
  auto ds = olinear::testing::as_dataset(v, {0.6, 0.2});
  const auto st = standardize(ds);
  EXPECT_DOUBLE_EQ(st.mean[0], 2.5);
  double m = 0.0;
  for (std::size_t t = 0; t < 6; ++t) m += ds.values(0, t);
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_GT(ds.values(0, 9), ds.values(0, 5));
}
