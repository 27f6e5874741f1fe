#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "cssmooth/dataset.hpp"
#include "cssmooth/rng.hpp"

namespace cssmooth {
namespace {

Dataset parse(const std::string& text, std::optional<std::size_t> m = std::nullopt) {
  std::istringstream in(text);
  return parse_dataset(in, "mem.csv", m);
}

TEST(ParseDataset, ReadsHeaderAndRows) {
  const auto d = parse("label,f0,f1\n0,1.5,-2\n2,0,0.25\n");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.d, 2u);
  EXPECT_EQ(d.m, 3u);
  EXPECT_EQ(d.row(1)[1], 0.25);
  EXPECT_EQ(parse("label,f0\n1,0\n", 5).m, 5u);
}

TEST(ParseDataset, ErrorsNameTheLine) {
  auto message = [](const std::string& text, std::optional<std::size_t> m = std::nullopt) {
    try {
      parse(text, m);
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("label,f0\n0,1\n0,x\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("label,f0\n0,1,2\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("label,f0\n7,1\n", 3).find("line 2"), std::string::npos);
  EXPECT_NE(message("label,f0\n0,nan\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("lbl,f0\n0,1\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("label,f0\n").find("no examples"), std::string::npos);
  EXPECT_NE(message("label,f0\n-1,0\n").find("line 2"), std::string::npos);
}

TEST(ParseDataset, WriteParseRoundTripIsExact) {
  const auto blobs = gen_synthetic("blobs-5", 3).test;
  std::stringstream ss;
  write_dataset(ss, blobs);
  const auto back = parse_dataset(ss, "x", blobs.m);
  EXPECT_EQ(back.labels, blobs.labels);
  EXPECT_EQ(back.features, blobs.features);
}

TEST(Blobs, ShapeAndDeterminism) {
  const auto a = gen_synthetic("blobs-5", 0);
  const auto b = gen_synthetic("blobs-5", 0);
  EXPECT_EQ(a.train.size(), 500u);
  EXPECT_EQ(a.test.size(), 500u);
  EXPECT_EQ(a.train.m, 5u);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_NE(a.train.features, gen_synthetic("blobs-5", 1).train.features);
  EXPECT_NE(a.train.features, a.test.features);
  EXPECT_THROW(gen_synthetic("moons", 0), std::invalid_argument);
  EXPECT_THROW(gen_synthetic("blobs-1", 0), std::invalid_argument);
}

TEST(Dataset, SubsetAndValidate) {
  const auto d = parse("label,f0\n0,1\n1,2\n2,3\n");
  const std::vector<std::size_t> ids{2, 0};
  const auto s = d.subset(ids);
  EXPECT_EQ(s.labels, (std::vector<Label>{2, 0}));
  EXPECT_EQ(s.features, (std::vector<double>{3, 1}));
  Dataset bad = d;
  bad.m = 2;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(RngKey, ChildrenAreDistinctAndStable) {
  const RngKey root(42);
  EXPECT_EQ(root.child("certify"), root.child("certify"));
  EXPECT_NE(root.child("certify"), root.child("train"));
  EXPECT_EQ(root.child({1, 2}), root.child(1).child(2));
  EXPECT_NE(root.child({1, 2}), root.child({2, 1}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(root.child(i).value());
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(CounterRng, OutputDependsOnlyOnKeyAndCounter) {
  CounterRng a(RngKey(1));
  for (int i = 0; i < 5; ++i) a();
  CounterRng b(RngKey(1), 5);
  EXPECT_EQ(a(), b());
  EXPECT_EQ(a.counter(), 6u);
}

}  // namespace
}  // namespace cssmooth
