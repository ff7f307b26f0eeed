#include <gtest/gtest.h>

#include <sstream>

#include "mccd/binary_io.hpp"

using namespace mccd;

TEST(FeaturesFile, RoundTrip) {
  SyntheticConfig cfg;
  cfg.train_n = 50;
  cfg.test_n = 10;
  const auto d = generate_synthetic(cfg);
  std::stringstream buf;
  write_features(buf, d.train.features);
  EXPECT_EQ(buf.str().size(), 8 + 4 + 8 + 4 + 4 + 50 * 3 * 16 * 8u);
  EXPECT_EQ(read_features(buf), d.train.features);
}

TEST(FeaturesFile, HeaderLayout) {
  const std::vector<Features> one = {{{1.0}, {2.0}, {-0.5}}};
  std::stringstream buf;
  write_features(buf, one);
  const std::string s = buf.str();
  EXPECT_EQ(s.substr(0, 8), "MCCDFEAT");
  EXPECT_EQ(static_cast<unsigned char>(s[8]), 1u);   // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(s[12]), 1u);  // n
  EXPECT_EQ(static_cast<unsigned char>(s[20]), 1u);  // dims
  EXPECT_EQ(static_cast<unsigned char>(s[24]), 3u);  // modalities
  // 1.0 = 0x3FF0000000000000, stored low byte first.
  EXPECT_EQ(static_cast<unsigned char>(s[28 + 7]), 0x3Fu);
  EXPECT_EQ(static_cast<unsigned char>(s[28 + 6]), 0xF0u);
}

TEST(FeaturesFile, Errors) {
  std::stringstream bad("NOTMAGIC");
  EXPECT_THROW(read_features(bad), BinaryFormatError);
  const std::vector<Features> one = {{{1.0, 2.0}, {2.0, 3.0}, {4.0, 5.0}}};
  std::stringstream buf;
  write_features(buf, one);
  std::stringstream truncated(buf.str().substr(0, buf.str().size() - 3));
  EXPECT_THROW(read_features(truncated), BinaryFormatError);
  const std::vector<Features> ragged = {{{1.0, 2.0}, {2.0}, {4.0, 5.0}}};
  std::stringstream out;
  EXPECT_THROW(write_features(out, ragged), BinaryFormatError);
}

TEST(ModelFile, RoundTrip) {
  const ToyModel m = ToyModel::initialized(ModelShape{5, 7, 3, 4}, 11);
  std::stringstream buf;
  write_model(buf, m);
  const ToyModel back = read_model(buf);
  EXPECT_EQ(back.shape(), m.shape());
  EXPECT_TRUE(std::equal(back.params().begin(), back.params().end(), m.params().begin()));
}

TEST(ModelFile, CountMismatch) {
  const ToyModel m(ModelShape{2, 2, 2, 2});
  std::stringstream buf;
  write_model(buf, m);
  std::string s = buf.str();
  s[12] = 3;  // feature_dim
  std::stringstream tampered(s);
  EXPECT_THROW(read_model(tampered), BinaryFormatError);
}
