#include <gtest/gtest.h>

#include <random>

#include "dukd/dataset.hpp"
#include "dukd/metrics.hpp"
#include "dukd/report.hpp"
#include "oracles.hpp"

using dukd::Image;

namespace {

Image<double> texture(int size, std::uint64_t seed, int kind = 3) {
  dukd::Rng rng(seed);
  return dukd::synthetic_texture(size, kind, rng);
}

}  // namespace

TEST(Psnr, IdenticalIsInfiniteAndCapped) {
  const auto a = texture(32, 1);
  const double v = dukd::psnr_y(a, a, 2);
  EXPECT_TRUE(std::isinf(v));
  EXPECT_EQ(dukd::cap_psnr(v), dukd::kPsnrCap);
}

TEST(Psnr, OneLevelUniformError) {
  Image<double> a(1, 16, 16, 100.0 / 255.0), b(1, 16, 16, 101.0 / 255.0);
  EXPECT_NEAR(dukd::psnr_y(a, b, 0), 10.0 * std::log10(255.0 * 255.0), 1e-9);
  EXPECT_NEAR(dukd::psnr_y(a, b, 0), 48.1308, 1e-3);
}

TEST(Psnr, TwentyDecibels) {
  Image<double> a(1, 8, 8, 0.2), b(1, 8, 8, 0.3);
  EXPECT_NEAR(dukd::psnr_y(a, b, 0), 20.0, 1e-9);
}

TEST(Psnr, SymmetricAndFlipInvariant) {
  const auto a = texture(24, 2), b = texture(24, 3);
  EXPECT_EQ(dukd::psnr_y(a, b, 2), dukd::psnr_y(b, a, 2));
  const auto fa = oracle::augment(dukd::AugKind::hflip, a), fb = oracle::augment(dukd::AugKind::hflip, b);
  EXPECT_NEAR(dukd::psnr_y(fa, fb, 2), dukd::psnr_y(a, b, 2), 1e-9);
}

TEST(Psnr, MonotoneInNoiseAmplitude) {
  const auto a = texture(32, 4);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> noise(a.size());
  for (double& n : noise) n = u(gen);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.001, 0.01, 0.03, 0.1}) {
    auto b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b.values()[i] += amp * noise[i];
    const double v = dukd::psnr_y(a, b, 0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Psnr, Errors) {
  EXPECT_THROW(dukd::psnr_y(Image<double>(3, 8, 8), Image<double>(3, 8, 9), 0), dukd::ShapeError);
  EXPECT_THROW(dukd::psnr_y(Image<double>(3, 8, 8), Image<double>(3, 8, 8), 4), dukd::SizeError);
}

TEST(Ssim, SelfIsExactlyOne) {
  for (std::uint64_t s : {1, 2, 3}) {
    const auto a = texture(40, s, static_cast<int>(s));
    EXPECT_EQ(dukd::ssim_y(a, a, 2), 1.0);
  }
}

TEST(Ssim, ConstantPatchClosedForm) {
  Image<double> a(1, 16, 16, 0.2), b(1, 16, 16, 0.8);
  const double c1 = 1e-4;
  const double closed = (2 * 0.2 * 0.8 + c1) / (0.2 * 0.2 + 0.8 * 0.8 + c1);
  EXPECT_NEAR(dukd::ssim_y(a, b, 0), closed, 1e-9);
  EXPECT_NEAR(dukd::ssim_y(a, b, 0), 0.4707, 1e-3);
}

TEST(Ssim, InvertedTextureIsDissimilar) {
  const auto a = texture(48, 7);
  EXPECT_LT(dukd::ssim_y(a, dukd::apply(dukd::AugKind::color_inversion, a), 0), 0.3);
}

TEST(Ssim, SymmetricAndBounded) {
  const auto a = texture(32, 8), b = texture(32, 9);
  const double ab = dukd::ssim_y(a, b, 2), ba = dukd::ssim_y(b, a, 2);
  EXPECT_NEAR(ab, ba, 1e-15);
  EXPECT_GE(ab, -1.0);
  EXPECT_LE(ab, 1.0);
}

TEST(Ssim, TooSmallAfterShaveIsSizeError) {
  EXPECT_THROW(dukd::ssim_y(Image<double>(3, 14, 14), Image<double>(3, 14, 14), 2), dukd::SizeError);
}

namespace {

class Bicubic final : public dukd::SRNetwork<double> {
 public:
  explicit Bicubic(int s) : s_(s) {}
  Image<double> infer(const Image<double>& x) const override {
    return dukd::bicubic_resize(x, dukd::ResampleSpec::up(s_));
  }
  int scale() const override { return s_; }
  std::uint64_t parameter_hash() const override { return 0; }

 private:
  int s_;
};

}  // namespace

TEST(Similarity, SameModelIsCapped) {
  const auto pairs = dukd::synthetic_pairs<double>(2, 32, 2, 1);
  Bicubic net(2);
  const auto r = dukd::similarity_report<double>(net, net, pairs, dukd::Split::test, {2, true});
  EXPECT_TRUE(std::isinf(r.psnr_s_t));
  EXPECT_EQ(dukd::to_json(r)["psnr_s_t"], dukd::kPsnrCap);
  EXPECT_TRUE(std::isfinite(r.psnr_s_gt));
  EXPECT_EQ(r.n_images, 2);
}

TEST(Similarity, EmptyDatasetIsDataError) {
  Bicubic net(2);
  EXPECT_THROW(dukd::similarity_report<double>(net, net, {}, dukd::Split::train, {}), dukd::DataError);
}

TEST(Evaluate, FiniteOnNonDegenerateData) {
  const auto pairs = dukd::synthetic_pairs<double>(3, 32, 2, 2);
  Bicubic net(2);
  const auto m = dukd::evaluate<double>(net, pairs, "toy", "bicubic", {2, true});
  EXPECT_TRUE(std::isfinite(m.psnr));
  EXPECT_TRUE(std::isfinite(m.ssim));
  EXPECT_EQ(m.n_images, 3);
  EXPECT_THROW(dukd::evaluate<double>(net, {}, "toy", "bicubic", {}), dukd::DataError);
}

TEST(Split, Names) {
  EXPECT_EQ(dukd::split_from_string("train"), dukd::Split::train);
  EXPECT_THROW(dukd::split_from_string("val"), dukd::ConfigError);
}

TEST(ResultsTable, OneRowPerTripleAndBest) {
  dukd::ResultsTable t;
  t.add({"scratch", 2, "toy", 30.1, 0.9, false});
  t.add({"dukd", 2, "toy", 30.5, 0.91, false});
  t.add({"scratch", 4, "toy", 25.0, 0.7, false});
  EXPECT_THROW(t.add({"dukd", 2, "toy", 1, 1, false}), dukd::ConfigError);
  t.mark_best();
  EXPECT_FALSE(t.rows()[0].best);
  EXPECT_TRUE(t.rows()[1].best);
  EXPECT_TRUE(t.rows()[2].best);
  const auto csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,scale,dataset,psnr,ssim,best");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Crops, BoxParsingAndBounds) {
  const auto b = dukd::parse_box("1,2,3,4");
  EXPECT_EQ(b.x, 1);
  EXPECT_EQ(b.h, 4);
  EXPECT_THROW(dukd::parse_box("1,2,3"), dukd::ConfigError);
  EXPECT_NO_THROW(dukd::check_box(b, 6, 4));
  EXPECT_THROW(dukd::check_box(b, 5, 4), dukd::SizeError);
  const auto panel = dukd::side_by_side<double>({Image<double>(3, 4, 5), Image<double>(3, 4, 5)}, 2);
  EXPECT_EQ(panel.width(), 12);
}
