#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <random>
#include <set>

#include "dukd/augment.hpp"
#include "oracles.hpp"

using dukd::AugKind;
using dukd::Image;

namespace {

Image<float> grid2x2() { return Image<float>(1, 2, 2, std::vector<float>{1, 2, 3, 4}); }

std::vector<float> values(const Image<float>& img) { return {img.values().begin(), img.values().end()}; }

}  // namespace

TEST(Augment, ColorInversionOfQuarter) {
  Image<float> img(1, 1, 1, 0.25f);
  EXPECT_EQ(dukd::apply(AugKind::color_inversion, img).at(0, 0, 0), 0.75f);
}

TEST(Augment, Rot90IsCounterClockwise) {
  EXPECT_EQ(values(dukd::apply(AugKind::rot90, grid2x2())), (std::vector<float>{2, 4, 1, 3}));
}

TEST(Augment, HFlipReversesColumns) {
  EXPECT_EQ(values(dukd::apply(AugKind::hflip, grid2x2())), (std::vector<float>{2, 1, 4, 3}));
}

TEST(Augment, MatchesIndexMapsOnNonSquare) {
  std::mt19937_64 gen(1);
  const auto img = oracle::random_u8_image<double>(3, 5, 8, gen);
  for (AugKind k : dukd::kAllAugKinds) {
    const auto got = dukd::apply(k, img);
    const auto want = oracle::augment(k, img);
    ASSERT_TRUE(got.same_shape(want)) << dukd::to_string(k);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-15);
  }
}

TEST(Augment, RoundTripIsBitExact) {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 20; ++t) {
    const auto f = oracle::random_u8_image<float>(3, 3 + t % 5, 4 + t % 3, gen);
    const auto d = oracle::random_u8_image<double>(3, 4 + t % 2, 7, gen);
    for (AugKind k : dukd::kAllAugKinds) {
      EXPECT_EQ(dukd::invert(k, dukd::apply(k, f)), f) << dukd::to_string(k);
      EXPECT_EQ(dukd::invert(k, dukd::apply(k, d)), d) << dukd::to_string(k);
    }
  }
}

TEST(Augment, ColorInversionIsInvolutiveOnEveryLevel) {
  for (int k = 0; k <= 255; ++k) {
    Image<float> f(1, 1, 1, static_cast<float>(k) / 255.0f);
    Image<double> d(1, 1, 1, static_cast<double>(k) / 255.0);
    EXPECT_EQ(dukd::apply(AugKind::color_inversion, dukd::apply(AugKind::color_inversion, f)), f);
    EXPECT_EQ(dukd::apply(AugKind::color_inversion, dukd::apply(AugKind::color_inversion, d)), d);
  }
}

TEST(Augment, FourQuarterTurnsAreIdentity) {
  std::mt19937_64 gen(3);
  const auto img = oracle::random_u8_image<float>(3, 6, 9, gen);
  auto r = img;
  for (int i = 0; i < 4; ++i) r = dukd::apply(AugKind::rot90, r);
  EXPECT_EQ(r, img);
}

TEST(Augment, ColorInversionCommutesWithGeometry) {
  std::mt19937_64 gen(4);
  const auto img = oracle::random_u8_image<float>(3, 5, 7, gen);
  for (AugKind g : dukd::kAllAugKinds) {
    if (!dukd::is_geometric(g)) continue;
    EXPECT_EQ(dukd::apply(g, dukd::apply(AugKind::color_inversion, img)),
              dukd::apply(AugKind::color_inversion, dukd::apply(g, img)));
  }
}

TEST(Augment, GeometryPreservesValueMultiset) {
  std::mt19937_64 gen(5);
  const auto img = oracle::random_u8_image<float>(1, 6, 4, gen);
  auto sorted = [](const Image<float>& im) {
    std::vector<float> v(im.values().begin(), im.values().end());
    std::sort(v.begin(), v.end());
    return v;
  };
  for (AugKind g : dukd::kAllAugKinds) {
    if (dukd::is_geometric(g)) {
      EXPECT_EQ(sorted(dukd::apply(g, img)), sorted(img));
    }
  }
}

TEST(Augment, ColorInversionPreservesPairwiseDifferences) {
  std::mt19937_64 gen(6);
  const auto img = oracle::random_u8_image<double>(1, 4, 4, gen);
  const auto inv = dukd::apply(AugKind::color_inversion, img);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (std::size_t j = 0; j < img.size(); ++j)
      EXPECT_NEAR(std::fabs(img.values()[i] - img.values()[j]), std::fabs(inv.values()[i] - inv.values()[j]), 1e-12);
}

TEST(Augment, AdjointIsTransposeOfInverse) {
  // <invert(k, y), g> == <y, invert_adjoint(k, g)> for the linear part
  std::mt19937_64 gen(7);
  for (AugKind k : dukd::kAllAugKinds) {
    if (k == AugKind::color_inversion) continue;
    const auto y = oracle::random_image<double>(2, 3, 5, gen);
    const auto iy = dukd::invert(k, y);
    const auto g = oracle::random_image<double>(2, iy.height(), iy.width(), gen);
    const auto adj = dukd::invert_adjoint(k, g);
    ASSERT_TRUE(adj.same_shape(y));
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < iy.size(); ++i) lhs += iy.values()[i] * g.values()[i];
    for (std::size_t i = 0; i < y.size(); ++i) rhs += y.values()[i] * adj.values()[i];
    EXPECT_NEAR(lhs, rhs, 1e-12) << dukd::to_string(k);
  }
}

TEST(Augment, NamesRoundTrip) {
  for (AugKind k : dukd::kAllAugKinds) EXPECT_EQ(dukd::aug_from_string(dukd::to_string(k)), k);
  EXPECT_THROW(dukd::aug_from_string("shear"), dukd::ConfigError);
}

TEST(SampleAug, SingletonPool) {
  dukd::Rng rng(1);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(dukd::sample_aug(rng, {AugKind::hflip}), AugKind::hflip);
}

TEST(SampleAug, UniformOverPool) {
  dukd::Rng rng(77);
  const std::vector<AugKind> pool(dukd::kNonIdentityAugKinds.begin(), dukd::kNonIdentityAugKinds.end());
  std::map<AugKind, int> hits;
  for (int i = 0; i < 6000; ++i) ++hits[dukd::sample_aug(rng, pool)];
  ASSERT_EQ(hits.size(), 6u);
  for (const auto& [_, n] : hits) EXPECT_NEAR(n / 6000.0, 1.0 / 6.0, 0.03);
}

TEST(SampleAug, SeededSequenceRepeats) {
  dukd::Rng a(5), b(5);
  const std::vector<AugKind> pool(dukd::kAllAugKinds.begin(), dukd::kAllAugKinds.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(dukd::sample_aug(a, pool), dukd::sample_aug(b, pool));
}

TEST(SampleAug, EmptyPoolIsConfigError) {
  dukd::Rng rng(1);
  EXPECT_THROW(dukd::sample_aug(rng, {}), dukd::ConfigError);
}
