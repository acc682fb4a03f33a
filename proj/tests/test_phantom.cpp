#include <gtest/gtest.h>

#include "ctpoir/metrics.hpp"
#include "ctpoir/phantom.hpp"
#include "ctpoir/preprocess.hpp"

using namespace ctpoir;

namespace {

// Two 10 x 10 x 10 box lungs (2000 voxels) with a 10 x 10 x 1 lesion slab
// on slice 9 of each, so exactly a tenth of the lung is infected.
PhantomSpec tenth_spec() {
  auto s = default_phantom_spec(4, {64, 40, 20}, {1, 1, 1});
  const Shape::Kind box = Shape::Kind::Box;
  s.lungs[0] = {box, {19.5, 19.5, 9.5}, {5, 5, 5}};
  s.lungs[1] = {box, {43.5, 19.5, 9.5}, {5, 5, 5}};
  s.lesions.clear();
  for (double cx : {19.5, 43.5}) {
    LesionSpec l;
    l.shape = {box, {cx, 19.5, 9.0}, {5, 5, 0.5}};
    s.lesions.push_back(l);
  }
  return s;
}

ErrorKind kind_of(const PhantomSpec& s) {
  try {
    make_phantom(s);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST(Phantom, ZeroLesions) {
  auto s = default_phantom_spec(1, {48, 48, 8});
  s.lesions.clear();
  const auto ph = make_phantom(s);
  EXPECT_EQ(ph.gt_infected.count(), 0u);
  EXPECT_EQ(ph.designed_poir(), 0.0);
  EXPECT_EQ(poir(ph.gt_infected, ph.gt_lung), 0.0);
}

TEST(Phantom, ExactTenthRatio) {
  const auto ph = make_phantom(tenth_spec());
  EXPECT_EQ(ph.gt_lung.count(), 2000u);
  EXPECT_EQ(ph.gt_infected.count(), 200u);
  EXPECT_EQ(poir(ph.gt_infected, ph.gt_lung), 0.10);
}

TEST(Phantom, SameSeedIsBitIdentical) {
  const auto a = make_phantom(default_phantom_spec(9, {64, 64, 8}));
  const auto b = make_phantom(default_phantom_spec(9, {64, 64, 8}));
  const auto c = make_phantom(default_phantom_spec(10, {64, 64, 8}));
  EXPECT_EQ(a.volume, b.volume);
  EXPECT_EQ(a.gt_lung, b.gt_lung);
  EXPECT_EQ(a.gt_infected, b.gt_infected);
  EXPECT_NE(a.volume.data(), c.volume.data());
  EXPECT_EQ(a.gt_lung, c.gt_lung);
}

TEST(Phantom, MaskInvariants) {
  for (auto spec : {default_phantom_spec(2), paper_like_phantom_spec(2)}) {
    add_default_decoys(spec);
    const auto ph = make_phantom(spec);
    EXPECT_TRUE(is_subset(ph.gt_infected, ph.gt_lung));
    EXPECT_TRUE(is_subset(ph.decoys, ph.gt_lung));
    EXPECT_EQ(intersect(ph.decoys, ph.gt_infected).count(), 0u);
    EXPECT_GT(ph.decoys.count(), 0u);
    EXPECT_GT(ph.designed_poir(), 0.05);
    EXPECT_LT(ph.designed_poir(), 0.15);
  }
}

TEST(Phantom, LungHistogramShape) {
  const auto ph = make_phantom(default_phantom_spec(1));
  const auto h = hu_histogram(clip_hu(ph.volume), ph.gt_lung, 50);
  EXPECT_GE(h.fraction_within(-750, 150), 0.90);
  EXPECT_EQ(h.total, ph.gt_lung.count());
}

TEST(Phantom, SpecViolations) {
  auto s = default_phantom_spec(1, {48, 48, 8});
  s.lesions[0].shape.center = {2, 2, 2};
  EXPECT_EQ(kind_of(s), ErrorKind::SpecViolation);

  s = default_phantom_spec(1, {48, 48, 8});
  s.lung.sigma = -1;
  EXPECT_EQ(kind_of(s), ErrorKind::SpecViolation);

  s = default_phantom_spec(1, {48, 48, 8});
  s.lungs[0].radii = {40, 40, 40};
  EXPECT_EQ(kind_of(s), ErrorKind::SpecViolation);

  s = default_phantom_spec(1, {48, 48, 8});
  add_default_decoys(s);
  s.tube->z1 = 99;
  EXPECT_EQ(kind_of(s), ErrorKind::SpecViolation);
}

TEST(PhantomSpecJson, RoundTrip) {
  auto s = paper_like_phantom_spec(12, {96, 80, 24}, {0.8, 0.8, 2.5});
  add_default_decoys(s);
  const auto j = phantom_spec_to_json(s);
  const auto back = phantom_spec_from_json(j);
  EXPECT_EQ(phantom_spec_to_json(back), j);
  EXPECT_EQ(make_phantom(back).volume, make_phantom(s).volume);
}

TEST(PhantomSpecJson, DefaultsAndErrors) {
  const auto s = phantom_spec_from_json({{"seed", 3}, {"dims", {40, 40, 6}}});
  EXPECT_EQ(phantom_spec_to_json(s), phantom_spec_to_json(default_phantom_spec(3, {40, 40, 6})));
  auto kind = [](const nlohmann::json& j) {
    try {
      phantom_spec_from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind({{"lungs", nlohmann::json::array()}}), ErrorKind::SpecViolation);
  EXPECT_EQ(kind({{"lesions", {{{"shape", {{"kind", "torus"}, {"center", {1, 1, 1}}, {"radii", {1, 1, 1}}}}}}}}),
            ErrorKind::SpecViolation);
  EXPECT_EQ(kind({{"dims", {0, 4, 4}}}), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind({{"lung_hu", {{"sigma", 3}}}}), ErrorKind::SpecViolation);
}
