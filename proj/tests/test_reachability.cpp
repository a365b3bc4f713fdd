#include <gtest/gtest.h>

#include "hypomhd/bracket.hpp"
#include "hypomhd/reachability.hpp"

using namespace hypomhd;

namespace {

const std::vector<WaveVector> kExample{{0, 1}, {1, 1}, {1, 0}, {1, 2}};

}  // namespace

TEST(ForcedSet, Symmetrized) {
  const ForcedSet f = ForcedSet::from(kExample);
  EXPECT_EQ(f.symmetrized.size(), 8u);
  for (WaveVector k : f.symmetrized) EXPECT_TRUE(f.symmetrized.count(-k));
  EXPECT_EQ(f.noise_dimension(), 8u);
  EXPECT_THROW(ForcedSet::from({{0, 0}}), DomainError);
}

TEST(NextGeneration, Examples) {
  const ForcedSet f = ForcedSet::from({{1, 0}});
  EXPECT_EQ(next_generation({{1, 1}}, f), (WaveSet{{2, 1}, {0, 1}}));
  EXPECT_TRUE(next_generation({{0, 1}}, ForcedSet::from({{0, 2}})).empty());
}

TEST(NextGeneration, HatFirstGeneration) {
  const ForcedSet hat = ForcedSet::from({{0, 1}, {1, 1}});
  EXPECT_EQ(next_generation(hat.symmetrized, hat), (WaveSet{{-1, 0}, {-1, -2}, {1, 0}, {1, 2}}));
}

TEST(Hypothesis, ExampleCoversRadius10) {
  const HypothesisReport r = check_hypothesis(ForcedSet::from(kExample), 10);
  EXPECT_TRUE(r.even_covered);
  EXPECT_TRUE(r.odd_covered);
  EXPECT_TRUE(r.missing_even.empty());
  EXPECT_LE(r.depth_used, 40);
  EXPECT_EQ(r.max_depth, 40);
}

TEST(Hypothesis, CollinearFails) {
  const HypothesisReport r = check_hypothesis(ForcedSet::from({{0, 1}, {0, 2}}), 2);
  EXPECT_FALSE(r.even_covered);
  EXPECT_FALSE(r.odd_covered);
  EXPECT_TRUE(r.missing_even.count({1, 0}));
  EXPECT_TRUE(r.missing_odd.count({1, 0}));
  const HypothesisReport s = check_hypothesis(ForcedSet::from({{1, 0}}), 2);
  EXPECT_FALSE(s.even_covered);
  EXPECT_FALSE(s.odd_covered);
  EXPECT_EQ(s.depth_used, 1);
}

TEST(Hypothesis, Deterministic) {
  const ForcedSet f = ForcedSet::from(kExample);
  const auto a = check_hypothesis(f, 6, 12), b = check_hypothesis(f, 6, 12);
  EXPECT_EQ(a.missing_even, b.missing_even);
  EXPECT_EQ(a.missing_odd, b.missing_odd);
  EXPECT_EQ(a.depth_used, b.depth_used);
  EXPECT_THROW(check_hypothesis(f, 0), DomainError);
}

TEST(Generations, NegationClosedAndMonotoneUnions) {
  const ForcedSet f = ForcedSet::from(kExample);
  const GenerationTable t = build_generations(f, 8, 30.0);
  WaveSet even, odd;
  std::size_t prev_even = 0, prev_odd = 0;
  for (std::size_t n = 0; n < t.generations.size(); ++n) {
    for (WaveVector k : t.generations[n]) EXPECT_TRUE(t.generations[n].count(-k));
    (n % 2 ? odd : even).insert(t.generations[n].begin(), t.generations[n].end());
    EXPECT_GE(even.size(), prev_even);
    EXPECT_GE(odd.size(), prev_odd);
    prev_even = even.size();
    prev_odd = odd.size();
  }
}

TEST(Certificate, Examples) {
  const ForcedSet f = ForcedSet::from(kExample);
  auto c = generation_certificate(f, {1, 2}, ChainParity::kEven);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->length(), 0u);

  c = generation_certificate(f, {2, 1}, ChainParity::kOdd);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->length(), 1u);
  EXPECT_TRUE(certificate_sound(f, *c));

  const ForcedSet g = ForcedSet::from({{0, 1}, {1, 1}});
  c = generation_certificate(g, {1, 0}, ChainParity::kOdd);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->length(), 1u);
  EXPECT_TRUE(certificate_sound(g, *c));

  EXPECT_FALSE(generation_certificate(ForcedSet::from({{1, 0}}), {0, 1}, ChainParity::kEven, 6));
}

TEST(Certificate, SoundAndBracketConsistent) {
  const ForcedSet f = ForcedSet::from(kExample);
  for (WaveVector target : lattice_window(4))
    for (ChainParity p : {ChainParity::kEven, ChainParity::kOdd}) {
      const auto c = generation_certificate(f, target, p);
      ASSERT_TRUE(c) << to_string(target);
      EXPECT_EQ(c->length() % 2, p == ChainParity::kEven ? 0u : 1u);
      EXPECT_TRUE(certificate_sound(f, *c));
      WaveVector v = c->start;
      for (WaveVector l : c->steps) {
        // k + l is the sum01 target in the velocity slot and the diff01 target in the magnetic slot.
        const auto vd = velocity_direction(v, l, Combo::kSum01);
        const auto md = magnetic_direction(v, l, Combo::kDiff01);
        const WaveVector q = v + l;
        const WaveVector cq = q.is_canonical() ? q : -q;
        ASSERT_EQ(vd.expansion.size(), 1u);
        ASSERT_EQ(md.expansion.size(), 1u);
        EXPECT_EQ(vd.expansion.begin()->first.k, cq);
        EXPECT_EQ(md.expansion.begin()->first.k, cq);
        v = q;
      }
    }
}

TEST(Certificate, TamperedChainRejected) {
  const ForcedSet f = ForcedSet::from(kExample);
  auto c = generation_certificate(f, {3, 1}, ChainParity::kOdd);
  ASSERT_TRUE(c);
  Certificate bad = *c;
  bad.target = {9, 9};
  EXPECT_FALSE(certificate_sound(f, bad));
  bad = *c;
  bad.start = {5, 5};
  EXPECT_FALSE(certificate_sound(f, bad));
}
