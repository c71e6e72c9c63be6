#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "amc/losses.hpp"
#include "amc/ops.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace amc;
using namespace amc::testing;

namespace {

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  Tensor t({rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) t.at(i, k) = rows[i][k];
  return t;
}

}  // namespace

TEST(Normalize, UnitNormAndDegenerate) {
  const UnitFeature z = normalize(std::vector<double>{3.0, 4.0});
  EXPECT_DOUBLE_EQ(z[0], 0.6);
  EXPECT_DOUBLE_EQ(z[1], 0.8);
  EXPECT_THROW(normalize(std::vector<double>{0.0, 0.0}), DegenerateFeatureError);
  EXPECT_THROW(normalize(std::vector<double>{1e-13, 0.0}), DegenerateFeatureError);
}

TEST(Geodesic, KnownAnglesAndClamp) {
  const std::vector<double> e1{1, 0, 0}, e2{0, 1, 0}, m1{-1, 0, 0};
  EXPECT_NEAR(geodesic(e1, e2), std::numbers::pi / 2, 1e-15);
  // Identical and antipodal points hit the clamp instead of acos(+-1).
  EXPECT_NEAR(geodesic(e1, e1), std::acos(1.0 - 1e-7), 1e-15);
  EXPECT_NEAR(geodesic(e1, m1), std::acos(-1.0 + 1e-7), 1e-15);
  EXPECT_GT(geodesic(e1, e1), 0.0);
  EXPECT_LT(geodesic(e1, m1), std::numbers::pi);
}

TEST(Geodesic, RejectsNonUnitAndDimMismatch) {
  EXPECT_THROW(geodesic(std::vector<double>{1.1, 0.0}, std::vector<double>{1.0, 0.0}), ContractError);
  EXPECT_THROW(geodesic(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0, 0.0}), ShapeError);
}

TEST(Geodesic, SymmetryRangeTriangle) {
  Rng rng(1);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t dim = 2 + rng.index(7);
    const auto a = random_unit(dim, rng), b = random_unit(dim, rng), c = random_unit(dim, rng);
    const double ab = geodesic(a, b), ba = geodesic(b, a), bc = geodesic(b, c), ac = geodesic(a, c);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, std::numbers::pi);
    EXPECT_LE(ac, ab + bc + 1e-9);
  }
}

TEST(AmcLoss, HandValues) {
  const std::vector<double> e1{1, 0}, e2{0, 1};
  const double q = std::numbers::pi / 2;
  EXPECT_NEAR(amc_loss(e1, e2, true, 0.5), q * q, 1e-15);
  EXPECT_EQ(amc_loss(e1, e2, false, 0.5), 0.0);  // already beyond the margin
  EXPECT_NEAR(amc_loss(e1, e2, false, 2.0), (2.0 - q) * (2.0 - q), 1e-15);
}

TEST(AmcLoss, MatchesOracleIncludingHingeBoundary) {
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const std::size_t dim = 2 + rng.index(7);
    const double mg = 0.2 + rng.uniform();
    const auto zi = random_unit(dim, rng);
    for (double theta : {mg - 1e-6, mg + 1e-6, mg, rng.uniform() * 3.0}) {
      const auto zj = at_angle(zi, theta, rng);
      for (bool s : {true, false}) EXPECT_NEAR(amc_loss(zi, zj, s, mg), naive_amc(zi, zj, s, mg), 1e-12);
    }
  }
}

TEST(EucdContrastive, HandValuesAndOracle) {
  const std::vector<double> a{0, 0}, b{0.6, 0.8};
  EXPECT_NEAR(eucd_contrastive(a, b, true, 1.0), 1.0, 1e-15);
  EXPECT_EQ(eucd_contrastive(a, b, false, 1.0), 0.0);
  EXPECT_NEAR(eucd_contrastive(a, b, false, 1.5), 0.25, 1e-15);
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> x(4), y(4);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    for (bool s : {true, false}) EXPECT_NEAR(eucd_contrastive(x, y, s, 2.0), naive_eucd(x, y, s, 2.0), 1e-12);
  }
}

TEST(AmcLoss, RotationInvariant) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 2 + rng.index(7);
    const auto q = random_rotation(dim, rng);
    const auto a = random_unit(dim, rng), b = random_unit(dim, rng);
    for (bool s : {true, false})
      EXPECT_NEAR(amc_loss(a, b, s, 1.0), amc_loss(rotate(q, a), rotate(q, b), s, 1.0), 1e-9);
  }
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(validate(c));
  c.lambda = -0.1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.margin_g = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c.margin_g = 3.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.margin_e = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_EQ(parse_loss_mode("eucd"), LossMode::eucd);
  EXPECT_THROW(parse_loss_mode("arcface"), ConfigError);
}

TEST(CrossEntropy, HandValueAndStability) {
  const Tensor logits({2, 3}, {0.0, 0.0, 0.0, 1000.0, 0.0, -1000.0});
  const std::vector<int> labels{1, 0};
  EXPECT_NEAR(cross_entropy(logits, labels), std::log(3.0) / 2.0, 1e-15);
  const std::vector<int> bad{1, 3};
  EXPECT_THROW(cross_entropy(logits, bad), ConfigError);
  Tape tape;
  EXPECT_NEAR(ops::cross_entropy(tape.constant(logits), labels).value()[0], std::log(3.0) / 2.0, 1e-15);
}

TEST(SplitPairs, HalvesAreDisjointAndDeterministic) {
  Rng a(5), b(5);
  const PairSplit s = split_pairs(9, a);
  EXPECT_EQ(s.first.size(), 4u);
  EXPECT_EQ(s.second.size(), 4u);
  std::set<std::size_t> all(s.first.begin(), s.first.end());
  all.insert(s.second.begin(), s.second.end());
  EXPECT_EQ(all.size(), 8u);
  for (auto i : all) EXPECT_LT(i, 9u);
  const PairSplit t = split_pairs(9, b);
  EXPECT_EQ(s.first, t.first);
  EXPECT_EQ(s.second, t.second);
  EXPECT_TRUE(split_pairs(1, a).first.empty());
}

TEST(SimilarityFromPredictions, ArgmaxWithLowestIndexTies) {
  const Tensor probs({4, 3}, {0.5, 0.5, 0.0, 0.9, 0.05, 0.05, 0.1, 0.2, 0.7, 0.0, 0.3, 0.7});
  const PairBatch pb = similarity_from_predictions(probs, {{0, 2}, {1, 3}});
  ASSERT_EQ(pb.size(), 2u);
  EXPECT_TRUE(pb.pairs[0].similar);  // tie in row 0 resolves to class 0, same as row 1
  EXPECT_TRUE(pb.pairs[1].similar);
  const PairBatch pc = similarity_from_predictions(probs, {{0}, {2}});
  EXPECT_FALSE(pc.pairs[0].similar);
}

TEST(CombinedLoss, FormulaAndShortCircuits) {
  const std::vector<double> pl{1.0, 2.0, 3.0};
  LossConfig cfg;
  cfg.lambda = 0.1;
  EXPECT_NEAR(combined_loss(0.7, pl, 0.5, cfg, 8), 0.7 + 0.5 * 0.1 * 6.0 / 8.0, 1e-15);
  cfg.lambda = 0.0;
  EXPECT_EQ(combined_loss(0.7, pl, 0.5, cfg, 8), 0.7);
  cfg.lambda = 0.1;
  cfg.mode = LossMode::ce;
  EXPECT_EQ(combined_loss(0.7, pl, 0.5, cfg, 8), 0.7);

  Tape tape;
  Var ce = tape.leaf(Tensor::scalar(0.7));
  Var ps = tape.leaf(Tensor::scalar(6.0));
  EXPECT_EQ(ops::combined_loss(ce, ps, 0.5, cfg, 8).id(), ce.id());
  cfg.mode = LossMode::amc;
  EXPECT_NEAR(ops::combined_loss(ce, ps, 0.5, cfg, 8).value()[0], 0.7 + 0.5 * 0.1 * 6.0 / 8.0, 1e-15);
}

TEST(PairSums, MatchPerPairOracle) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.index(15), dim = 1 + rng.index(8);
    std::vector<std::vector<double>> x(n, std::vector<double>(dim));
    for (auto& r : x)
      for (auto& v : r) v = rng.normal();
    Rng split_rng(t);
    PairBatch pb;
    for (const auto& pair : [&] {
           const PairSplit s = split_pairs(n, split_rng);
           std::vector<Pair> v;
           for (std::size_t k = 0; k < s.first.size(); ++k) v.push_back({s.first[k], s.second[k], rng.uniform() < 0.5});
           return v;
         }())
      pb.pairs.push_back(pair);
    double want_amc = 0.0, want_eucd = 0.0;
    for (const auto& p : pb.pairs) {
      if (dim >= 1) want_amc += naive_amc(naive_unit(x[p.i]), naive_unit(x[p.j]), p.similar, 0.5);
      want_eucd += naive_eucd(x[p.i], x[p.j], p.similar, 1.0);
    }
    Tape tape;
    Var f = tape.constant(rows_to_tensor(x));
    EXPECT_NEAR(ops::amc_pair_sum(ops::normalize_rows(f), pb, 0.5).value()[0], want_amc, 1e-12);
    EXPECT_NEAR(ops::eucd_pair_sum(f, pb, 1.0).value()[0], want_eucd, 1e-12);
  }
}

TEST(PairSums, RejectNonUnitRows) {
  Tape tape;
  PairBatch pb{{{0, 1, true}}};
  EXPECT_THROW(ops::amc_pair_sum(tape.constant(Tensor({2, 2}, {2.0, 0.0, 0.0, 1.0})), pb, 0.5), ContractError);
}

TEST(PairSums, Gradients) {
  Rng rng(7);
  const Tensor x = random_tensor({6, 4}, rng);
  const PairBatch pb{{{0, 3, true}, {1, 4, false}, {2, 5, false}}};
  for (double mg : {0.5, 2.5}) {  // 2.5 keeps the dissimilar hinges active
    const auto r = check_inputs({x}, [&](Tape&, const std::vector<Var>& v) {
      return ops::amc_pair_sum(ops::normalize_rows(v[0]), pb, mg);
    });
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  }
  for (double me : {0.5, 4.0}) {
    const auto r = check_inputs({x}, [&](Tape&, const std::vector<Var>& v) { return ops::eucd_pair_sum(v[0], pb, me); });
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  }
  const std::vector<int> labels{0, 2, 1, 1, 3, 0};
  const auto r = check_inputs({x}, [&](Tape&, const std::vector<Var>& v) { return ops::cross_entropy(v[0], labels); });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(PairSums, CoincidentPointsHaveZeroSubgradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 2}, {1.0, 2.0, 1.0, 2.0}));
  tape.backward(ops::eucd_pair_sum(x, PairBatch{{{0, 1, false}}}, 1.0));
  EXPECT_EQ(tape.grad(x), Tensor({2, 2}, 0.0));
}

TEST(NormalizeRows, ZeroRowIsDegenerate) {
  Tape tape;
  EXPECT_THROW(ops::normalize_rows(tape.constant(Tensor({2, 2}, {1.0, 0.0, 0.0, 0.0}))), DegenerateFeatureError);
}
