#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "codespot/importance/importance.hpp"
#include "test_support.hpp"

namespace codespot::importance {
namespace {

ImportanceMap map_of(std::vector<double> scores, std::string tag = "l", std::uint64_t digest = 7) {
  ImportanceMap m;
  m.language_tag = std::move(tag);
  m.scores = std::move(scores);
  m.batch_count = 1;
  m.registry_digest = digest;
  return m;
}

// Brute-force reference: full stable sort by (score desc, index asc).
std::vector<bool> full_sort_selection(const std::vector<double>& s, std::size_t n) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<bool> out(s.size(), false);
  for (std::size_t i = 0; i < n; ++i) out[idx[i]] = true;
  return out;
}

TEST(Score, SingleScalarByHand) {
  EXPECT_EQ(taylor_scores(std::vector<double>{0.5}, std::vector<double>{-2.0}),
            (std::vector<double>{1.0}));
  EXPECT_EQ(taylor_scores(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, -1.0}),
            (std::vector<double>{0.0, 0.0}));
  EXPECT_ERROR_KIND(taylor_scores(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    ErrorKind::kContract);
}

TEST(Score, ClosedFormLinearModel) {
  // pred = a*x1 + b*x2 + c, loss = (pred - t)^2 / 2, one sample per batch.
  // theta = (0.5, -1.5, 2); samples ((1, 2), 3) and ((-1, 0.5), 0.5):
  //   residuals -3.5 and 0.25, gradients (-3.5, -7, -3.5) and (-0.25, 0.125, 0.25)
  //   mean |grad| = (1.875, 3.5625, 1.875), scores = (0.9375, 5.34375, 3.75)
  trainer::FinetuneOutput out;
  out.model.parameters = {0.5, -1.5, 2.0};
  out.accumulator = trainer::GradientAccumulator(3);
  const double x[2][2] = {{1.0, 2.0}, {-1.0, 0.5}};
  const double t[2] = {3.0, 0.5};
  const auto& p = out.model.parameters;
  for (int i = 0; i < 2; ++i) {
    const double r = p[0] * x[i][0] + p[1] * x[i][1] + p[2] - t[i];
    out.accumulator.add(std::vector<double>{r * x[i][0], r * x[i][1], r});
  }
  const auto map = score_language(out, "lin");
  ASSERT_EQ(map.scores.size(), 3U);
  EXPECT_NEAR(map.scores[0], 0.9375, 1e-12);
  EXPECT_NEAR(map.scores[1], 5.34375, 1e-12);
  EXPECT_NEAR(map.scores[2], 3.75, 1e-12);
  EXPECT_EQ(map.batch_count, 2U);

  const auto last = score_language(out, "lin", GradientMode::kFinalBatch);
  EXPECT_NEAR(last.scores[0], 0.125, 1e-12);
  EXPECT_NEAR(last.scores[1], 0.1875, 1e-12);
  EXPECT_NEAR(last.scores[2], 0.5, 1e-12);
}

TEST(Score, EmptyAccumulatorAndReservedTag) {
  trainer::FinetuneOutput out;
  out.model.parameters = {1.0};
  out.accumulator = trainer::GradientAccumulator(1);
  EXPECT_ERROR_KIND(score_language(out, "x"), ErrorKind::kContract);
  out.accumulator.add(std::vector<double>{1.0});
  EXPECT_ERROR_KIND(score_language(out, "total"), ErrorKind::kContract);
  EXPECT_EQ(parse_gradient_mode("final_batch"), GradientMode::kFinalBatch);
  EXPECT_ERROR_KIND(parse_gradient_mode("median"), ErrorKind::kConfig);
}

TEST(Aggregate, ByHand) {
  const std::vector<ImportanceMap> one{map_of({0.25, 3.0})};
  const auto same = aggregate(one, false);
  EXPECT_EQ(same.scores, one[0].scores);
  EXPECT_EQ(same.language_tag, "total");

  const std::vector<ImportanceMap> two{map_of({1.0, 0.0}, "a"), map_of({0.0, 1.0}, "b")};
  EXPECT_EQ(aggregate(two, false).scores, (std::vector<double>{1.0, 1.0}));

  const std::vector<ImportanceMap> unequal{map_of({1.0, 3.0}, "a"), map_of({2.0, 2.0}, "b")};
  const auto n = aggregate(unequal, true);
  EXPECT_NEAR(n.scores[0], 0.75, 1e-15);
  EXPECT_NEAR(n.scores[1], 1.25, 1e-15);
}

TEST(Aggregate, Errors) {
  const std::vector<ImportanceMap> lengths{map_of({1.0}), map_of({1.0, 2.0})};
  EXPECT_ERROR_KIND(aggregate(lengths, false), ErrorKind::kContract);
  const std::vector<ImportanceMap> zero{map_of({0.0, 0.0})};
  EXPECT_ERROR_KIND(aggregate(zero, true), ErrorKind::kDegenerate);
  EXPECT_NO_THROW(aggregate(zero, false));
  const std::vector<ImportanceMap> total{map_of({1.0}, "total")};
  EXPECT_ERROR_KIND(aggregate(total, false), ErrorKind::kContract);
  const std::vector<ImportanceMap> digests{map_of({1.0}, "a", 1), map_of({1.0}, "b", 2)};
  EXPECT_ERROR_KIND(aggregate(digests, false), ErrorKind::kDigest);
  EXPECT_ERROR_KIND(aggregate({}, false), ErrorKind::kContract);
}

TEST(Aggregate, OrderInvariant) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ImportanceMap> maps;
    for (int l = 0; l < 4; ++l) {
      std::vector<double> s(500);
      for (double& v : s) v = u(rng) * std::pow(10.0, static_cast<double>(l));
      maps.push_back(map_of(std::move(s), "l" + std::to_string(l)));
    }
    for (bool normalize : {false, true}) {
      const auto ref = aggregate(maps, normalize).scores;
      auto perm = maps;
      for (int k = 0; k < 6; ++k) {
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto got = aggregate(perm, normalize).scores;
        for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(got[j], ref[j], 1e-12);
      }
    }
  }
}

TEST(Aggregate, IntegerMapsSumExactly) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(0, 1000);
  std::vector<ImportanceMap> maps;
  std::vector<double> expected(300, 0.0);
  for (int l = 0; l < 3; ++l) {
    std::vector<double> s(300);
    for (std::size_t j = 0; j < s.size(); ++j) {
      s[j] = d(rng);
      expected[j] += s[j];
    }
    maps.push_back(map_of(std::move(s), "l" + std::to_string(l)));
  }
  EXPECT_EQ(aggregate(maps, false).scores, expected);
}

TEST(Select, ByHand) {
  const auto m = map_of({5.0, 1.0, 9.0, 3.0});
  const auto s = select_top_k(m, 25.0);
  EXPECT_EQ(s.indices(), (std::vector<std::size_t>{2}));
  EXPECT_EQ(s.threshold_score, 9.0);
  EXPECT_EQ(select_top_k(m, 100.0).count(), 4U);
  EXPECT_EQ(select_top_k(m, 0.0001).count(), 1U);  // at least one
  EXPECT_EQ(select_top_k(m, 50.0).indices(), (std::vector<std::size_t>{0, 2}));
  EXPECT_ERROR_KIND(select_top_k(m, 0.0), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(select_top_k(m, 100.5), ErrorKind::kConfig);
  EXPECT_ERROR_KIND(select_top_k(m, -1.0), ErrorKind::kConfig);
}

TEST(Select, TiesBrokenByIndex) {
  const auto m = map_of({2.0, 7.0, 2.0, 2.0, 1.0});
  EXPECT_EQ(select_top_k(m, 40.0).indices(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_top_k(m, 60.0).indices(), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Select, SpotSize) {
  EXPECT_EQ(spot_size(112448, 0.0025), 3U);
  EXPECT_EQ(spot_size(112448, 0.01), 11U);
  EXPECT_EQ(spot_size(112448, 0.09), 101U);
  EXPECT_EQ(spot_size(112448, 0.25), 281U);
  EXPECT_EQ(spot_size(10, 100.0), 10U);
}

TEST(Select, MatchesFullSortOn10kScores) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 50);  // heavy ties
  for (int variant = 0; variant < 3; ++variant) {
    std::vector<double> s(10000);
    for (double& v : s) {
      v = variant == 0 ? u(rng) : static_cast<double>(coarse(rng));
    }
    if (variant == 2) std::fill(s.begin(), s.begin() + 5000, 0.0);
    const auto m = map_of(s);
    for (double k : {0.0025, 0.01, 0.09, 0.25, 1.0, 5.0, 33.3, 50.0, 99.99, 100.0}) {
      const auto mask = select_top_k(m, k);
      EXPECT_EQ(mask.selected, full_sort_selection(s, spot_size(s.size(), k)))
          << "variant " << variant << " k " << k;
      const auto idx = mask.indices();
      double min_sel = s[idx.front()];
      for (std::size_t j : idx) min_sel = std::min(min_sel, s[j]);
      EXPECT_EQ(mask.threshold_score, min_sel);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (!mask.selected[j]) {
          EXPECT_LE(s[j], min_sel);
        }
      }
    }
  }
}

TEST(Select, NestedAcrossK) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> coarse(0, 20);
  std::vector<double> s(5000);
  for (double& v : s) v = coarse(rng);
  const auto m = map_of(s);
  const std::vector<double> ks{0.0025, 0.01, 0.09, 0.25, 1.0, 10.0, 50.0, 100.0};
  for (std::size_t a = 0; a < ks.size(); ++a) {
    const auto small = select_top_k(m, ks[a]);
    for (std::size_t b = a; b < ks.size(); ++b) {
      const auto large = select_top_k(m, ks[b]);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (small.selected[j]) {
          ASSERT_TRUE(large.selected[j]) << ks[a] << " vs " << ks[b];
        }
      }
    }
  }
}

TEST(Select, ScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(2000);
  for (double& v : s) v = u(rng);
  std::vector<double> scaled = s;
  for (double& v : scaled) v *= 37.5;
  for (double k : {0.25, 5.0, 50.0}) {
    EXPECT_EQ(select_top_k(map_of(s), k).selected, select_top_k(map_of(scaled), k).selected);
  }
}

TEST(Select, Eligibility) {
  const auto reg = model::ParameterRegistry::for_config(model::ModelConfig{64, 8, 8, 2, 1, 1});
  const std::vector<std::string> excluded{"tok_emb", "pos_emb"};
  const auto eligible = eligibility(reg, excluded);
  const auto& tok = reg.find("tok_emb");
  const auto& pos = reg.find("pos_emb");
  EXPECT_FALSE(eligible[tok.offset]);
  EXPECT_FALSE(eligible[pos.offset + pos.size - 1]);
  EXPECT_TRUE(eligible[reg.total_scalars() - 1]);

  std::vector<double> s(reg.total_scalars(), 1.0);
  s[tok.offset] = 100.0;
  const auto mask = select_top_k(map_of(s), 1.0, eligible);
  EXPECT_FALSE(mask.selected[tok.offset]);
  for (std::size_t j : mask.indices()) EXPECT_TRUE(eligible[j]);
}

TEST(Files, RoundTripAndDigest) {
  testing::ScratchDir dir("importance_files");
  auto m = map_of({0.0, 1.5, 2.25e-300, 7.0}, "c_like", 42);
  m.batch_count = 40;
  save_importance_map(m, dir.path() / "m.imap");
  const auto back = load_importance_map(dir.path() / "m.imap", 42);
  EXPECT_EQ(back.scores, m.scores);
  EXPECT_EQ(back.language_tag, "c_like");
  EXPECT_EQ(back.batch_count, 40U);
  EXPECT_ERROR_KIND(load_importance_map(dir.path() / "m.imap", 43), ErrorKind::kDigest);

  std::vector<double> big(1001);
  std::iota(big.begin(), big.end(), 0.0);
  const auto mask = select_top_k(map_of(big, "total", 42), 1.0);
  save_spot_mask(mask, dir.path() / "k.mask");
  EXPECT_EQ(load_spot_mask(dir.path() / "k.mask", 42), mask);
  EXPECT_ERROR_KIND(load_spot_mask(dir.path() / "k.mask", 1), ErrorKind::kDigest);
  EXPECT_ERROR_KIND(load_spot_mask(dir.path() / "missing.mask", 42), ErrorKind::kIo);
}

}  // namespace
}  // namespace codespot::importance
