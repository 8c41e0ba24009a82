#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "conquer/error.hpp"
#include "conquer/eval.hpp"
#include "conquer/ranking.hpp"
#include "oracles.hpp"

using namespace conquer;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::InvalidArgument;
}

FeatureBundle gallery_of(const std::vector<Eigen::VectorXd>& vecs) {
  FeatureBundle b;
  b.dim = static_cast<std::size_t>(vecs.front().size());
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    Item it;
    it.id = "g" + std::to_string(i);
    it.identity_label = i;
    it.global_vec = vecs[i];
    it.local_tokens = Eigen::MatrixXd(vecs[i].size(), 0);
    b.items.push_back(it);
  }
  return b;
}

// A ranking given directly by the index order; scores decrease along it.
RankedList ordered(const std::string& id, const std::vector<std::size_t>& order) {
  RankedList r;
  r.query_id = id;
  for (std::size_t k = 0; k < order.size(); ++k)
    r.entries.push_back({order[k], static_cast<double>(order.size() - k)});
  return r;
}

std::vector<std::size_t> indices(const RankedList& r) {
  std::vector<std::size_t> out;
  for (const auto& e : r.entries) out.push_back(e.gallery_index);
  return out;
}

}  // namespace

TEST(MakeRanking, SortsDescendingWithIndexTies) {
  const RankedList r = make_ranking("q", (Eigen::VectorXd(5) << 0.2, 0.9, 0.2, 0.5, 0.9).finished());
  EXPECT_EQ(indices(r), (std::vector<std::size_t>{1, 4, 3, 0, 2}));
  EXPECT_EQ(r.top().score, 0.9);
  EXPECT_THROW(make_ranking("q", Eigen::VectorXd::Constant(2, std::nan(""))), Error);
}

TEST(RankGallery, Examples) {
  const auto g = gallery_of({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)});
  const RankedList r = rank_gallery(Eigen::Vector2d(1, 0), g, "q");
  EXPECT_EQ(r.query_id, "q");
  EXPECT_EQ(r.entries, (std::vector<RankEntry>{{0, 1.0}, {1, 0.0}}));

  const auto same = gallery_of({Eigen::Vector2d(0, 1), Eigen::Vector2d(0.6, 0.8), Eigen::Vector2d(0.6, 0.8)});
  EXPECT_EQ(indices(rank_gallery(Eigen::Vector2d(0.6, 0.8), same)), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(RankGallery, Random5MatchesCosineSort) {
  oracle::Gen g(51);
  std::vector<Eigen::VectorXd> vecs;
  for (int i = 0; i < 5; ++i) vecs.push_back(g.vector(4, -1, 1).normalized());
  const Eigen::VectorXd q = g.vector(4, -1, 1).normalized();
  oracle::Vec scores;
  for (const auto& v : vecs) scores.push_back(oracle::cosine({q.data(), q.data() + 4}, {v.data(), v.data() + 4}));
  EXPECT_EQ(indices(rank_gallery(q, gallery_of(vecs))), oracle::order_by_score(scores));
}

TEST(RankGallery, Errors) {
  FeatureBundle empty;
  empty.dim = 2;
  EXPECT_EQ(code_of([&] { rank_gallery(Eigen::Vector2d(1, 0), empty); }), Errc::EmptyGallery);
  EXPECT_EQ(code_of([&] { rank_gallery(Eigen::Vector3d(1, 0, 0), gallery_of({Eigen::Vector2d(1, 0)})); }),
            Errc::DimensionMismatch);
}

TEST(Metrics, Examples) {
  const RelevanceMap rel{{"q", {3}}};
  EXPECT_EQ(rank_at_k({ordered("q", {3, 1, 2, 0})}, rel, 1), 1.0);
  EXPECT_EQ(rank_at_k({ordered("q", {1, 2, 3, 0})}, rel, 1), 0.0);
  EXPECT_EQ(rank_at_k({ordered("q", {1, 2, 3, 0})}, rel, 5), 1.0);

  EXPECT_EQ(mean_average_precision({ordered("q", {3, 1, 0, 2})}, rel), 1.0);
  EXPECT_EQ(mean_average_precision({ordered("a", {4, 5, 0, 1, 2, 3})}, {{"a", {4, 5}}}), 1.0);
  const double ap = average_precision(ordered("q", {3, 0, 2, 1}), {3, 2});
  EXPECT_NEAR(ap, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(ap, 0.83333, 1e-5);
}

TEST(Metrics, Errors) {
  const auto r = ordered("q", {0, 1});
  EXPECT_EQ(code_of([&] { rank_at_k({r}, {{"other", {0}}}, 1); }), Errc::MissingRelevance);
  EXPECT_EQ(code_of([&] { mean_average_precision({r}, {}); }), Errc::MissingRelevance);
  EXPECT_EQ(code_of([&] { mean_average_precision({r}, {{"q", {}}}); }), Errc::EmptyRelevanceSet);
  EXPECT_EQ(code_of([&] { rank_at_k({r}, {{"q", {0}}}, 0); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { rank_at_k({}, {{"q", {0}}}, 1); }), Errc::EmptyRanking);
  EXPECT_EQ(code_of([&] { rank_at_k({r}, {{"q", {5}}}, 1); }), Errc::IndexOutOfRange);
}

TEST(Metrics, RelevanceFromLabels) {
  auto gallery = gallery_of({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)});
  gallery.items[2].identity_label = 0;
  auto queries = gallery_of({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)});
  queries.items[0].id = "t0";
  queries.items[1].id = "t1";
  const RelevanceMap rel = relevance_from_labels(queries, gallery);
  EXPECT_EQ(rel.at("t0"), (std::set<std::size_t>{0, 2}));
  EXPECT_EQ(rel.at("t1"), (std::set<std::size_t>{1}));
}

// Properties against the literal-definition oracle.

namespace {
struct Instance {
  std::vector<RankedList> rankings;
  RelevanceMap rel;
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::set<std::size_t>> rel_sets;
};

Instance random_instance(oracle::Gen& g) {
  Instance in;
  const std::size_t n = g.size(1, 30);
  const std::size_t q = g.size(1, 10);
  for (std::size_t k = 0; k < q; ++k) {
    const std::string id = "q" + std::to_string(k);
    const Eigen::VectorXd scores = g.tied_vector(static_cast<Eigen::Index>(n));
    in.rankings.push_back(make_ranking(id, scores));
    in.orders.push_back(oracle::order_by_score({scores.data(), scores.data() + n}));
    std::set<std::size_t> rel;
    const std::size_t count = g.size(1, std::min<std::size_t>(n, 4));
    while (rel.size() < count) rel.insert(g.size(0, n - 1));
    in.rel[id] = rel;
    in.rel_sets.push_back(rel);
  }
  return in;
}
}  // namespace

TEST(EvalProperties, OracleEquivalenceExact) {
  oracle::Gen g(52);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(g);
    for (std::size_t q = 0; q < in.orders.size(); ++q) ASSERT_EQ(indices(in.rankings[q]), in.orders[q]);
    EXPECT_EQ(rank_at_k(in.rankings, in.rel, 1), oracle::recall_at_k(in.orders, in.rel_sets, 1));
    EXPECT_EQ(rank_at_k(in.rankings, in.rel, 5), oracle::recall_at_k(in.orders, in.rel_sets, 5));
    EXPECT_EQ(mean_average_precision(in.rankings, in.rel), oracle::mean_ap(in.orders, in.rel_sets));
  }
}

TEST(EvalProperties, RecallMonotoneInK) {
  oracle::Gen g(53);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(g);
    double prev = 0;
    for (std::size_t k = 1; k <= 31; ++k) {
      const double r = rank_at_k(in.rankings, in.rel, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(EvalProperties, GalleryRelabelingInvariance) {
  oracle::Gen g(54);
  for (int trial = 0; trial < 100; ++trial) {
    Instance in = random_instance(g);
    const std::size_t n = in.rankings[0].entries.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.rng);
    auto rankings = in.rankings;
    for (auto& r : rankings)
      for (auto& e : r.entries) e.gallery_index = perm[e.gallery_index];
    RelevanceMap rel;
    for (const auto& [id, set] : in.rel)
      for (auto i : set) rel[id].insert(perm[i]);
    EXPECT_EQ(mean_average_precision(rankings, rel), mean_average_precision(in.rankings, in.rel));
    EXPECT_EQ(rank_at_k(rankings, rel, 1), rank_at_k(in.rankings, in.rel, 1));
    EXPECT_EQ(rank_at_k(rankings, rel, 5), rank_at_k(in.rankings, in.rel, 5));
  }
}

TEST(EvalProperties, PerfectMapIffRelevantFirst) {
  oracle::Gen g(55);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(g);
    const double map = mean_average_precision(in.rankings, in.rel);
    EXPECT_GE(map, 0.0);
    EXPECT_LE(map, 1.0);
    bool all_first = true;
    for (std::size_t q = 0; q < in.orders.size(); ++q) {
      const auto& rel = in.rel_sets[q];
      for (std::size_t k = 0; k < rel.size(); ++k)
        if (!rel.count(in.orders[q][k])) all_first = false;
    }
    EXPECT_EQ(map == 1.0, all_first);
  }
}

TEST(EvalProperties, SelfRetrieval) {
  oracle::Gen g(56);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::VectorXd> vecs;
    const std::size_t n = g.size(2, 15);
    for (std::size_t i = 0; i < n; ++i) vecs.push_back(g.vector(6, -1, 1).normalized());
    const auto gallery = gallery_of(vecs);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_EQ(rank_gallery(vecs[i], gallery).top().gallery_index, i);
  }
}
