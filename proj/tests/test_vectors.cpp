#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"

#include "rafiq/common.hpp"
#include "rafiq/vectors.hpp"

using namespace rafiq;
using namespace rafiq::vectors;

namespace {

using Corpus = std::vector<std::vector<std::string>>;

// Dense view of a library vector keyed by term, for comparison with the oracle.
oracle::SparseVec by_term(const DocumentVector& v, const VectorizerState& s) {
  std::map<TermId, std::string> names;
  for (const auto& [t, id] : s.vocabulary) names[id] = t;
  oracle::SparseVec out;
  for (const auto& [id, w] : v.weights) out[names.at(id)] = w;
  return out;
}

Corpus random_corpus(oracle::Rng& rng) {
  const std::size_t docs = 1 + rng.below(20);
  Corpus c(docs);
  for (auto& d : c) {
    const std::size_t len = 1 + rng.below(10);
    for (std::size_t i = 0; i < len; ++i) d.push_back("t" + std::to_string(rng.below(15)));
  }
  return c;
}

DocumentVector point(std::vector<double> coords) {
  std::vector<std::pair<TermId, double>> w;
  for (std::size_t i = 0; i < coords.size(); ++i) w.emplace_back(static_cast<TermId>(i), coords[i]);
  return make_vector(std::move(w));
}

}  // namespace

TEST_CASE("idf follows the smoothed formula") {
  auto one = fit_vocabulary({{"a"}});
  REQUIRE(one.vocabulary.size() == 1);
  CHECK(one.idf[*one.id_of("a")] == doctest::Approx(1.0));
  auto both = fit_vocabulary({{"a"}, {"a"}});
  CHECK(both.idf[*both.id_of("a")] == doctest::Approx(1.0));
  auto ab = fit_vocabulary({{"a", "b"}, {"a"}});
  CHECK(ab.idf[*ab.id_of("b")] == doctest::Approx(std::log(3.0 / 2.0) + 1.0).epsilon(1e-12));
  CHECK(ab.idf[*ab.id_of("b")] == doctest::Approx(1.405465).epsilon(1e-6));
  CHECK_THROWS_AS(fit_vocabulary({}), Error);
  // Ids follow sorted term order.
  auto sorted = fit_vocabulary({{"zeta", "alpha"}, {"mid"}});
  CHECK(*sorted.id_of("alpha") == 0);
  CHECK(*sorted.id_of("mid") == 1);
  CHECK(*sorted.id_of("zeta") == 2);
}

TEST_CASE("vectorize examples") {
  auto s = fit_vocabulary({{"a", "b"}, {"a"}});
  auto oov = vectorize({"x", "y"}, s);
  CHECK(oov.empty());
  CHECK(oov.norm == 0.0);
  auto single = vectorize({"a"}, s);
  REQUIRE(single.weights.size() == 1);
  CHECK(single.weights[0].second == doctest::Approx(1.0));
  auto aab = vectorize({"a", "a", "b"}, s);
  const double ib = std::log(1.5) + 1.0;
  const double n = std::sqrt(4.0 + ib * ib);
  CHECK(aab.weights[0].second == doctest::Approx(2.0 / n).epsilon(1e-12));
  CHECK(aab.weights[1].second == doctest::Approx(ib / n).epsilon(1e-12));
  CHECK(aab.norm == doctest::Approx(1.0));
}

TEST_CASE("cosine examples") {
  auto s = fit_vocabulary({{"a"}, {"b"}, {"a", "b"}});
  auto v = vectorize({"a", "b"}, s);
  CHECK(cosine(v, v) == doctest::Approx(1.0));
  CHECK(cosine(vectorize({"a"}, s), vectorize({"b"}, s)) == 0.0);
  auto x = make_vector({{0, 1.0}, {1, 1.0}});
  auto y = make_vector({{0, 1.0}});
  CHECK(cosine(x, y) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(cosine(x, DocumentVector{}) == 0.0);
}

TEST_CASE("TF-IDF and cosine agree with the brute-force oracle on 100 random corpora") {
  oracle::Rng rng{2024};
  for (int trial = 0; trial < 100; ++trial) {
    const Corpus corpus = random_corpus(rng);
    const auto state = fit_vocabulary(corpus);
    const auto idf = oracle::idf(corpus);
    REQUIRE(idf.size() == state.vocabulary.size());
    for (const auto& [t, w] : idf) CHECK(std::abs(state.idf[*state.id_of(t)] - w) <= 1e-9);
    std::vector<DocumentVector> lib;
    std::vector<oracle::SparseVec> ref;
    for (const auto& d : corpus) {
      lib.push_back(vectorize(d, state));
      ref.push_back(oracle::tfidf(d, idf));
      const auto got = by_term(lib.back(), state);
      REQUIRE(got.size() == ref.back().size());
      for (const auto& [t, w] : ref.back()) CHECK(std::abs(got.at(t) - w) <= 1e-9);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (std::size_t j = 0; j < corpus.size(); ++j) {
        CHECK(std::abs(cosine(lib[i], lib[j]) - oracle::cosine(ref[i], ref[j])) <= 1e-9);
      }
    }
  }
}

TEST_CASE("make_vector sums duplicates and drops zeros") {
  auto v = make_vector({{3, 1.0}, {1, 2.0}, {3, 1.0}, {2, 0.0}});
  REQUIRE(v.weights.size() == 2);
  CHECK(v.weights[0] == std::pair<TermId, double>{1, 2.0});
  CHECK(v.weights[1] == std::pair<TermId, double>{3, 2.0});
  CHECK(v.norm == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("k-means degenerate k") {
  std::vector<DocumentVector> pts{point({0, 0}), point({2, 0}), point({4, 6})};
  auto one = kmeans(pts, 1, 3);
  CHECK(one.k == 1);
  CHECK(one.centroids[0][0] == doctest::Approx(2.0));
  CHECK(one.centroids[0][1] == doctest::Approx(2.0));
  auto all = kmeans(pts, 3, 3);
  std::set<std::size_t> ids(all.assignment.begin(), all.assignment.end());
  CHECK(ids.size() == 3);
  CHECK(all.sse == doctest::Approx(0.0));
  CHECK_THROWS_AS(kmeans(pts, 0, 1), Error);
  CHECK_THROWS_AS(kmeans(pts, 4, 1), Error);
}

TEST_CASE("k-means reaches the exhaustive optimum on {0,1,10,11}") {
  std::vector<DocumentVector> pts{point({0}), point({1}), point({10}), point({11})};
  const double best = oracle::exhaustive_min_sse({{0}, {1}, {10}, {11}}, 2);
  CHECK(best == doctest::Approx(1.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = kmeans(pts, 2, seed);
    CHECK(c.sse == doctest::Approx(best));
    CHECK(c.assignment[0] == c.assignment[1]);
    CHECK(c.assignment[2] == c.assignment[3]);
    CHECK(c.assignment[0] != c.assignment[2]);
  }
}

TEST_CASE("k-means SSE never increases and runs are reproducible") {
  oracle::Rng rng{99};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const std::size_t dim = 1 + rng.below(5);
    std::vector<DocumentVector> pts;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> c(dim);
      for (auto& x : c) x = rng.below(3) == 0 ? 0.0 : rng.uniform() * 10.0;
      pts.push_back(point(c));
    }
    const std::size_t k = 1 + rng.below(n);
    const auto seed = rng.next();
    auto a = kmeans(pts, k, seed, 50);
    for (std::size_t i = 1; i < a.sse_history.size(); ++i) {
      CHECK(a.sse_history[i] <= a.sse_history[i - 1] + 1e-9);
    }
    CHECK(a.sse == doctest::Approx(clustering_sse(pts, a)));
    auto b = kmeans(pts, k, seed, 50);
    CHECK(a == b);
  }
}

TEST_CASE("nearest centroid breaks ties toward the lower id") {
  std::vector<std::vector<double>> centroids{{0.0}, {2.0}};
  CHECK(nearest_centroid(point({1.0}), centroids) == 0);
  CHECK(nearest_centroid(point({1.5}), centroids) == 1);
  CHECK(squared_distance(point({3.0}), centroids[1]) == doctest::Approx(1.0));
}

TEST_CASE("forest: constant targets, empty input, determinism") {
  std::vector<std::vector<double>> rows{{0.1, 1}, {0.5, 2}, {0.9, 3}, {0.3, 4}};
  auto m = forest_fit(rows, {2.5, 2.5, 2.5, 2.5}, ForestParams{.seed = 5});
  for (double x : {-10.0, 0.0, 0.42, 99.0}) {
    std::vector<double> r{x, x};
    CHECK(forest_predict(m, r) == 2.5);
  }
  CHECK_THROWS_AS(forest_fit({}, {}, {}), Error);
  CHECK_THROWS_AS(forest_fit(rows, {1.0}, {}), Error);
  std::vector<double> short_row{1.0};
  CHECK_THROWS_AS(forest_predict(m, short_row), Error);
  auto a = forest_fit(rows, {1, 2, 3, 4}, ForestParams{.seed = 8});
  auto b = forest_fit(rows, {1, 2, 3, 4}, ForestParams{.seed = 8});
  CHECK(a == b);
}

TEST_CASE("forest: depth-1 split matches a hand trace") {
  // Feature 0 separates the two groups between 0.3 and 0.7; feature 1 is noise.
  std::vector<std::vector<double>> rows{{0.1, 5}, {0.2, 1}, {0.3, 3}, {0.7, 2}, {0.8, 6}, {0.9, 4}};
  std::vector<double> y{1, 2, 3, 7, 8, 9};
  // Hand trace: the variance-reduction cut on feature 0 is after the third row.
  // Left SSE (1,2,3) = 2, right SSE (7,8,9) = 2, total 4; any other cut is worse.
  ForestParams p{.tree_count = 1, .max_depth = 1, .min_leaf = 1, .seed = 0, .bootstrap = false, .feature_subset = 2};
  auto m = forest_fit(rows, y, p);
  REQUIRE(m.trees.size() == 1);
  const auto& root = m.trees[0].nodes[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == doctest::Approx(0.5));
  std::vector<double> right{0.9, 0.0};
  std::vector<double> left{0.2, 0.0};
  CHECK(forest_predict(m, right) == doctest::Approx(8.0));
  CHECK(forest_predict(m, left) == doctest::Approx(2.0));

  ForestParams stump = p;
  stump.max_depth = 0;
  auto leaf = forest_fit(rows, y, stump);
  CHECK(forest_predict(leaf, right) == doctest::Approx(5.0));
}

TEST_CASE("forest beats the constant-mean predictor on a linear set") {
  oracle::Rng rng{7};
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> r{rng.uniform(), rng.uniform(), rng.uniform()};
    y.push_back(3 * r[0] - 2 * r[1] + 0.5 * r[2] + 0.05 * (rng.uniform() - 0.5));
    rows.push_back(r);
  }
  auto m = forest_fit(rows, y, ForestParams{.seed = 11});
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double mse_forest = 0.0, mse_mean = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mse_forest += std::pow(forest_predict(m, rows[i]) - y[i], 2);
    mse_mean += std::pow(mean - y[i], 2);
  }
  CHECK(mse_forest <= mse_mean);
}
