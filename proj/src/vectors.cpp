#include "rafiq/vectors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string_view>

#include "rafiq/common.hpp"

namespace rafiq::vectors {

std::optional<TermId> VectorizerState::id_of(const std::string& term) const {
  auto it = vocabulary.find(term);
  if (it == vocabulary.end()) return std::nullopt;
  return it->second;
}

DocumentVector make_vector(std::vector<std::pair<TermId, double>> weights) {
  std::sort(weights.begin(), weights.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  DocumentVector v;
  for (const auto& [id, w] : weights) {
    if (!v.weights.empty() && v.weights.back().first == id) {
      v.weights.back().second += w;
    } else {
      v.weights.emplace_back(id, w);
    }
  }
  std::erase_if(v.weights, [](const auto& p) { return p.second == 0.0; });
  double sq = 0.0;
  for (const auto& [id, w] : v.weights) sq += w * w;
  v.norm = std::sqrt(sq);
  return v;
}

VectorizerState fit_vocabulary(const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot fit a vocabulary on zero documents");
  // Term ids follow lexicographic order so the fitted state does not depend
  // on document order.
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::set<std::string_view> seen(doc.begin(), doc.end());
    for (auto term : seen) ++df[std::string(term)];
  }
  VectorizerState state;
  state.doc_count = corpus.size();
  const double n = static_cast<double>(state.doc_count);
  state.idf.reserve(df.size());
  for (const auto& [term, f] : df) {
    state.vocabulary.emplace(term, static_cast<TermId>(state.idf.size()));
    state.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(f))) + 1.0);
  }
  return state;
}

DocumentVector vectorize(const std::vector<std::string>& tokens, const VectorizerState& state) {
  std::vector<std::pair<TermId, double>> raw;
  for (const auto& t : tokens) {
    if (auto id = state.id_of(t)) raw.emplace_back(*id, state.idf[*id]);
  }
  DocumentVector v = make_vector(std::move(raw));
  if (v.norm > 0.0) {
    for (auto& [id, w] : v.weights) w /= v.norm;
    // Unit length by construction; recomputing it would only add rounding.
    v.norm = 1.0;
  }
  return v;
}

double dot(const DocumentVector& a, const DocumentVector& b) {
  double sum = 0.0;
  auto ia = a.weights.begin();
  auto ib = b.weights.begin();
  while (ia != a.weights.end() && ib != b.weights.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      sum += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return sum;
}

double cosine(const DocumentVector& a, const DocumentVector& b) {
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  const double c = dot(a, b) / (a.norm * b.norm);
  return std::clamp(c, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// k-means

double squared_distance(const DocumentVector& x, std::span<const double> centroid) {
  double sum = 0.0;
  auto it = x.weights.begin();
  for (std::size_t i = 0; i < centroid.size(); ++i) {
    double xi = 0.0;
    if (it != x.weights.end() && it->first == i) {
      xi = it->second;
      ++it;
    }
    const double d = xi - centroid[i];
    sum += d * d;
  }
  return sum;
}

namespace {

std::vector<double> densify(const DocumentVector& x, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  for (const auto& [id, w] : x.weights) out[id] = w;
  return out;
}

double squared_norm(std::span<const double> c) {
  double s = 0.0;
  for (double v : c) s += v * v;
  return s;
}

// ||x - c||^2 touching only the non-zeros of x.
double sparse_distance(const DocumentVector& x, std::span<const double> c, double c_sq) {
  double d = c_sq;
  for (const auto& [id, w] : x.weights) {
    const double diff = w - c[id];
    d += diff * diff - c[id] * c[id];
  }
  return std::max(d, 0.0);
}

std::vector<std::size_t> assign_points(const std::vector<DocumentVector>& vectors,
                                       std::vector<std::vector<double>>& centroids, std::size_t dim) {
  const std::size_t k = centroids.size();
  std::vector<double> c_sq(k);
  for (std::size_t c = 0; c < k; ++c) c_sq[c] = squared_norm(centroids[c]);
  std::vector<std::size_t> assignment(vectors.size());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    std::size_t best = 0;
    double best_d = sparse_distance(vectors[i], centroids[0], c_sq[0]);
    for (std::size_t c = 1; c < k; ++c) {
      const double d = sparse_distance(vectors[i], centroids[c], c_sq[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignment[i] = best;
    ++counts[best];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t pick = vectors.size();
    double pick_d = -1.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (counts[assignment[i]] < 2) continue;
      const double d = sparse_distance(vectors[i], centroids[assignment[i]], c_sq[assignment[i]]);
      if (d > pick_d) {
        pick_d = d;
        pick = i;
      }
    }
    if (pick == vectors.size()) break;
    --counts[assignment[pick]];
    assignment[pick] = c;
    counts[c] = 1;
    centroids[c] = densify(vectors[pick], dim);
    c_sq[c] = squared_norm(centroids[c]);
  }
  return assignment;
}

std::vector<std::vector<double>> cluster_means(const std::vector<DocumentVector>& vectors,
                                               const std::vector<std::size_t>& assignment,
                                               const std::vector<std::vector<double>>& previous,
                                               std::size_t dim) {
  const std::size_t k = previous.size();
  std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const std::size_t c = assignment[i];
    ++counts[c];
    for (const auto& [id, w] : vectors[i].weights) sums[c][id] += w;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      sums[c] = previous[c];
      continue;
    }
    for (auto& s : sums[c]) s /= static_cast<double>(counts[c]);
  }
  return sums;
}

double assignment_sse(const std::vector<DocumentVector>& vectors, const std::vector<std::size_t>& assignment,
                      const std::vector<std::vector<double>>& centroids) {
  std::vector<double> c_sq(centroids.size());
  for (std::size_t c = 0; c < centroids.size(); ++c) c_sq[c] = squared_norm(centroids[c]);
  double sse = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    sse += sparse_distance(vectors[i], centroids[assignment[i]], c_sq[assignment[i]]);
  }
  return sse;
}

}  // namespace

std::size_t nearest_centroid(const DocumentVector& x, const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = sparse_distance(x, centroids[0], squared_norm(centroids[0]));
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = sparse_distance(x, centroids[c], squared_norm(centroids[c]));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double clustering_sse(const std::vector<DocumentVector>& vectors, const Clustering& c) {
  return assignment_sse(vectors, c.assignment, c.centroids);
}

Clustering kmeans(const std::vector<DocumentVector>& vectors, std::size_t k, std::uint64_t seed,
                  std::size_t max_iter) {
  const std::size_t n = vectors.size();
  if (k < 1 || k > n) {
    throw Error(ErrorCode::BadK, "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::size_t dim = 1;
  for (const auto& v : vectors) {
    if (!v.weights.empty()) dim = std::max<std::size_t>(dim, v.weights.back().first + 1);
  }

  // Farthest-point seeding: a seeded first pick, then repeatedly the point
  // farthest from every chosen centroid (lowest index on ties).
  std::mt19937_64 rng(seed);
  std::vector<bool> chosen(n, false);
  std::vector<std::vector<double>> centroids;
  std::size_t first = static_cast<std::size_t>(rng() % n);
  chosen[first] = true;
  centroids.push_back(densify(vectors[first], dim));
  std::vector<double> min_d(n);
  for (std::size_t i = 0; i < n; ++i) min_d[i] = sparse_distance(vectors[i], centroids[0], squared_norm(centroids[0]));
  while (centroids.size() < k) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i] && min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    chosen[best] = true;
    centroids.push_back(densify(vectors[best], dim));
    const double last_sq = squared_norm(centroids.back());
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], sparse_distance(vectors[i], centroids.back(), last_sq));
    }
  }

  Clustering result;
  result.k = k;
  std::vector<std::size_t> assignment = assign_points(vectors, centroids, dim);
  while (result.iterations < max_iter) {
    centroids = cluster_means(vectors, assignment, centroids, dim);
    ++result.iterations;
    result.sse_history.push_back(assignment_sse(vectors, assignment, centroids));
    auto next = assign_points(vectors, centroids, dim);
    if (next == assignment) break;
    assignment = std::move(next);
  }
  result.centroids = std::move(centroids);
  result.assignment = std::move(assignment);
  result.sse = clustering_sse(vectors, result);
  return result;
}

// ---------------------------------------------------------------------------
// decision forest

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double bounded_mean(std::span<const double> values) {
  double lo = values[0];
  double hi = values[0];
  double sum = 0.0;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  if (lo == hi) return lo;
  return std::clamp(sum / static_cast<double>(values.size()), lo, hi);
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets,
              const ForestParams& params, std::size_t subset, std::mt19937_64& rng)
      : rows_(rows), targets_(targets), params_(params), subset_(subset), rng_(rng) {}

  RegressionTree build(std::vector<std::size_t> sample) {
    RegressionTree tree;
    grow(tree, std::move(sample), 0);
    return tree;
  }

 private:
  int grow(RegressionTree& tree, std::vector<std::size_t> sample, std::size_t depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::vector<double> ys;
    ys.reserve(sample.size());
    for (std::size_t i : sample) ys.push_back(targets_[i]);
    tree.nodes[index].value = bounded_mean(ys);

    const bool constant = std::all_of(ys.begin(), ys.end(), [&](double y) { return y == ys[0]; });
    if (depth >= params_.max_depth || constant || sample.size() < 2 * params_.min_leaf) return index;

    const auto split = best_split(sample);
    if (!split) return index;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : sample) {
      (rows_[i][split->feature] <= split->threshold ? left : right).push_back(i);
    }
    if (left.empty() || right.empty()) return index;
    tree.nodes[index].feature = static_cast<int>(split->feature);
    tree.nodes[index].threshold = split->threshold;
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    tree.nodes[index].left = l;
    tree.nodes[index].right = r;
    return index;
  }

  struct Split {
    std::size_t feature;
    double threshold;
  };

  std::optional<Split> best_split(const std::vector<std::size_t>& sample) {
    const std::size_t dim = rows_[0].size();
    std::vector<std::size_t> features(dim);
    std::iota(features.begin(), features.end(), 0);
    // partial Fisher-Yates: the first `subset_` entries are the candidates
    for (std::size_t i = 0; i < subset_ && i + 1 < dim; ++i) {
      std::swap(features[i], features[i + uniform_index(rng_, dim - i)]);
    }
    features.resize(subset_);

    const double n = static_cast<double>(sample.size());
    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t i : sample) {
      total += targets_[i];
      total_sq += targets_[i] * targets_[i];
    }
    const double parent_sse = total_sq - total * total / n;

    std::optional<Split> best;
    double best_gain = 0.0;
    std::vector<std::size_t> order = sample;
    for (std::size_t f : features) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows_[a][f] < rows_[b][f] || (rows_[a][f] == rows_[b][f] && a < b);
      });
      double left_sum = 0.0;
      double left_sq = 0.0;
      for (std::size_t j = 0; j + 1 < order.size(); ++j) {
        const double y = targets_[order[j]];
        left_sum += y;
        left_sq += y * y;
        const std::size_t nl = j + 1;
        const std::size_t nr = order.size() - nl;
        const double xa = rows_[order[j]][f];
        const double xb = rows_[order[j + 1]][f];
        if (xa == xb || nl < params_.min_leaf || nr < params_.min_leaf) continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                           (right_sq - right_sum * right_sum / static_cast<double>(nr));
        const double gain = parent_sse - sse;
        if (gain > best_gain + 1e-12 * std::max(1.0, parent_sse)) {
          best_gain = gain;
          // Adjacent doubles have no midpoint strictly between them; cut at xa.
          const double mid = xa + (xb - xa) / 2.0;
          best = Split{f, mid < xb ? mid : xa};
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& rows_;
  const std::vector<double>& targets_;
  const ForestParams& params_;
  std::size_t subset_;
  std::mt19937_64& rng_;
};

}  // namespace

double RegressionTree::predict(std::span<const double> row) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

ForestModel forest_fit(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets,
                       const ForestParams& params) {
  if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "forest_fit needs at least one row");
  if (rows.size() != targets.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(rows.size()) + " rows but " +
                                                  std::to_string(targets.size()) + " targets");
  }
  const std::size_t dim = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(ErrorCode::DimensionMismatch, "rows have unequal length");
  }
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "rows have no features");

  std::size_t subset = params.feature_subset;
  if (subset == 0) subset = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
  subset = std::min(subset, dim);

  ForestModel model;
  model.params = params;
  model.dimension = dim;
  std::mt19937_64 rng(params.seed);
  const std::size_t n = rows.size();
  for (std::size_t t = 0; t < std::max<std::size_t>(params.tree_count, 1); ++t) {
    std::vector<std::size_t> sample(n);
    if (params.bootstrap) {
      for (auto& s : sample) s = uniform_index(rng, n);
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    TreeBuilder builder(rows, targets, params, subset, rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

double forest_predict(const ForestModel& model, std::span<const double> row) {
  if (row.size() != model.dimension) {
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.size()) + " features, model expects " +
                                                  std::to_string(model.dimension));
  }
  std::vector<double> votes;
  votes.reserve(model.trees.size());
  for (const auto& tree : model.trees) votes.push_back(tree.predict(row));
  return bounded_mean(votes);
}

}  // namespace rafiq::vectors
