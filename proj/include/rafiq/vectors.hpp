#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rafiq::vectors {

using TermId = std::uint32_t;

// Vocabulary and smoothed IDF weights fitted over a corpus of token sequences.
struct VectorizerState {
  std::unordered_map<std::string, TermId> vocabulary;
  std::vector<double> idf;  // indexed by TermId
  std::size_t doc_count = 0;

  std::optional<TermId> id_of(const std::string& term) const;
  std::size_t dimension() const { return idf.size(); }
};

// Sparse non-negative vector; entries sorted by term id, zero weights omitted.
struct DocumentVector {
  std::vector<std::pair<TermId, double>> weights;
  double norm = 0.0;

  bool empty() const { return weights.empty(); }
  bool operator==(const DocumentVector&) const = default;
};

/// Builds a vector from (id, weight) pairs in any order; duplicate ids are
/// summed, zeros dropped, and the norm cached. No normalization.
DocumentVector make_vector(std::vector<std::pair<TermId, double>> weights);

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1. Term ids follow sorted term order.
/// Throws Error(EmptyCorpus) for an empty corpus.
VectorizerState fit_vocabulary(const std::vector<std::vector<std::string>>& corpus);

/// Raw term count times idf, L2-normalized. Out-of-vocabulary terms are
/// dropped; an all-OOV input yields the zero vector.
DocumentVector vectorize(const std::vector<std::string>& tokens, const VectorizerState& state);

/// Cosine similarity; 0 when either side is the zero vector.
double cosine(const DocumentVector& a, const DocumentVector& b);

double dot(const DocumentVector& a, const DocumentVector& b);

struct Clustering {
  std::size_t k = 0;
  std::vector<std::vector<double>> centroids;  // dense, one per cluster
  std::vector<std::size_t> assignment;         // point index -> cluster id
  double sse = 0.0;
  std::vector<double> sse_history;  // after each centroid update
  std::size_t iterations = 0;

  bool operator==(const Clustering&) const = default;
};

double squared_distance(const DocumentVector& x, std::span<const double> centroid);

/// Index of the closest centroid; ties go to the lowest cluster id.
std::size_t nearest_centroid(const DocumentVector& x, const std::vector<std::vector<double>>& centroids);

/// Lloyd's algorithm from a seeded farthest-point initialization. Stops at an
/// assignment fixpoint or after `max_iter` updates. Empty clusters are
/// re-seeded with the point farthest from its current centroid.
/// Throws Error(BadK) unless 1 <= k <= vectors.size().
Clustering kmeans(const std::vector<DocumentVector>& vectors, std::size_t k, std::uint64_t seed,
                  std::size_t max_iter = 100);

// Recomputes the within-cluster sum of squared distances.
double clustering_sse(const std::vector<DocumentVector>& vectors, const Clustering& c);

struct ForestParams {
  std::size_t tree_count = 32;
  std::size_t max_depth = 6;
  std::size_t min_leaf = 2;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  std::size_t feature_subset = 0;  // 0 selects ceil(sqrt(d))

  bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean of training targets reaching the node

  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  bool operator==(const RegressionTree&) const = default;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::size_t dimension = 0;

  bool operator==(const ForestModel&) const = default;
};

/// Bagged variance-reduction regression trees. Rows go left when
/// row[feature] <= threshold. Throws EmptyTrainingSet or DimensionMismatch.
ForestModel forest_fit(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets,
                       const ForestParams& params);

double forest_predict(const ForestModel& model, std::span<const double> row);

}  // namespace rafiq::vectors
