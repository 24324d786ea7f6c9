// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "placekit/scene_model.hpp"

namespace placekit {

struct GraphNode {
  int id = 0;
  std::string category;
  Vec3 centroid{0.0, 0.0, 0.0};
};

struct GraphEdge {
  int parent = 0;
  int child = 0;
  Relation relation = Relation::Right;
  Vec3 offset{0.0, 0.0, 0.0};
};

/// Rooted spanning tree over object nodes. Invariants: edges form a tree
/// rooted at `root` (|edges| = |nodes| - 1, connected, acyclic); each edge's
/// relation equals classify_displacement of its endpoint centroids under
/// `viewer_yaw`; offset = child centroid - parent centroid.
struct SceneGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  int root = 0;
  double viewer_yaw = 0.0;

  const GraphNode* find(int id) const;
  std::vector<int> children_of(int id) const;
  /// Ids of the subtree rooted at `id` (inclusive), breadth-first.
  std::vector<int> subtree_ids(int id) const;
  void validate() const;
};

/// Pairwise category similarity, file-backed. Modes: hand-curated function
/// groups (1 within a group, 0 across), a dense score matrix in [-1,1], or
/// unit embeddings scored by cosine. Invariants: score(a,a) = 1, symmetric.
class SimilarityTable {
public:
  double score(const std::string& a, const std::string& b) const;
  const std::vector<std::string>& categories() const { return categories_; }

  static SimilarityTable from_groups(const std::map<std::string, std::vector<std::string>>& groups);
  static SimilarityTable from_matrix(const std::vector<std::string>& categories,
                                     const Eigen::MatrixXd& scores);
  static SimilarityTable from_embeddings(const std::vector<std::string>& categories,
                                         const std::vector<Eigen::VectorXd>& embeddings);
  /// Built-in function groups covering the bundled shape library.
  static SimilarityTable builtin();

  static SimilarityTable load(const std::string& path);
  void save(const std::string& path) const;

private:
  enum class Mode { Groups, Matrix, Embeddings };
  Mode mode_ = Mode::Groups;
  std::vector<std::string> categories_;
  std::map<std::string, int> index_;
  std::map<std::string, int> group_of_;
  std::map<std::string, std::vector<std::string>> groups_;
  Eigen::MatrixXd matrix_;
  std::vector<Eigen::VectorXd> embeddings_;
};

/// Node whose centroid is closest to the mean of all centroids; ties go to
/// the lowest id.
int select_root(const std::vector<GraphNode>& nodes);

/// Grows the tree from the root by repeatedly attaching the unassigned node
/// nearest to the assigned set (Prim's construction). Ties break by lowest
/// candidate id, then lowest attachment id.
SceneGraph build_graph(const std::vector<GraphNode>& nodes, double viewer_yaw = 0.0);

/// With probability p_c, exchanges the child-side subtrees of edges
/// g1.edges[e1] and g2.edges[e2]. Requires matching categories on both edge
/// endpoints. Incoming subtrees are rigidly shifted so their root lands on
/// the receiving child's centroid; swapped-in nodes get fresh ids.
std::pair<SceneGraph, SceneGraph> crossover(const SceneGraph& g1, const SceneGraph& g2,
                                            std::size_t e1, std::size_t e2, double p_c,
                                            std::uint64_t rng_seed);

/// Independently replaces each node's category, with probability p_m, by a
/// uniformly drawn library category whose similarity exceeds tau_p
/// (excluding the current category). Topology, ids and centroids unchanged.
SceneGraph mutate(const SceneGraph& g, const SimilarityTable& table,
                  const std::vector<std::string>& library_categories, double tau_p, double p_m,
                  std::uint64_t rng_seed);

/// Uniform draw among ordered edge pairs whose endpoint categories match
/// (the default crossover selection policy). Empty when no pair matches.
std::optional<std::pair<std::size_t, std::size_t>> pick_matching_edges(const SceneGraph& g1,
                                                                       const SceneGraph& g2,
                                                                       RandomStream& rng);

SceneGraph load_graph(const std::string& path);
void save_graph(const SceneGraph& graph, const std::string& path);

}  // namespace placekit
