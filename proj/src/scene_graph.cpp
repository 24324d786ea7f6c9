// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/scene_graph.hpp"

#include <algorithm>
#include <set>

#include "placekit/json_util.hpp"

namespace placekit {

const GraphNode* SceneGraph::find(int id) const {
  for (const GraphNode& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::vector<int> SceneGraph::children_of(int id) const {
  std::vector<int> out;
  for (const GraphEdge& e : edges)
    if (e.parent == id) out.push_back(e.child);
  return out;
}

std::vector<int> SceneGraph::subtree_ids(int id) const {
  std::vector<int> out{id};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int child : children_of(out[i])) out.push_back(child);
  return out;
}

void SceneGraph::validate() const {
  if (nodes.empty()) fail("invalid_argument", "graph has no nodes");
  std::set<int> ids;
  for (const GraphNode& n : nodes) {
    if (!n.centroid.allFinite()) fail("invalid_argument", "graph node centroid is not finite");
    if (n.category.empty()) fail("invalid_argument", "graph node category is empty");
    if (!ids.insert(n.id).second)
      fail("invalid_argument", "duplicate graph node id " + std::to_string(n.id));
  }
  if (!ids.count(root)) fail("invalid_argument", "graph root is not a node");
  if (edges.size() != nodes.size() - 1)
    fail("invalid_argument", "graph edge count must be node count - 1");
  std::set<int> children;
  for (const GraphEdge& e : edges) {
    const GraphNode* p = find(e.parent);
    const GraphNode* c = find(e.child);
    if (p == nullptr || c == nullptr) fail("invalid_argument", "graph edge references unknown node");
    if (!children.insert(e.child).second)
      fail("invalid_argument", "graph node has two parents: " + std::to_string(e.child));
    if (e.child == root) fail("invalid_argument", "graph root cannot be a child");
    if ((e.offset - (c->centroid - p->centroid)).norm() > 1e-9)
      fail("invalid_argument", "graph edge offset does not match centroids");
    if (e.relation != classify_displacement(p->centroid, c->centroid, viewer_yaw))
      fail("invalid_argument", "graph edge relation does not match centroids");
  }
  if (subtree_ids(root).size() != nodes.size())
    fail("invalid_argument", "graph is not connected from the root");
}

int select_root(const std::vector<GraphNode>& nodes) {
  if (nodes.empty()) fail("invalid_argument", "select_root: node list is empty");
  Vec3 center = Vec3::Zero();
  for (const GraphNode& n : nodes) center += n.centroid;
  center /= static_cast<double>(nodes.size());
  int best_id = nodes.front().id;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const GraphNode& n : nodes) {
    const double d2 = (n.centroid - center).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.id < best_id)) {
      best_d2 = d2;
      best_id = n.id;
    }
  }
  return best_id;
}

SceneGraph build_graph(const std::vector<GraphNode>& nodes, double viewer_yaw) {
  SceneGraph g;
  g.viewer_yaw = viewer_yaw;
  g.nodes = nodes;
  {
    std::set<int> ids;
    for (const GraphNode& n : nodes)
      if (!ids.insert(n.id).second)
        fail("invalid_argument", "build_graph: duplicate node id " + std::to_string(n.id));
  }
  g.root = select_root(nodes);

  // Candidates are scanned in ascending id order so distance ties resolve to
  // the lowest candidate id, then the lowest attachment id.
  std::vector<const GraphNode*> by_id;
  for (const GraphNode& n : g.nodes) by_id.push_back(&n);
  std::sort(by_id.begin(), by_id.end(),
            [](const GraphNode* a, const GraphNode* b) { return a->id < b->id; });

  std::set<int> assigned{g.root};
  while (assigned.size() < g.nodes.size()) {
    const GraphNode* best_candidate = nullptr;
    const GraphNode* best_attach = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const GraphNode* cand : by_id) {
      if (assigned.count(cand->id)) continue;
      const GraphNode* attach = nullptr;
      double d2 = std::numeric_limits<double>::infinity();
      for (const GraphNode* s : by_id) {
        if (!assigned.count(s->id)) continue;
        const double d = (cand->centroid - s->centroid).squaredNorm();
        if (d < d2) {
          d2 = d;
          attach = s;
        }
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best_candidate = cand;
        best_attach = attach;
      }
    }
    GraphEdge edge;
    edge.parent = best_attach->id;
    edge.child = best_candidate->id;
    edge.offset = best_candidate->centroid - best_attach->centroid;
    edge.relation = classify_displacement(best_attach->centroid, best_candidate->centroid, viewer_yaw);
    g.edges.push_back(edge);
    assigned.insert(best_candidate->id);
  }
  g.validate();
  return g;
}

namespace {

struct Subtree {
  std::vector<GraphNode> nodes;  // breadth-first, root first
  std::vector<GraphEdge> edges;
};

Subtree extract_subtree(const SceneGraph& g, int root_id) {
  Subtree out;
  for (int id : g.subtree_ids(root_id)) out.nodes.push_back(*g.find(id));
  std::set<int> member;
  for (const GraphNode& n : out.nodes) member.insert(n.id);
  for (const GraphEdge& e : g.edges)
    if (member.count(e.parent) && member.count(e.child)) out.edges.push_back(e);
  return out;
}

// Removes `old_child`'s subtree from `g`, grafting `incoming` (shifted so its
// root sits at the removed subtree root's centroid) under the same parent.
SceneGraph graft(const SceneGraph& g, std::size_t edge_index, const Subtree& incoming) {
  const GraphEdge cut = g.edges[edge_index];
  const Vec3 anchor = g.find(cut.child)->centroid;
  const Vec3 shift = anchor - incoming.nodes.front().centroid;

  std::set<int> removed;
  for (int id : g.subtree_ids(cut.child)) removed.insert(id);

  SceneGraph out;
  out.viewer_yaw = g.viewer_yaw;
  out.root = g.root;
  int next_id = 0;
  for (const GraphNode& n : g.nodes)
    if (!removed.count(n.id)) {
      out.nodes.push_back(n);
      next_id = std::max(next_id, n.id);
    }
  ++next_id;

  std::map<int, int> remap;
  for (const GraphNode& n : incoming.nodes) {
    GraphNode node = n;
    node.id = next_id + static_cast<int>(remap.size());
    node.centroid += shift;
    remap[n.id] = node.id;
    out.nodes.push_back(node);
  }

  for (const GraphEdge& e : g.edges) {
    if (removed.count(e.child) || removed.count(e.parent)) continue;
    out.edges.push_back(e);
  }
  GraphEdge junction;
  junction.parent = cut.parent;
  junction.child = remap.at(incoming.nodes.front().id);
  const GraphNode* parent = out.find(junction.parent);
  const GraphNode* child = out.find(junction.child);
  junction.offset = child->centroid - parent->centroid;
  junction.relation = classify_displacement(parent->centroid, child->centroid, g.viewer_yaw);
  out.edges.push_back(junction);
  for (const GraphEdge& e : incoming.edges) {
    GraphEdge edge;
    edge.parent = remap.at(e.parent);
    edge.child = remap.at(e.child);
    edge.offset = e.offset;
    edge.relation = e.relation;
    out.edges.push_back(edge);
  }
  out.validate();
  return out;
}

}  // namespace

std::pair<SceneGraph, SceneGraph> crossover(const SceneGraph& g1, const SceneGraph& g2,
                                            std::size_t e1, std::size_t e2, double p_c,
                                            std::uint64_t rng_seed) {
  if (e1 >= g1.edges.size() || e2 >= g2.edges.size())
    fail("invalid_argument", "crossover: edge index out of range");
  const GraphEdge& a = g1.edges[e1];
  const GraphEdge& b = g2.edges[e2];
  if (g1.find(a.parent)->category != g2.find(b.parent)->category ||
      g1.find(a.child)->category != g2.find(b.child)->category)
    fail("precondition_error", "crossover: edge endpoint categories do not match");
  RandomStream rng(rng_seed);
  if (!(rng.uniform01() < p_c)) return {g1, g2};
  const Subtree t1 = extract_subtree(g1, a.child);
  const Subtree t2 = extract_subtree(g2, b.child);
  return {graft(g1, e1, t2), graft(g2, e2, t1)};
}

SceneGraph mutate(const SceneGraph& g, const SimilarityTable& table,
                  const std::vector<std::string>& library_categories, double tau_p, double p_m,
                  std::uint64_t rng_seed) {
  if (!(tau_p > 0.0 && tau_p < 1.0)) fail("invalid_argument", "mutate: tau_p must be in (0,1)");
  SceneGraph out = g;
  RandomStream rng(rng_seed);
  for (GraphNode& node : out.nodes) {
    if (!(rng.uniform01() < p_m)) continue;
    std::vector<std::string> candidates;
    for (const std::string& cat : library_categories)
      if (cat != node.category && table.score(node.category, cat) > tau_p) candidates.push_back(cat);
    if (candidates.empty()) continue;
    node.category = candidates[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
  }
  return out;
}

std::optional<std::pair<std::size_t, std::size_t>> pick_matching_edges(const SceneGraph& g1,
                                                                       const SceneGraph& g2,
                                                                       RandomStream& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t i = 0; i < g1.edges.size(); ++i)
    for (std::size_t j = 0; j < g2.edges.size(); ++j) {
      const GraphEdge& a = g1.edges[i];
      const GraphEdge& b = g2.edges[j];
      if (g1.find(a.parent)->category == g2.find(b.parent)->category &&
          g1.find(a.child)->category == g2.find(b.child)->category)
        matches.emplace_back(i, j);
    }
  if (matches.empty()) return std::nullopt;
  return matches[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(matches.size()) - 1))];
}

double SimilarityTable::score(const std::string& a, const std::string& b) const {
  if (a == b) return 1.0;
  switch (mode_) {
    case Mode::Groups: {
      const auto ia = group_of_.find(a);
      const auto ib = group_of_.find(b);
      if (ia == group_of_.end() || ib == group_of_.end()) return 0.0;
      return ia->second == ib->second ? 1.0 : 0.0;
    }
    case Mode::Matrix: {
      const auto ia = index_.find(a);
      const auto ib = index_.find(b);
      if (ia == index_.end() || ib == index_.end()) return 0.0;
      return matrix_(ia->second, ib->second);
    }
    case Mode::Embeddings: {
      const auto ia = index_.find(a);
      const auto ib = index_.find(b);
      if (ia == index_.end() || ib == index_.end()) return 0.0;
      return embeddings_[ia->second].dot(embeddings_[ib->second]);
    }
  }
  return 0.0;
}

SimilarityTable SimilarityTable::from_groups(
    const std::map<std::string, std::vector<std::string>>& groups) {
  SimilarityTable t;
  t.mode_ = Mode::Groups;
  t.groups_ = groups;
  int gi = 0;
  for (const auto& [name, members] : groups) {
    (void)name;
    for (const std::string& cat : members) {
      if (t.group_of_.count(cat)) fail("invalid_argument", "category in two groups: " + cat);
      t.group_of_[cat] = gi;
      t.categories_.push_back(cat);
    }
    ++gi;
  }
  std::sort(t.categories_.begin(), t.categories_.end());
  return t;
}

SimilarityTable SimilarityTable::from_matrix(const std::vector<std::string>& categories,
                                             const Eigen::MatrixXd& scores) {
  SimilarityTable t;
  t.mode_ = Mode::Matrix;
  t.categories_ = categories;
  if (scores.rows() != static_cast<Eigen::Index>(categories.size()) || scores.rows() != scores.cols())
    fail("invalid_argument", "similarity matrix shape mismatch");
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (std::abs(scores(i, i) - 1.0) > 1e-9)
      fail("invalid_argument", "similarity matrix diagonal must be 1");
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (std::abs(scores(i, j) - scores(j, i)) > 1e-9)
        fail("invalid_argument", "similarity matrix must be symmetric");
      if (scores(i, j) < -1.0 - 1e-9 || scores(i, j) > 1.0 + 1e-9)
        fail("invalid_argument", "similarity scores must lie in [-1,1]");
    }
  }
  t.matrix_ = scores;
  for (std::size_t i = 0; i < categories.size(); ++i) t.index_[categories[i]] = static_cast<int>(i);
  return t;
}

SimilarityTable SimilarityTable::from_embeddings(const std::vector<std::string>& categories,
                                                 const std::vector<Eigen::VectorXd>& embeddings) {
  SimilarityTable t;
  t.mode_ = Mode::Embeddings;
  t.categories_ = categories;
  if (embeddings.size() != categories.size())
    fail("invalid_argument", "similarity embeddings count mismatch");
  t.embeddings_ = embeddings;
  for (Eigen::VectorXd& e : t.embeddings_) {
    const double n = e.norm();
    if (!(n > 0.0)) fail("invalid_argument", "similarity embedding has zero norm");
    e /= n;
  }
  for (std::size_t i = 0; i < categories.size(); ++i) t.index_[categories[i]] = static_cast<int>(i);
  return t;
}

SimilarityTable SimilarityTable::builtin() {
  return from_groups({
      {"drinkware", {"mug", "cup", "glass", "bottle"}},
      {"dishware", {"plate", "bowl", "saucer"}},
      {"cutlery", {"fork", "knife", "spoon"}},
      {"peripherals", {"keyboard", "mouse"}},
      {"stationery", {"notebook", "pen", "stapler"}},
      {"decor", {"plant", "vase", "lamp"}},
  });
}

SimilarityTable SimilarityTable::load(const std::string& path) {
  const json j = load_json_file(path, "similarity table");
  check_keys(j, {"schema_version", "mode"}, {"groups", "categories", "matrix", "embeddings"},
             "similarity");
  check_schema_version(j, 1, "similarity");
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "groups") {
    if (!j.contains("groups")) fail("schema_error", "similarity: groups mode needs 'groups'");
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& [name, members] : j.at("groups").items()) {
      std::vector<std::string> cats;
      for (const json& c : members) cats.push_back(c.get<std::string>());
      groups[name] = std::move(cats);
    }
    return from_groups(groups);
  }
  if (mode == "matrix") {
    if (!j.contains("categories") || !j.contains("matrix"))
      fail("schema_error", "similarity: matrix mode needs 'categories' and 'matrix'");
    std::vector<std::string> cats;
    for (const json& c : j.at("categories")) cats.push_back(c.get<std::string>());
    Eigen::MatrixXd m(cats.size(), cats.size());
    const json& rows = j.at("matrix");
    if (rows.size() != cats.size()) fail("schema_error", "similarity: matrix row count mismatch");
    for (std::size_t r = 0; r < cats.size(); ++r) {
      if (rows.at(r).size() != cats.size())
        fail("schema_error", "similarity: matrix column count mismatch");
      for (std::size_t c = 0; c < cats.size(); ++c) m(r, c) = rows.at(r).at(c).get<double>();
    }
    return from_matrix(cats, m);
  }
  if (mode == "embeddings") {
    if (!j.contains("categories") || !j.contains("embeddings"))
      fail("schema_error", "similarity: embeddings mode needs 'categories' and 'embeddings'");
    std::vector<std::string> cats;
    for (const json& c : j.at("categories")) cats.push_back(c.get<std::string>());
    std::vector<Eigen::VectorXd> embs;
    for (const std::string& cat : cats) {
      if (!j.at("embeddings").contains(cat))
        fail("schema_error", "similarity: missing embedding for " + cat);
      const json& v = j.at("embeddings").at(cat);
      Eigen::VectorXd e(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) e[static_cast<Eigen::Index>(i)] = v.at(i).get<double>();
      embs.push_back(std::move(e));
    }
    return from_embeddings(cats, embs);
  }
  fail("schema_error", "similarity: unknown mode '" + mode + "'");
}

void SimilarityTable::save(const std::string& path) const {
  json j;
  j["schema_version"] = 1;
  switch (mode_) {
    case Mode::Groups: {
      j["mode"] = "groups";
      json groups;
      for (const auto& [name, members] : groups_) {
        json arr = json::array();
        for (const std::string& cat : members) arr.push_back(cat);
        groups[name] = std::move(arr);
      }
      j["groups"] = std::move(groups);
      break;
    }
    case Mode::Matrix: {
      j["mode"] = "matrix";
      j["categories"] = categories_;
      json rows = json::array();
      for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < matrix_.cols(); ++c) row.push_back(matrix_(r, c));
        rows.push_back(std::move(row));
      }
      j["matrix"] = std::move(rows);
      break;
    }
    case Mode::Embeddings: {
      j["mode"] = "embeddings";
      j["categories"] = categories_;
      json embs;
      for (std::size_t i = 0; i < categories_.size(); ++i) {
        json arr = json::array();
        for (Eigen::Index k = 0; k < embeddings_[i].size(); ++k) arr.push_back(embeddings_[i][k]);
        embs[categories_[i]] = std::move(arr);
      }
      j["embeddings"] = std::move(embs);
      break;
    }
  }
  save_json_file(j, path, "similarity save");
}

SceneGraph load_graph(const std::string& path) {
  const json j = load_json_file(path, "load_graph");
  check_keys(j, {"schema_version", "root", "viewer_yaw", "nodes", "edges"}, {}, "graph");
  check_schema_version(j, 1, "graph");
  SceneGraph g;
  g.root = j.at("root").get<int>();
  g.viewer_yaw = j.at("viewer_yaw").get<double>();
  for (const json& nj : j.at("nodes")) {
    check_keys(nj, {"id", "category", "centroid"}, {}, "graph.node");
    GraphNode n;
    n.id = nj.at("id").get<int>();
    n.category = nj.at("category").get<std::string>();
    n.centroid = vec3_from(nj.at("centroid"), "graph.node.centroid");
    g.nodes.push_back(std::move(n));
  }
  for (const json& ej : j.at("edges")) {
    check_keys(ej, {"parent", "child", "relation", "offset"}, {}, "graph.edge");
    GraphEdge e;
    e.parent = ej.at("parent").get<int>();
    e.child = ej.at("child").get<int>();
    e.relation = relation_from_name(ej.at("relation").get<std::string>());
    e.offset = vec3_from(ej.at("offset"), "graph.edge.offset");
    g.edges.push_back(std::move(e));
  }
  g.validate();
  return g;
}

void save_graph(const SceneGraph& graph, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  j["root"] = graph.root;
  j["viewer_yaw"] = graph.viewer_yaw;
  json nodes = json::array();
  for (const GraphNode& n : graph.nodes) {
    json nj;
    nj["id"] = n.id;
    nj["category"] = n.category;
    nj["centroid"] = vec3_json(n.centroid);
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const GraphEdge& e : graph.edges) {
    json ej;
    ej["parent"] = e.parent;
    ej["child"] = e.child;
    ej["relation"] = relation_name(e.relation);
    ej["offset"] = vec3_json(e.offset);
    edges.push_back(std::move(ej));
  }
  j["edges"] = std::move(edges);
  save_json_file(j, path, "save_graph");
}

}  // namespace placekit
