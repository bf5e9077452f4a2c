#pragma once

// Regular vine copulas: greedy maximum-spanning-tree structure selection on
// |Kendall's tau| (tree by tree, on h-transformed pseudo-observations),
// pair-copula fitting per edge, and inverse-Rosenblatt sampling.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rctsynth/bicop.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/marginals.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/stats.hpp"

namespace rctsynth {

struct VineEdge {
  // Pair copula of (U_{a|D}, U_{b|D}) with a = conditioned[0] as first argument.
  std::array<std::size_t, 2> conditioned{};
  std::vector<std::size_t> conditioning;  // D, ascending
  // Edges of the previous tree joined by this edge (unused in the first tree).
  std::array<std::size_t, 2> parents{};

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> s = conditioning;
    s.push_back(conditioned[0]);
    s.push_back(conditioned[1]);
    std::sort(s.begin(), s.end());
    return s;
  }

  bool has_conditioned(std::size_t var) const { return conditioned[0] == var || conditioned[1] == var; }

  friend bool operator==(const VineEdge&, const VineEdge&) = default;
};

struct VineStructure {
  std::size_t d = 0;
  std::vector<std::vector<VineEdge>> trees;  // trees[t] holds the edges of tree t+1

  friend bool operator==(const VineStructure&, const VineStructure&) = default;

  // Edge counts, spanning-tree property of every tree and the proximity condition.
  void validate() const {
    if (d < 2) throw ArgumentError("vine dimension must be at least 2");
    if (trees.size() != d - 1) throw ArgumentError("vine must have d-1 trees");
    for (std::size_t t = 0; t < trees.size(); ++t) {
      const std::size_t n_nodes = d - t;
      if (trees[t].size() != n_nodes - 1) {
        throw ArgumentError("tree " + std::to_string(t + 1) + " must have " + std::to_string(n_nodes - 1) + " edges");
      }
      std::vector<std::size_t> parent(n_nodes);
      std::iota(parent.begin(), parent.end(), 0);
      auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
      };
      for (const auto& e : trees[t]) {
        std::size_t n0, n1;
        if (t == 0) {
          if (!e.conditioning.empty()) throw ArgumentError("first-tree edges have empty conditioning sets");
          n0 = e.conditioned[0];
          n1 = e.conditioned[1];
        } else {
          n0 = e.parents[0];
          n1 = e.parents[1];
          const auto& p0 = trees[t - 1].at(n0);
          const auto& p1 = trees[t - 1].at(n1);
          const auto a0 = p0.all(), a1 = p1.all();
          std::vector<std::size_t> common, uni;
          std::set_intersection(a0.begin(), a0.end(), a1.begin(), a1.end(), std::back_inserter(common));
          std::set_union(a0.begin(), a0.end(), a1.begin(), a1.end(), std::back_inserter(uni));
          if (common.size() != t) {
            throw ArgumentError("proximity condition violated in tree " + std::to_string(t + 1));
          }
          if (common != e.conditioning || uni != e.all()) {
            throw ArgumentError("edge sets inconsistent with parents in tree " + std::to_string(t + 1));
          }
        }
        if (n0 >= n_nodes || n1 >= n_nodes || n0 == n1) throw ArgumentError("invalid edge endpoints");
        const std::size_t r0 = find(n0), r1 = find(n1);
        if (r0 == r1) throw ArgumentError("tree " + std::to_string(t + 1) + " contains a cycle");
        parent[r0] = r1;
      }
    }
  }
};

struct VineModel {
  VineStructure structure;
  std::vector<std::vector<BivariateCopula>> pair_copulas;  // parallel to structure.trees
  std::vector<EmpiricalMarginal> marginals;                // one per column, may be empty for grid-only fits
  Schema schema;                                           // columns modelled, in grid order

  std::size_t dimension() const { return structure.d; }

  std::size_t pair_copula_count() const {
    std::size_t n = 0;
    for (const auto& t : pair_copulas) n += t.size();
    return n;
  }
};

// Prim's maximum spanning tree on a weighted graph given as an adjacency
// matrix; a negative weight marks a non-edge. Ties resolve to the
// lexicographically smallest (min index, max index) pair, starting from node 0.
inline std::vector<std::array<std::size_t, 2>> maximum_spanning_tree(const std::vector<std::vector<double>>& weight) {
  const std::size_t m = weight.size();
  std::vector<std::array<std::size_t, 2>> edges;
  if (m < 2) return edges;
  std::vector<char> in_tree(m, 0);
  in_tree[0] = 1;
  for (std::size_t step = 1; step < m; ++step) {
    bool found = false;
    double best_w = 0.0;
    std::array<std::size_t, 2> best{};
    for (std::size_t i = 0; i < m; ++i) {
      if (!in_tree[i]) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (in_tree[j] || weight[i][j] < 0.0) continue;
        const std::array<std::size_t, 2> key{std::min(i, j), std::max(i, j)};
        if (!found || weight[i][j] > best_w || (weight[i][j] == best_w && key < best)) {
          found = true;
          best_w = weight[i][j];
          best = key;
        }
      }
    }
    if (!found) throw ArgumentError("candidate graph is not connected");
    edges.push_back(best);
    in_tree[best[0]] = 1;
    in_tree[best[1]] = 1;
  }
  return edges;
}

namespace vine_detail {

// Pseudo-data attached to a node of the current tree: for each conditioned
// variable of the node's edge, U_{var | rest of node}.
struct NodeData {
  std::vector<std::size_t> all;
  std::array<std::size_t, 2> vars{};
  std::array<std::vector<double>, 2> data;

  const std::vector<double>& for_var(std::size_t v) const {
    if (vars[0] == v) return data[0];
    if (vars[1] == v) return data[1];
    throw NumericError("vine node does not carry the requested variable");
  }
};

struct DissmannResult {
  VineStructure structure;
  std::vector<std::vector<BivariateCopula>> copulas;
};

inline DissmannResult dissmann(const UniformGrid& grid, const std::vector<CopulaFamily>& families,
                               const PairFitOptions& opt) {
  const std::size_t d = grid.cols, n = grid.rows;
  if (d < 2) throw ArgumentError("vine selection needs at least 2 columns");
  if (n < 10) throw ArgumentError("vine selection needs at least 10 rows");
  for (double x : grid.data) {
    if (!(x > 0.0 && x < 1.0)) throw ArgumentError("vine input must lie strictly inside (0,1)");
  }

  DissmannResult result;
  result.structure.d = d;

  // First tree: nodes are the variables.
  std::vector<std::vector<double>> cols(d);
  for (std::size_t j = 0; j < d; ++j) cols[j] = grid.column(j);

  std::vector<NodeData> prev;  // edge data of the previous tree
  for (std::size_t t = 0; t + 1 < d; ++t) {
    const std::size_t m = d - t;
    std::vector<std::vector<double>> weight(m, std::vector<double>(m, -1.0));
    // candidate edge -> (a, b, data_a, data_b)
    auto candidate = [&](std::size_t i, std::size_t j, std::size_t& a, std::size_t& b,
                         const std::vector<double>*& da, const std::vector<double>*& db) -> bool {
      if (t == 0) {
        a = i;
        b = j;
        da = &cols[i];
        db = &cols[j];
        return true;
      }
      const auto& ai = prev[i].all;
      const auto& aj = prev[j].all;
      std::vector<std::size_t> common, only_i, only_j;
      std::set_intersection(ai.begin(), ai.end(), aj.begin(), aj.end(), std::back_inserter(common));
      if (common.size() != t) return false;
      std::set_difference(ai.begin(), ai.end(), aj.begin(), aj.end(), std::back_inserter(only_i));
      std::set_difference(aj.begin(), aj.end(), ai.begin(), ai.end(), std::back_inserter(only_j));
      a = only_i.at(0);
      b = only_j.at(0);
      da = &prev[i].for_var(a);
      db = &prev[j].for_var(b);
      return true;
    };

    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        std::size_t a, b;
        const std::vector<double>*da, *db;
        if (!candidate(i, j, a, b, da, db)) continue;
        const double w = std::fabs(kendall_tau(*da, *db).value);
        weight[i][j] = weight[j][i] = w;
      }
    }

    const auto mst = maximum_spanning_tree(weight);
    std::vector<VineEdge> tree_edges;
    std::vector<BivariateCopula> tree_copulas;
    std::vector<NodeData> next;
    for (const auto& [i, j] : mst) {
      std::size_t a, b;
      const std::vector<double>*da, *db;
      candidate(i, j, a, b, da, db);
      VineEdge e;
      e.conditioned = {a, b};
      if (t > 0) {
        e.parents = {i, j};
        std::set_intersection(prev[i].all.begin(), prev[i].all.end(), prev[j].all.begin(), prev[j].all.end(),
                              std::back_inserter(e.conditioning));
      }
      BivariateCopula c = fit_pair_copula(*da, *db, families, opt);
      NodeData nd;
      nd.all = e.all();
      nd.vars = {a, b};
      nd.data[0].resize(n);
      nd.data[1].resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        nd.data[0][r] = c.hfunc2((*da)[r], (*db)[r]);
        nd.data[1][r] = c.hfunc1((*da)[r], (*db)[r]);
      }
      tree_edges.push_back(std::move(e));
      tree_copulas.push_back(c);
      next.push_back(std::move(nd));
    }
    result.structure.trees.push_back(std::move(tree_edges));
    result.copulas.push_back(std::move(tree_copulas));
    prev = std::move(next);
  }
  return result;
}

}  // namespace vine_detail

inline VineStructure select_structure(const UniformGrid& grid,
                                      const std::vector<CopulaFamily>& families = all_copula_families(),
                                      const PairFitOptions& opt = {}) {
  return vine_detail::dissmann(grid, families, opt).structure;
}

inline VineModel fit_vine(const UniformGrid& grid, const std::vector<CopulaFamily>& families = all_copula_families(),
                          const PairFitOptions& opt = {}) {
  auto res = vine_detail::dissmann(grid, families, opt);
  VineModel model;
  model.structure = std::move(res.structure);
  model.pair_copulas = std::move(res.copulas);
  return model;
}

// Fits marginals and the vine to the complete cases of `columns`.
inline VineModel fit_vine(const DataTable& table, const std::vector<std::string>& columns, Seed seed,
                          const std::vector<CopulaFamily>& families = all_copula_families(),
                          const PairFitOptions& opt = {}) {
  const DataTable cc = complete_cases(table, columns);
  std::vector<EmpiricalMarginal> marginals;
  const UniformGrid grid = pseudo_observations(cc, columns, seed, &marginals);
  VineModel model = fit_vine(grid, families, opt);
  model.marginals = std::move(marginals);
  for (const auto& name : columns) model.schema.push_back(table.column_schema(table.column_index(name)));
  return model;
}

namespace vine_detail {

// Sampling order from peeling the vine: each peeled variable carries one
// edge per tree (tree 0 .. its depth), linking it to variables peeled later.
struct PeelStep {
  std::size_t var;
  std::vector<std::size_t> edges;  // edges[t] = edge index in tree t
};

inline std::vector<PeelStep> peel(const VineStructure& s) {
  const std::size_t d = s.d;
  std::vector<std::vector<char>> used(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t) used[t].assign(s.trees[t].size(), 0);
  std::vector<PeelStep> steps;
  std::vector<char> peeled(d, 0);
  for (std::size_t col = 0; col + 1 < d; ++col) {
    const std::size_t top = d - 2 - col;
    std::size_t e0 = s.trees[top].size();
    for (std::size_t k = 0; k < s.trees[top].size(); ++k) {
      if (!used[top][k]) {
        e0 = k;
        break;
      }
    }
    if (e0 == s.trees[top].size()) throw NumericError("vine peeling found no free edge");
    PeelStep step;
    step.var = s.trees[top][e0].conditioned[0];
    step.edges.assign(top + 1, 0);
    step.edges[top] = e0;
    used[top][e0] = 1;
    std::size_t cur = e0;
    for (std::size_t t = top; t > 0; --t) {
      const auto& e = s.trees[t][cur];
      std::size_t next = s.trees[t - 1].size();
      for (std::size_t p : e.parents) {
        if (s.trees[t - 1][p].has_conditioned(step.var) && !used[t - 1][p]) next = p;
      }
      if (next == s.trees[t - 1].size()) throw NumericError("vine peeling lost the conditioned variable");
      step.edges[t - 1] = next;
      used[t - 1][next] = 1;
      cur = next;
    }
    peeled[step.var] = 1;
    steps.push_back(std::move(step));
  }
  for (std::size_t v = 0; v < d; ++v) {
    if (!peeled[v]) steps.push_back({v, {}});
  }
  return steps;
}

// Lazily evaluated h-transforms U_{var | all(edge) \ var} over all rows.
class ConditionalCache {
 public:
  ConditionalCache(const VineModel& m, std::size_t n) : model_(m), n_(n), raw_(m.structure.d) {}

  std::vector<double>& raw(std::size_t var) { return raw_[var]; }

  void store(std::size_t tree, std::size_t edge, std::size_t var, std::vector<double> values) {
    memo_[{tree, edge, var}] = std::move(values);
  }

  // Input of `edge` in `tree` for its conditioned variable `var`.
  const std::vector<double>& input(std::size_t tree, std::size_t edge, std::size_t var) {
    if (tree == 0) return raw_.at(var);
    const auto& e = model_.structure.trees[tree][edge];
    for (std::size_t p : e.parents) {
      if (model_.structure.trees[tree - 1][p].has_conditioned(var)) return output(tree - 1, p, var);
    }
    throw NumericError("vine edge has no parent carrying the variable");
  }

  const std::vector<double>& output(std::size_t tree, std::size_t edge, std::size_t var) {
    const auto key = std::make_tuple(tree, edge, var);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const auto& e = model_.structure.trees[tree][edge];
    const auto& c = model_.pair_copulas[tree][edge];
    const auto& u = input(tree, edge, e.conditioned[0]);
    const auto& v = input(tree, edge, e.conditioned[1]);
    std::vector<double> out(n_);
    const bool first = e.conditioned[0] == var;
    for (std::size_t r = 0; r < n_; ++r) out[r] = first ? c.hfunc2(u[r], v[r]) : c.hfunc1(u[r], v[r]);
    return memo_[key] = std::move(out);
  }

 private:
  const VineModel& model_;
  std::size_t n_;
  std::vector<std::vector<double>> raw_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> memo_;
};

}  // namespace vine_detail

// n rows from the vine by inverse Rosenblatt transform. Independent uniforms
// are drawn row-major (row r, then column order of the grid) from `seed`.
inline UniformGrid sample_vine(const VineModel& model, std::size_t n, Seed seed) {
  if (n < 1) throw ArgumentError("sample_vine: n must be at least 1");
  const std::size_t d = model.structure.d;
  UniformGrid w(n, d);
  Rng rng(seed);
  for (auto& x : w.data) x = rng.uniform();

  const auto steps = vine_detail::peel(model.structure);
  vine_detail::ConditionalCache cache(model, n);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const std::size_t a = it->var;
    std::vector<double> cur = w.column(a);  // U_{a | everything a is joined to}
    for (std::size_t t = it->edges.size(); t-- > 0;) {
      const std::size_t ei = it->edges[t];
      const auto& e = model.structure.trees[t][ei];
      const auto& c = model.pair_copulas[t][ei];
      const std::size_t other = e.conditioned[0] == a ? e.conditioned[1] : e.conditioned[0];
      const auto& m = cache.input(t, ei, other);
      const bool a_first = e.conditioned[0] == a;
      std::vector<double> below(n);
      for (std::size_t r = 0; r < n; ++r) below[r] = a_first ? c.hinv2(cur[r], m[r]) : c.hinv1(cur[r], m[r]);
      // `cur` is the output of this edge for `a`; `below` is its input.
      cache.store(t, ei, a, std::move(cur));
      cur = std::move(below);
    }
    cache.raw(a) = std::move(cur);
  }
  UniformGrid out(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& col = cache.raw(j);
    for (std::size_t r = 0; r < n; ++r) out(r, j) = col[r];
  }
  return out;
}

// Samples the vine and maps every column through its empirical marginal.
inline DataTable generate_baseline(const VineModel& model, std::size_t n, Seed seed) {
  if (model.marginals.size() != model.structure.d || model.schema.size() != model.structure.d) {
    throw ArgumentError("generate_baseline needs a vine fitted with marginals");
  }
  const UniformGrid u = sample_vine(model, n, seed);
  std::vector<Column> cols(model.structure.d);
  for (std::size_t j = 0; j < model.structure.d; ++j) {
    cols[j].values.resize(n);
    cols[j].missing.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) cols[j].values[r] = model.marginals[j].inverse(u(r, j));
  }
  return DataTable(model.schema, std::move(cols));
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const BivariateCopula& c) {
  return {{"family", to_string(c.family())},
          {"rotation", c.rotation()},
          {"parameter", c.parameter()},
          {"tau", c.fitted_tau()},
          {"loglik", c.loglik()}};
}

inline BivariateCopula bicop_from_json(const nlohmann::json& j) {
  const auto family = copula_family_from_string(j.at("family").get<std::string>());
  BivariateCopula c = family == CopulaFamily::independence
                          ? BivariateCopula::independence()
                          : BivariateCopula(family, j.at("parameter").get<double>(), j.value("rotation", 0));
  c.set_fit_info(j.value("tau", c.tau()), j.value("loglik", 0.0));
  return c;
}

inline nlohmann::json to_json(const VineModel& model) {
  nlohmann::json j;
  j["dimension"] = model.structure.d;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& cs : model.schema) cols.push_back(cs.name);
  j["columns"] = cols;
  nlohmann::json trees = nlohmann::json::array();
  for (std::size_t t = 0; t < model.structure.trees.size(); ++t) {
    nlohmann::json tree = nlohmann::json::array();
    for (std::size_t k = 0; k < model.structure.trees[t].size(); ++k) {
      const auto& e = model.structure.trees[t][k];
      nlohmann::json je = {{"conditioned", {e.conditioned[0], e.conditioned[1]}},
                           {"conditioning", e.conditioning},
                           {"copula", to_json(model.pair_copulas[t][k])}};
      if (t > 0) je["parents"] = {e.parents[0], e.parents[1]};
      tree.push_back(je);
    }
    trees.push_back(tree);
  }
  j["trees"] = trees;
  nlohmann::json margs = nlohmann::json::array();
  for (const auto& m : model.marginals) {
    margs.push_back({{"column", m.column()},
                     {"kind", to_string(m.kind())},
                     {"values", m.sorted_values()},
                     {"cumulative", m.cumulative()}});
  }
  j["marginals"] = margs;
  return j;
}

// Structure and pair copulas; marginals and schema are restored when present.
inline VineModel vine_from_json(const nlohmann::json& j, const Schema& schema = {}) {
  VineModel model;
  model.structure.d = j.at("dimension").get<std::size_t>();
  for (const auto& tree : j.at("trees")) {
    std::vector<VineEdge> edges;
    std::vector<BivariateCopula> cops;
    for (const auto& je : tree) {
      VineEdge e;
      e.conditioned = {je.at("conditioned")[0].get<std::size_t>(), je.at("conditioned")[1].get<std::size_t>()};
      e.conditioning = je.at("conditioning").get<std::vector<std::size_t>>();
      if (je.contains("parents")) e.parents = {je["parents"][0].get<std::size_t>(), je["parents"][1].get<std::size_t>()};
      edges.push_back(e);
      cops.push_back(bicop_from_json(je.at("copula")));
    }
    model.structure.trees.push_back(std::move(edges));
    model.pair_copulas.push_back(std::move(cops));
  }
  model.structure.validate();
  if (j.contains("marginals")) {
    for (const auto& jm : j["marginals"]) {
      const auto kind = jm.at("kind").get<std::string>() == "discrete" ? ColumnKind::discrete : ColumnKind::continuous;
      model.marginals.push_back(EmpiricalMarginal::from_parts(jm.at("column").get<std::string>(), kind,
                                                              jm.at("values").get<std::vector<double>>(),
                                                              jm.at("cumulative").get<std::vector<double>>()));
    }
  }
  model.schema = schema;
  return model;
}

}  // namespace rctsynth
