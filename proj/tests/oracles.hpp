#pragma once

// Brute-force references used by the tests. They only use the edge list of a
// digraph, never the library's graph algorithms.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "dualcast/overlay.hpp"

namespace oracle {

using Adj = std::map<int, std::set<int>>;

inline Adj adjacency(const dualcast::Digraph& g) {
  Adj a;
  for (int v : g.vertices()) a[v];
  for (auto [u, v] : g.edges()) a[u].insert(v);
  return a;
}

inline std::set<int> reach(const Adj& a, int root, const std::set<int>& removed) {
  std::set<int> seen{root};
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : a.at(u))
      if (!removed.count(v) && seen.insert(v).second) stack.push_back(v);
  }
  return seen;
}

inline bool strongly_connected_without(const Adj& a, const std::set<int>& removed) {
  std::vector<int> alive;
  for (const auto& [v, _] : a)
    if (!removed.count(v)) alive.push_back(v);
  if (alive.size() <= 1) return true;
  for (int v : alive)
    if (reach(a, v, removed).size() != alive.size()) return false;
  return true;
}

// Smallest vertex set whose removal leaves a digraph that is not strongly
// connected, by enumerating subsets in increasing size; n-1 for complete digraphs.
inline int kappa_by_enumeration(const dualcast::Digraph& g) {
  const Adj a = adjacency(g);
  std::vector<int> vs;
  for (const auto& [v, _] : a) vs.push_back(v);
  const int n = static_cast<int>(vs.size());
  for (int k = 0; k < n - 1; ++k) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
      std::set<int> removed;
      for (int i = 0; i < n; ++i)
        if (pick[i]) removed.insert(vs[i]);
      if (!strongly_connected_without(a, removed)) return k;
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return n - 1;
}

inline dualcast::Digraph random_digraph(std::mt19937_64& rng, int n, double p) {
  std::vector<int> vs(n);
  for (int i = 0; i < n; ++i) vs[i] = i;
  dualcast::Digraph g(vs);
  std::bernoulli_distribution coin(p);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (u != v && coin(rng)) g.add_edge(u, v);
  return g;
}

}  // namespace oracle
