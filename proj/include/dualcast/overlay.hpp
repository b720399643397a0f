#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dualcast/types.hpp"

namespace dualcast {

// Directed graph over server ids. Successor lists are kept sorted ascending.
class Digraph {
 public:
  Digraph() = default;
  explicit Digraph(const std::vector<ServerId>& vertices);

  bool add_vertex(ServerId v);
  bool remove_vertex(ServerId v);
  bool has_vertex(ServerId v) const { return adj_.count(v) != 0; }

  // Returns false if the edge already existed. Throws InvalidSpec on self-loops
  // and on endpoints that are not vertices.
  bool add_edge(ServerId u, ServerId v);
  bool remove_edge(ServerId u, ServerId v);
  bool has_edge(ServerId u, ServerId v) const;

  std::vector<ServerId> vertices() const;
  const std::vector<ServerId>& successors(ServerId v) const;
  std::vector<ServerId> predecessors(ServerId v) const;
  std::vector<std::pair<ServerId, ServerId>> edges() const;

  std::size_t size() const { return adj_.size(); }
  std::size_t edge_count() const;
  bool empty() const { return adj_.empty(); }
  void clear() { adj_.clear(); }

  bool operator==(const Digraph& o) const { return adj_ == o.adj_; }

 private:
  std::map<ServerId, std::vector<ServerId>> adj_;
};

enum class Family { ring, binomial, circulant, edge_list };

struct DigraphSpec {
  Family family = Family::circulant;
  int n = 0;
  int d = 0;  // circulant degree
  std::vector<std::pair<ServerId, ServerId>> edges;  // edge_list only
};

std::string family_name(Family f);

// Builds the family over servers 0..n-1.
Digraph build_overlay(const DigraphSpec& spec);
// Builds the family over an arbitrary sorted member list (members[i] plays the role of i).
Digraph build_overlay_over(const DigraphSpec& spec, const std::vector<ServerId>& members);

int vertex_connectivity(const Digraph& g);
// Maximum number of internally vertex-disjoint s->t paths (s->t must not be an edge).
int local_vertex_connectivity(const Digraph& g, ServerId s, ServerId t);
bool strongly_connected(const Digraph& g);
// Vertices reachable from root (including root).
std::set<ServerId> reachable_from(const Digraph& g, ServerId root);

Digraph transpose(const Digraph& g);
// Plain deletion of vertices and their incident edges.
Digraph remove_servers(const Digraph& g, const std::set<ServerId>& removed);

Digraph read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const Digraph& g);

// The unreliable overlay: a digraph plus the per-source forwarding rule. Ring and
// binomial families forward along per-source paths/trees so each message crosses
// exactly members-1 channels; other families flood to all successors except the source.
class Dissemination {
 public:
  Dissemination() = default;
  explicit Dissemination(const DigraphSpec& spec);
  Dissemination(const DigraphSpec& spec, std::vector<ServerId> members);

  const Digraph& digraph() const { return g_; }
  const std::vector<ServerId>& members() const { return members_; }
  const DigraphSpec& spec() const { return spec_; }
  bool contains(ServerId v) const;

  std::vector<ServerId> forward_targets(ServerId source, ServerId at) const;

  // Rebuilt from the family over the survivors (edge-list family: plain deletion).
  Dissemination without(const std::set<ServerId>& removed) const;

 private:
  int index_of(ServerId v) const;

  DigraphSpec spec_;
  std::vector<ServerId> members_;
  Digraph g_;
};

}  // namespace dualcast
