#include "dualcast/overlay.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dualcast {

namespace {
const std::vector<ServerId> kNoSuccessors;
}

Digraph::Digraph(const std::vector<ServerId>& vertices) {
  for (ServerId v : vertices) adj_.emplace(v, std::vector<ServerId>{});
}

bool Digraph::add_vertex(ServerId v) { return adj_.emplace(v, std::vector<ServerId>{}).second; }

bool Digraph::remove_vertex(ServerId v) {
  if (adj_.erase(v) == 0) return false;
  for (auto& [u, succ] : adj_) {
    auto it = std::lower_bound(succ.begin(), succ.end(), v);
    if (it != succ.end() && *it == v) succ.erase(it);
  }
  return true;
}

bool Digraph::add_edge(ServerId u, ServerId v) {
  if (u == v) throw InvalidSpec("self-loop on vertex " + std::to_string(u));
  auto it = adj_.find(u);
  if (it == adj_.end() || !has_vertex(v))
    throw InvalidSpec("edge endpoint is not a vertex: " + std::to_string(u) + "->" + std::to_string(v));
  auto& succ = it->second;
  auto pos = std::lower_bound(succ.begin(), succ.end(), v);
  if (pos != succ.end() && *pos == v) return false;
  succ.insert(pos, v);
  return true;
}

bool Digraph::remove_edge(ServerId u, ServerId v) {
  auto it = adj_.find(u);
  if (it == adj_.end()) return false;
  auto& succ = it->second;
  auto pos = std::lower_bound(succ.begin(), succ.end(), v);
  if (pos == succ.end() || *pos != v) return false;
  succ.erase(pos);
  return true;
}

bool Digraph::has_edge(ServerId u, ServerId v) const {
  auto it = adj_.find(u);
  if (it == adj_.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), v);
}

std::vector<ServerId> Digraph::vertices() const {
  std::vector<ServerId> out;
  out.reserve(adj_.size());
  for (const auto& [v, _] : adj_) out.push_back(v);
  return out;
}

const std::vector<ServerId>& Digraph::successors(ServerId v) const {
  auto it = adj_.find(v);
  return it == adj_.end() ? kNoSuccessors : it->second;
}

std::vector<ServerId> Digraph::predecessors(ServerId v) const {
  std::vector<ServerId> out;
  for (const auto& [u, succ] : adj_)
    if (std::binary_search(succ.begin(), succ.end(), v)) out.push_back(u);
  return out;
}

std::vector<std::pair<ServerId, ServerId>> Digraph::edges() const {
  std::vector<std::pair<ServerId, ServerId>> out;
  for (const auto& [u, succ] : adj_)
    for (ServerId v : succ) out.emplace_back(u, v);
  return out;
}

std::size_t Digraph::edge_count() const {
  std::size_t c = 0;
  for (const auto& [_, succ] : adj_) c += succ.size();
  return c;
}

std::string family_name(Family f) {
  switch (f) {
    case Family::ring: return "ring";
    case Family::binomial: return "binomial";
    case Family::circulant: return "circulant";
    case Family::edge_list: return "edges";
  }
  return "?";
}

static void check_spec(const DigraphSpec& spec, std::size_t k) {
  if (spec.n < 2) throw InvalidSpec("overlay needs n >= 2, got " + std::to_string(spec.n));
  if (spec.family == Family::circulant && (spec.d < 1 || static_cast<std::size_t>(spec.d) >= k))
    throw InvalidSpec("circulant degree must satisfy 1 <= d < n, got d=" + std::to_string(spec.d));
}

Digraph build_overlay(const DigraphSpec& spec) {
  if (spec.n < 2) throw InvalidSpec("overlay needs n >= 2, got " + std::to_string(spec.n));
  std::vector<ServerId> members(spec.n);
  for (int i = 0; i < spec.n; ++i) members[i] = i;
  return build_overlay_over(spec, members);
}

Digraph build_overlay_over(const DigraphSpec& spec, const std::vector<ServerId>& members) {
  const std::size_t k = members.size();
  check_spec(spec, spec.family == Family::edge_list ? static_cast<std::size_t>(spec.n) : k);
  Digraph g(members);
  if (k < 2) return g;
  switch (spec.family) {
    case Family::ring:
      for (std::size_t i = 0; i < k; ++i) g.add_edge(members[i], members[(i + 1) % k]);
      break;
    case Family::binomial:
      // Union of all rotated binomial trees: jumps of every power of two below k.
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t jump = 1; jump < k; jump <<= 1) g.add_edge(members[i], members[(i + jump) % k]);
      break;
    case Family::circulant:
      for (std::size_t i = 0; i < k; ++i)
        for (int j = 1; j <= spec.d; ++j) g.add_edge(members[i], members[(i + j) % k]);
      break;
    case Family::edge_list:
      for (const auto& [u, v] : spec.edges) {
        if (u < 0 || v < 0 || u >= spec.n || v >= spec.n)
          throw InvalidSpec("edge endpoint outside 0..n-1: " + std::to_string(u) + " " + std::to_string(v));
        if (g.has_vertex(u) && g.has_vertex(v)) g.add_edge(u, v);
      }
      break;
  }
  return g;
}

namespace {

// Unit-capacity max flow on the split-vertex network, with early exit at `limit`.
class SplitFlow {
 public:
  SplitFlow(const Digraph& g) : verts_(g.vertices()) {
    const int n = static_cast<int>(verts_.size());
    for (int i = 0; i < n; ++i) index_[verts_[i]] = i;
    head_.assign(2 * n, -1);
    for (int i = 0; i < n; ++i) add_arc(2 * i, 2 * i + 1, 1);  // in -> out
    for (const auto& [u, v] : g.edges()) add_arc(2 * index_[u] + 1, 2 * index_[v], n);
  }

  int max_flow(ServerId s, ServerId t, int limit) {
    for (auto& a : arcs_) a.flow = 0;
    const int src = 2 * index_.at(s) + 1, dst = 2 * index_.at(t);
    int flow = 0;
    std::vector<int> parent_arc(head_.size());
    while (flow < limit) {
      std::fill(parent_arc.begin(), parent_arc.end(), -1);
      std::deque<int> q{src};
      parent_arc[src] = -2;
      while (!q.empty() && parent_arc[dst] == -1) {
        int x = q.front();
        q.pop_front();
        for (int a = head_[x]; a != -1; a = arcs_[a].next) {
          const Arc& arc = arcs_[a];
          if (arc.cap - arc.flow > 0 && parent_arc[arc.to] == -1) {
            parent_arc[arc.to] = a;
            q.push_back(arc.to);
          }
        }
      }
      if (parent_arc[dst] == -1) break;
      for (int x = dst; x != src;) {
        int a = parent_arc[x];
        arcs_[a].flow += 1;
        arcs_[a ^ 1].flow -= 1;
        x = arcs_[a ^ 1].to;
      }
      ++flow;
    }
    return flow;
  }

 private:
  struct Arc {
    int to, cap, flow, next;
  };
  void add_arc(int u, int v, int cap) {
    arcs_.push_back({v, cap, 0, head_[u]});
    head_[u] = static_cast<int>(arcs_.size()) - 1;
    arcs_.push_back({u, 0, 0, head_[v]});
    head_[v] = static_cast<int>(arcs_.size()) - 1;
  }

  std::vector<ServerId> verts_;
  std::map<ServerId, int> index_;
  std::vector<int> head_;
  std::vector<Arc> arcs_;
};

}  // namespace

int local_vertex_connectivity(const Digraph& g, ServerId s, ServerId t) {
  if (g.has_edge(s, t)) throw InvalidSpec("local connectivity undefined for adjacent pair");
  SplitFlow flow(g);
  return flow.max_flow(s, t, std::numeric_limits<int>::max());
}

int vertex_connectivity(const Digraph& g) {
  const auto verts = g.vertices();
  const int n = static_cast<int>(verts.size());
  if (n <= 1) return 0;
  SplitFlow flow(g);
  int best = n - 1;
  // Some vertex among the first best+1 lies outside a minimum separator, and that
  // vertex is separated from some other vertex in one direction.
  for (int i = 0; i < n && i <= best; ++i) {
    const ServerId v = verts[i];
    for (ServerId w : verts) {
      if (w == v) continue;
      if (!g.has_edge(v, w)) best = std::min(best, flow.max_flow(v, w, best));
      if (!g.has_edge(w, v)) best = std::min(best, flow.max_flow(w, v, best));
    }
  }
  return best;
}

std::set<ServerId> reachable_from(const Digraph& g, ServerId root) {
  std::set<ServerId> seen;
  if (!g.has_vertex(root)) return seen;
  std::deque<ServerId> q{root};
  seen.insert(root);
  while (!q.empty()) {
    ServerId x = q.front();
    q.pop_front();
    for (ServerId y : g.successors(x))
      if (seen.insert(y).second) q.push_back(y);
  }
  return seen;
}

bool strongly_connected(const Digraph& g) {
  if (g.size() <= 1) return true;
  const ServerId root = g.vertices().front();
  return reachable_from(g, root).size() == g.size() && reachable_from(transpose(g), root).size() == g.size();
}

Digraph transpose(const Digraph& g) {
  Digraph t(g.vertices());
  for (const auto& [u, v] : g.edges()) t.add_edge(v, u);
  return t;
}

Digraph remove_servers(const Digraph& g, const std::set<ServerId>& removed) {
  Digraph out;
  for (ServerId v : g.vertices())
    if (!removed.count(v)) out.add_vertex(v);
  for (const auto& [u, v] : g.edges())
    if (!removed.count(u) && !removed.count(v)) out.add_edge(u, v);
  return out;
}

Digraph read_edge_list(std::istream& in) {
  Digraph g;
  std::string line;
  int lineno = 0;
  std::vector<std::pair<ServerId, ServerId>> edges;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long u, v;
    if (!(ss >> u)) continue;
    std::string rest;
    if (!(ss >> v) || (ss >> rest))
      throw InvalidSpec("edge list line " + std::to_string(lineno) + ": expected 'u v'");
    if (u < 0 || v < 0) throw InvalidSpec("edge list line " + std::to_string(lineno) + ": negative id");
    g.add_vertex(static_cast<ServerId>(u));
    g.add_vertex(static_cast<ServerId>(v));
    edges.emplace_back(u, v);
  }
  for (const auto& [u, v] : edges) g.add_edge(u, v);
  return g;
}

void write_edge_list(std::ostream& out, const Digraph& g) {
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Dissemination::Dissemination(const DigraphSpec& spec) : spec_(spec) {
  if (spec.n < 2) throw InvalidSpec("overlay needs n >= 2, got " + std::to_string(spec.n));
  members_.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) members_[i] = i;
  g_ = build_overlay_over(spec_, members_);
}

Dissemination::Dissemination(const DigraphSpec& spec, std::vector<ServerId> members)
    : spec_(spec), members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  if (spec_.family == Family::edge_list) {
    g_ = remove_servers(build_overlay(spec_), {});
    std::set<ServerId> drop;
    for (ServerId v : g_.vertices())
      if (!std::binary_search(members_.begin(), members_.end(), v)) drop.insert(v);
    g_ = remove_servers(g_, drop);
  } else if (members_.size() >= 2) {
    DigraphSpec s = spec_;
    if (s.family == Family::circulant) s.d = std::min<int>(s.d, static_cast<int>(members_.size()) - 1);
    g_ = build_overlay_over(s, members_);
  } else {
    g_ = Digraph(members_);
  }
}

bool Dissemination::contains(ServerId v) const {
  return std::binary_search(members_.begin(), members_.end(), v);
}

int Dissemination::index_of(ServerId v) const {
  auto it = std::lower_bound(members_.begin(), members_.end(), v);
  if (it == members_.end() || *it != v) return -1;
  return static_cast<int>(it - members_.begin());
}

std::vector<ServerId> Dissemination::forward_targets(ServerId source, ServerId at) const {
  std::vector<ServerId> out;
  const int k = static_cast<int>(members_.size());
  const int s = index_of(source), a = index_of(at);
  if (s < 0 || a < 0 || k < 2) return out;
  switch (spec_.family) {
    case Family::ring: {
      int next = (a + 1) % k;
      if (next != s) out.push_back(members_[next]);
      break;
    }
    case Family::binomial: {
      const int rel = (a - s + k) % k;
      for (int jump = 1; jump < k; jump <<= 1)
        if (jump > rel && rel + jump < k) out.push_back(members_[(s + rel + jump) % k]);
      std::sort(out.begin(), out.end());
      break;
    }
    default:
      for (ServerId v : g_.successors(at))
        if (v != source) out.push_back(v);
  }
  return out;
}

Dissemination Dissemination::without(const std::set<ServerId>& removed) const {
  std::vector<ServerId> survivors;
  for (ServerId v : members_)
    if (!removed.count(v)) survivors.push_back(v);
  return Dissemination(spec_, std::move(survivors));
}

}  // namespace dualcast
