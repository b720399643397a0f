#include <deque>

#include "dualcast/protocol.hpp"

namespace dualcast {

namespace {

bool is_target(const NotificationSet& f, ServerId p) {
  auto it = f.lower_bound({p, std::numeric_limits<ServerId>::min()});
  return it != f.end() && it->first == p;
}

void prune_unreachable(TrackingDigraph& t) {
  const auto keep = reachable_from(t.g, t.root);
  for (ServerId v : t.g.vertices())
    if (!keep.count(v)) t.g.remove_vertex(v);
}

}  // namespace

void update_tracking_digraph_in_place(TrackingDigraph& t, const NotificationSet& f_old,
                                      const std::vector<Notification>& f_new, const Digraph& gr,
                                      const TrackingObserver& observer) {
  NotificationSet f = f_old;
  for (const Notification& fn : f_new) {
    const auto [pj, pk] = fn;
    f.insert(fn);
    if (!t.g.has_vertex(pj)) continue;
    if (t.g.successors(pj).empty()) {
      // pj may have relayed the message to anyone but pk before failing.
      std::deque<std::pair<ServerId, ServerId>> q;
      for (ServerId p : gr.successors(pj))
        if (p != pk) q.emplace_back(pj, p);
      while (!q.empty()) {
        const auto [pp, p] = q.front();
        q.pop_front();
        if (!t.g.has_vertex(p)) {
          t.g.add_vertex(p);
          if (is_target(f, p))
            for (ServerId ps : gr.successors(p))
              if (!f.count({p, ps})) q.emplace_back(p, ps);
        }
        t.g.add_edge(pp, p);
      }
    } else if (t.g.has_edge(pj, pk)) {
      // pk did not get the message from pj.
      t.g.remove_edge(pj, pk);
      prune_unreachable(t);
    }
    if (observer) observer(fn, t);
    bool all_failed = true;
    for (ServerId v : t.g.vertices())
      if (!is_target(f, v)) {
        all_failed = false;
        break;
      }
    if (all_failed && !t.g.empty()) {
      t.g.clear();
      if (observer) observer(fn, t);
    }
  }
}

TrackingDigraph update_tracking_digraph(TrackingDigraph g, const NotificationSet& f_old,
                                        const std::vector<Notification>& f_new, const Digraph& gr,
                                        const TrackingObserver& observer) {
  update_tracking_digraph_in_place(g, f_old, f_new, gr, observer);
  return g;
}

}  // namespace dualcast
