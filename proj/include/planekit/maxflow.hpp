#pragma once

// Dinic max-flow on real capacities. Used for the binary subproblems of
// alpha-expansion.

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace planekit {

class MaxFlow {
public:
  explicit MaxFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

  int add_node() {
    adj_.emplace_back();
    return static_cast<int>(adj_.size()) - 1;
  }
  int size() const { return static_cast<int>(adj_.size()); }

  /// Directed edge a->b with capacity `cap` and reverse capacity `rev_cap`.
  void add_edge(int a, int b, double cap, double rev_cap = 0.0) {
    adj_[a].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({b, cap});
    adj_[b].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({a, rev_cap});
  }

  double solve(int source, int sink) {
    double flow = 0.0;
    level_.assign(adj_.size(), -1);
    cursor_.assign(adj_.size(), 0);
    while (bfs(source, sink)) {
      std::fill(cursor_.begin(), cursor_.end(), 0);
      while (true) {
        const double f = dfs(source, sink, std::numeric_limits<double>::infinity());
        if (f <= kEps) break;
        flow += f;
      }
    }
    return flow;
  }

  /// After solve(): true when `node` is on the source side of the minimum cut.
  bool source_side(int node) const { return level_[node] >= 0; }

private:
  static constexpr double kEps = 1e-12;

  struct Edge {
    int to;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int a = q.front();
      q.pop();
      for (int e : adj_[a]) {
        const Edge& ed = edges_[e];
        if (ed.cap > kEps && level_[ed.to] < 0) {
          level_[ed.to] = level_[a] + 1;
          q.push(ed.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  // Iterative blocking-flow search (augmenting one path per call).
  double dfs(int s, int t, double limit) {
    std::vector<int> path_edges;
    std::vector<int> stack{s};
    while (!stack.empty()) {
      const int a = stack.back();
      if (a == t) {
        double f = limit;
        for (int e : path_edges) f = std::min(f, edges_[e].cap);
        for (int e : path_edges) {
          edges_[e].cap -= f;
          edges_[e ^ 1].cap += f;
        }
        return f;
      }
      bool advanced = false;
      auto& cur = cursor_[a];
      while (cur < adj_[a].size()) {
        const int e = adj_[a][cur];
        const Edge& ed = edges_[e];
        if (ed.cap > kEps && level_[ed.to] == level_[a] + 1) {
          path_edges.push_back(e);
          stack.push_back(ed.to);
          advanced = true;
          break;
        }
        ++cur;
      }
      if (!advanced) {
        level_[a] = -2;  // dead end for this phase
        stack.pop_back();
        if (!path_edges.empty()) {
          path_edges.pop_back();
          ++cursor_[stack.back()];
        }
      }
    }
    return 0.0;
  }

  std::vector<std::vector<int>> adj_;
  std::vector<Edge> edges_;
  std::vector<int> level_;
  std::vector<std::size_t> cursor_;
};

}  // namespace planekit
