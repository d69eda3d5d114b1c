#include "tagseg/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace tagseg {

namespace {
constexpr double kResidualEps = 1e-12;
}

FlowNetwork::FlowNetwork(int node_count) {
  if (node_count < 0) throw std::invalid_argument("node count must be nonnegative");
  head_.resize(static_cast<std::size_t>(node_count));
}

void FlowNetwork::add_edge(int from, int to, double capacity) {
  if (from < 0 || from >= node_count() || to < 0 || to >= node_count())
    throw std::invalid_argument("edge endpoint out of range");
  if (!(capacity >= 0) || !std::isfinite(capacity))
    throw std::invalid_argument("capacity must be finite and nonnegative");
  auto& fwd = head_[static_cast<std::size_t>(from)];
  auto& bwd = head_[static_cast<std::size_t>(to)];
  fwd.push_back({to, capacity, static_cast<int>(bwd.size())});
  bwd.push_back({from, 0.0, static_cast<int>(fwd.size()) - 1});
}

struct MaxFlowSolver {
  static MaxFlowResult run(FlowNetwork& network, int source, int sink) {
    const int n = network.node_count();
    if (source < 0 || source >= n || sink < 0 || sink >= n || source == sink)
      throw std::invalid_argument("bad source/sink");
    auto& edges = network.head_;

    MaxFlowResult result;
    std::vector<int> parent_node(static_cast<std::size_t>(n));
    std::vector<int> parent_edge(static_cast<std::size_t>(n));
    std::deque<int> queue;

    for (;;) {
      std::fill(parent_node.begin(), parent_node.end(), -1);
      parent_node[static_cast<std::size_t>(source)] = source;
      queue.assign(1, source);
      while (!queue.empty() && parent_node[static_cast<std::size_t>(sink)] < 0) {
        const int u = queue.front();
        queue.pop_front();
        const auto& out = edges[static_cast<std::size_t>(u)];
        for (std::size_t e = 0; e < out.size(); ++e) {
          if (out[e].capacity <= kResidualEps) continue;
          const int v = out[e].to;
          if (parent_node[static_cast<std::size_t>(v)] >= 0) continue;
          parent_node[static_cast<std::size_t>(v)] = u;
          parent_edge[static_cast<std::size_t>(v)] = static_cast<int>(e);
          queue.push_back(v);
        }
      }
      if (parent_node[static_cast<std::size_t>(sink)] < 0) break;

      double bottleneck = std::numeric_limits<double>::max();
      for (int v = sink; v != source; v = parent_node[static_cast<std::size_t>(v)]) {
        const int u = parent_node[static_cast<std::size_t>(v)];
        bottleneck = std::min(
            bottleneck,
            edges[static_cast<std::size_t>(u)][static_cast<std::size_t>(parent_edge[static_cast<std::size_t>(v)])]
                .capacity);
      }
      for (int v = sink; v != source; v = parent_node[static_cast<std::size_t>(v)]) {
        const int u = parent_node[static_cast<std::size_t>(v)];
        auto& fwd = edges[static_cast<std::size_t>(u)][static_cast<std::size_t>(parent_edge[static_cast<std::size_t>(v)])];
        fwd.capacity -= bottleneck;
        edges[static_cast<std::size_t>(v)][static_cast<std::size_t>(fwd.reverse)].capacity += bottleneck;
      }
      result.flow += bottleneck;
    }

    result.source_side.assign(static_cast<std::size_t>(n), 0);
    queue.assign(1, source);
    result.source_side[static_cast<std::size_t>(source)] = 1;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (const auto& edge : edges[static_cast<std::size_t>(u)]) {
        if (edge.capacity <= kResidualEps) continue;
        if (result.source_side[static_cast<std::size_t>(edge.to)]) continue;
        result.source_side[static_cast<std::size_t>(edge.to)] = 1;
        queue.push_back(edge.to);
      }
    }
    return result;
  }
};

MaxFlowResult max_flow_min_cut(FlowNetwork network, int source, int sink) {
  return MaxFlowSolver::run(network, source, sink);
}

}  // namespace tagseg
