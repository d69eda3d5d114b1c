#pragma once

#include <vector>

namespace tagseg {

/// Directed capacitated graph for max-flow. Capacities must be finite and
/// nonnegative.
class FlowNetwork {
 public:
  explicit FlowNetwork(int node_count);

  int node_count() const { return static_cast<int>(head_.size()); }
  void add_edge(int from, int to, double capacity);

 private:
  struct Edge {
    int to;
    double capacity;
    int reverse;  // index of the paired reverse edge in edges_[to]
  };
  std::vector<std::vector<Edge>> head_;

  friend struct MaxFlowSolver;
};

struct MaxFlowResult {
  double flow = 0;
  std::vector<char> source_side;  // min-cut partition, true for the source component
};

/// Exact max flow by shortest augmenting paths. The returned partition is the
/// set of nodes reachable from the source in the residual graph, so its cut
/// capacity equals the flow value.
MaxFlowResult max_flow_min_cut(FlowNetwork network, int source, int sink);

}  // namespace tagseg
