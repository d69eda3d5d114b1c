#include "tagseg/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "tagseg/errors.hpp"
#include "tagseg/maxflow.hpp"

namespace tagseg {

namespace {

constexpr double kImprovementEps = 1e-12;

std::map<int, int> label_columns(const std::vector<int>& candidate_labels) {
  std::map<int, int> columns;
  for (std::size_t c = 0; c < candidate_labels.size(); ++c)
    columns[candidate_labels[c]] = static_cast<int>(c);
  return columns;
}

int column_of(const std::map<int, int>& columns, int label) {
  const auto it = columns.find(label);
  if (it == columns.end())
    throw std::invalid_argument("label " + std::to_string(label) + " is not a candidate");
  return it->second;
}

}  // namespace

PropagationGraph build_graph(const Eigen::MatrixXd& target_features,
                             const AdjacencyList& target_adjacency,
                             std::vector<ReferenceSuperpixels> references, int q) {
  if (references.empty()) throw std::invalid_argument("references must be nonempty");
  if (q < 1) throw std::invalid_argument("q must be positive");
  const Eigen::Index d = target_features.rows();
  const int n_t = static_cast<int>(target_features.cols());

  PropagationGraph graph;
  graph.target_features = target_features;
  graph.references = std::move(references);

  std::set<int> labels;
  for (const auto& ref : graph.references) {
    if (ref.features.cols() == 0)
      throw DataError("reference with zero segments (database index " +
                      std::to_string(ref.database_index) + ")");
    if (ref.features.rows() != d)
      throw std::invalid_argument("reference feature dimension mismatch");
    labels.insert(ref.tags.begin(), ref.tags.end());
  }
  graph.candidate_labels.assign(labels.begin(), labels.end());

  graph.inner_edges.reserve(target_adjacency.size());
  for (const auto& [i, j] : target_adjacency)
    graph.inner_edges.push_back(
        {i, j, (target_features.col(i) - target_features.col(j)).norm()});

  graph.outer_edges.assign(static_cast<std::size_t>(n_t), {});
  std::vector<std::pair<double, int>> scored;
  for (int i = 0; i < n_t; ++i) {
    auto& per_reference = graph.outer_edges[static_cast<std::size_t>(i)];
    per_reference.resize(graph.references.size());
    for (std::size_t r = 0; r < graph.references.size(); ++r) {
      const Eigen::MatrixXd& feats = graph.references[r].features;
      const int n_ref = static_cast<int>(feats.cols());
      scored.clear();
      scored.reserve(static_cast<std::size_t>(n_ref));
      for (int s = 0; s < n_ref; ++s)
        scored.emplace_back((feats.col(s) - target_features.col(i)).norm(), s);
      const int keep = std::min(q, n_ref);
      std::partial_sort(scored.begin(), scored.begin() + keep, scored.end());
      auto& edges = per_reference[r];
      edges.reserve(static_cast<std::size_t>(keep));
      for (int e = 0; e < keep; ++e) edges.push_back({scored[static_cast<std::size_t>(e)].second,
                                                      scored[static_cast<std::size_t>(e)].first});
    }
  }
  return graph;
}

double density(const PropagationGraph& graph, int vertex, int reference_index) {
  const auto& edges =
      graph.outer_edges[static_cast<std::size_t>(vertex)][static_cast<std::size_t>(reference_index)];
  if (edges.empty()) throw std::invalid_argument("no outer edges for this vertex/reference");
  double sum = 0;
  for (const auto& edge : edges) sum += edge.distance;
  return sum / static_cast<double>(edges.size());
}

UnaryTable unary_table(const PropagationGraph& graph, const Eigen::VectorXd& alpha_masked,
                       UnaryMode mode, double kappa) {
  if (graph.candidate_labels.empty()) throw DataError("empty candidate label set");
  const int n_t = graph.n_vertices();
  const int n_refs = graph.n_references();
  const int n_labels = static_cast<int>(graph.candidate_labels.size());

  Eigen::MatrixXd densities(n_t, n_refs);
  for (int i = 0; i < n_t; ++i)
    for (int r = 0; r < n_refs; ++r) densities(i, r) = density(graph, i, r);

  // Which candidate labels each reference carries.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> carries(n_refs, n_labels);
  carries.setConstant(false);
  const auto columns = label_columns(graph.candidate_labels);
  for (int r = 0; r < n_refs; ++r)
    for (const int tag : graph.references[static_cast<std::size_t>(r)].tags) {
      const auto it = columns.find(tag);
      if (it != columns.end()) carries(r, it->second) = true;
    }

  double tau = 0;
  if (mode == UnaryMode::kAffinity) {
    std::vector<double> all(densities.data(), densities.data() + densities.size());
    auto mid = all.begin() + all.size() / 2;
    std::nth_element(all.begin(), mid, all.end());
    tau = std::max(*mid, 1e-12);
  }

  UnaryTable table;
  table.cost = Eigen::MatrixXd::Zero(n_t, n_labels);
  Eigen::VectorXd support = Eigen::VectorXd::Zero(n_labels);  // weight carrying each label
  for (int r = 0; r < n_refs; ++r) {
    const int db = graph.references[static_cast<std::size_t>(r)].database_index;
    if (db < 0 || db >= alpha_masked.size())
      throw std::invalid_argument("reference database index out of range");
    const double weight = alpha_masked(db);
    if (weight == 0) continue;
    for (int l = 0; l < n_labels; ++l)
      if (carries(r, l)) support(l) += weight;
    for (int i = 0; i < n_t; ++i) {
      const double rho = densities(i, r);
      const double bounded = 1.0 - std::exp(-rho * rho / (2.0 * tau * tau));
      for (int l = 0; l < n_labels; ++l) {
        if (!carries(r, l)) continue;
        table.cost(i, l) += weight * (mode == UnaryMode::kLiteral ? rho : bounded);
      }
    }
  }
  if (mode == UnaryMode::kAffinity) {
    // Weighted mean dissimilarity over the references carrying each label, so
    // heavily-shared labels gain no head start from sheer support count.
    // Labels no selected reference carries cost kappa, the supremum of the
    // carried-label cost.
    for (int l = 0; l < n_labels; ++l) {
      if (support(l) > 0)
        table.cost.col(l) /= support(l);
      else
        table.cost.col(l).setConstant(kappa);
    }
  }
  return table;
}

double pairwise(const Eigen::VectorXd& feature_i, const Eigen::VectorXd& feature_j, int label_i,
                int label_j) {
  return label_i == label_j ? 0.0 : (feature_i - feature_j).norm();
}

LabelSet LabelAssignment::unique_labels() const {
  std::set<int> unique(labels.begin(), labels.end());
  return {unique.begin(), unique.end()};
}

double total_energy(const LabelAssignment& assignment, const PropagationGraph& graph,
                    const UnaryTable& unary) {
  if (static_cast<int>(assignment.labels.size()) != graph.n_vertices())
    throw std::invalid_argument("assignment does not cover all vertices");
  const auto columns = label_columns(graph.candidate_labels);
  double energy = 0;
  for (int i = 0; i < graph.n_vertices(); ++i)
    energy += unary.cost(i, column_of(columns, assignment.labels[static_cast<std::size_t>(i)]));
  for (const auto& edge : graph.inner_edges)
    if (assignment.labels[static_cast<std::size_t>(edge.i)] !=
        assignment.labels[static_cast<std::size_t>(edge.j)])
      energy += edge.weight;
  return energy;
}

LabelAssignment argmin_assignment(const PropagationGraph& graph, const UnaryTable& unary) {
  LabelAssignment assignment;
  assignment.labels.resize(static_cast<std::size_t>(graph.n_vertices()));
  for (int i = 0; i < graph.n_vertices(); ++i) {
    int best = 0;
    for (int l = 1; l < unary.cost.cols(); ++l)
      if (unary.cost(i, l) < unary.cost(i, best)) best = l;
    assignment.labels[static_cast<std::size_t>(i)] = graph.candidate_labels[static_cast<std::size_t>(best)];
  }
  return assignment;
}

LabelAssignment alpha_beta_swap(const PropagationGraph& graph, const UnaryTable& unary,
                                LabelAssignment initial) {
  if (graph.candidate_labels.empty()) throw DataError("empty candidate label set");
  if (static_cast<int>(initial.labels.size()) != graph.n_vertices())
    throw std::invalid_argument("initial assignment does not cover all vertices");
  const auto columns = label_columns(graph.candidate_labels);
  const int n_t = graph.n_vertices();

  // Neighbor lists from the inner edges.
  std::vector<std::vector<std::pair<int, double>>> neighbors(static_cast<std::size_t>(n_t));
  for (const auto& edge : graph.inner_edges) {
    neighbors[static_cast<std::size_t>(edge.i)].emplace_back(edge.j, edge.weight);
    neighbors[static_cast<std::size_t>(edge.j)].emplace_back(edge.i, edge.weight);
  }

  LabelAssignment current = std::move(initial);
  double energy = total_energy(current, graph, unary);

  const int n_labels = static_cast<int>(graph.candidate_labels.size());
  std::vector<int> members;
  std::vector<int> node_of(static_cast<std::size_t>(n_t), -1);
  bool improved = true;
  for (int sweep = 0; improved && sweep < 1000; ++sweep) {
    improved = false;
    for (int la = 0; la < n_labels; ++la) {
      for (int lb = la + 1; lb < n_labels; ++lb) {
        const int label_a = graph.candidate_labels[static_cast<std::size_t>(la)];
        const int label_b = graph.candidate_labels[static_cast<std::size_t>(lb)];

        members.clear();
        std::fill(node_of.begin(), node_of.end(), -1);
        for (int i = 0; i < n_t; ++i) {
          const int y = current.labels[static_cast<std::size_t>(i)];
          if (y == label_a || y == label_b) {
            node_of[static_cast<std::size_t>(i)] = static_cast<int>(members.size());
            members.push_back(i);
          }
        }
        if (members.empty()) continue;

        const int source = static_cast<int>(members.size());
        const int sink = source + 1;
        FlowNetwork network(sink + 1);
        for (std::size_t m = 0; m < members.size(); ++m) {
          const int i = members[m];
          // Severing the source link assigns label_b, severing the sink link
          // assigns label_a; boundary terms come from neighbors outside the move.
          double cost_b = unary.cost(i, column_of(columns, label_b));
          double cost_a = unary.cost(i, column_of(columns, label_a));
          for (const auto& [j, weight] : neighbors[static_cast<std::size_t>(i)]) {
            if (node_of[static_cast<std::size_t>(j)] >= 0) continue;
            const int yj = current.labels[static_cast<std::size_t>(j)];
            if (label_b != yj) cost_b += weight;
            if (label_a != yj) cost_a += weight;
          }
          const double shift = std::min(cost_a, cost_b);
          network.add_edge(source, static_cast<int>(m), cost_b - shift);
          network.add_edge(static_cast<int>(m), sink, cost_a - shift);
        }
        for (const auto& edge : graph.inner_edges) {
          const int mi = node_of[static_cast<std::size_t>(edge.i)];
          const int mj = node_of[static_cast<std::size_t>(edge.j)];
          if (mi < 0 || mj < 0) continue;
          network.add_edge(mi, mj, edge.weight);
          network.add_edge(mj, mi, edge.weight);
        }

        const MaxFlowResult cut = max_flow_min_cut(std::move(network), source, sink);
        LabelAssignment moved = current;
        for (std::size_t m = 0; m < members.size(); ++m)
          moved.labels[static_cast<std::size_t>(members[m])] =
              cut.source_side[m] ? label_a : label_b;
        const double moved_energy = total_energy(moved, graph, unary);
        if (moved_energy < energy - kImprovementEps) {
          current = std::move(moved);
          energy = moved_energy;
          improved = true;
        }
      }
    }
  }
  return current;
}

IdRaster rasterize_assignment(const SuperpixelDecomposition& decomposition,
                              const LabelAssignment& assignment) {
  if (static_cast<int>(assignment.labels.size()) != decomposition.n_segments)
    throw std::invalid_argument("assignment does not cover all segments");
  for (const int label : assignment.labels)
    if (label < 0 || label >= static_cast<int>(kVoidLabel))
      throw std::invalid_argument("label id does not fit an 8-bit raster");
  IdRaster raster(decomposition.height(), decomposition.width());
  for (int r = 0; r < raster.height; ++r)
    for (int c = 0; c < raster.width; ++c)
      raster.at(r, c) =
          static_cast<std::uint8_t>(assignment.labels[static_cast<std::size_t>(decomposition.segment_map(r, c))]);
  return raster;
}

void dump_graph(const PropagationGraph& graph, const UnaryTable& unary,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("unwritable path: " + path.string());
  out << "vertices " << graph.n_vertices() << "\n";
  out << "candidates";
  for (const int label : graph.candidate_labels) out << " " << label;
  out << "\ninner_edges " << graph.inner_edges.size() << "\n";
  for (const auto& edge : graph.inner_edges)
    out << edge.i << " " << edge.j << " " << edge.weight << "\n";
  out << "outer_edges\n";
  for (int i = 0; i < graph.n_vertices(); ++i)
    for (int r = 0; r < graph.n_references(); ++r)
      for (const auto& edge : graph.outer_edges[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)])
        out << i << " " << graph.references[static_cast<std::size_t>(r)].database_index << " "
            << edge.segment << " " << edge.distance << "\n";
  out << "unary " << unary.cost.rows() << " " << unary.cost.cols() << "\n" << unary.cost << "\n";
}

}  // namespace tagseg
