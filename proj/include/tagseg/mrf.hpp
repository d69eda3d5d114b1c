#pragma once

#include <Eigen/Core>
#include <vector>

#include "tagseg/dataset.hpp"
#include "tagseg/superpixel.hpp"

namespace tagseg {

struct InnerEdge {
  int i, j;       // target segment indices, i < j
  double weight;  // feature distance between the two segments
};

/// Superpixels of one selected reference image.
struct ReferenceSuperpixels {
  int database_index = -1;
  Eigen::MatrixXd features;  // d x n_segments
  LabelSet tags;
};

struct OuterEdge {
  int segment;      // reference segment index
  double distance;  // feature distance from the target segment
};

/// Target superpixels joined to their spatial neighbors and, per reference,
/// to the q most feature-similar reference superpixels.
struct PropagationGraph {
  Eigen::MatrixXd target_features;  // d x n_t
  std::vector<InnerEdge> inner_edges;
  std::vector<ReferenceSuperpixels> references;
  std::vector<std::vector<std::vector<OuterEdge>>> outer_edges;  // [vertex][reference]
  std::vector<int> candidate_labels;                             // sorted union of reference tags

  int n_vertices() const { return static_cast<int>(target_features.cols()); }
  int n_references() const { return static_cast<int>(references.size()); }
};

PropagationGraph build_graph(const Eigen::MatrixXd& target_features,
                             const AdjacencyList& target_adjacency,
                             std::vector<ReferenceSuperpixels> references, int q);

/// Mean outer-edge feature distance from one target vertex into one reference.
double density(const PropagationGraph& graph, int vertex, int reference_index);

enum class UnaryMode {
  kLiteral,   // sum_k alpha_k * density(i,k) * [label in tags_k]
  kAffinity,  // bounded density cost for carried labels, kappa per unit weight otherwise
};

struct UnaryTable {
  Eigen::MatrixXd cost;  // n_t x |candidate_labels|, aligned with graph.candidate_labels
};

UnaryTable unary_table(const PropagationGraph& graph, const Eigen::VectorXd& alpha_masked,
                       UnaryMode mode, double kappa = 1.0);

/// ||f_i - f_j|| if the labels differ, else 0.
double pairwise(const Eigen::VectorXd& feature_i, const Eigen::VectorXd& feature_j, int label_i,
                int label_j);

struct LabelAssignment {
  std::vector<int> labels;  // label id per target vertex
  LabelSet unique_labels() const;
};

double total_energy(const LabelAssignment& assignment, const PropagationGraph& graph,
                    const UnaryTable& unary);

/// Per-vertex unary argmin (ties to the lower label id).
LabelAssignment argmin_assignment(const PropagationGraph& graph, const UnaryTable& unary);

/// Sweeps all candidate label pairs, solving each swap move exactly by
/// min-cut; a move is kept only if it strictly lowers the total energy.
/// Terminates when a full sweep yields no improvement.
LabelAssignment alpha_beta_swap(const PropagationGraph& graph, const UnaryTable& unary,
                                LabelAssignment initial);

/// Per-pixel label ids from a per-segment assignment.
IdRaster rasterize_assignment(const SuperpixelDecomposition& decomposition,
                              const LabelAssignment& assignment);

/// Plain-text dump of vertices, edges and costs, for debugging.
void dump_graph(const PropagationGraph& graph, const UnaryTable& unary,
                const std::filesystem::path& path);

}  // namespace tagseg
