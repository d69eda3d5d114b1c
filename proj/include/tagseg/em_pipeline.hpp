#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "tagseg/dataset.hpp"
#include "tagseg/features.hpp"
#include "tagseg/mrf.hpp"
#include "tagseg/semantics.hpp"
#include "tagseg/sparse_coder.hpp"
#include "tagseg/superpixel.hpp"

namespace tagseg {

struct RunConfig {
  double beta = 0.1;
  double gamma = 0.2;
  double lambda = 1.0;
  int references = 10;       // p, retained coefficients
  int graph_neighbors = 20;  // q, outer edges per (vertex, reference)
  double sigma = 1e-5;
  int max_coder_iters = 1000;
  double selection_threshold = 0.0;
  int superpixels = 200;
  double compactness = 10.0;
  UnaryMode unary_mode = UnaryMode::kAffinity;
  int max_em_iters = 10;
  FeatureParams features;
  int annotate_neighbors = 10;  // K
  int annotate_top = 3;         // n
  bool coder_random_init = false;
  unsigned coder_seed = 0;
  bool exclude_identifier_matches = false;

  CoderConfig<double> coder_config() const;
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Database with everything the EM loop reuses across targets: the global
/// codebook, the tag affinity, and per-image superpixels with region
/// features. Immutable once built; safe to share across threads.
struct PreparedImage {
  SuperpixelDecomposition decomposition;
  Eigen::MatrixXd region_features;  // d x n_segments
};

struct PreparedDatabase {
  AuxiliaryDatabase database;
  Eigen::MatrixXd codebook;  // m x N
  SemanticAffinity affinity;
  std::vector<LabelSet> tags;        // per image
  std::vector<PreparedImage> images;  // aligned with database.images
  FeatureParams feature_params;
};

PreparedDatabase prepare_database(AuxiliaryDatabase database, const RunConfig& config);

struct ParseResult {
  SuperpixelDecomposition decomposition;
  LabelAssignment assignment;
  std::vector<LabelSet> label_set_history;  // starts with the full label table
  std::vector<ReferenceSet<double>> references_per_iter;
  std::vector<std::vector<double>> coder_traces;  // energy per solver iterate, per EM round
  std::vector<double> mrf_energies;
  int em_iterations = 0;
  bool converged = false;
  bool oscillated = false;
};

/// Alternates coefficient solving and swap-move labeling until the target's
/// label set stops changing (or max_em_iters). If a label set other than the
/// current one repeats, the lowest-energy assignment seen is returned.
ParseResult infer_labels(const PreparedDatabase& prepared, const ImageU8& target,
                         const RunConfig& config, const std::string& target_identifier = "");
ParseResult infer_labels(const AuxiliaryDatabase& database, const ImageU8& target,
                         const RunConfig& config);

struct AnnotationResult {
  Eigen::VectorXd scores;           // per label id
  std::vector<int> ranked_labels;   // descending score, ties to the lower id
  std::vector<int> top_labels;      // first n of ranked_labels
  bool fewer_than_k = false;        // fewer positive coefficients than requested
};

/// Transfers labels from the k largest-coefficient neighbors, solved with the
/// dissimilarity term disabled. Weighted mode sums coefficient-scaled label
/// indicators; unweighted counts each neighbor once.
AnnotationResult annotate(const PreparedDatabase& prepared, const ImageU8& test_image,
                          int k_neighbors, int top_n, bool weighted, const RunConfig& config,
                          const std::string& target_identifier = "");
AnnotationResult annotate(const AuxiliaryDatabase& database, const ImageU8& test_image,
                          int k_neighbors, int top_n, bool weighted, const RunConfig& config);

struct SweepCell {
  double beta = 0;
  double gamma = 0;
  double average_accuracy = 0;
};

/// Pixel-pooled average per-class accuracy of full EM runs over every target,
/// for each (beta, gamma) pair. Targets fan out over `jobs` threads.
std::vector<SweepCell> run_sweep(const PreparedDatabase& prepared,
                                 const std::vector<EvalTarget>& targets,
                                 const std::vector<double>& betas,
                                 const std::vector<double>& gammas, const RunConfig& base_config,
                                 int jobs = 1);

}  // namespace tagseg
