// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "tagseg/dataset.hpp"
#include "tagseg/em_pipeline.hpp"
#include "tagseg/eval.hpp"
#include "tagseg/maxflow.hpp"
#include "tagseg/mrf.hpp"
#include "tagseg/semantics.hpp"
#include "tagseg/sparse_coder.hpp"

using namespace tagseg;

namespace {

struct Outcome {
  bool pass = true;
  double seconds = 0;
  std::string note;

  void require(bool condition, const std::string& message) {
    if (condition) return;
    pass = false;
    if (!note.empty()) note += "; ";
    note += message;
  }
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

Eigen::MatrixXd random_unit_columns(std::mt19937& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
    m.col(j).normalize();
  }
  return m;
}

Eigen::MatrixXd random_psd(std::mt19937& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = normal(rng);
  return m.transpose() * m / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// 1. Solver descent and termination on random instances.
Outcome criterion_descent() {
  Outcome outcome;
  Timer timer;
  std::mt19937 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  CoderConfig<double> config;  // defaults: beta 0.1, gamma 0.2, sigma 1e-5, 1000 iters
  for (int instance = 0; instance < 50; ++instance) {
    const Eigen::MatrixXd codebook = random_unit_columns(rng, 40, 120);
    Eigen::VectorXd feature(40);
    for (int i = 0; i < 40; ++i) feature(i) = normal(rng);
    feature.normalize();
    const Eigen::MatrixXd constraint = random_psd(rng, 120);
    const SemanticCode<double> code = solve_code(feature, codebook, constraint, config);
    outcome.require(code.converged, "instance " + std::to_string(instance) +
                                        " did not terminate within 1000 iterations");
    for (std::size_t k = 1; k < code.energy_trace.size(); ++k)
      outcome.require(code.energy_trace[k] <= code.energy_trace[k - 1] + 1e-9,
                      "energy increased on instance " + std::to_string(instance));
  }
  outcome.seconds = timer.seconds();
  outcome.require(outcome.seconds < 5.0, "exceeded the 5 s budget");
  return outcome;
}

// ---------------------------------------------------------------------------
// 2. Plain-L1 reduction satisfies the stationarity conditions.
Outcome criterion_lasso_kkt() {
  Outcome outcome;
  Timer timer;
  std::mt19937 rng(22);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double betas[3] = {0.05, 0.1, 0.2};
  for (int instance = 0; instance < 25; ++instance) {
    const int m = instance % 2 == 0 ? 24 : 16;
    const int n = instance % 2 == 0 ? 16 : 24;
    const Eigen::MatrixXd codebook = random_unit_columns(rng, m, n);
    Eigen::VectorXd feature(m);
    for (int i = 0; i < m; ++i) feature(i) = normal(rng);
    feature.normalize();

    CoderConfig<double> config;
    config.beta = betas[instance % 3];
    config.gamma = 0.0;
    config.sigma = 1e-8;
    config.max_iters = 100000;
    const Eigen::MatrixXd constraint = Eigen::MatrixXd::Zero(n, n);
    const SemanticCode<double> code = solve_code(feature, codebook, constraint, config);

    const Eigen::VectorXd gradient = codebook.transpose() * (codebook * code.alpha - feature);
    for (int j = 0; j < n; ++j) {
      if (code.alpha(j) > 1e-10)
        outcome.require(std::abs(gradient(j) + config.beta) <= 1e-3,
                        "active-positive stationarity violated");
      else if (code.alpha(j) < -1e-10)
        outcome.require(std::abs(gradient(j) - config.beta) <= 1e-3,
                        "active-negative stationarity violated");
      else
        outcome.require(std::abs(gradient(j)) <= config.beta + 1e-3,
                        "inactive subgradient bound violated");
    }
  }
  outcome.seconds = timer.seconds();
  outcome.require(outcome.seconds < 2.0, "exceeded the 2 s budget");
  return outcome;
}

// ---------------------------------------------------------------------------
// 3. Max flow equals exhaustive min cut on small random networks.
Outcome criterion_mincut_oracle() {
  Outcome outcome;
  Timer timer;
  std::mt19937 rng(33);
  for (int instance = 0; instance < 200; ++instance) {
    std::uniform_int_distribution<int> node_count(2, 10);
    const int n = node_count(rng);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> cap(0, 7);
    std::vector<std::array<int, 3>> edges;  // u, v, capacity
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (u != v && coin(rng) < 0.4) edges.push_back({u, v, cap(rng)});

    FlowNetwork network(n);
    for (const auto& [u, v, c] : edges) network.add_edge(u, v, static_cast<double>(c));
    const int source = 0, sink = n - 1;
    const MaxFlowResult result = max_flow_min_cut(network, source, sink);

    // Exhaustive cut enumeration over subsets containing the source only.
    double best = std::numeric_limits<double>::max();
    const int free_nodes = n - 2;
    for (int mask = 0; mask < (1 << free_nodes); ++mask) {
      std::vector<char> side(static_cast<std::size_t>(n), 0);
      side[static_cast<std::size_t>(source)] = 1;
      for (int b = 0; b < free_nodes; ++b)
        if (mask & (1 << b)) side[static_cast<std::size_t>(b + 1)] = 1;
      double cut = 0;
      for (const auto& [u, v, c] : edges)
        if (side[static_cast<std::size_t>(u)] && !side[static_cast<std::size_t>(v)]) cut += c;
      best = std::min(best, cut);
    }
    outcome.require(std::abs(result.flow - best) <= 1e-9,
                    "flow != exhaustive min cut on instance " + std::to_string(instance));

    double returned_cut = 0;
    for (const auto& [u, v, c] : edges)
      if (result.source_side[static_cast<std::size_t>(u)] &&
          !result.source_side[static_cast<std::size_t>(v)])
        returned_cut += c;
    outcome.require(std::abs(returned_cut - best) <= 1e-9,
                    "returned partition does not achieve the min cut");
  }
  outcome.seconds = timer.seconds();
  outcome.require(outcome.seconds < 5.0, "exceeded the 5 s budget");
  return outcome;
}

// ---------------------------------------------------------------------------
// 4 / 7 / 9 share the planted suite: 40 database images + 10 targets, 4 classes.
struct PlantedSuite {
  PreparedDatabase prepared;
  std::vector<TaggedImage> targets;  // held-out images with their true tags
  std::vector<GroundTruth> truths;
  RunConfig config;
};

PlantedSuite make_planted_suite() {
  PlantedSuite suite;
  const SynthDataset synth = synth_dataset(1, 50, 4);
  AuxiliaryDatabase db;
  db.label_table = synth.database.label_table;
  db.images.assign(synth.database.images.begin(), synth.database.images.begin() + 40);
  suite.prepared = prepare_database(std::move(db), suite.config);
  suite.targets.assign(synth.database.images.begin() + 40, synth.database.images.end());
  suite.truths.assign(synth.truths.begin() + 40, synth.truths.end());
  return suite;
}

Outcome criterion_planted_segmentation(const PlantedSuite& suite,
                                       std::vector<double>& per_target_seconds) {
  Outcome outcome;
  Timer timer;
  ClassAccuracyAccumulator accumulator;
  for (std::size_t t = 0; t < suite.targets.size(); ++t) {
    Timer per_target;
    const ParseResult parsed = infer_labels(suite.prepared, suite.targets[t].pixels, suite.config,
                                            suite.targets[t].identifier);
    per_target_seconds.push_back(per_target.seconds());
    outcome.require(parsed.converged,
                    "target " + suite.targets[t].identifier + " did not converge");
    outcome.require(parsed.em_iterations <= 5,
                    "target " + suite.targets[t].identifier + " needed more than 5 EM iterations");
    accumulator.add(rasterize_assignment(parsed.decomposition, parsed.assignment),
                    suite.truths[t]);
  }
  const double average = accumulator.report().average;
  outcome.require(average >= 0.90,
                  "average per-class accuracy " + std::to_string(average) + " below 0.90");
  if (outcome.pass) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "accuracy %.4f", average);
    outcome.note = buffer;
  }
  outcome.seconds = timer.seconds();
  outcome.require(outcome.seconds < 60.0, "exceeded the 60 s budget");
  return outcome;
}

// ---------------------------------------------------------------------------
// 5. Swap moves reach swap-optimal labelings; most reach the global optimum.
Outcome criterion_swap_optimality() {
  Outcome outcome;
  Timer timer;
  std::mt19937 rng(55);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int global_matches = 0;
  const int instances = 100;
  for (int instance = 0; instance < instances; ++instance) {
    std::uniform_int_distribution<int> vertex_count(2, 6);
    std::uniform_int_distribution<int> label_count(2, 3);
    const int n = vertex_count(rng);
    const int n_labels = label_count(rng);

    PropagationGraph graph;
    graph.target_features = Eigen::MatrixXd::Zero(1, n);
    for (int l = 0; l < n_labels; ++l) graph.candidate_labels.push_back(l);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (unit(rng) < 0.5) graph.inner_edges.push_back({i, j, unit(rng)});

    UnaryTable unary;
    unary.cost.resize(n, n_labels);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n_labels; ++l) unary.cost(i, l) = unit(rng);

    const LabelAssignment result = alpha_beta_swap(graph, unary, argmin_assignment(graph, unary));
    const double result_energy = total_energy(result, graph, unary);

    // No improving swap move: enumerate every relabeling inside each pair.
    for (int la = 0; la < n_labels; ++la) {
      for (int lb = la + 1; lb < n_labels; ++lb) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i)
          if (result.labels[static_cast<std::size_t>(i)] == la ||
              result.labels[static_cast<std::size_t>(i)] == lb)
            members.push_back(i);
        for (int mask = 0; mask < (1 << members.size()); ++mask) {
          LabelAssignment moved = result;
          for (std::size_t b = 0; b < members.size(); ++b)
            moved.labels[static_cast<std::size_t>(members[b])] = (mask & (1 << b)) ? la : lb;
          outcome.require(total_energy(moved, graph, unary) >= result_energy - 1e-9,
                          "improving swap move exists on instance " + std::to_string(instance));
        }
      }
    }

    // Exhaustive global minimum.
    double best = std::numeric_limits<double>::max();
    LabelAssignment probe;
    probe.labels.assign(static_cast<std::size_t>(n), 0);
    long long total = 1;
    for (int i = 0; i < n; ++i) total *= n_labels;
    for (long long code = 0; code < total; ++code) {
      long long rest = code;
      for (int i = 0; i < n; ++i) {
        probe.labels[static_cast<std::size_t>(i)] = static_cast<int>(rest % n_labels);
        rest /= n_labels;
      }
      best = std::min(best, total_energy(probe, graph, unary));
    }
    if (result_energy <= best + 1e-9) ++global_matches;
  }
  outcome.require(global_matches >= 80, "only " + std::to_string(global_matches) +
                                            "/100 instances reached the global optimum");
  if (outcome.pass)
    outcome.note = "global optimum on " + std::to_string(global_matches) + "/100";
  outcome.seconds = timer.seconds();
  outcome.require(outcome.seconds < 10.0, "exceeded the 10 s budget");
  return outcome;
}

// ---------------------------------------------------------------------------
// 6. Weighted label transfer beats unweighted on held-out annotation.
Outcome criterion_annotation_ordering() {
  Outcome outcome;
  Timer timer;
  const SynthDataset synth = synth_dataset(2, 90, 5);
  RunConfig config;
  AuxiliaryDatabase train;
  train.label_table = synth.database.label_table;
  train.images.assign(synth.database.images.begin(), synth.database.images.begin() + 60);
  const PreparedDatabase prepared = prepare_database(std::move(train), config);

  double weighted_map = 0, unweighted_map = 0;
  const int tests = 30;
  for (int t = 0; t < tests; ++t) {
    const TaggedImage& test = synth.database.images[static_cast<std::size_t>(60 + t)];
    const AnnotationResult weighted = annotate(prepared, test.pixels, config.annotate_neighbors,
                                               config.annotate_top, true, config, test.identifier);
    const AnnotationResult unweighted =
        annotate(prepared, test.pixels, config.annotate_neighbors, config.annotate_top, false,
                 config, test.identifier);
    weighted_map += average_precision(weighted.scores, test.tags);
    unweighted_map += average_precision(unweighted.scores, test.tags);
  }
  weighted_map /= tests;
  unweighted_map /= tests;
  outcome.require(weighted_map > unweighted_map,
                  "weighted MAP " + std::to_string(weighted_map) + " not above unweighted " +
                      std::to_string(unweighted_map));
  char buffer[96];
  std::snprintf(buffer, sizeof(buffer), "weighted MAP %.4f vs unweighted %.4f", weighted_map,
                unweighted_map);
  outcome.note = buffer;
  outcome.seconds = timer.seconds();
  outcome.require(outcome.seconds < 30.0, "exceeded the 30 s budget");
  return outcome;
}

// ---------------------------------------------------------------------------
// 7. The semantic term pulls retrieval toward tag-consistent references.
Outcome criterion_semantic_retrieval(const PlantedSuite& suite) {
  Outcome outcome;
  Timer timer;
  RunConfig without = suite.config;
  without.gamma = 0.0;

  auto mean_tag_jaccard = [&](const RunConfig& config) {
    double total = 0;
    for (std::size_t t = 0; t < suite.targets.size(); ++t) {
      const ParseResult parsed = infer_labels(suite.prepared, suite.targets[t].pixels, config,
                                              suite.targets[t].identifier);
      const ReferenceSet<double>& refs = parsed.references_per_iter.back();
      double per_target = 0;
      for (const int index : refs.indices)
        per_target +=
            jaccard(suite.prepared.tags[static_cast<std::size_t>(index)], suite.targets[t].tags);
      total += per_target / static_cast<double>(refs.indices.size());
    }
    return total / static_cast<double>(suite.targets.size());
  };

  const double with_j = mean_tag_jaccard(suite.config);
  const double without_j = mean_tag_jaccard(without);
  outcome.require(with_j > without_j, "mean tag jaccard with semantics " + std::to_string(with_j) +
                                          " not above " + std::to_string(without_j));
  char buffer[96];
  std::snprintf(buffer, sizeof(buffer), "mean tag jaccard %.4f (on) vs %.4f (off)", with_j,
                without_j);
  outcome.note = buffer;
  outcome.seconds = timer.seconds();
  return outcome;
}

// ---------------------------------------------------------------------------
// 8. Laplacian spectrum and null vector on random tag databases.
Outcome criterion_laplacian_structure() {
  Outcome outcome;
  Timer timer;
  std::mt19937 rng(88);
  for (int instance = 0; instance < 30; ++instance) {
    std::uniform_int_distribution<int> size(1, 20);
    std::uniform_int_distribution<int> classes(1, 6);
    const int n = size(rng);
    const int c = classes(rng);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<LabelSet> sets;
    for (int i = 0; i < n; ++i) {
      LabelSet set;
      for (int l = 0; l < c; ++l)
        if (coin(rng) < 0.45) set.push_back(l);
      if (set.empty()) set.push_back(static_cast<int>(rng() % static_cast<unsigned>(c)));
      sets.push_back(std::move(set));
    }
    const SemanticAffinity affinity = build_affinity(sets);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(affinity.laplacian);
    outcome.require(eigen.eigenvalues().minCoeff() >= -1e-8,
                    "eigenvalue below -1e-8 on instance " + std::to_string(instance));
    outcome.require(eigen.eigenvalues().maxCoeff() <= 2.0 + 1e-8,
                    "eigenvalue above 2 on instance " + std::to_string(instance));
    const Eigen::VectorXd null_vector = affinity.degrees.cwiseSqrt();
    outcome.require((affinity.laplacian * null_vector).lpNorm<Eigen::Infinity>() <= 1e-8,
                    "degree-weighted null vector violated on instance " + std::to_string(instance));
  }
  outcome.seconds = timer.seconds();
  return outcome;
}

// ---------------------------------------------------------------------------
// 9. Per-image runtime on the planted suite.
Outcome criterion_runtime(const std::vector<double>& per_target_seconds) {
  Outcome outcome;
  double worst = 0;
  for (const double s : per_target_seconds) worst = std::max(worst, s);
  outcome.require(!per_target_seconds.empty(), "no timed runs");
  outcome.require(worst <= 10.0, "slowest image took " + std::to_string(worst) + " s");
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "slowest image %.2f s", worst);
  if (outcome.pass) outcome.note = buffer;
  return outcome;
}

void report(int id, const char* name, const Outcome& outcome, int& failures) {
  std::printf("criterion %d (%s): %s (%.2fs)%s%s\n", id, name, outcome.pass ? "PASS" : "FAIL",
              outcome.seconds, outcome.note.empty() ? "" : " -- ", outcome.note.c_str());
  std::fflush(stdout);
  if (!outcome.pass) ++failures;
}

}  // namespace

int main() {
  int failures = 0;

  report(1, "sparse-coder descent", criterion_descent(), failures);
  report(2, "plain-L1 stationarity oracle", criterion_lasso_kkt(), failures);
  report(3, "min-cut enumeration oracle", criterion_mincut_oracle(), failures);

  const PlantedSuite suite = make_planted_suite();
  std::vector<double> per_target_seconds;
  report(4, "planted segmentation", criterion_planted_segmentation(suite, per_target_seconds),
         failures);
  report(5, "swap local optimality", criterion_swap_optimality(), failures);
  report(6, "annotation ordering", criterion_annotation_ordering(), failures);
  report(7, "semantic retrieval effect", criterion_semantic_retrieval(suite), failures);
  report(8, "laplacian structure", criterion_laplacian_structure(), failures);
  report(9, "per-image runtime", criterion_runtime(per_target_seconds), failures);

  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
