#include "tagseg/em_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "tagseg/errors.hpp"
#include "tagseg/eval.hpp"

using json = nlohmann::json;

namespace tagseg {

CoderConfig<double> RunConfig::coder_config() const {
  CoderConfig<double> config;
  config.beta = beta;
  config.gamma = gamma;
  config.sigma = sigma;
  config.max_iters = max_coder_iters;
  config.random_init = coder_random_init;
  config.seed = coder_seed;
  return config;
}

void RunConfig::validate() const {
  coder_config().validate();
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  if (references < 1) throw std::invalid_argument("references (p) must be positive");
  if (graph_neighbors < 1) throw std::invalid_argument("graph_neighbors (q) must be positive");
  if (selection_threshold < 0) throw std::invalid_argument("selection threshold must be nonnegative");
  if (superpixels < 1) throw std::invalid_argument("superpixels must be positive");
  if (compactness <= 0) throw std::invalid_argument("compactness must be positive");
  if (max_em_iters < 1) throw std::invalid_argument("max_em_iters must be positive");
  if (annotate_neighbors < 1) throw std::invalid_argument("annotate_neighbors (K) must be positive");
  if (annotate_top < 1) throw std::invalid_argument("annotate_top (n) must be positive");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed config file (" + path.string() + "): " + e.what());
  }
  RunConfig config;
  auto get = [&j](const char* key, auto& value) {
    if (j.contains(key)) value = j.at(key).get<std::decay_t<decltype(value)>>();
  };
  get("beta", config.beta);
  get("gamma", config.gamma);
  get("lambda", config.lambda);
  get("references", config.references);
  get("graph_neighbors", config.graph_neighbors);
  get("sigma", config.sigma);
  get("max_coder_iters", config.max_coder_iters);
  get("selection_threshold", config.selection_threshold);
  get("superpixels", config.superpixels);
  get("compactness", config.compactness);
  get("max_em_iters", config.max_em_iters);
  get("color_bins", config.features.color_bins);
  get("orient_bins", config.features.orient_bins);
  get("pyramid_levels", config.features.pyramid_levels);
  get("annotate_neighbors", config.annotate_neighbors);
  get("annotate_top", config.annotate_top);
  get("coder_random_init", config.coder_random_init);
  get("coder_seed", config.coder_seed);
  get("exclude_identifier_matches", config.exclude_identifier_matches);
  if (j.contains("unary_mode")) {
    const std::string mode = j.at("unary_mode").get<std::string>();
    if (mode == "literal")
      config.unary_mode = UnaryMode::kLiteral;
    else if (mode == "affinity")
      config.unary_mode = UnaryMode::kAffinity;
    else
      throw DataError("unknown unary_mode \"" + mode + "\" in " + path.string());
  }
  config.validate();
  return config;
}

PreparedDatabase prepare_database(AuxiliaryDatabase database, const RunConfig& config) {
  config.validate();
  if (database.images.empty()) throw DataError("empty database");
  PreparedDatabase prepared;
  prepared.database = std::move(database);
  prepared.feature_params = config.features;
  prepared.tags = tag_sets(prepared.database);
  prepared.affinity = build_affinity(prepared.tags);
  prepared.codebook.resize(global_feature_dim(config.features), prepared.database.size());
  prepared.images.reserve(prepared.database.images.size());
  for (int k = 0; k < prepared.database.size(); ++k) {
    const ImageU8& pixels = prepared.database.images[static_cast<std::size_t>(k)].pixels;
    const LabImage lab = rgb_to_lab(pixels);
    const Gradient grad = lab_gradient(lab);
    prepared.codebook.col(k) = global_feature(lab, grad, config.features);
    PreparedImage image;
    image.decomposition = slic_segment(lab, config.superpixels, config.compactness);
    image.region_features = region_features(lab, grad, image.decomposition, config.features);
    prepared.images.push_back(std::move(image));
  }
  return prepared;
}

namespace {

struct TargetData {
  SuperpixelDecomposition decomposition;
  Eigen::MatrixXd region_feats;
  Eigen::VectorXd global_feat;
  AdjacencyList adjacency_list;
};

TargetData analyze_target(const ImageU8& target, const RunConfig& config) {
  if (target.height < 16 || target.width < 16) throw DataError("target image too small");
  TargetData data;
  const LabImage lab = rgb_to_lab(target);
  const Gradient grad = lab_gradient(lab);
  data.decomposition = slic_segment(lab, config.superpixels, config.compactness);
  data.region_feats = region_features(lab, grad, data.decomposition, config.features);
  data.global_feat = global_feature(lab, grad, config.features);
  data.adjacency_list = adjacency(data.decomposition);
  return data;
}

void zero_identifier_matches(const PreparedDatabase& prepared, const std::string& identifier,
                             Eigen::VectorXd& alpha) {
  if (identifier.empty()) return;
  for (int k = 0; k < prepared.database.size(); ++k)
    if (prepared.database.images[static_cast<std::size_t>(k)].identifier == identifier)
      alpha(k) = 0;
}

std::vector<ReferenceSuperpixels> gather_references(const PreparedDatabase& prepared,
                                                    const ReferenceSet<double>& selected) {
  std::vector<ReferenceSuperpixels> references;
  references.reserve(selected.indices.size());
  for (const int index : selected.indices) {
    ReferenceSuperpixels ref;
    ref.database_index = index;
    ref.features = prepared.images[static_cast<std::size_t>(index)].region_features;
    ref.tags = prepared.tags[static_cast<std::size_t>(index)];
    references.push_back(std::move(ref));
  }
  return references;
}

}  // namespace

ParseResult infer_labels(const PreparedDatabase& prepared, const ImageU8& target,
                         const RunConfig& config, const std::string& target_identifier) {
  config.validate();
  const TargetData data = analyze_target(target, config);

  ParseResult result;
  result.decomposition = data.decomposition;

  LabelSet current = full_label_set(prepared.database);
  result.label_set_history.push_back(current);
  std::set<LabelSet> seen{current};

  LabelAssignment best;
  double best_energy = std::numeric_limits<double>::max();
  LabelAssignment previous;

  for (int round = 1; round <= config.max_em_iters; ++round) {
    const Eigen::VectorXd dissimilarity = dissimilarity_diag(current, prepared.tags);
    const Eigen::MatrixXd constraint =
        constraint_matrix(prepared.affinity, dissimilarity, config.lambda);
    SemanticCode<double> code =
        solve_code(data.global_feat, prepared.codebook, constraint, config.coder_config());
    if (config.exclude_identifier_matches)
      zero_identifier_matches(prepared, target_identifier, code.alpha);
    const ReferenceSet<double> selected =
        select_references(code.alpha, config.references, config.selection_threshold);

    PropagationGraph graph = build_graph(data.region_feats, data.adjacency_list,
                                         gather_references(prepared, selected),
                                         config.graph_neighbors);
    const UnaryTable unary = unary_table(graph, selected.alpha_masked, config.unary_mode);

    LabelAssignment initial;
    if (round == 1) {
      initial = argmin_assignment(graph, unary);
    } else {
      // Warm start from the previous labeling; vertices whose label fell out
      // of the candidate set drop to their unary argmin.
      const LabelAssignment fallback = argmin_assignment(graph, unary);
      initial = previous;
      for (std::size_t i = 0; i < initial.labels.size(); ++i)
        if (!std::binary_search(graph.candidate_labels.begin(), graph.candidate_labels.end(),
                                initial.labels[i]))
          initial.labels[i] = fallback.labels[i];
    }
    LabelAssignment assignment = alpha_beta_swap(graph, unary, std::move(initial));
    const double energy = total_energy(assignment, graph, unary);

    result.references_per_iter.push_back(selected);
    result.coder_traces.push_back(code.energy_trace);
    result.mrf_energies.push_back(energy);
    result.em_iterations = round;

    const LabelSet next = assignment.unique_labels();
    result.label_set_history.push_back(next);
    if (energy < best_energy) {
      best_energy = energy;
      best = assignment;
    }

    if (next == current) {
      result.converged = true;
      result.assignment = std::move(assignment);
      return result;
    }
    if (seen.count(next)) {
      result.oscillated = true;
      result.assignment = std::move(best);
      return result;
    }
    seen.insert(next);
    current = next;
    previous = std::move(assignment);
  }

  result.assignment = std::move(previous);
  return result;
}

ParseResult infer_labels(const AuxiliaryDatabase& database, const ImageU8& target,
                         const RunConfig& config) {
  return infer_labels(prepare_database(database, config), target, config);
}

AnnotationResult annotate(const PreparedDatabase& prepared, const ImageU8& test_image,
                          int k_neighbors, int top_n, bool weighted, const RunConfig& config,
                          const std::string& target_identifier) {
  config.validate();
  if (k_neighbors < 1) throw std::invalid_argument("k_neighbors must be positive");
  if (k_neighbors > prepared.database.size())
    throw std::invalid_argument("k_neighbors exceeds the database size");
  if (top_n < 1) throw std::invalid_argument("top_n must be positive");

  const LabImage lab = rgb_to_lab(test_image);
  const Eigen::VectorXd feature = global_feature(lab, lab_gradient(lab), config.features);

  // Dissimilarity off: the constraint keeps only the affinity Laplacian.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(prepared.database.size());
  const Eigen::MatrixXd constraint = constraint_matrix(prepared.affinity, zero, 0.0);
  SemanticCode<double> code =
      solve_code(feature, prepared.codebook, constraint, config.coder_config());
  if (config.exclude_identifier_matches)
    zero_identifier_matches(prepared, target_identifier, code.alpha);

  std::vector<int> positive;
  for (int k = 0; k < prepared.database.size(); ++k)
    if (code.alpha(k) > 0) positive.push_back(k);
  if (positive.empty()) throw DataError("no references retrieved");
  std::sort(positive.begin(), positive.end(), [&](int a, int b) {
    if (code.alpha(a) != code.alpha(b)) return code.alpha(a) > code.alpha(b);
    return a < b;
  });

  AnnotationResult result;
  result.fewer_than_k = static_cast<int>(positive.size()) < k_neighbors;
  const int take = std::min<int>(k_neighbors, static_cast<int>(positive.size()));

  result.scores = Eigen::VectorXd::Zero(prepared.database.label_count());
  for (int i = 0; i < take; ++i) {
    const int k = positive[static_cast<std::size_t>(i)];
    const double weight = weighted ? code.alpha(k) : 1.0;
    for (const int label : prepared.tags[static_cast<std::size_t>(k)]) result.scores(label) += weight;
  }

  result.ranked_labels.resize(static_cast<std::size_t>(prepared.database.label_count()));
  std::iota(result.ranked_labels.begin(), result.ranked_labels.end(), 0);
  std::sort(result.ranked_labels.begin(), result.ranked_labels.end(), [&](int a, int b) {
    if (result.scores(a) != result.scores(b)) return result.scores(a) > result.scores(b);
    return a < b;
  });
  const int n = std::min<int>(top_n, static_cast<int>(result.ranked_labels.size()));
  result.top_labels.assign(result.ranked_labels.begin(), result.ranked_labels.begin() + n);
  return result;
}

AnnotationResult annotate(const AuxiliaryDatabase& database, const ImageU8& test_image,
                          int k_neighbors, int top_n, bool weighted, const RunConfig& config) {
  return annotate(prepare_database(database, config), test_image, k_neighbors, top_n, weighted,
                  config);
}

std::vector<SweepCell> run_sweep(const PreparedDatabase& prepared,
                                 const std::vector<EvalTarget>& targets,
                                 const std::vector<double>& betas,
                                 const std::vector<double>& gammas, const RunConfig& base_config,
                                 int jobs) {
  if (targets.empty()) throw DataError("no targets for the sweep");
  for (const double b : betas)
    if (b < 0) throw std::invalid_argument("beta values must be nonnegative");
  for (const double g : gammas)
    if (g < 0) throw std::invalid_argument("gamma values must be nonnegative");
  jobs = std::max(1, jobs);

  std::vector<SweepCell> cells;
  for (const double beta : betas) {
    for (const double gamma : gammas) {
      RunConfig config = base_config;
      config.beta = beta;
      config.gamma = gamma;

      ClassAccuracyAccumulator accumulator;
      std::mutex accumulator_mutex;
      std::atomic<std::size_t> cursor{0};
      std::exception_ptr failure;
      auto worker = [&] {
        for (;;) {
          const std::size_t index = cursor.fetch_add(1);
          if (index >= targets.size()) return;
          const EvalTarget& target = targets[index];
          try {
            const ParseResult parsed =
                infer_labels(prepared, target.pixels, config, target.identifier);
            const IdRaster predicted =
                rasterize_assignment(parsed.decomposition, parsed.assignment);
            std::lock_guard<std::mutex> lock(accumulator_mutex);
            accumulator.add(predicted, target.truth);
          } catch (...) {
            std::lock_guard<std::mutex> lock(accumulator_mutex);
            if (!failure) failure = std::current_exception();
            cursor.store(targets.size());
            return;
          }
        }
      };
      std::vector<std::thread> pool;
      const int n_threads = std::min<int>(jobs, static_cast<int>(targets.size()));
      pool.reserve(static_cast<std::size_t>(n_threads));
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& thread : pool) thread.join();
      if (failure) std::rethrow_exception(failure);

      cells.push_back({beta, gamma, accumulator.report().average});
    }
  }
  return cells;
}

}  // namespace tagseg
