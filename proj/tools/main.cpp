// tagseg: weakly-tagged exemplar retrieval + label propagation for semantic
// segmentation and image annotation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tagseg/dataset.hpp"
#include "tagseg/em_pipeline.hpp"
#include "tagseg/errors.hpp"
#include "tagseg/eval.hpp"
#include "tagseg/image_io.hpp"
#include "tagseg/mrf.hpp"
#include "tagseg/semantics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tagseg;

namespace {

struct CommonOptions {
  std::string config_path;
  RunConfig config;
};

void add_config_flags(CLI::App* cmd, CommonOptions& opts, bool scalar_beta_gamma = true) {
  cmd->add_option("--config", opts.config_path, "JSON run-config file; flags override it");
  if (scalar_beta_gamma) {
    cmd->add_option("--beta", opts.config.beta, "L1 weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--gamma", opts.config.gamma, "semantic-constraint weight")
        ->check(CLI::NonNegativeNumber);
  }
  cmd->add_option("--lambda", opts.config.lambda, "dissimilarity weight")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("-p,--references", opts.config.references, "references kept per retrieval")
      ->check(CLI::PositiveNumber);
  cmd->add_option("-q,--graph-neighbors", opts.config.graph_neighbors,
                  "outer edges per vertex and reference")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--sigma", opts.config.sigma, "solver stop threshold")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--superpixels", opts.config.superpixels, "target superpixel count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--compactness", opts.config.compactness, "superpixel compactness")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-em-iters", opts.config.max_em_iters, "EM iteration cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--unary-mode", [&opts](const CLI::results_t& values) {
        if (values[0] == "literal")
          opts.config.unary_mode = UnaryMode::kLiteral;
        else if (values[0] == "affinity")
          opts.config.unary_mode = UnaryMode::kAffinity;
        else
          return false;
        return true;
      },
      "unary potential mode: literal|affinity");
  cmd->add_flag("--exclude-self", opts.config.exclude_identifier_matches,
                "drop database entries whose identifier equals the target's");
}

// Applies the config file first so explicit flags win.
void finalize_config(const CLI::App* cmd, CommonOptions& opts) {
  if (opts.config_path.empty()) {
    opts.config.validate();
    return;
  }
  RunConfig merged = load_run_config(opts.config_path);
  const auto keep = [&](const std::string& flag) {
    const CLI::Option* option = cmd->get_option_no_throw(flag);
    return option && option->count() > 0;
  };
  if (keep("--beta")) merged.beta = opts.config.beta;
  if (keep("--gamma")) merged.gamma = opts.config.gamma;
  if (keep("--lambda")) merged.lambda = opts.config.lambda;
  if (keep("--references")) merged.references = opts.config.references;
  if (keep("--graph-neighbors")) merged.graph_neighbors = opts.config.graph_neighbors;
  if (keep("--sigma")) merged.sigma = opts.config.sigma;
  if (keep("--superpixels")) merged.superpixels = opts.config.superpixels;
  if (keep("--compactness")) merged.compactness = opts.config.compactness;
  if (keep("--max-em-iters")) merged.max_em_iters = opts.config.max_em_iters;
  if (keep("--unary-mode")) merged.unary_mode = opts.config.unary_mode;
  if (keep("--exclude-self"))
    merged.exclude_identifier_matches = opts.config.exclude_identifier_matches;
  opts.config = merged;
  opts.config.validate();
}

std::string label_name(const std::vector<Label>& table, int id) {
  if (id >= 0 && id < static_cast<int>(table.size())) return table[static_cast<std::size_t>(id)].name;
  return "label_" + std::to_string(id);
}

json reference_report(const PreparedDatabase& prepared, const ReferenceSet<double>& refs) {
  json out = json::array();
  for (Eigen::Index i = 0; i < refs.weights.size(); ++i) {
    const int index = refs.indices[static_cast<std::size_t>(i)];
    json names = json::array();
    for (const int tag : prepared.tags[static_cast<std::size_t>(index)])
      names.push_back(label_name(prepared.database.label_table, tag));
    out.push_back({{"index", index},
                   {"identifier", prepared.database.images[static_cast<std::size_t>(index)].identifier},
                   {"weight", refs.weights(i)},
                   {"tags", names}});
  }
  return out;
}

void write_energy_csv(const fs::path& path, const std::vector<std::vector<double>>& traces) {
  std::ofstream out(path);
  if (!out) throw DataError("unwritable path: " + path.string());
  out << "em_iteration,coder_iteration,energy\n";
  for (std::size_t round = 0; round < traces.size(); ++round)
    for (std::size_t it = 0; it < traces[round].size(); ++it)
      out << round + 1 << "," << it << "," << traces[round][it] << "\n";
}

json parse_report(const PreparedDatabase& prepared, const ParseResult& parsed,
                  const std::string& target) {
  json history = json::array();
  for (const auto& set : parsed.label_set_history) {
    json names = json::array();
    for (const int id : set) names.push_back(label_name(prepared.database.label_table, id));
    history.push_back(names);
  }
  json rounds = json::array();
  for (std::size_t i = 0; i < parsed.references_per_iter.size(); ++i)
    rounds.push_back({{"references", reference_report(prepared, parsed.references_per_iter[i])},
                      {"mrf_energy", parsed.mrf_energies[i]},
                      {"coder_iterations", parsed.coder_traces[i].size() - 1},
                      {"coder_final_energy", parsed.coder_traces[i].back()}});
  json final_labels = json::array();
  for (const int id : parsed.assignment.unique_labels())
    final_labels.push_back(label_name(prepared.database.label_table, id));
  return {{"target", target},
          {"em_iterations", parsed.em_iterations},
          {"converged", parsed.converged},
          {"oscillated", parsed.oscillated},
          {"superpixels", parsed.decomposition.n_segments},
          {"label_set_history", history},
          {"final_labels", final_labels},
          {"iterations", rounds}};
}

int cmd_synth(const std::string& out_dir, int images, int classes, unsigned seed, int height,
              int width) {
  SynthOptions options;
  options.height = height;
  options.width = width;
  const SynthDataset synth = synth_dataset(seed, images, classes, options);
  write_dataset(out_dir, synth.database, &synth.truths);
  std::cout << "wrote " << images << " images, " << classes << " classes to " << out_dir << "\n";
  return 0;
}

int cmd_retrieve(const CommonOptions& opts, const std::string& dataset_dir,
                 const std::string& target_path, const std::string& trace_path,
                 const std::string& lambda_dump) {
  const AuxiliaryDatabase db = load_dataset(dataset_dir);
  const PreparedDatabase prepared = prepare_database(db, opts.config);
  const ImageU8 target = read_image(target_path);

  const LabImage lab = rgb_to_lab(target);
  const Eigen::VectorXd feature = global_feature(lab, lab_gradient(lab), opts.config.features);
  const Eigen::VectorXd dissimilarity =
      dissimilarity_diag(full_label_set(prepared.database), prepared.tags);
  const Eigen::MatrixXd constraint =
      constraint_matrix(prepared.affinity, dissimilarity, opts.config.lambda);
  if (!lambda_dump.empty()) {
    std::ofstream out(lambda_dump);
    if (!out) throw DataError("unwritable path: " + lambda_dump);
    out << constraint << "\n";
  }
  SemanticCode<double> code =
      solve_code(feature, prepared.codebook, constraint, opts.config.coder_config());
  if (opts.config.exclude_identifier_matches) {
    const std::string stem = fs::path(target_path).stem().string();
    for (int k = 0; k < prepared.database.size(); ++k)
      if (prepared.database.images[static_cast<std::size_t>(k)].identifier == stem) code.alpha(k) = 0;
  }
  const ReferenceSet<double> refs =
      select_references(code.alpha, opts.config.references, opts.config.selection_threshold);
  if (!trace_path.empty()) write_energy_csv(trace_path, {code.energy_trace});

  const json report = {{"target", fs::path(target_path).stem().string()},
                       {"coder_iterations", code.iterations},
                       {"coder_converged", code.converged},
                       {"final_energy", code.energy_trace.back()},
                       {"references", reference_report(prepared, refs)}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_segment(const CommonOptions& opts, const std::string& dataset_dir,
                const std::string& target_path, const std::string& out_dir,
                const std::string& graph_dump, const std::string& boundaries_dump) {
  const AuxiliaryDatabase db = load_dataset(dataset_dir);
  const PreparedDatabase prepared = prepare_database(db, opts.config);
  const ImageU8 target = read_image(target_path);
  const std::string stem = fs::path(target_path).stem().string();

  const ParseResult parsed = infer_labels(prepared, target, opts.config, stem);
  const IdRaster raster = rasterize_assignment(parsed.decomposition, parsed.assignment);
  write_result_rasters(out_dir, stem, target, raster, prepared.database.label_table);
  write_energy_csv(fs::path(out_dir) / (stem + ".energy.csv"), parsed.coder_traces);

  if (!boundaries_dump.empty())
    write_id_raster_png(boundaries_dump, segment_boundaries(parsed.decomposition));
  if (!graph_dump.empty()) {
    // Rebuild the final round's graph for inspection.
    const LabImage lab = rgb_to_lab(target);
    const Gradient grad = lab_gradient(lab);
    const Eigen::MatrixXd feats =
        region_features(lab, grad, parsed.decomposition, opts.config.features);
    std::vector<ReferenceSuperpixels> references;
    for (const int index : parsed.references_per_iter.back().indices) {
      ReferenceSuperpixels ref;
      ref.database_index = index;
      ref.features = prepared.images[static_cast<std::size_t>(index)].region_features;
      ref.tags = prepared.tags[static_cast<std::size_t>(index)];
      references.push_back(std::move(ref));
    }
    const PropagationGraph graph = build_graph(feats, adjacency(parsed.decomposition),
                                               std::move(references), opts.config.graph_neighbors);
    const UnaryTable unary =
        unary_table(graph, parsed.references_per_iter.back().alpha_masked, opts.config.unary_mode);
    dump_graph(graph, unary, graph_dump);
  }

  const json report = parse_report(prepared, parsed, stem);
  std::ofstream report_out(fs::path(out_dir) / (stem + ".report.json"));
  report_out << report.dump(2) << "\n";
  std::cout << "segmented " << stem << ": " << parsed.em_iterations << " EM iterations, "
            << (parsed.converged ? "converged" : parsed.oscillated ? "oscillated" : "iteration cap")
            << ", labels";
  for (const int id : parsed.assignment.unique_labels())
    std::cout << " " << label_name(prepared.database.label_table, id);
  std::cout << "\n";
  return 0;
}

int cmd_annotate(const CommonOptions& opts, const std::string& dataset_dir,
                 const std::string& target_path, int neighbors, int top, bool unweighted) {
  const AuxiliaryDatabase db = load_dataset(dataset_dir);
  const PreparedDatabase prepared = prepare_database(db, opts.config);
  const ImageU8 target = read_image(target_path);
  const std::string stem = fs::path(target_path).stem().string();

  const AnnotationResult result =
      annotate(prepared, target, neighbors, top, !unweighted, opts.config, stem);
  json ranked = json::array();
  for (const int id : result.ranked_labels)
    ranked.push_back({{"label", label_name(prepared.database.label_table, id)},
                      {"score", result.scores(id)}});
  json top_labels = json::array();
  for (const int id : result.top_labels)
    top_labels.push_back(label_name(prepared.database.label_table, id));
  const json report = {{"target", stem},
                       {"weighted", !unweighted},
                       {"fewer_than_k", result.fewer_than_k},
                       {"top", top_labels},
                       {"ranking", ranked}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

std::vector<std::pair<fs::path, fs::path>> pair_rasters(const std::string& pred,
                                                        const std::string& truth) {
  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (fs::is_directory(pred)) {
    if (!fs::is_directory(truth)) throw DataError("--truth must be a directory when --pred is");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(pred)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 11 && name.ends_with(".labels.png")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no *.labels.png files under " + pred);
    for (const auto& file : files) {
      std::string stem = file.filename().string();
      stem.erase(stem.size() - 11);
      const fs::path truth_path = fs::path(truth) / (stem + ".png");
      if (!fs::exists(truth_path)) throw DataError("missing ground truth: " + truth_path.string());
      pairs.emplace_back(file, truth_path);
    }
  } else {
    pairs.emplace_back(pred, truth);
  }
  return pairs;
}

int cmd_eval(const std::string& pred, const std::string& truth, const std::string& labels_path) {
  std::vector<Label> table;
  if (!labels_path.empty()) {
    // Only names matter here; reuse the dataset loader conventions.
    std::ifstream in(labels_path);
    if (!in) throw DataError("missing labels file: " + labels_path);
    json j;
    in >> j;
    for (const auto& entry : j.at("labels")) {
      Label label;
      label.id = entry.at("id").get<int>();
      label.name = entry.at("name").get<std::string>();
      table.push_back(std::move(label));
    }
    std::sort(table.begin(), table.end(), [](const Label& a, const Label& b) { return a.id < b.id; });
  }

  ClassAccuracyAccumulator accumulator;
  for (const auto& [pred_path, truth_path] : pair_rasters(pred, truth)) {
    const IdRaster predicted = read_id_raster(pred_path);
    GroundTruth gt;
    gt.label_map = read_id_raster(truth_path);
    if (gt.label_map.height != predicted.height || gt.label_map.width != predicted.width)
      throw DataError("dimension mismatch between " + pred_path.string() + " and " +
                      truth_path.string());
    accumulator.add(predicted, gt);
  }
  const ClassAccuracyReport report = accumulator.report();

  json per_class = json::object();
  std::printf("%-16s %s\n", "class", "accuracy");
  for (const auto& [id, accuracy] : report.per_class) {
    const std::string name = label_name(table, id);
    per_class[name] = accuracy;
    std::printf("%-16s %.4f\n", name.c_str(), accuracy);
  }
  std::printf("%-16s %.4f\n", "average", report.average);
  const json out = {{"per_class", per_class}, {"average", report.average}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& dataset_dir,
              const std::string& targets_dir, std::vector<double> betas,
              std::vector<double> gammas, const std::string& out_csv, int jobs) {
  const AuxiliaryDatabase db = load_dataset(dataset_dir);
  const PreparedDatabase prepared = prepare_database(db, opts.config);
  const std::vector<EvalTarget> targets =
      load_eval_targets(targets_dir, prepared.database.label_table);
  if (betas.empty()) betas = {opts.config.beta};
  if (gammas.empty()) gammas = {opts.config.gamma};

  const std::vector<SweepCell> cells =
      run_sweep(prepared, targets, betas, gammas, opts.config, jobs);

  std::printf("%8s %8s %s\n", "beta", "gamma", "average_accuracy");
  for (const auto& cell : cells)
    std::printf("%8.3f %8.3f %.4f\n", cell.beta, cell.gamma, cell.average_accuracy);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw DataError("unwritable path: " + out_csv);
    out << "beta,gamma,average_accuracy\n";
    for (const auto& cell : cells)
      out << cell.beta << "," << cell.gamma << "," << cell.average_accuracy << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exemplar-driven semantic segmentation from image-level tags"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic tagged dataset");
  std::string synth_out;
  int synth_images = 40, synth_classes = 4, synth_height = 96, synth_width = 96;
  unsigned synth_seed = 1;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--images", synth_images, "image count")->check(CLI::PositiveNumber);
  synth->add_option("--classes", synth_classes, "class count (max 8)")
      ->check(CLI::Range(1, 8));
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--height", synth_height)->check(CLI::PositiveNumber);
  synth->add_option("--width", synth_width)->check(CLI::PositiveNumber);

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "run one retrieval step and report references");
  CommonOptions retrieve_opts;
  std::string retrieve_dataset, retrieve_target, retrieve_trace, retrieve_lambda;
  retrieve->add_option("--dataset", retrieve_dataset, "dataset root")->required();
  retrieve->add_option("--target", retrieve_target, "target image")->required();
  retrieve->add_option("--trace", retrieve_trace, "write the energy trace CSV here");
  retrieve->add_option("--dump-lambda", retrieve_lambda, "write the constraint matrix here");
  add_config_flags(retrieve, retrieve_opts);

  // segment
  auto* segment = app.add_subcommand("segment", "segment a target image");
  CommonOptions segment_opts;
  std::string segment_dataset, segment_target, segment_out, segment_graph, segment_boundaries;
  segment->add_option("--dataset", segment_dataset, "dataset root")->required();
  segment->add_option("--target", segment_target, "target image")->required();
  segment->add_option("--out", segment_out, "output directory")->required();
  segment->add_option("--dump-graph", segment_graph, "write the final propagation graph here");
  segment->add_option("--dump-boundaries", segment_boundaries,
                      "write the superpixel boundary mask here");
  add_config_flags(segment, segment_opts);

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "rank labels for a test image");
  CommonOptions annotate_opts;
  std::string annotate_dataset, annotate_target;
  int annotate_k = 10, annotate_n = 3;
  bool annotate_unweighted = false;
  annotate_cmd->add_option("--dataset", annotate_dataset, "dataset root")->required();
  annotate_cmd->add_option("--target", annotate_target, "test image")->required();
  annotate_cmd->add_option("-K,--neighbors", annotate_k, "coefficient neighbors")
      ->check(CLI::PositiveNumber);
  annotate_cmd->add_option("-n,--top", annotate_n, "labels to keep")->check(CLI::PositiveNumber);
  annotate_cmd->add_flag("--unweighted", annotate_unweighted, "count neighbors without weights");
  add_config_flags(annotate_cmd, annotate_opts);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "per-class accuracy of predictions vs ground truth");
  std::string eval_pred, eval_truth, eval_labels;
  eval_cmd->add_option("--pred", eval_pred, "predicted id raster or directory of *.labels.png")
      ->required();
  eval_cmd->add_option("--truth", eval_truth, "ground-truth raster or directory")->required();
  eval_cmd->add_option("--labels", eval_labels, "labels.json for class names");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "grid of beta/gamma vs segmentation accuracy");
  CommonOptions sweep_opts;
  std::string sweep_dataset, sweep_targets, sweep_csv;
  std::vector<double> sweep_betas, sweep_gammas;
  int sweep_jobs = 1;
  sweep->add_option("--dataset", sweep_dataset, "dataset root")->required();
  sweep->add_option("--targets", sweep_targets, "directory with images/ and gt/")->required();
  sweep->add_option("--beta", sweep_betas, "beta grid values");
  sweep->add_option("--gamma", sweep_gammas, "gamma grid values");
  sweep->add_option("--out", sweep_csv, "write the long-format CSV here");
  sweep->add_option("--jobs", sweep_jobs, "parallel targets")->check(CLI::PositiveNumber);
  add_config_flags(sweep, sweep_opts, /*scalar_beta_gamma=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_images, synth_classes, synth_seed, synth_height,
                       synth_width);
    if (retrieve->parsed()) {
      finalize_config(retrieve, retrieve_opts);
      return cmd_retrieve(retrieve_opts, retrieve_dataset, retrieve_target, retrieve_trace,
                          retrieve_lambda);
    }
    if (segment->parsed()) {
      finalize_config(segment, segment_opts);
      return cmd_segment(segment_opts, segment_dataset, segment_target, segment_out, segment_graph,
                         segment_boundaries);
    }
    if (annotate_cmd->parsed()) {
      finalize_config(annotate_cmd, annotate_opts);
      return cmd_annotate(annotate_opts, annotate_dataset, annotate_target, annotate_k, annotate_n,
                          annotate_unweighted);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_pred, eval_truth, eval_labels);
    if (sweep->parsed()) {
      finalize_config(sweep, sweep_opts);
      return cmd_sweep(sweep_opts, sweep_dataset, sweep_targets, sweep_betas, sweep_gammas,
                       sweep_csv, sweep_jobs);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
