#include "tagseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "tagseg/errors.hpp"

namespace tagseg {

void ClassAccuracyAccumulator::add(const IdRaster& predicted, const GroundTruth& truth) {
  const IdRaster& map = truth.label_map;
  if (predicted.height != map.height || predicted.width != map.width)
    throw std::invalid_argument("prediction/ground-truth dimension mismatch");
  for (std::size_t p = 0; p < map.id.size(); ++p) {
    const std::uint8_t t = map.id[p];
    if (t == kVoidLabel) continue;
    auto& [correct, total] = counts_[t];
    ++total;
    if (predicted.id[p] == t) ++correct;
  }
}

ClassAccuracyReport ClassAccuracyAccumulator::report() const {
  ClassAccuracyReport report;
  double sum = 0;
  for (const auto& [label, counts] : counts_) {
    const double accuracy = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    report.per_class[label] = accuracy;
    sum += accuracy;
  }
  report.average = report.per_class.empty() ? 0.0 : sum / static_cast<double>(report.per_class.size());
  return report;
}

ClassAccuracyReport per_class_accuracy(const IdRaster& predicted, const GroundTruth& truth) {
  ClassAccuracyAccumulator accumulator;
  accumulator.add(predicted, truth);
  return accumulator.report();
}

double average_precision(const Eigen::VectorXd& scores, const LabelSet& truth) {
  if (truth.empty()) throw std::invalid_argument("empty truth set");
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  const std::set<int> relevant(truth.begin(), truth.end());
  double sum = 0;
  int hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant.count(order[rank])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

namespace {

struct ClassColor {
  const char* name;
  std::uint8_t r, g, b;
};

// Sorted by name so label ids match load_dataset's sorted-name convention.
constexpr ClassColor kSynthClasses[8] = {
    {"blue", 45, 70, 210},    {"green", 60, 170, 70},   {"magenta", 210, 60, 200},
    {"olive", 128, 128, 48},  {"orange", 235, 140, 40}, {"purple", 120, 50, 170},
    {"red", 200, 45, 45},     {"teal", 45, 165, 165},
};

std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

}  // namespace

SynthDataset synth_dataset(unsigned seed, int n_images, int n_classes,
                           const SynthOptions& options) {
  if (n_classes < 1 || n_classes > 8)
    throw std::invalid_argument("n_classes must be between 1 and 8");
  if (n_images < 1) throw std::invalid_argument("n_images must be positive");
  const int h = options.height, w = options.width;
  if (h < 16 || w < 16) throw std::invalid_argument("synthetic images must be at least 16x16");

  SynthDataset synth;
  for (int c = 0; c < n_classes; ++c) {
    Label label;
    label.id = c;
    label.name = kSynthClasses[c].name;
    label.rgb = {kSynthClasses[c].r, kSynthClasses[c].g, kSynthClasses[c].b};
    synth.database.label_table.push_back(std::move(label));
  }

  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> region_count(1, std::min(3, n_classes));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 8.0);

  for (int index = 0; index < n_images; ++index) {
    ImageU8 image(h, w);
    IdRaster gt(h, w, kVoidLabel);

    // Textured background: a coarse checker plus per-pixel noise.
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const double base = 118.0 + ((r / 4 + c / 4) % 2) * 20.0;
        std::uint8_t* px = image.px(r, c);
        for (int ch = 0; ch < 3; ++ch) px[ch] = clamp8(base + noise(rng));
      }

    // Pick distinct classes, then drop an ellipse or box per class.
    std::vector<int> classes(static_cast<std::size_t>(n_classes));
    std::iota(classes.begin(), classes.end(), 0);
    std::shuffle(classes.begin(), classes.end(), rng);
    const int regions = region_count(rng);
    for (int k = 0; k < regions; ++k) {
      const int cls = classes[static_cast<std::size_t>(k)];
      const ClassColor& color = kSynthClasses[cls];
      const double cy = (0.2 + 0.6 * unit(rng)) * h;
      const double cx = (0.2 + 0.6 * unit(rng)) * w;
      const double ry = (0.125 + 0.125 * unit(rng)) * h;
      const double rx = (0.125 + 0.125 * unit(rng)) * w;
      const bool box = unit(rng) < 0.35;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const double dy = (r - cy) / ry, dx = (c - cx) / rx;
          const bool inside = box ? (std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0)
                                  : (dy * dy + dx * dx <= 1.0);
          if (!inside) continue;
          std::uint8_t* px = image.px(r, c);
          px[0] = clamp8(color.r + noise(rng));
          px[1] = clamp8(color.g + noise(rng));
          px[2] = clamp8(color.b + noise(rng));
          gt.at(r, c) = static_cast<std::uint8_t>(cls);
        }
    }

    TaggedImage tagged;
    char name[16];
    std::snprintf(name, sizeof(name), "synth%03d", index);
    tagged.identifier = name;
    tagged.pixels = std::move(image);
    // Regions carry distinct classes and the last one is never occluded, so
    // at least one class is always present.
    tagged.tags = labels_present(gt);
    synth.database.images.push_back(std::move(tagged));
    synth.truths.push_back(GroundTruth{std::move(gt)});
  }
  return synth;
}

}  // namespace tagseg
