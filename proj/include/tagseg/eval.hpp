#pragma once

#include <Eigen/Core>
#include <map>
#include <vector>

#include "tagseg/dataset.hpp"

namespace tagseg {

struct ClassAccuracyReport {
  std::map<int, double> per_class;  // classes present in the ground truth
  double average = 0;               // mean over present classes
};

/// Pools correct/total pixel counts per class across any number of
/// prediction/truth pairs; void truth pixels are ignored.
class ClassAccuracyAccumulator {
 public:
  void add(const IdRaster& predicted, const GroundTruth& truth);
  ClassAccuracyReport report() const;

 private:
  std::map<int, std::pair<long long, long long>> counts_;  // class -> (correct, total)
};

ClassAccuracyReport per_class_accuracy(const IdRaster& predicted, const GroundTruth& truth);

/// Labels ranked by descending score (ties to the lower id); the result is
/// the mean over true labels of the precision at each one's rank.
double average_precision(const Eigen::VectorXd& scores, const LabelSet& truth);

struct SynthOptions {
  int height = 96;
  int width = 96;
};

struct SynthDataset {
  AuxiliaryDatabase database;
  std::vector<GroundTruth> truths;  // aligned with database.images
};

/// Deterministic synthetic scenes: 1..3 flat-colored, lightly noised regions
/// with one fixed hue per class, drawn over a textured gray background that
/// stays void in the ground truth. Tags are exactly the classes with at
/// least one ground-truth pixel. n_classes must be at most 8.
SynthDataset synth_dataset(unsigned seed, int n_images, int n_classes,
                           const SynthOptions& options = {});

}  // namespace tagseg
