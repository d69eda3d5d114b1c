#pragma once

#include <Eigen/Core>
#include <filesystem>

#include "tagseg/dataset.hpp"
#include "tagseg/image.hpp"
#include "tagseg/superpixel.hpp"

namespace tagseg {

struct FeatureParams {
  int color_bins = 8;      // per Lab channel
  int orient_bins = 8;     // gradient orientations over [0, pi)
  int pyramid_levels = 2;  // level l contributes an l x l cell grid
};

/// Dimension of the global descriptor: cells * (3*color_bins + orient_bins).
int global_feature_dim(const FeatureParams& params);

/// Dimension of the per-segment descriptor: 3 + 3*color_bins + orient_bins + 2.
int region_feature_dim(const FeatureParams& params);

/// Block layout of the region descriptor. Histogram blocks are L1-normalized
/// before the per-block 1/sqrt(len) balancing is applied, so tests can undo it.
struct RegionBlocks {
  Eigen::Index mean_offset, hist_offset, grad_offset, pos_offset;
  double mean_scale, hist_scale, grad_scale, pos_scale;
};
RegionBlocks region_blocks(const FeatureParams& params);

/// Spatial-pyramid descriptor: per cell, an L1-normalized Lab histogram
/// concatenated with an L1-normalized magnitude-weighted orientation
/// histogram; the full vector is L2-normalized. Cells with no gradient
/// energy get a uniform orientation histogram.
Eigen::VectorXd global_feature(const LabImage& lab, const Gradient& grad,
                               const FeatureParams& params);
Eigen::VectorXd global_feature(const ImageU8& image, const FeatureParams& params);

/// Per-segment descriptor: unit-range mean Lab, Lab histogram, orientation
/// histogram, normalized centroid; each block scaled by 1/sqrt(block length).
Eigen::VectorXd region_feature(const LabImage& lab, const Gradient& grad,
                               const SuperpixelDecomposition& decomposition, int segment,
                               const FeatureParams& params);
Eigen::VectorXd region_feature(const ImageU8& image, const SuperpixelDecomposition& decomposition,
                               int segment, const FeatureParams& params);

/// All region descriptors as columns, d x n_segments.
Eigen::MatrixXd region_features(const LabImage& lab, const Gradient& grad,
                                const SuperpixelDecomposition& decomposition,
                                const FeatureParams& params);

/// Global descriptors of all database images as columns, m x N.
Eigen::MatrixXd build_codebook(const AuxiliaryDatabase& database, const FeatureParams& params);

/// build_codebook with a binary sidecar cache keyed by the database hash.
Eigen::MatrixXd build_codebook_cached(const AuxiliaryDatabase& database,
                                      const FeatureParams& params,
                                      const std::filesystem::path& cache_path);

}  // namespace tagseg
