#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "tagseg/image.hpp"

namespace tagseg {

struct SuperpixelDecomposition {
  Eigen::ArrayXXi segment_map;  // height x width, dense indices 0..n_segments-1
  int n_segments = 0;
  std::vector<std::vector<int>> pixels;  // per segment, linear indices r * width + c
  Eigen::Matrix2Xd centroids;            // (row, col) normalized to [0,1], one column per segment

  int height() const { return static_cast<int>(segment_map.rows()); }
  int width() const { return static_cast<int>(segment_map.cols()); }
};

/// Unordered neighboring-segment pairs (i < j), present iff the segments
/// share a 4-connected pixel boundary.
using AdjacencyList = std::vector<std::pair<int, int>>;

/// SLIC in CIELAB: distance ||lab_p - lab_center|| + compactness * ||xy_p - xy_center|| / S,
/// 10 assignment iterations, then small fragments are merged into the largest
/// previously-finalized adjacent segment so every segment is 4-connected.
/// target_count is clamped to the pixel count. Deterministic for fixed inputs.
SuperpixelDecomposition slic_segment(const LabImage& lab, int target_count, double compactness);
SuperpixelDecomposition slic_segment(const ImageU8& image, int target_count, double compactness);

AdjacencyList adjacency(const SuperpixelDecomposition& decomposition);

/// 0/255 mask of pixels whose right or bottom neighbor lies in another segment.
IdRaster segment_boundaries(const SuperpixelDecomposition& decomposition);

}  // namespace tagseg
