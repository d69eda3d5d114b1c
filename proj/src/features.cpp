#include "tagseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "tagseg/errors.hpp"

namespace tagseg {

namespace {

constexpr float kPi = 3.14159265358979323846f;

inline int lab_l_bin(float v, int bins) {
  return std::clamp(static_cast<int>(v / 100.0f * static_cast<float>(bins)), 0, bins - 1);
}
inline int lab_ab_bin(float v, int bins) {
  return std::clamp(static_cast<int>((v + 128.0f) / 256.0f * static_cast<float>(bins)), 0,
                    bins - 1);
}
inline int orient_bin(float theta, int bins) {
  return std::clamp(static_cast<int>(theta / kPi * static_cast<float>(bins)), 0, bins - 1);
}

// Accumulates color counts and magnitude-weighted orientations over one pixel.
struct HistAccumulator {
  Eigen::VectorXd color;  // 3 * color_bins
  Eigen::VectorXd orient;
  double count = 0;
  double magnitude_total = 0;

  HistAccumulator(int color_bins, int orient_bins)
      : color(Eigen::VectorXd::Zero(3 * color_bins)),
        orient(Eigen::VectorXd::Zero(orient_bins)) {}

  void add(const LabImage& lab, const Gradient& grad, int r, int c, int color_bins,
           int orient_bins) {
    color(lab_l_bin(lab.L(r, c), color_bins)) += 1.0;
    color(color_bins + lab_ab_bin(lab.a(r, c), color_bins)) += 1.0;
    color(2 * color_bins + lab_ab_bin(lab.b(r, c), color_bins)) += 1.0;
    const double m = grad.magnitude(r, c);
    orient(orient_bin(grad.orientation(r, c), orient_bins)) += m;
    magnitude_total += m;
    count += 1.0;
  }

  Eigen::VectorXd normalized_color() const { return color / std::max(count * 3.0, 1.0); }

  Eigen::VectorXd normalized_orient() const {
    if (magnitude_total <= 1e-12)
      return Eigen::VectorXd::Constant(orient.size(), 1.0 / static_cast<double>(orient.size()));
    return orient / magnitude_total;
  }
};

}  // namespace

int global_feature_dim(const FeatureParams& params) {
  int cells = 0;
  for (int level = 1; level <= params.pyramid_levels; ++level) cells += level * level;
  return cells * (3 * params.color_bins + params.orient_bins);
}

int region_feature_dim(const FeatureParams& params) {
  return 3 + 3 * params.color_bins + params.orient_bins + 2;
}

RegionBlocks region_blocks(const FeatureParams& params) {
  RegionBlocks blocks;
  blocks.mean_offset = 0;
  blocks.hist_offset = 3;
  blocks.grad_offset = 3 + 3 * params.color_bins;
  blocks.pos_offset = blocks.grad_offset + params.orient_bins;
  blocks.mean_scale = 1.0 / std::sqrt(3.0);
  blocks.hist_scale = 1.0 / std::sqrt(3.0 * params.color_bins);
  blocks.grad_scale = 1.0 / std::sqrt(static_cast<double>(params.orient_bins));
  // The centroid exercises its full [0,1] range while color differences stay
  // well inside theirs; at equal block weight, position drowns out appearance
  // when matching segments across images. Keep it as a tie-breaker only.
  blocks.pos_scale = 0.25 / std::sqrt(2.0);
  return blocks;
}

Eigen::VectorXd global_feature(const LabImage& lab, const Gradient& grad,
                               const FeatureParams& params) {
  const int h = lab.height(), w = lab.width();
  Eigen::VectorXd feature(global_feature_dim(params));
  Eigen::Index offset = 0;
  for (int level = 1; level <= params.pyramid_levels; ++level) {
    for (int gi = 0; gi < level; ++gi) {
      for (int gj = 0; gj < level; ++gj) {
        const int r0 = gi * h / level, r1 = (gi + 1) * h / level;
        const int c0 = gj * w / level, c1 = (gj + 1) * w / level;
        HistAccumulator acc(params.color_bins, params.orient_bins);
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) acc.add(lab, grad, r, c, params.color_bins, params.orient_bins);
        feature.segment(offset, acc.color.size()) = acc.normalized_color();
        offset += acc.color.size();
        feature.segment(offset, acc.orient.size()) = acc.normalized_orient();
        offset += acc.orient.size();
      }
    }
  }
  const double norm = feature.norm();
  if (norm > 0) feature /= norm;
  return feature;
}

Eigen::VectorXd global_feature(const ImageU8& image, const FeatureParams& params) {
  const LabImage lab = rgb_to_lab(image);
  return global_feature(lab, lab_gradient(lab), params);
}

Eigen::VectorXd region_feature(const LabImage& lab, const Gradient& grad,
                               const SuperpixelDecomposition& decomposition, int segment,
                               const FeatureParams& params) {
  if (segment < 0 || segment >= decomposition.n_segments)
    throw std::invalid_argument("segment index out of range");
  const auto& pixels = decomposition.pixels[static_cast<std::size_t>(segment)];
  if (pixels.empty()) throw std::invalid_argument("empty segment");

  const int w = decomposition.width();
  HistAccumulator acc(params.color_bins, params.orient_bins);
  double mean_l = 0, mean_a = 0, mean_b = 0;
  for (const int p : pixels) {
    const int r = p / w, c = p % w;
    acc.add(lab, grad, r, c, params.color_bins, params.orient_bins);
    mean_l += lab.L(r, c);
    mean_a += lab.a(r, c);
    mean_b += lab.b(r, c);
  }
  const double n = static_cast<double>(pixels.size());
  const RegionBlocks blocks = region_blocks(params);
  Eigen::VectorXd feature(region_feature_dim(params));
  feature(0) = mean_l / n / 100.0 * blocks.mean_scale;
  feature(1) = (mean_a / n + 128.0) / 256.0 * blocks.mean_scale;
  feature(2) = (mean_b / n + 128.0) / 256.0 * blocks.mean_scale;
  feature.segment(blocks.hist_offset, 3 * params.color_bins) =
      acc.normalized_color() * blocks.hist_scale;
  feature.segment(blocks.grad_offset, params.orient_bins) =
      acc.normalized_orient() * blocks.grad_scale;
  feature(blocks.pos_offset) = decomposition.centroids(0, segment) * blocks.pos_scale;
  feature(blocks.pos_offset + 1) = decomposition.centroids(1, segment) * blocks.pos_scale;
  return feature;
}

Eigen::VectorXd region_feature(const ImageU8& image, const SuperpixelDecomposition& decomposition,
                               int segment, const FeatureParams& params) {
  const LabImage lab = rgb_to_lab(image);
  return region_feature(lab, lab_gradient(lab), decomposition, segment, params);
}

Eigen::MatrixXd region_features(const LabImage& lab, const Gradient& grad,
                                const SuperpixelDecomposition& decomposition,
                                const FeatureParams& params) {
  Eigen::MatrixXd features(region_feature_dim(params), decomposition.n_segments);
  for (int s = 0; s < decomposition.n_segments; ++s)
    features.col(s) = region_feature(lab, grad, decomposition, s, params);
  return features;
}

Eigen::MatrixXd build_codebook(const AuxiliaryDatabase& database, const FeatureParams& params) {
  if (database.images.empty()) throw DataError("empty database");
  Eigen::MatrixXd codebook(global_feature_dim(params), database.size());
  for (int k = 0; k < database.size(); ++k)
    codebook.col(k) = global_feature(database.images[static_cast<std::size_t>(k)].pixels, params);
  return codebook;
}

Eigen::MatrixXd build_codebook_cached(const AuxiliaryDatabase& database,
                                      const FeatureParams& params,
                                      const std::filesystem::path& cache_path) {
  const std::uint64_t expected =
      database_hash(database) ^ (static_cast<std::uint64_t>(params.color_bins) << 32) ^
      (static_cast<std::uint64_t>(params.orient_bins) << 16) ^
      static_cast<std::uint64_t>(params.pyramid_levels);
  const char magic[8] = {'T', 'S', 'G', 'C', 'B', '1', '\n', '\0'};

  if (std::ifstream in(cache_path, std::ios::binary); in) {
    char found[8];
    std::uint64_t hash = 0;
    std::int32_t m = 0, n = 0;
    in.read(found, 8);
    in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
    in.read(reinterpret_cast<char*>(&m), sizeof(m));
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (in && std::equal(found, found + 8, magic) && hash == expected &&
        m == global_feature_dim(params) && n == database.size()) {
      Eigen::MatrixXd codebook(m, n);
      in.read(reinterpret_cast<char*>(codebook.data()),
              static_cast<std::streamsize>(sizeof(double) * codebook.size()));
      if (in) return codebook;
    }
  }

  const Eigen::MatrixXd codebook = build_codebook(database, params);
  std::ofstream out(cache_path, std::ios::binary | std::ios::trunc);
  if (out) {
    const std::int32_t m = static_cast<std::int32_t>(codebook.rows());
    const std::int32_t n = static_cast<std::int32_t>(codebook.cols());
    out.write(magic, 8);
    out.write(reinterpret_cast<const char*>(&expected), sizeof(expected));
    out.write(reinterpret_cast<const char*>(&m), sizeof(m));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(codebook.data()),
              static_cast<std::streamsize>(sizeof(double) * codebook.size()));
  }
  return codebook;
}

}  // namespace tagseg
