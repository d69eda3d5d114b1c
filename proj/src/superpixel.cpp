#include "tagseg/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tagseg {

namespace {

struct Cluster {
  float L = 0, a = 0, b = 0;
  float row = 0, col = 0;
};

std::vector<Cluster> seed_clusters(const LabImage& lab, const Gradient& grad, int step) {
  const int h = lab.height(), w = lab.width();
  // Perturbing to the local gradient minimum can collide adjacent seeds when
  // the grid is tighter than the 3x3 search window; keep the raw grid then.
  const bool perturb = step >= 3;
  std::vector<Cluster> clusters;
  for (int r = step / 2; r < h; r += step) {
    for (int c = step / 2; c < w; c += step) {
      int br = r, bc = c;
      float best = std::numeric_limits<float>::max();
      for (int dr = -1; perturb && dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          if (grad.magnitude(rr, cc) < best) {
            best = grad.magnitude(rr, cc);
            br = rr;
            bc = cc;
          }
        }
      }
      Cluster cl;
      cl.L = lab.L(br, bc);
      cl.a = lab.a(br, bc);
      cl.b = lab.b(br, bc);
      cl.row = static_cast<float>(br);
      cl.col = static_cast<float>(bc);
      clusters.push_back(cl);
    }
  }
  return clusters;
}

// Merges 4-connected components smaller than min_size into the segment that
// was finalized just before them, then renumbers densely in raster order.
Eigen::ArrayXXi enforce_connectivity(const Eigen::ArrayXXi& map, int min_size, int& n_out) {
  const int h = static_cast<int>(map.rows()), w = static_cast<int>(map.cols());
  Eigen::ArrayXXi out = Eigen::ArrayXXi::Constant(h, w, -1);
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  std::vector<int> stack;
  std::vector<int> component;
  int next_label = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (out(r, c) >= 0) continue;
      int adjacent = -1;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr >= 0 && rr < h && cc >= 0 && cc < w && out(rr, cc) >= 0) adjacent = out(rr, cc);
      }
      component.clear();
      stack.assign(1, r * w + c);
      out(r, c) = next_label;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        component.push_back(p);
        const int pr = p / w, pc = p % w;
        for (int k = 0; k < 4; ++k) {
          const int rr = pr + dr[k], cc = pc + dc[k];
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          if (out(rr, cc) < 0 && map(rr, cc) == map(r, c)) {
            out(rr, cc) = next_label;
            stack.push_back(rr * w + cc);
          }
        }
      }
      if (static_cast<int>(component.size()) < min_size && adjacent >= 0) {
        for (const int p : component) out(p / w, p % w) = adjacent;
      } else {
        ++next_label;
      }
    }
  }
  n_out = next_label;
  return out;
}

}  // namespace

SuperpixelDecomposition slic_segment(const LabImage& lab, int target_count, double compactness) {
  const int h = lab.height(), w = lab.width();
  if (target_count <= 0) throw std::invalid_argument("target_count must be positive");
  if (compactness <= 0) throw std::invalid_argument("compactness must be positive");
  const int n_pixels = h * w;
  target_count = std::min(target_count, n_pixels);

  const double S = std::sqrt(static_cast<double>(n_pixels) / target_count);
  const int step = std::max(1, static_cast<int>(std::lround(S)));
  const Gradient grad = lab_gradient(lab);
  std::vector<Cluster> clusters = seed_clusters(lab, grad, step);
  const float spatial_scale = static_cast<float>(compactness / S);

  Eigen::ArrayXXi assignment = Eigen::ArrayXXi::Constant(h, w, -1);
  Eigen::ArrayXXf distance(h, w);
  const int window = 2 * step;
  for (int iter = 0; iter < 10; ++iter) {
    distance.setConstant(std::numeric_limits<float>::max());
    assignment.setConstant(-1);
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      const Cluster& cl = clusters[k];
      const int r0 = std::max(0, static_cast<int>(cl.row) - window);
      const int r1 = std::min(h - 1, static_cast<int>(cl.row) + window);
      const int c0 = std::max(0, static_cast<int>(cl.col) - window);
      const int c1 = std::min(w - 1, static_cast<int>(cl.col) + window);
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const float dL = lab.L(r, c) - cl.L;
          const float da = lab.a(r, c) - cl.a;
          const float db = lab.b(r, c) - cl.b;
          const float drr = static_cast<float>(r) - cl.row;
          const float dcc = static_cast<float>(c) - cl.col;
          const float d = std::sqrt(dL * dL + da * da + db * db) +
                          spatial_scale * std::sqrt(drr * drr + dcc * dcc);
          if (d < distance(r, c)) {
            distance(r, c) = d;
            assignment(r, c) = static_cast<int>(k);
          }
        }
      }
    }
    // Window coverage can miss pixels on extreme aspect ratios; bind those to
    // the nearest cluster directly.
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (assignment(r, c) >= 0) continue;
        float best = std::numeric_limits<float>::max();
        for (std::size_t k = 0; k < clusters.size(); ++k) {
          const float drr = static_cast<float>(r) - clusters[k].row;
          const float dcc = static_cast<float>(c) - clusters[k].col;
          const float d = drr * drr + dcc * dcc;
          if (d < best) {
            best = d;
            assignment(r, c) = static_cast<int>(k);
          }
        }
      }
    }

    std::vector<Cluster> sums(clusters.size());
    std::vector<int> counts(clusters.size(), 0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int k = assignment(r, c);
        sums[static_cast<std::size_t>(k)].L += lab.L(r, c);
        sums[static_cast<std::size_t>(k)].a += lab.a(r, c);
        sums[static_cast<std::size_t>(k)].b += lab.b(r, c);
        sums[static_cast<std::size_t>(k)].row += static_cast<float>(r);
        sums[static_cast<std::size_t>(k)].col += static_cast<float>(c);
        ++counts[static_cast<std::size_t>(k)];
      }
    }
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      if (counts[k] == 0) continue;  // keep empty clusters where they were
      const float inv = 1.0f / static_cast<float>(counts[k]);
      clusters[k].L = sums[k].L * inv;
      clusters[k].a = sums[k].a * inv;
      clusters[k].b = sums[k].b * inv;
      clusters[k].row = sums[k].row * inv;
      clusters[k].col = sums[k].col * inv;
    }
  }

  SuperpixelDecomposition decomposition;
  const int min_size = std::max(1, static_cast<int>(S * S / 2.0));
  decomposition.segment_map = enforce_connectivity(assignment, min_size, decomposition.n_segments);

  decomposition.pixels.assign(static_cast<std::size_t>(decomposition.n_segments), {});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      decomposition.pixels[static_cast<std::size_t>(decomposition.segment_map(r, c))].push_back(r * w + c);

  decomposition.centroids.resize(2, decomposition.n_segments);
  for (int s = 0; s < decomposition.n_segments; ++s) {
    double row_sum = 0, col_sum = 0;
    for (const int p : decomposition.pixels[static_cast<std::size_t>(s)]) {
      row_sum += p / w;
      col_sum += p % w;
    }
    const double n = static_cast<double>(decomposition.pixels[static_cast<std::size_t>(s)].size());
    decomposition.centroids(0, s) = row_sum / n / std::max(1, h - 1);
    decomposition.centroids(1, s) = col_sum / n / std::max(1, w - 1);
  }
  return decomposition;
}

SuperpixelDecomposition slic_segment(const ImageU8& image, int target_count, double compactness) {
  return slic_segment(rgb_to_lab(image), target_count, compactness);
}

AdjacencyList adjacency(const SuperpixelDecomposition& decomposition) {
  const auto& map = decomposition.segment_map;
  const int h = decomposition.height(), w = decomposition.width();
  AdjacencyList pairs;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int s = map(r, c);
      if (c + 1 < w && map(r, c + 1) != s)
        pairs.emplace_back(std::min(s, map(r, c + 1)), std::max(s, map(r, c + 1)));
      if (r + 1 < h && map(r + 1, c) != s)
        pairs.emplace_back(std::min(s, map(r + 1, c)), std::max(s, map(r + 1, c)));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

IdRaster segment_boundaries(const SuperpixelDecomposition& decomposition) {
  const auto& map = decomposition.segment_map;
  IdRaster mask(decomposition.height(), decomposition.width(), 0);
  for (int r = 0; r < decomposition.height(); ++r)
    for (int c = 0; c < decomposition.width(); ++c) {
      const bool edge = (c + 1 < decomposition.width() && map(r, c + 1) != map(r, c)) ||
                        (r + 1 < decomposition.height() && map(r + 1, c) != map(r, c));
      if (edge) mask.at(r, c) = 255;
    }
  return mask;
}

}  // namespace tagseg
