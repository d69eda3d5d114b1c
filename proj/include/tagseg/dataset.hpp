#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tagseg/image.hpp"

namespace tagseg {

/// Sorted, duplicate-free list of label ids.
using LabelSet = std::vector<int>;

/// Id raster value marking pixels outside every labeled class.
inline constexpr std::uint8_t kVoidLabel = 255;

struct Label {
  int id = 0;
  std::string name;
  std::array<std::uint8_t, 3> rgb{0, 0, 0};
};

struct TaggedImage {
  std::string identifier;  // filename stem, unique within a database
  ImageU8 pixels;
  LabelSet tags;  // nonempty
};

struct AuxiliaryDatabase {
  std::vector<TaggedImage> images;  // sorted by identifier
  std::vector<Label> label_table;   // ids dense 0..C-1, names unique

  int size() const { return static_cast<int>(images.size()); }
  int label_count() const { return static_cast<int>(label_table.size()); }
};

/// Per-pixel label ids aligned with an image; kVoidLabel marks unlabeled pixels.
struct GroundTruth {
  IdRaster label_map;
};

/// Loads `root/images/*.png|*.ppm` + `root/tags.json`, with optional
/// `root/labels.json` fixing ids and palette colors. Images are sorted by
/// identifier (filename stem); without labels.json, ids follow sorted tag
/// names. Throws DataError for a missing tags file, a tag entry naming an
/// absent file, an unreadable raster, or an empty database.
AuxiliaryDatabase load_dataset(const std::filesystem::path& root);

GroundTruth load_ground_truth(const std::filesystem::path& path,
                              const std::vector<Label>& label_table, int expected_height,
                              int expected_width);

/// Image + ground truth pairs from `root/images` and `root/gt`, for
/// evaluation runs; tags are not required.
struct EvalTarget {
  std::string identifier;
  ImageU8 pixels;
  GroundTruth truth;
};

std::vector<EvalTarget> load_eval_targets(const std::filesystem::path& root,
                                          const std::vector<Label>& label_table);

/// Writes the `images/ tags.json labels.json [gt/]` layout under root.
void write_dataset(const std::filesystem::path& root, const AuxiliaryDatabase& database,
                   const std::vector<GroundTruth>* truths = nullptr);

/// Writes `<stem>.labels.png` (raw id raster) and `<stem>.overlay.png`
/// (pixels tinted by the palette color of their label) into out_dir.
void write_result_rasters(const std::filesystem::path& out_dir, const std::string& stem,
                          const ImageU8& image, const IdRaster& labels,
                          const std::vector<Label>& label_table);

/// Deterministic distinct palette for label names that come without colors.
std::vector<Label> make_default_palette(const std::vector<std::string>& sorted_names);

/// Unique non-void ids present in a raster.
LabelSet labels_present(const IdRaster& raster);

/// Content hash covering label names, identifiers, tags and pixels.
std::uint64_t database_hash(const AuxiliaryDatabase& database);

/// Tag sets of all images, in database order.
std::vector<LabelSet> tag_sets(const AuxiliaryDatabase& database);

/// All label ids 0..C-1.
LabelSet full_label_set(const AuxiliaryDatabase& database);

}  // namespace tagseg
