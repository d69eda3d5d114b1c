#include "tagseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

#include "tagseg/errors.hpp"
#include "tagseg/image_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace tagseg {

namespace {

constexpr int kMinImageSide = 16;

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("missing ") + what + ": " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ") + what + " (" + path.string() + "): " + e.what());
  }
  return j;
}

std::vector<Label> parse_label_table(const fs::path& path) {
  const json j = read_json_file(path, "labels file");
  if (!j.contains("labels") || !j["labels"].is_array())
    throw DataError("malformed labels file: " + path.string());
  std::vector<Label> table;
  for (const auto& entry : j["labels"]) {
    Label label;
    label.id = entry.at("id").get<int>();
    label.name = entry.at("name").get<std::string>();
    const auto& rgb = entry.at("rgb");
    for (int c = 0; c < 3; ++c) label.rgb[static_cast<std::size_t>(c)] = rgb.at(c).get<std::uint8_t>();
    table.push_back(std::move(label));
  }
  std::sort(table.begin(), table.end(), [](const Label& a, const Label& b) { return a.id < b.id; });
  std::set<std::string> names;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].id != static_cast<int>(i))
      throw DataError("label ids not dense in " + path.string());
    if (!names.insert(table[i].name).second)
      throw DataError("duplicate label name in " + path.string());
  }
  return table;
}

// HSV (s=v fixed) -> RGB, used for generated palettes.
std::array<std::uint8_t, 3> hue_color(double hue) {
  const double h = hue * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double v = 0.85, s = 0.7;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::lround(x * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

void validate_image(const TaggedImage& image) {
  if (image.pixels.height < kMinImageSide || image.pixels.width < kMinImageSide)
    throw DataError("image too small (min side " + std::to_string(kMinImageSide) +
                    "): " + image.identifier);
}

}  // namespace

std::vector<Label> make_default_palette(const std::vector<std::string>& sorted_names) {
  std::vector<Label> table;
  table.reserve(sorted_names.size());
  const double golden = 0.6180339887498949;
  for (std::size_t i = 0; i < sorted_names.size(); ++i) {
    Label label;
    label.id = static_cast<int>(i);
    label.name = sorted_names[i];
    label.rgb = hue_color(std::fmod(0.13 + golden * static_cast<double>(i), 1.0));
    table.push_back(std::move(label));
  }
  return table;
}

AuxiliaryDatabase load_dataset(const fs::path& root) {
  const fs::path images_dir = root / "images";
  if (!fs::is_directory(images_dir))
    throw DataError("missing images directory: " + images_dir.string());

  const json tags = read_json_file(root / "tags.json", "tags file");
  if (!tags.is_object()) throw DataError("malformed tags file: " + (root / "tags.json").string());
  if (tags.empty()) throw DataError("empty database: " + root.string());

  AuxiliaryDatabase db;
  const fs::path labels_path = root / "labels.json";
  std::map<std::string, int> name_to_id;
  const bool fixed_table = fs::exists(labels_path);
  if (fixed_table) {
    db.label_table = parse_label_table(labels_path);
    for (const auto& label : db.label_table) name_to_id[label.name] = label.id;
  } else {
    std::set<std::string> names;
    for (const auto& [file, list] : tags.items()) {
      (void)file;
      for (const auto& name : list) names.insert(name.get<std::string>());
    }
    db.label_table = make_default_palette({names.begin(), names.end()});
    for (const auto& label : db.label_table) name_to_id[label.name] = label.id;
  }

  for (const auto& [file, list] : tags.items()) {
    const fs::path image_path = images_dir / file;
    if (!fs::exists(image_path))
      throw DataError("tags reference a missing image: " + image_path.string());
    TaggedImage image;
    image.identifier = fs::path(file).stem().string();
    image.pixels = read_image(image_path);
    if (!list.is_array() || list.empty())
      throw DataError("image has no tags: " + file);
    std::set<int> ids;
    for (const auto& name : list) {
      const auto it = name_to_id.find(name.get<std::string>());
      if (it == name_to_id.end())
        throw DataError("unknown tag \"" + name.get<std::string>() + "\" on " + file);
      ids.insert(it->second);
    }
    image.tags.assign(ids.begin(), ids.end());
    validate_image(image);
    db.images.push_back(std::move(image));
  }

  std::sort(db.images.begin(), db.images.end(),
            [](const TaggedImage& a, const TaggedImage& b) { return a.identifier < b.identifier; });
  for (std::size_t i = 1; i < db.images.size(); ++i)
    if (db.images[i].identifier == db.images[i - 1].identifier)
      throw DataError("duplicate image identifier: " + db.images[i].identifier);
  return db;
}

GroundTruth load_ground_truth(const fs::path& path, const std::vector<Label>& label_table,
                              int expected_height, int expected_width) {
  GroundTruth truth;
  truth.label_map = read_id_raster(path);
  if (truth.label_map.height != expected_height || truth.label_map.width != expected_width)
    throw DataError("ground truth dimensions mismatch: " + path.string());
  const int C = static_cast<int>(label_table.size());
  for (const std::uint8_t v : truth.label_map.id)
    if (v != kVoidLabel && v >= C)
      throw DataError("unknown label id " + std::to_string(v) + " in " + path.string());
  return truth;
}

std::vector<EvalTarget> load_eval_targets(const fs::path& root,
                                          const std::vector<Label>& label_table) {
  const fs::path images_dir = root / "images";
  const fs::path gt_dir = root / "gt";
  if (!fs::is_directory(images_dir))
    throw DataError("missing images directory: " + images_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no target images under " + images_dir.string());

  std::vector<EvalTarget> targets;
  for (const auto& file : files) {
    EvalTarget target;
    target.identifier = file.stem().string();
    target.pixels = read_image(file);
    const fs::path gt_path = gt_dir / (target.identifier + ".png");
    if (!fs::exists(gt_path)) throw DataError("missing ground truth: " + gt_path.string());
    target.truth = load_ground_truth(gt_path, label_table, target.pixels.height,
                                     target.pixels.width);
    targets.push_back(std::move(target));
  }
  return targets;
}

void write_dataset(const fs::path& root, const AuxiliaryDatabase& database,
                   const std::vector<GroundTruth>* truths) {
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (truths) fs::create_directories(root / "gt", ec);

  json tags = json::object();
  for (std::size_t i = 0; i < database.images.size(); ++i) {
    const TaggedImage& image = database.images[i];
    const std::string file = image.identifier + ".png";
    write_image_png(root / "images" / file, image.pixels);
    json names = json::array();
    for (const int id : image.tags) names.push_back(database.label_table[static_cast<std::size_t>(id)].name);
    tags[file] = names;
    if (truths) write_id_raster_png(root / "gt" / (image.identifier + ".png"), (*truths)[i].label_map);
  }

  json labels = json::array();
  for (const auto& label : database.label_table)
    labels.push_back({{"id", label.id},
                      {"name", label.name},
                      {"rgb", {label.rgb[0], label.rgb[1], label.rgb[2]}}});

  std::ofstream tags_out(root / "tags.json");
  if (!tags_out) throw DataError("unwritable path: " + (root / "tags.json").string());
  tags_out << tags.dump(2) << "\n";
  std::ofstream labels_out(root / "labels.json");
  labels_out << json{{"labels", labels}}.dump(2) << "\n";
}

void write_result_rasters(const fs::path& out_dir, const std::string& stem, const ImageU8& image,
                          const IdRaster& labels, const std::vector<Label>& label_table) {
  if (labels.height != image.height || labels.width != image.width)
    throw DataError("label raster dimensions mismatch for " + stem);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_id_raster_png(out_dir / (stem + ".labels.png"), labels);

  ImageU8 overlay(image.height, image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const std::uint8_t id = labels.at(r, c);
      const std::uint8_t* src = image.px(r, c);
      std::uint8_t* dst = overlay.px(r, c);
      if (id == kVoidLabel || id >= label_table.size()) {
        dst[0] = src[0], dst[1] = src[1], dst[2] = src[2];
        continue;
      }
      const auto& tint = label_table[id].rgb;
      for (int ch = 0; ch < 3; ++ch)
        dst[ch] = static_cast<std::uint8_t>((static_cast<int>(src[ch]) + tint[static_cast<std::size_t>(ch)]) / 2);
    }
  }
  write_image_png(out_dir / (stem + ".overlay.png"), overlay);
}

LabelSet labels_present(const IdRaster& raster) {
  std::set<int> present;
  for (const std::uint8_t v : raster.id)
    if (v != kVoidLabel) present.insert(v);
  return {present.begin(), present.end()};
}

std::uint64_t database_hash(const AuxiliaryDatabase& database) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& label : database.label_table) mix(label.name.data(), label.name.size());
  for (const auto& image : database.images) {
    mix(image.identifier.data(), image.identifier.size());
    mix(image.tags.data(), image.tags.size() * sizeof(int));
    mix(&image.pixels.height, sizeof(int));
    mix(&image.pixels.width, sizeof(int));
    mix(image.pixels.rgb.data(), image.pixels.rgb.size());
  }
  return h;
}

std::vector<LabelSet> tag_sets(const AuxiliaryDatabase& database) {
  std::vector<LabelSet> sets;
  sets.reserve(database.images.size());
  for (const auto& image : database.images) sets.push_back(image.tags);
  return sets;
}

LabelSet full_label_set(const AuxiliaryDatabase& database) {
  LabelSet all(static_cast<std::size_t>(database.label_count()));
  for (int i = 0; i < database.label_count(); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

}  // namespace tagseg
