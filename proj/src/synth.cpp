#include "segfilter/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "segfilter/error.hpp"
#include "segfilter/rng.hpp"
#include "segfilter/tensor_io.hpp"

namespace segfilter {

namespace {

using nlohmann::json;

// Purpose tags for per-image RNG streams; changing classifier quality only
// touches the score stream, so the images themselves stay fixed.
constexpr std::uint64_t kTagObjects = 0x6f626a65637473ull;  // "objects"
constexpr std::uint64_t kTagLogits = 0x6c6f67697473ull;     // "logits"
constexpr std::uint64_t kTagScores = 0x73636f726573ull;     // "scores"

constexpr double kConfusionGap = 2.0;

struct ObjectRect {
  int class_id = 0;
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;  // half-open [r0,r1) x [c0,c1)
};

std::vector<ObjectRect> sample_objects(const ScenarioConfig& config, Rng& rng) {
  const int count = rng.range(config.objects_per_image.min_objects,
                              config.objects_per_image.max_objects);
  const int min_h = std::max(2, config.height / 8);
  const int max_h = std::max(min_h, config.height / 2);
  const int min_w = std::max(2, config.width / 8);
  const int max_w = std::max(min_w, config.width / 2);

  std::vector<ObjectRect> objects;
  objects.reserve(count);
  for (int n = 0; n < count; ++n) {
    ObjectRect rect;
    rect.class_id = 1 + static_cast<int>(rng.below(config.num_classes - 1));
    const int h = rng.range(min_h, max_h);
    const int w = rng.range(min_w, max_w);
    rect.r0 = static_cast<int>(rng.below(config.height - h + 1));
    rect.c0 = static_cast<int>(rng.below(config.width - w + 1));
    rect.r1 = rect.r0 + h;
    rect.c1 = rect.c0 + w;
    objects.push_back(rect);
  }
  return objects;
}

LabelMap paint_objects(const std::vector<ObjectRect>& objects, int height,
                       int width) {
  LabelMap map = make_label_map(height, width, 0);
  for (const ObjectRect& rect : objects) {
    for (int r = rect.r0; r < rect.r1; ++r) {
      for (int c = rect.c0; c < rect.c1; ++c) {
        map.at(r, c) = static_cast<std::uint8_t>(rect.class_id);
      }
    }
  }
  return map;
}

// A pixel is a boundary pixel when any 4-neighbour carries a different label.
// Returns the first differing neighbour's label (up, left, right, down), or
// -1 for interior pixels.
int boundary_neighbor(const LabelMap& gt, int r, int c) {
  const std::uint8_t label = gt.at(r, c);
  if (r > 0 && gt.at(r - 1, c) != label) return gt.at(r - 1, c);
  if (c > 0 && gt.at(r, c - 1) != label) return gt.at(r, c - 1);
  if (c + 1 < gt.width && gt.at(r, c + 1) != label) return gt.at(r, c + 1);
  if (r + 1 < gt.height && gt.at(r + 1, c) != label) return gt.at(r + 1, c);
  return -1;
}

LogitVolume make_logits(const ScenarioConfig& config, const LabelMap& gt,
                        Rng& rng) {
  LogitVolume logits;
  logits.num_classes = config.num_classes;
  logits.height = config.height;
  logits.width = config.width;
  logits.values.assign(static_cast<std::size_t>(config.num_classes) *
                           config.height * config.width,
                       0.0f);

  const double gap = kLogitHigh - kLogitLow;
  const std::size_t pixels = gt.pixel_count();
  std::vector<double> row(config.num_classes);
  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      const int true_class = gt.at(r, c);
      for (int k = 0; k < config.num_classes; ++k) {
        const double noise = rng.uniform(0.0, kLogitNoise);
        row[k] = (k == true_class ? kLogitHigh : kLogitLow) + noise;
      }
      const int neighbor = boundary_neighbor(gt, r, c);
      if (neighbor >= 0) {
        // Soften the boundary: only the two classes that meet here compete,
        // so flips never introduce a class absent from the image.
        row[true_class] = kLogitHigh - rng.uniform01() * (gap / 2.0);
        row[neighbor] = kLogitLow + rng.uniform01() * gap;
      } else {
        for (const ConfusionPair& pair : config.confusion_pairs) {
          if (pair.source_class != true_class) continue;
          // The elevated logit wins with probability exactly `strength`.
          const double u = rng.uniform01();
          row[pair.target_class] =
              row[true_class] + kConfusionGap * (u + pair.strength - 1.0);
        }
      }
      const std::size_t p = static_cast<std::size_t>(r) * config.width + c;
      for (int k = 0; k < config.num_classes; ++k) {
        logits.values[static_cast<std::size_t>(k) * pixels + p] =
            static_cast<float>(row[k]);
      }
    }
  }
  return logits;
}

LabelMap make_pseudo(const ScenarioConfig& config,
                     const std::vector<ObjectRect>& objects) {
  std::vector<ObjectRect> transformed;
  transformed.reserve(objects.size());
  for (const ObjectRect& rect : objects) {
    ObjectRect out = rect;
    if (config.pseudo_style == PseudoStyle::DiscriminativeCore) {
      // CAM-like core: keep the central ~40% of each side.
      const int inset_h = (rect.r1 - rect.r0) * 3 / 10;
      const int inset_w = (rect.c1 - rect.c0) * 3 / 10;
      out.r0 = rect.r0 + inset_h;
      out.r1 = rect.r1 - inset_h;
      out.c0 = rect.c0 + inset_w;
      out.c1 = rect.c1 - inset_w;
      if (out.r0 >= out.r1) {
        out.r0 = (rect.r0 + rect.r1) / 2;
        out.r1 = out.r0 + 1;
      }
      if (out.c0 >= out.c1) {
        out.c0 = (rect.c0 + rect.c1) / 2;
        out.c1 = out.c0 + 1;
      }
    } else {
      // Over-grown map spilling onto the background.
      const int grow_h = std::max(1, (rect.r1 - rect.r0) / 5);
      const int grow_w = std::max(1, (rect.c1 - rect.c0) / 5);
      out.r0 = std::max(0, rect.r0 - grow_h);
      out.r1 = std::min(config.height, rect.r1 + grow_h);
      out.c0 = std::max(0, rect.c0 - grow_w);
      out.c1 = std::min(config.width, rect.c1 + grow_w);
    }
    transformed.push_back(out);
  }
  return paint_objects(transformed, config.height, config.width);
}

ClassScores make_scores(const ScenarioConfig& config, const PresenceSet& presence,
                        Rng& rng) {
  ClassScores scores;
  const int num_fg = foreground_count(config.num_classes);
  scores.values.reserve(num_fg);
  for (int i = 0; i < num_fg; ++i) {
    const int class_id = i + 1;
    const bool present = presence.count(class_id) > 0;
    const bool correct = rng.uniform01() < config.classifier_quality;
    const double margin = rng.uniform(kScoreMarginLow, kScoreMarginHigh);
    const double sign = (present == correct) ? 1.0 : -1.0;
    scores.values.push_back(sign * margin);
  }
  return scores;
}

std::string image_name(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "img_%05d", index);
  return buffer;
}

void validate_config(const ScenarioConfig& config) {
  const auto fail = [](const std::string& message) {
    raise(ErrorCode::InvalidConfig, message);
  };
  if (config.num_images < 1) fail("num_images must be positive");
  if (config.num_classes < 2 || config.num_classes > 255) {
    fail("num_classes must be in [2, 255]");
  }
  if (config.height < 8 || config.width < 8) {
    fail("height and width must be at least 8");
  }
  if (config.classifier_quality < 0.0 || config.classifier_quality > 1.0) {
    fail("classifier_quality must be in [0, 1]");
  }
  if (config.objects_per_image.min_objects < 1 ||
      config.objects_per_image.max_objects < config.objects_per_image.min_objects) {
    fail("objects_per_image must satisfy 1 <= min <= max");
  }
  for (const ConfusionPair& pair : config.confusion_pairs) {
    if (pair.source_class < 1 || pair.source_class >= config.num_classes ||
        pair.target_class < 1 || pair.target_class >= config.num_classes) {
      fail("confusion_pairs classes must be foreground classes");
    }
    if (pair.source_class == pair.target_class) {
      fail("confusion_pairs source and target must differ");
    }
    if (pair.strength < 0.0 || pair.strength > 1.0) {
      fail("confusion_pairs strength must be in [0, 1]");
    }
  }
}

}  // namespace

ScenarioConfig scenario_config_from_json(const json& doc) {
  ScenarioConfig config;
  const auto fail = [](const std::string& message) {
    raise(ErrorCode::InvalidConfig, message);
  };
  const auto get_int = [&](const char* field, int fallback, bool required) {
    if (!doc.contains(field)) {
      if (required) fail(std::string("missing field \"") + field + "\"");
      return fallback;
    }
    if (!doc.at(field).is_number_integer()) {
      fail(std::string("field \"") + field + "\" must be an integer");
    }
    return doc.at(field).get<int>();
  };

  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_integer()) fail("field \"seed\" must be an integer");
    config.seed = doc.at("seed").get<std::uint64_t>();
  }
  config.num_images = get_int("num_images", 0, true);
  config.num_classes = get_int("num_classes", 0, true);
  config.height = get_int("height", 0, true);
  config.width = get_int("width", 0, true);
  if (doc.contains("classifier_quality")) {
    if (!doc.at("classifier_quality").is_number()) {
      fail("field \"classifier_quality\" must be a number");
    }
    config.classifier_quality = doc.at("classifier_quality").get<double>();
  }
  if (doc.contains("objects_per_image")) {
    const json& range = doc.at("objects_per_image");
    config.objects_per_image.min_objects =
        range.contains("min") ? range.at("min").get<int>() : 1;
    config.objects_per_image.max_objects =
        range.contains("max") ? range.at("max").get<int>() : 3;
  }
  if (doc.contains("confusion_pairs")) {
    if (!doc.at("confusion_pairs").is_array()) {
      fail("field \"confusion_pairs\" must be an array");
    }
    for (const json& entry : doc.at("confusion_pairs")) {
      ConfusionPair pair;
      pair.source_class = entry.at("source_class").get<int>();
      pair.target_class = entry.at("target_class").get<int>();
      pair.strength = entry.at("strength").get<double>();
      config.confusion_pairs.push_back(pair);
    }
  }
  if (doc.contains("pseudo_style")) {
    const std::string style = doc.at("pseudo_style").get<std::string>();
    if (style == "discriminative_core") {
      config.pseudo_style = PseudoStyle::DiscriminativeCore;
    } else if (style == "dilated") {
      config.pseudo_style = PseudoStyle::Dilated;
    } else {
      fail("field \"pseudo_style\" must be \"discriminative_core\" or \"dilated\"");
    }
  }
  validate_config(config);
  return config;
}

json to_json(const ScenarioConfig& config) {
  json pairs = json::array();
  for (const ConfusionPair& pair : config.confusion_pairs) {
    pairs.push_back(json{{"source_class", pair.source_class},
                         {"target_class", pair.target_class},
                         {"strength", pair.strength}});
  }
  return json{
      {"seed", config.seed},
      {"num_images", config.num_images},
      {"num_classes", config.num_classes},
      {"height", config.height},
      {"width", config.width},
      {"confusion_pairs", std::move(pairs)},
      {"classifier_quality", config.classifier_quality},
      {"objects_per_image",
       json{{"min", config.objects_per_image.min_objects},
            {"max", config.objects_per_image.max_objects}}},
      {"pseudo_style", config.pseudo_style == PseudoStyle::DiscriminativeCore
                           ? "discriminative_core"
                           : "dilated"}};
}

ScenarioConfig read_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    raise(ErrorCode::InvalidConfig, path.string() + ": " + err.what());
  }
  return scenario_config_from_json(doc);
}

DatasetManifest generate_scenario(const ScenarioConfig& config,
                                  const std::filesystem::path& out_dir) {
  validate_config(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(ErrorCode::IoFailure, "cannot create " + out_dir.string() +
                                          ": " + ec.message());

  DatasetManifest manifest;
  manifest.num_classes = config.num_classes;
  manifest.background_class = 0;
  manifest.base_dir = out_dir;

  for (int i = 0; i < config.num_images; ++i) {
    Rng object_rng = Rng::stream(config.seed, i, kTagObjects);
    Rng logit_rng = Rng::stream(config.seed, i, kTagLogits);
    Rng score_rng = Rng::stream(config.seed, i, kTagScores);

    const std::vector<ObjectRect> objects = sample_objects(config, object_rng);
    const LabelMap gt = paint_objects(objects, config.height, config.width);
    const LogitVolume logits = make_logits(config, gt, logit_rng);
    const LabelMap pseudo = make_pseudo(config, objects);
    const PresenceSet presence = presence_from_label_map(gt, 0);
    const ClassScores scores = make_scores(config, presence, score_rng);

    ManifestRecord record;
    record.image_id = image_name(i);
    record.logits_path = record.image_id + "_logits.sflt";
    record.gt_path = record.image_id + "_gt.pgm";
    record.pseudo_path = record.image_id + "_pseudo.pgm";
    record.classifier_scores = scores;
    record.presence = presence;

    write_logits(logits, out_dir / record.logits_path);
    write_label_map(gt, out_dir / *record.gt_path);
    write_label_map(pseudo, out_dir / *record.pseudo_path);
    manifest.records.push_back(std::move(record));
  }

  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

ClassScores perfect_classifier_scores(const PresenceSet& presence,
                                      int num_foreground, double margin) {
  if (!(margin > 0.0)) {
    raise(ErrorCode::InvalidConfig, "margin must be positive");
  }
  ClassScores scores;
  scores.values.reserve(num_foreground);
  for (int i = 0; i < num_foreground; ++i) {
    scores.values.push_back(presence.count(i + 1) > 0 ? margin : -margin);
  }
  return scores;
}

}  // namespace segfilter
