#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segfilter/manifest.hpp"
#include "segfilter/types.hpp"

#include "json.hpp"

namespace segfilter {

// How pseudo-label maps relate to the true objects: a discriminative core
// under-covers each object (central sub-rectangle), a dilated map over-covers
// it (inflated rectangle spilling onto the background).
enum class PseudoStyle { DiscriminativeCore, Dilated };

// Interior pixels of source_class objects get an elevated target_class logit;
// strength is the per-pixel probability that the elevated logit wins.
struct ConfusionPair {
  int source_class = 0;
  int target_class = 0;
  double strength = 0.0;
};

struct ObjectRange {
  int min_objects = 1;
  int max_objects = 3;
};

// Fully determines a generated dataset: identical configs (including seed)
// produce byte-identical directories. Each image derives independent RNG
// streams per purpose, so generation order and parallelism cannot change
// the output.
struct ScenarioConfig {
  std::uint64_t seed = 0;
  int num_images = 0;
  int num_classes = 0;
  int height = 0;
  int width = 0;
  std::vector<ConfusionPair> confusion_pairs;
  double classifier_quality = 1.0;  // probability a presence bit is scored
                                    // on the correct side of zero
  ObjectRange objects_per_image;
  PseudoStyle pseudo_style = PseudoStyle::DiscriminativeCore;
};

// Generator constants. Ground truth is axis-aligned rectangles of foreground
// classes painted over background; logits give the true class kLogitHigh and
// everything else kLogitLow plus per-pixel noise in [0, kLogitNoise). On
// object boundary pixels the true-class logit is softened by up to half the
// gap and the locally adjacent class is raised by up to the full gap, so
// boundaries flip only between the two classes that actually meet there.
// Classifier score magnitudes are uniform in [kScoreMarginLow, kScoreMarginHigh).
inline constexpr double kLogitLow = 0.0;
inline constexpr double kLogitHigh = 4.0;
inline constexpr double kLogitNoise = 1.0;
inline constexpr double kScoreMarginLow = 4.0;
inline constexpr double kScoreMarginHigh = 8.0;

// Throws InvalidConfig naming the offending field.
ScenarioConfig scenario_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig read_scenario_config(const std::filesystem::path& path);

// Writes SFLT logits, PGM ground-truth and pseudo maps, and a manifest with
// classifier scores and presence sets into out_dir; returns the manifest
// (also written as out_dir/manifest.json).
DatasetManifest generate_scenario(const ScenarioConfig& config,
                                  const std::filesystem::path& out_dir);

// +margin for present classes, -margin for absent ones.
ClassScores perfect_classifier_scores(const PresenceSet& presence,
                                      int num_foreground, double margin);

}  // namespace segfilter
