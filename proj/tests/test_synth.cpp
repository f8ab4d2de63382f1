#include <cmath>
#include <functional>

#include "doctest.h"

#include "segfilter/error.hpp"
#include "segfilter/filtering.hpp"
#include "segfilter/metrics.hpp"
#include "segfilter/synth.hpp"
#include "segfilter/tensor_io.hpp"

#include "scenario_fixtures.hpp"
#include "support.hpp"

using namespace segfilter;
using testsupport::TempDir;

namespace {

double dataset_miou(const DatasetManifest& manifest,
                    const std::function<LabelMap(const LoadedRecord&,
                                                 const ManifestRecord&)>& predict) {
  ConfusionMatrix confusion(manifest.num_classes);
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const LoadedRecord loaded = load_record(manifest, i);
    confusion.accumulate(*loaded.gt, predict(loaded, manifest.records[i]));
  }
  return iou_from_confusion(confusion).miou;
}

double filtered_miou(const DatasetManifest& manifest, double tau) {
  return dataset_miou(manifest, [&](const LoadedRecord& loaded,
                                    const ManifestRecord& record) {
    FilterConfig config;
    config.tau = tau;
    config.always_allow = {manifest.background_class};
    return filtered_predict(loaded.logits,
                            allowed_set_from_classifier(
                                *record.classifier_scores, config,
                                manifest.num_classes, manifest.background_class));
  });
}

}  // namespace

TEST_CASE("generation is deterministic: same config, same bytes") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 6;  // enough to cover every file kind
  TempDir dir_a, dir_b;
  generate_scenario(config, dir_a.path());
  generate_scenario(config, dir_b.path());
  const auto a = testsupport::dir_contents(dir_a.path());
  const auto b = testsupport::dir_contents(dir_b.path());
  REQUIRE(a.size() == b.size());
  CHECK(a == b);
}

TEST_CASE("manifest presence sets agree with the generated ground truth") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 10;
  TempDir dir;
  const DatasetManifest manifest = generate_scenario(config, dir.path());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const LoadedRecord loaded = load_record(manifest, i);
    REQUIRE(*manifest.records[i].presence ==
            presence_from_label_map(*loaded.gt, manifest.background_class));
  }
}

TEST_CASE("without confusion and with a perfect classifier nothing changes") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 8;
  config.confusion_pairs.clear();
  config.classifier_quality = 1.0;
  TempDir dir;
  const DatasetManifest manifest = generate_scenario(config, dir.path());

  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const LoadedRecord loaded = load_record(manifest, i);
    const LabelMap baseline = argmax_predict(loaded.logits);

    // Baseline equals ground truth on every non-boundary pixel.
    for (int r = 0; r < loaded.gt->height; ++r) {
      for (int c = 0; c < loaded.gt->width; ++c) {
        const std::uint8_t label = loaded.gt->at(r, c);
        const bool boundary =
            (r > 0 && loaded.gt->at(r - 1, c) != label) ||
            (c > 0 && loaded.gt->at(r, c - 1) != label) ||
            (c + 1 < loaded.gt->width && loaded.gt->at(r, c + 1) != label) ||
            (r + 1 < loaded.gt->height && loaded.gt->at(r + 1, c) != label);
        if (!boundary) REQUIRE(baseline.at(r, c) == label);
      }
    }

    // Filtering changes nothing: every predicted class is genuinely present.
    FilterConfig filter;
    filter.tau = 0.0;
    filter.always_allow = {manifest.background_class};
    const LabelMap filtered = filtered_predict(
        loaded.logits,
        allowed_set_from_classifier(*manifest.records[i].classifier_scores,
                                    filter, manifest.num_classes,
                                    manifest.background_class));
    REQUIRE(filtered == baseline);
  }
}

TEST_CASE("filtered mIoU is non-decreasing in classifier quality") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 24;
  double previous = -1.0;
  for (const double quality : {0.5, 0.8, 0.95, 1.0}) {
    config.classifier_quality = quality;
    TempDir dir;
    const DatasetManifest manifest = generate_scenario(config, dir.path());
    const double miou = filtered_miou(manifest, 0.0);
    REQUIRE(miou >= previous);
    previous = miou;
  }
}

TEST_CASE("perfect classifier scores encode presence as signed margins") {
  CHECK(perfect_classifier_scores(PresenceSet{1, 3}, 4, 10.0).values ==
        std::vector<double>{10.0, -10.0, 10.0, -10.0});
  CHECK(perfect_classifier_scores(PresenceSet{}, 3, 2.5).values ==
        std::vector<double>{-2.5, -2.5, -2.5});
  CHECK_THROWS_AS(perfect_classifier_scores(PresenceSet{}, 3, 0.0), Error);
}

TEST_CASE("perfect scores at tau zero reproduce oracle filtering everywhere") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 12;
  TempDir dir;
  const DatasetManifest manifest = generate_scenario(config, dir.path());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const LoadedRecord loaded = load_record(manifest, i);
    const ClassScores scores = perfect_classifier_scores(
        *manifest.records[i].presence, foreground_count(manifest.num_classes),
        10.0);
    FilterConfig filter;
    filter.tau = 0.0;
    filter.always_allow = {manifest.background_class};
    const LabelMap filtered = filtered_predict(
        loaded.logits, allowed_set_from_classifier(scores, filter,
                                                   manifest.num_classes,
                                                   manifest.background_class));
    const LabelMap oracle = oracle_filter_predict(loaded.logits, *loaded.gt,
                                                  manifest.background_class);
    REQUIRE(filtered == oracle);
  }
}

TEST_CASE("the confusion scenario rewards filtering and bounds it by oracle") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 16;  // the acceptance suite runs the full 64
  TempDir dir;
  const DatasetManifest manifest = generate_scenario(config, dir.path());

  const double baseline = dataset_miou(
      manifest, [](const LoadedRecord& loaded, const ManifestRecord&) {
        return argmax_predict(loaded.logits);
      });
  const double filtered = filtered_miou(manifest, 0.0);
  const double oracle = dataset_miou(
      manifest, [&](const LoadedRecord& loaded, const ManifestRecord&) {
        return oracle_filter_predict(loaded.logits, *loaded.gt,
                                     manifest.background_class);
      });
  CHECK(filtered - baseline >= 0.03);
  CHECK(oracle >= filtered);
}

TEST_CASE("scenario configs round-trip through JSON") {
  const ScenarioConfig config = testsupport::seed42_scenario();
  const ScenarioConfig back = scenario_config_from_json(to_json(config));
  CHECK(back.seed == config.seed);
  CHECK(back.num_images == config.num_images);
  CHECK(back.confusion_pairs.size() == 2);
  CHECK(back.confusion_pairs[1].target_class == 4);
  CHECK(back.classifier_quality == config.classifier_quality);
}

TEST_CASE("scenario validation names the offending field") {
  nlohmann::json doc = to_json(testsupport::seed42_scenario());
  doc["num_images"] = -3;
  try {
    scenario_config_from_json(doc);
    FAIL("expected InvalidConfig");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::InvalidConfig);
    CHECK(std::string(err.what()).find("num_images") != std::string::npos);
  }
}

TEST_CASE("pseudo styles under- and over-cover objects") {
  ScenarioConfig config = testsupport::seed42_scenario();
  config.num_images = 4;
  config.confusion_pairs.clear();

  config.pseudo_style = PseudoStyle::DiscriminativeCore;
  TempDir core_dir;
  const DatasetManifest core = generate_scenario(config, core_dir.path());

  config.pseudo_style = PseudoStyle::Dilated;
  TempDir dilated_dir;
  const DatasetManifest dilated = generate_scenario(config, dilated_dir.path());

  std::uint64_t core_fg = 0, dilated_fg = 0, gt_fg = 0;
  for (std::size_t i = 0; i < core.records.size(); ++i) {
    const LoadedRecord core_rec = load_record(core, i);
    const LoadedRecord dilated_rec = load_record(dilated, i);
    for (std::size_t p = 0; p < core_rec.gt->labels.size(); ++p) {
      gt_fg += core_rec.gt->labels[p] != 0;
      core_fg += core_rec.pseudo->labels[p] != 0;
      dilated_fg += dilated_rec.pseudo->labels[p] != 0;
    }
  }
  CHECK(core_fg < gt_fg);
  CHECK(dilated_fg > gt_fg);
}
