#pragma once

// The canonical fixed-seed scenario shared by the synth tests and the
// acceptance suite: six classes, two confusion pairs firing on interior
// pixels, and a near-perfect classifier.

#include "segfilter/synth.hpp"

namespace testsupport {

inline segfilter::ScenarioConfig seed42_scenario() {
  segfilter::ScenarioConfig config;
  config.seed = 42;
  config.num_images = 64;
  config.num_classes = 6;
  config.height = 64;
  config.width = 64;
  config.confusion_pairs = {{1, 2, 0.6}, {3, 4, 0.6}};
  config.classifier_quality = 0.98;
  config.objects_per_image = {1, 3};
  config.pseudo_style = segfilter::PseudoStyle::DiscriminativeCore;
  return config;
}

}  // namespace testsupport
