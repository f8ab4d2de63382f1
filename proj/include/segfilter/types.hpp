#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

namespace segfilter {

// Pixels carrying this label are excluded from every metric.
inline constexpr std::uint8_t kIgnoreLabel = 255;

// Per-image segmentation scores: num_classes x height x width 32-bit floats,
// class-major then row-major, i.e. values[(c * H + h) * W + w].
struct LogitVolume {
  int num_classes = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  float at(int c, int h, int w) const {
    return values[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
  float& at(int c, int h, int w) {
    return values[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }

  bool operator==(const LogitVolume&) const = default;
};

// H x W grid of class ids, row-major, with kIgnoreLabel as the ignore
// sentinel. Used for ground truth, predictions and pseudo-labels alike.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int h, int w) const {
    return labels[static_cast<std::size_t>(h) * width + w];
  }
  std::uint8_t& at(int h, int w) {
    return labels[static_cast<std::size_t>(h) * width + w];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
  bool same_shape(const LabelMap& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const LabelMap&) const = default;
};

LabelMap make_label_map(int height, int width, std::uint8_t fill = 0);

// Classifier output logits, one per foreground class in ascending class-id
// order (length K-1 for a dataset with one background class).
struct ClassScores {
  std::vector<double> values;

  bool operator==(const ClassScores&) const = default;
};

// Foreground class ids present somewhere in an image.
using PresenceSet = std::set<int>;

// Foreground-index <-> global-class-id mapping. Foreground classes are all
// classes except the background one, in ascending order.
int foreground_count(int num_classes);
int class_for_foreground_index(int fg_index, int background_class);
int foreground_index_for_class(int class_id, int background_class);
std::vector<int> foreground_classes(int num_classes, int background_class);

}  // namespace segfilter
