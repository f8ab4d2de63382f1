#include "segfilter/types.hpp"

namespace segfilter {

LabelMap make_label_map(int height, int width, std::uint8_t fill) {
  LabelMap map;
  map.height = height;
  map.width = width;
  map.labels.assign(static_cast<std::size_t>(height) * width, fill);
  return map;
}

int foreground_count(int num_classes) { return num_classes - 1; }

int class_for_foreground_index(int fg_index, int background_class) {
  return fg_index < background_class ? fg_index : fg_index + 1;
}

int foreground_index_for_class(int class_id, int background_class) {
  return class_id < background_class ? class_id : class_id - 1;
}

std::vector<int> foreground_classes(int num_classes, int background_class) {
  std::vector<int> classes;
  classes.reserve(num_classes - 1);
  for (int c = 0; c < num_classes; ++c) {
    if (c != background_class) classes.push_back(c);
  }
  return classes;
}

}  // namespace segfilter
