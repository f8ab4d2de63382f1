#include "segfilter/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "segfilter/error.hpp"
#include "segfilter/tensor_io.hpp"

namespace segfilter {

namespace {

void validate_volume(const LogitVolume& logits) {
  if (logits.num_classes < 2 || logits.height < 1 || logits.width < 1 ||
      logits.values.size() != static_cast<std::size_t>(logits.num_classes) *
                                  logits.height * logits.width) {
    raise(ErrorCode::BadDimensions,
          "logit volume " + std::to_string(logits.num_classes) + "x" +
              std::to_string(logits.height) + "x" + std::to_string(logits.width));
  }
}

void validate_same_shape(const LogitVolume& logits, const LabelMap& map,
                         const char* kind) {
  if (map.height != logits.height || map.width != logits.width) {
    raise(ErrorCode::DimensionMismatch,
          std::string(kind) + " is " + std::to_string(map.height) + "x" +
              std::to_string(map.width) + ", logits are " +
              std::to_string(logits.height) + "x" + std::to_string(logits.width));
  }
}

}  // namespace

AllowedClassSet AllowedClassSet::all(int num_classes) {
  if (num_classes < 1) {
    raise(ErrorCode::InvalidConfig, "num_classes must be positive");
  }
  AllowedClassSet set;
  set.mask_.assign(num_classes, 1);
  set.count_ = num_classes;
  return set;
}

AllowedClassSet AllowedClassSet::of(const std::set<int>& classes,
                                    int num_classes) {
  if (classes.empty()) {
    raise(ErrorCode::InvalidConfig, "allowed class set may not be empty");
  }
  AllowedClassSet set;
  set.mask_.assign(num_classes, 0);
  for (const int c : classes) {
    if (c < 0 || c >= num_classes) {
      raise(ErrorCode::InvalidConfig, "class " + std::to_string(c) +
                                          " outside [0, " +
                                          std::to_string(num_classes) + ")");
    }
    set.mask_[c] = 1;
  }
  set.count_ = static_cast<int>(classes.size());
  return set;
}

std::vector<int> AllowedClassSet::classes() const {
  std::vector<int> out;
  out.reserve(count_);
  for (int c = 0; c < num_classes(); ++c) {
    if (mask_[c]) out.push_back(c);
  }
  return out;
}

LabelMap argmax_predict(const LogitVolume& logits) {
  validate_volume(logits);
  return filtered_predict(logits, AllowedClassSet::all(logits.num_classes));
}

AllowedClassSet allowed_set_from_classifier(const ClassScores& scores,
                                            const FilterConfig& config,
                                            int num_classes,
                                            int background_class) {
  if (num_classes < 2) {
    raise(ErrorCode::InvalidConfig, "num_classes must be >= 2");
  }
  if (background_class < 0 || background_class >= num_classes) {
    raise(ErrorCode::InvalidConfig,
          "background_class " + std::to_string(background_class) +
              " outside [0, " + std::to_string(num_classes) + ")");
  }
  const int num_fg = foreground_count(num_classes);
  if (static_cast<int>(scores.values.size()) != num_fg) {
    raise(ErrorCode::DimensionMismatch,
          std::to_string(scores.values.size()) + " classifier scores for " +
              std::to_string(num_fg) + " foreground classes");
  }

  std::set<int> allowed;
  for (const int c : config.always_allow) {
    if (c < 0 || c >= num_classes) {
      raise(ErrorCode::InvalidConfig,
            "always_allow class " + std::to_string(c) + " outside [0, " +
                std::to_string(num_classes) + ")");
    }
    allowed.insert(c);
  }
  for (int i = 0; i < num_fg; ++i) {
    const double score = scores.values[i];
    const bool pass = config.strict ? score > config.tau : score >= config.tau;
    if (pass) allowed.insert(class_for_foreground_index(i, background_class));
  }

  if (allowed.empty()) {
    switch (config.fallback) {
      case FallbackPolicy::Unfiltered:
        return AllowedClassSet::all(num_classes);
      case FallbackPolicy::ClassifierTop1: {
        int best = 0;
        for (int i = 1; i < num_fg; ++i) {
          if (scores.values[i] > scores.values[best]) best = i;
        }
        allowed.insert(class_for_foreground_index(best, background_class));
        break;
      }
    }
  }
  return AllowedClassSet::of(allowed, num_classes);
}

LabelMap filtered_predict(const LogitVolume& logits,
                          const AllowedClassSet& allowed) {
  validate_volume(logits);
  if (allowed.num_classes() != logits.num_classes) {
    raise(ErrorCode::DimensionMismatch,
          "allowed set covers " + std::to_string(allowed.num_classes()) +
              " classes, volume has " + std::to_string(logits.num_classes));
  }

  LabelMap prediction = make_label_map(logits.height, logits.width);
  const std::size_t pixels = logits.pixel_count();
  const float* values = logits.values.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    int best = -1;
    float best_score = 0.0f;
    for (int c = 0; c < logits.num_classes; ++c) {
      if (!allowed.contains(c)) continue;
      const float score = values[static_cast<std::size_t>(c) * pixels + p];
      if (best < 0 || score > best_score) {
        best = c;
        best_score = score;
      }
    }
    prediction.labels[p] = static_cast<std::uint8_t>(best);
  }
  return prediction;
}

LabelMap oracle_filter_predict(const LogitVolume& logits, const LabelMap& gt,
                               int background_class) {
  validate_volume(logits);
  validate_same_shape(logits, gt, "gt");
  for (const std::uint8_t label : gt.labels) {
    if (label != kIgnoreLabel && label >= logits.num_classes) {
      raise(ErrorCode::LabelOutOfRange,
            "gt label " + std::to_string(label) + " >= num_classes " +
                std::to_string(logits.num_classes));
    }
  }
  std::set<int> allowed = presence_from_label_map(gt, background_class);
  allowed.insert(background_class);
  return filtered_predict(logits, AllowedClassSet::of(allowed, logits.num_classes));
}

double sigmoid_weight(double score, const SoftFilterConfig& config) {
  if (std::isinf(config.temperature)) {
    if (score > config.shift) return 1.0;
    if (score < config.shift) return 0.0;
    return 0.5;  // pointwise limit of the sigmoid at the shift
  }
  return 1.0 / (1.0 + std::exp(-config.temperature * (score - config.shift)));
}

LabelMap soft_filter_predict(const LogitVolume& logits,
                             const ClassScores& scores,
                             const SoftFilterConfig& config,
                             int background_class) {
  validate_volume(logits);
  if (!(config.temperature > 0.0)) {
    raise(ErrorCode::InvalidConfig, "temperature must be > 0");
  }
  const int num_classes = logits.num_classes;
  if (background_class < 0 || background_class >= num_classes) {
    raise(ErrorCode::InvalidConfig,
          "background_class " + std::to_string(background_class) +
              " outside [0, " + std::to_string(num_classes) + ")");
  }
  if (static_cast<int>(scores.values.size()) != foreground_count(num_classes)) {
    raise(ErrorCode::DimensionMismatch,
          std::to_string(scores.values.size()) + " classifier scores for " +
              std::to_string(foreground_count(num_classes)) +
              " foreground classes");
  }

  std::vector<double> weights(num_classes, 1.0);
  for (int i = 0; i < foreground_count(num_classes); ++i) {
    weights[class_for_foreground_index(i, background_class)] =
        sigmoid_weight(scores.values[i], config);
  }

  // The infinite-temperature step function reduces to a restricted argmax
  // whenever no score sits exactly at the shift: weights are 0/1, and the
  // comparison is on the raw logits, matching filtered_predict byte for byte.
  if (std::isinf(config.temperature) &&
      std::none_of(weights.begin(), weights.end(),
                   [](double w) { return w == 0.5; })) {
    std::set<int> allowed;
    for (int c = 0; c < num_classes; ++c) {
      if (weights[c] == 1.0) allowed.insert(c);
    }
    return filtered_predict(logits, AllowedClassSet::of(allowed, num_classes));
  }

  // The softmax denominator is constant per pixel, so comparing
  // exp(f_c - m) * w_c ranks classes identically to softmax * w.
  LabelMap prediction = make_label_map(logits.height, logits.width);
  const std::size_t pixels = logits.pixel_count();
  const float* values = logits.values.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_classes; ++c) {
      max_logit = std::max(max_logit,
                           static_cast<double>(values[static_cast<std::size_t>(c) * pixels + p]));
    }
    int best = -1;
    double best_product = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      if (weights[c] == 0.0) continue;  // background keeps weight 1
      const double logit = values[static_cast<std::size_t>(c) * pixels + p];
      const double product = std::exp(logit - max_logit) * weights[c];
      if (best < 0 || product > best_product) {
        best = c;
        best_product = product;
      }
    }
    prediction.labels[p] = static_cast<std::uint8_t>(best);
  }
  return prediction;
}

std::vector<char> loss_mask_from_scores(const ClassScores& scores, double tau,
                                        int num_classes, int background_class) {
  if (static_cast<int>(scores.values.size()) != foreground_count(num_classes)) {
    raise(ErrorCode::DimensionMismatch,
          std::to_string(scores.values.size()) + " classifier scores for " +
              std::to_string(foreground_count(num_classes)) +
              " foreground classes");
  }
  std::vector<char> mask(num_classes, 0);
  mask[background_class] = 1;
  for (int i = 0; i < foreground_count(num_classes); ++i) {
    if (scores.values[i] >= tau) {
      mask[class_for_foreground_index(i, background_class)] = 1;
    }
  }
  return mask;
}

MaskedLoss masked_cross_entropy(const LogitVolume& logits, const LabelMap& gt,
                                const std::vector<char>& allowed_mask) {
  validate_volume(logits);
  validate_same_shape(logits, gt, "gt");
  if (static_cast<int>(allowed_mask.size()) != logits.num_classes) {
    raise(ErrorCode::DimensionMismatch,
          "mask covers " + std::to_string(allowed_mask.size()) +
              " classes, volume has " + std::to_string(logits.num_classes));
  }
  if (std::none_of(allowed_mask.begin(), allowed_mask.end(),
                   [](char m) { return m != 0; })) {
    raise(ErrorCode::InvalidConfig, "allowed mask is all-false");
  }

  MaskedLoss result;
  double total = 0.0;
  const std::size_t pixels = logits.pixel_count();
  const float* values = logits.values.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t label = gt.labels[p];
    if (label == kIgnoreLabel) continue;
    if (label >= logits.num_classes) {
      raise(ErrorCode::LabelOutOfRange,
            "gt label " + std::to_string(label) + " >= num_classes " +
                std::to_string(logits.num_classes));
    }
    if (!allowed_mask[label]) {
      ++result.pixels_infeasible;
      continue;
    }
    double max_allowed = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < logits.num_classes; ++c) {
      if (!allowed_mask[c]) continue;
      max_allowed = std::max(max_allowed,
                             static_cast<double>(values[static_cast<std::size_t>(c) * pixels + p]));
    }
    double sum = 0.0;
    for (int c = 0; c < logits.num_classes; ++c) {
      if (!allowed_mask[c]) continue;
      sum += std::exp(static_cast<double>(values[static_cast<std::size_t>(c) * pixels + p]) -
                      max_allowed);
    }
    const double label_logit = values[static_cast<std::size_t>(label) * pixels + p];
    total += std::log(sum) - (label_logit - max_allowed);
    ++result.pixels_counted;
  }

  if (result.pixels_counted == 0) {
    raise(ErrorCode::EmptyLoss, "no feasible non-ignore pixels");
  }
  result.value = total / static_cast<double>(result.pixels_counted);
  return result;
}

}  // namespace segfilter
