#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "segfilter/types.hpp"

namespace segfilter {

enum class FallbackPolicy {
  Unfiltered,     // empty allowed set falls back to all classes
  ClassifierTop1, // empty allowed set falls back to the top-scoring class
};

// Controls how classifier scores are turned into an allowed class set.
// `strict` selects score > tau (the inference rule) versus score >= tau.
struct FilterConfig {
  double tau = 0.0;
  std::set<int> always_allow{0};  // background can never be filtered
  bool strict = true;
  FallbackPolicy fallback = FallbackPolicy::Unfiltered;
};

// Non-empty subset of [0, num_classes) the per-pixel argmax is restricted to.
class AllowedClassSet {
 public:
  static AllowedClassSet all(int num_classes);
  // Throws InvalidConfig on an empty set or ids outside [0, num_classes).
  static AllowedClassSet of(const std::set<int>& classes, int num_classes);

  bool contains(int class_id) const { return mask_[class_id] != 0; }
  bool contains_all() const { return count_ == num_classes(); }
  int num_classes() const { return static_cast<int>(mask_.size()); }
  int count() const { return count_; }
  std::vector<int> classes() const;  // ascending

 private:
  AllowedClassSet() = default;
  std::vector<char> mask_;
  int count_ = 0;
};

// Per-pixel argmax over all classes; ties go to the lowest class id.
LabelMap argmax_predict(const LogitVolume& logits);

// {c : score_c > tau} (or >= when strict is off) mapped to global class ids
// and unioned with always_allow; an empty union triggers the fallback.
AllowedClassSet allowed_set_from_classifier(const ClassScores& scores,
                                            const FilterConfig& config,
                                            int num_classes,
                                            int background_class);

// Argmax restricted to the allowed set, lowest-id tie-break. Pixels whose
// unrestricted argmax is allowed keep it.
LabelMap filtered_predict(const LogitVolume& logits,
                          const AllowedClassSet& allowed);

// Restricts the argmax to classes actually present in the ground truth,
// plus the background class.
LabelMap oracle_filter_predict(const LogitVolume& logits, const LabelMap& gt,
                               int background_class);

// Sigmoid reweighting of classifier scores: w = 1 / (1 + exp(-T (g - theta))).
// temperature may be +infinity, in which case the weight is the pointwise
// limit: 1 above the shift, 0 below, 0.5 at exact equality.
struct SoftFilterConfig {
  double temperature = 1.0;
  double shift = 0.0;
};

double sigmoid_weight(double score, const SoftFilterConfig& config);

// Per pixel, argmax over c of softmax(logits)_c * w_c, where w_c is the
// sigmoid weight of class c's score and the background weight is fixed at 1.
LabelMap soft_filter_predict(const LogitVolume& logits,
                             const ClassScores& scores,
                             const SoftFilterConfig& config,
                             int background_class);

struct MaskedLoss {
  double value = 0.0;
  std::uint64_t pixels_counted = 0;
  std::uint64_t pixels_infeasible = 0;  // non-ignore labels outside the mask
};

// Per-class mask from score >= tau (the training-loss rule, non-strict,
// unlike inference filtering); the background class is always allowed.
std::vector<char> loss_mask_from_scores(const ClassScores& scores, double tau,
                                        int num_classes, int background_class);

// Mean over counted pixels of -log( exp f_y / sum_{c in mask} exp f_c ).
// Ignore pixels are skipped; pixels whose label is outside the mask are
// counted as infeasible and skipped. Throws EmptyLoss when nothing counts.
MaskedLoss masked_cross_entropy(const LogitVolume& logits, const LabelMap& gt,
                                const std::vector<char>& allowed_mask);

}  // namespace segfilter
