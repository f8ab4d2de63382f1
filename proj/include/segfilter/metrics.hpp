#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segfilter/filtering.hpp"
#include "segfilter/manifest.hpp"
#include "segfilter/types.hpp"

namespace segfilter {

// K x K pixel counts: counts[gt][pred], ignore pixels excluded. Merging is
// element-wise addition, so any partition of a dataset across workers
// accumulates to the same matrix.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void accumulate(const LabelMap& gt, const LabelMap& pred);
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(int gt_class, int pred_class) const {
    return counts_[static_cast<std::size_t>(gt_class) * num_classes_ +
                   pred_class];
  }
  std::uint64_t total() const;
  int num_classes() const { return num_classes_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int num_classes_;
  std::vector<std::uint64_t> counts_;
};

struct ClassIoU {
  int class_id = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::optional<double> iou;  // empty when tp+fp+fn == 0
};

struct IoUReport {
  std::vector<ClassIoU> per_class;
  int defined_classes = 0;
  double miou = 0.0;  // mean over classes with a defined IoU
};

// Throws EmptyReport when no class has tp+fp+fn > 0.
IoUReport iou_from_confusion(const ConfusionMatrix& confusion);

struct ClassNet {
  int class_id = 0;
  std::uint64_t correct_area = 0;    // pseudo-added pixels that match GT
  std::uint64_t incorrect_area = 0;  // pseudo-added pixels that contradict GT
  std::uint64_t denom = 0;           // all pseudo-added pixels
  std::optional<double> net;         // (correct - incorrect) / denom
};

struct MNetReport {
  std::vector<ClassNet> per_class;
  int defined_classes = 0;
  double mnet = 0.0;  // mean over classes with denom > 0
};

// Net correctness of pseudo-label supervision beyond current predictions.
// Areas accumulate across images before the per-class division. Ignore
// pixels in the ground truth are excluded entirely.
class MNetAccumulator {
 public:
  explicit MNetAccumulator(int num_classes);

  void accumulate(const LabelMap& gt, const LabelMap& pred,
                  const LabelMap& pseudo);
  void merge(const MNetAccumulator& other);

  // Throws EmptyReport when no class has a positive denominator.
  MNetReport report() const;

 private:
  int num_classes_;
  std::vector<std::uint64_t> correct_;
  std::vector<std::uint64_t> incorrect_;
  std::vector<std::uint64_t> denom_;
};

struct MNetImage {
  LabelMap gt;
  LabelMap pred;
  LabelMap pseudo;
};

MNetReport mnet(const std::vector<MNetImage>& images, int num_classes);

struct MultiLabelRecord {
  ClassScores scores;
  PresenceSet presence;
};

struct ClassMultiLabel {
  int class_id = 0;
  std::uint64_t positives = 0;
  double accuracy = 0.0;                    // (score > threshold) == presence
  std::optional<double> average_precision;  // empty when class has no positives
};

struct MultiLabelReport {
  std::vector<ClassMultiLabel> per_class;
  double mean_accuracy = 0.0;
  int classes_with_positives = 0;
  std::optional<double> mean_ap;
};

// Presence-vs-score quality of a multi-label classifier. AP uses the
// "precision at each positive" estimator over a descending-score ranking;
// ties keep stable input order. Throws EmptyReport on an empty record list.
MultiLabelReport multilabel_metrics(const std::vector<MultiLabelRecord>& records,
                                    double threshold, int num_classes,
                                    int background_class);

struct SweepPoint {
  double tau = 0.0;
  double miou = 0.0;
};

// Dataset-wide filtered mIoU for each threshold, ascending tau. Logits are
// loaded once per record and reused across thresholds. The template's tau
// field is ignored. Requires logits, gt and classifier scores per record.
std::vector<SweepPoint> threshold_sweep(const DatasetManifest& manifest,
                                        const std::vector<double>& taus,
                                        const FilterConfig& config_template,
                                        int workers = 1);

enum class Grouping { ByClassCount, ByClassSize };

struct SubgroupEntry {
  std::string key;
  bool empty = false;  // no pixels landed in this group
  IoUReport report;    // valid when !empty
};

struct SubgroupReport {
  Grouping grouping;
  std::vector<SubgroupEntry> groups;
};

// ByClassCount buckets whole images by foreground-presence count; ByClassSize
// buckets per-(image, class) tp/fp/fn contributions by the class's GT pixel
// count using half-open brackets [e_i, e_{i+1}) with a trailing [e_n, inf).
class SubgroupAccumulator {
 public:
  SubgroupAccumulator(Grouping grouping, std::vector<std::uint64_t> brackets,
                      int num_classes, int background_class);

  void accumulate(const LabelMap& gt, const LabelMap& pred);
  void merge(const SubgroupAccumulator& other);
  SubgroupReport report() const;

  static std::vector<std::uint64_t> default_brackets();

 private:
  Grouping grouping_;
  std::vector<std::uint64_t> brackets_;
  int num_classes_;
  int background_class_;
  std::map<int, ConfusionMatrix> by_count_;
  // per bracket, per class: tp/fp/fn sums
  std::vector<std::vector<ClassIoU>> by_size_;
};

// Groups the dataset's records and reports per-group IoU. prediction_for
// supplies the prediction for a record index; records without ground truth
// are skipped. Partial accumulators merge in record order, so worker count
// cannot change the result.
SubgroupReport subgroup_eval(
    const DatasetManifest& manifest,
    const std::function<LabelMap(std::size_t)>& prediction_for,
    Grouping grouping, const std::vector<std::uint64_t>& brackets,
    int workers = 1);

}  // namespace segfilter
