#include "segfilter/metrics.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <string>

#include "segfilter/error.hpp"
#include "segfilter/parallel.hpp"
#include "segfilter/tensor_io.hpp"

namespace segfilter {

namespace {

void check_same_shape(const LabelMap& a, const LabelMap& b, const char* what) {
  if (!a.same_shape(b)) {
    raise(ErrorCode::DimensionMismatch,
          std::string(what) + ": " + std::to_string(a.height) + "x" +
              std::to_string(a.width) + " vs " + std::to_string(b.height) +
              "x" + std::to_string(b.width));
  }
}

void check_label_range(std::uint8_t label, int num_classes, const char* kind) {
  if (label >= num_classes) {
    raise(ErrorCode::LabelOutOfRange,
          std::string(kind) + " label " + std::to_string(label) +
              " >= num_classes " + std::to_string(num_classes));
  }
}

// Shared by the confusion-matrix and subgroup paths.
IoUReport report_from_counts(std::vector<ClassIoU> per_class) {
  IoUReport report;
  double sum = 0.0;
  for (ClassIoU& entry : per_class) {
    const std::uint64_t denom = entry.tp + entry.fp + entry.fn;
    if (denom > 0) {
      entry.iou = static_cast<double>(entry.tp) / static_cast<double>(denom);
      sum += *entry.iou;
      ++report.defined_classes;
    }
  }
  report.per_class = std::move(per_class);
  if (report.defined_classes == 0) {
    raise(ErrorCode::EmptyReport, "no class has tp+fp+fn > 0");
  }
  report.miou = sum / report.defined_classes;
  return report;
}

std::vector<ClassIoU> counts_from_confusion(const ConfusionMatrix& confusion) {
  const int k = confusion.num_classes();
  std::vector<ClassIoU> counts(k);
  for (int c = 0; c < k; ++c) {
    counts[c].class_id = c;
    counts[c].tp = confusion.at(c, c);
    for (int r = 0; r < k; ++r) {
      if (r == c) continue;
      counts[c].fp += confusion.at(r, c);
      counts[c].fn += confusion.at(c, r);
    }
  }
  return counts;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 2) {
    raise(ErrorCode::InvalidConfig, "confusion matrix needs num_classes >= 2");
  }
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::accumulate(const LabelMap& gt, const LabelMap& pred) {
  check_same_shape(gt, pred, "gt vs pred");
  const std::size_t pixels = gt.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t g = gt.labels[p];
    const std::uint8_t d = pred.labels[p];
    if (d == kIgnoreLabel) {
      raise(ErrorCode::PredHasIgnore,
            "prediction carries the ignore label at pixel " + std::to_string(p));
    }
    check_label_range(d, num_classes_, "pred");
    if (g == kIgnoreLabel) continue;
    check_label_range(g, num_classes_, "gt");
    ++counts_[static_cast<std::size_t>(g) * num_classes_ + d];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    raise(ErrorCode::DimensionMismatch,
          "merging confusion matrices of " + std::to_string(num_classes_) +
              " and " + std::to_string(other.num_classes_) + " classes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

IoUReport iou_from_confusion(const ConfusionMatrix& confusion) {
  return report_from_counts(counts_from_confusion(confusion));
}

MNetAccumulator::MNetAccumulator(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 2) {
    raise(ErrorCode::InvalidConfig, "mnet needs num_classes >= 2");
  }
  correct_.assign(num_classes, 0);
  incorrect_.assign(num_classes, 0);
  denom_.assign(num_classes, 0);
}

void MNetAccumulator::accumulate(const LabelMap& gt, const LabelMap& pred,
                                 const LabelMap& pseudo) {
  check_same_shape(gt, pred, "gt vs pred");
  check_same_shape(gt, pseudo, "gt vs pseudo");
  const std::size_t pixels = gt.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t g = gt.labels[p];
    if (g == kIgnoreLabel) continue;
    check_label_range(g, num_classes_, "gt");
    const std::uint8_t ps = pseudo.labels[p];
    const std::uint8_t pr = pred.labels[p];
    if (ps != kIgnoreLabel) check_label_range(ps, num_classes_, "pseudo");
    if (pr != kIgnoreLabel) check_label_range(pr, num_classes_, "pred");
    // The pixel adds supervision for class ps iff the prediction missed it.
    if (ps == kIgnoreLabel || ps == pr) continue;
    ++denom_[ps];
    if (g == ps) {
      ++correct_[ps];
    } else {
      ++incorrect_[ps];
    }
  }
}

void MNetAccumulator::merge(const MNetAccumulator& other) {
  if (other.num_classes_ != num_classes_) {
    raise(ErrorCode::DimensionMismatch,
          "merging mnet accumulators of " + std::to_string(num_classes_) +
              " and " + std::to_string(other.num_classes_) + " classes");
  }
  for (int c = 0; c < num_classes_; ++c) {
    correct_[c] += other.correct_[c];
    incorrect_[c] += other.incorrect_[c];
    denom_[c] += other.denom_[c];
  }
}

MNetReport MNetAccumulator::report() const {
  MNetReport report;
  report.per_class.resize(num_classes_);
  double sum = 0.0;
  for (int c = 0; c < num_classes_; ++c) {
    ClassNet& entry = report.per_class[c];
    entry.class_id = c;
    entry.correct_area = correct_[c];
    entry.incorrect_area = incorrect_[c];
    entry.denom = denom_[c];
    // Set-partition identity: added pixels are either correct or incorrect.
    if (entry.denom != entry.correct_area + entry.incorrect_area) {
      raise(ErrorCode::SizeMismatch,
            "mnet denominator does not partition for class " + std::to_string(c));
    }
    if (entry.denom > 0) {
      entry.net = (static_cast<double>(entry.correct_area) -
                   static_cast<double>(entry.incorrect_area)) /
                  static_cast<double>(entry.denom);
      sum += *entry.net;
      ++report.defined_classes;
    }
  }
  if (report.defined_classes == 0) {
    raise(ErrorCode::EmptyReport, "no class has pseudo-added pixels");
  }
  report.mnet = sum / report.defined_classes;
  return report;
}

MNetReport mnet(const std::vector<MNetImage>& images, int num_classes) {
  MNetAccumulator acc(num_classes);
  for (const MNetImage& image : images) {
    acc.accumulate(image.gt, image.pred, image.pseudo);
  }
  return acc.report();
}

MultiLabelReport multilabel_metrics(const std::vector<MultiLabelRecord>& records,
                                    double threshold, int num_classes,
                                    int background_class) {
  if (records.empty()) {
    raise(ErrorCode::EmptyReport, "no records");
  }
  const int num_fg = foreground_count(num_classes);
  for (const MultiLabelRecord& record : records) {
    if (static_cast<int>(record.scores.values.size()) != num_fg) {
      raise(ErrorCode::DimensionMismatch,
            std::to_string(record.scores.values.size()) + " scores for " +
                std::to_string(num_fg) + " foreground classes");
    }
  }

  MultiLabelReport report;
  double accuracy_sum = 0.0;
  double ap_sum = 0.0;
  for (int i = 0; i < num_fg; ++i) {
    const int class_id = class_for_foreground_index(i, background_class);
    ClassMultiLabel entry;
    entry.class_id = class_id;

    std::uint64_t correct = 0;
    std::vector<std::pair<double, bool>> ranked;  // (score, is positive)
    ranked.reserve(records.size());
    for (const MultiLabelRecord& record : records) {
      const double score = record.scores.values[i];
      const bool present = record.presence.count(class_id) > 0;
      if ((score > threshold) == present) ++correct;
      if (present) ++entry.positives;
      ranked.emplace_back(score, present);
    }
    entry.accuracy = static_cast<double>(correct) / records.size();
    accuracy_sum += entry.accuracy;

    if (entry.positives > 0) {
      // Descending by score; stable sort keeps input order among ties.
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::uint64_t hits = 0;
      double precision_sum = 0.0;
      for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
        if (!ranked[rank].second) continue;
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
      }
      entry.average_precision = precision_sum / static_cast<double>(entry.positives);
      ap_sum += *entry.average_precision;
      ++report.classes_with_positives;
    }
    report.per_class.push_back(std::move(entry));
  }

  report.mean_accuracy = accuracy_sum / num_fg;
  if (report.classes_with_positives > 0) {
    report.mean_ap = ap_sum / report.classes_with_positives;
  }
  return report;
}

std::vector<SweepPoint> threshold_sweep(const DatasetManifest& manifest,
                                        const std::vector<double>& taus,
                                        const FilterConfig& config_template,
                                        int workers) {
  if (taus.empty()) {
    raise(ErrorCode::InvalidConfig, "empty threshold grid");
  }
  std::vector<double> sorted_taus = taus;
  std::sort(sorted_taus.begin(), sorted_taus.end());

  const std::size_t num_records = manifest.records.size();
  const std::size_t num_taus = sorted_taus.size();
  // Counts are integers, so merge order cannot change the totals; a mutex
  // around the merge keeps memory flat instead of holding per-record copies.
  std::vector<ConfusionMatrix> totals(num_taus,
                                      ConfusionMatrix(manifest.num_classes));
  std::mutex merge_mutex;

  parallel_for(num_records, workers, [&](std::size_t r) {
    const ManifestRecord& record = manifest.records[r];
    if (!record.classifier_scores) {
      raise(ErrorCode::MissingInput,
            "record " + record.image_id + " has no classifier scores");
    }
    if (!record.gt_path) {
      raise(ErrorCode::MissingInput,
            "record " + record.image_id + " has no ground truth");
    }
    const LoadedRecord loaded = load_record(manifest, r);
    std::vector<ConfusionMatrix> local(num_taus,
                                       ConfusionMatrix(manifest.num_classes));
    for (std::size_t t = 0; t < num_taus; ++t) {
      FilterConfig config = config_template;
      config.tau = sorted_taus[t];
      const AllowedClassSet allowed = allowed_set_from_classifier(
          *record.classifier_scores, config, manifest.num_classes,
          manifest.background_class);
      const LabelMap pred = filtered_predict(loaded.logits, allowed);
      local[t].accumulate(*loaded.gt, pred);
    }
    const std::lock_guard<std::mutex> lock(merge_mutex);
    for (std::size_t t = 0; t < num_taus; ++t) totals[t].merge(local[t]);
  });

  std::vector<SweepPoint> points;
  points.reserve(num_taus);
  for (std::size_t t = 0; t < num_taus; ++t) {
    points.push_back({sorted_taus[t], iou_from_confusion(totals[t]).miou});
  }
  return points;
}

SubgroupAccumulator::SubgroupAccumulator(Grouping grouping,
                                         std::vector<std::uint64_t> brackets,
                                         int num_classes, int background_class)
    : grouping_(grouping),
      brackets_(std::move(brackets)),
      num_classes_(num_classes),
      background_class_(background_class) {
  if (num_classes < 2) {
    raise(ErrorCode::InvalidConfig, "subgroups need num_classes >= 2");
  }
  if (grouping_ == Grouping::ByClassSize) {
    if (brackets_.empty() || brackets_.front() != 0 ||
        !std::is_sorted(brackets_.begin(), brackets_.end()) ||
        std::adjacent_find(brackets_.begin(), brackets_.end()) != brackets_.end()) {
      raise(ErrorCode::InvalidConfig,
            "size brackets must start at 0 and be strictly ascending");
    }
    by_size_.resize(brackets_.size());
    for (std::size_t b = 0; b < brackets_.size(); ++b) {
      by_size_[b].resize(num_classes_);
      for (int c = 0; c < num_classes_; ++c) by_size_[b][c].class_id = c;
    }
  }
}

std::vector<std::uint64_t> SubgroupAccumulator::default_brackets() {
  return {0, 1024, 4096, 16384, 65536};
}

void SubgroupAccumulator::accumulate(const LabelMap& gt, const LabelMap& pred) {
  if (grouping_ == Grouping::ByClassCount) {
    const int count =
        static_cast<int>(presence_from_label_map(gt, background_class_).size());
    auto [it, inserted] = by_count_.try_emplace(count, num_classes_);
    it->second.accumulate(gt, pred);
    return;
  }

  ConfusionMatrix image_matrix(num_classes_);
  image_matrix.accumulate(gt, pred);
  const std::vector<ClassIoU> counts = counts_from_confusion(image_matrix);
  for (int c = 0; c < num_classes_; ++c) {
    const ClassIoU& entry = counts[c];
    if (entry.tp + entry.fp + entry.fn == 0) continue;
    const std::uint64_t gt_pixels = entry.tp + entry.fn;
    std::size_t bracket = 0;
    while (bracket + 1 < brackets_.size() && gt_pixels >= brackets_[bracket + 1]) {
      ++bracket;
    }
    by_size_[bracket][c].tp += entry.tp;
    by_size_[bracket][c].fp += entry.fp;
    by_size_[bracket][c].fn += entry.fn;
  }
}

void SubgroupAccumulator::merge(const SubgroupAccumulator& other) {
  if (other.grouping_ != grouping_ || other.num_classes_ != num_classes_ ||
      other.brackets_ != brackets_) {
    raise(ErrorCode::InvalidConfig, "merging incompatible subgroup accumulators");
  }
  for (const auto& [count, matrix] : other.by_count_) {
    auto [it, inserted] = by_count_.try_emplace(count, num_classes_);
    it->second.merge(matrix);
  }
  for (std::size_t b = 0; b < by_size_.size(); ++b) {
    for (int c = 0; c < num_classes_; ++c) {
      by_size_[b][c].tp += other.by_size_[b][c].tp;
      by_size_[b][c].fp += other.by_size_[b][c].fp;
      by_size_[b][c].fn += other.by_size_[b][c].fn;
    }
  }
}

SubgroupReport subgroup_eval(
    const DatasetManifest& manifest,
    const std::function<LabelMap(std::size_t)>& prediction_for,
    Grouping grouping, const std::vector<std::uint64_t>& brackets,
    int workers) {
  const std::size_t count = manifest.records.size();
  std::vector<std::optional<SubgroupAccumulator>> partials(count);
  parallel_for(count, workers, [&](std::size_t i) {
    if (!manifest.records[i].gt_path) return;
    const LoadedRecord loaded = load_record(manifest, i);
    SubgroupAccumulator acc(grouping, brackets, manifest.num_classes,
                            manifest.background_class);
    acc.accumulate(*loaded.gt, prediction_for(i));
    partials[i] = std::move(acc);
  });

  SubgroupAccumulator merged(grouping, brackets, manifest.num_classes,
                             manifest.background_class);
  for (std::optional<SubgroupAccumulator>& partial : partials) {
    if (partial) merged.merge(*partial);
  }
  return merged.report();
}

SubgroupReport SubgroupAccumulator::report() const {
  SubgroupReport report;
  report.grouping = grouping_;
  if (grouping_ == Grouping::ByClassCount) {
    for (const auto& [count, matrix] : by_count_) {
      SubgroupEntry entry;
      entry.key = std::to_string(count);
      if (matrix.total() == 0) {
        entry.empty = true;
      } else {
        entry.report = iou_from_confusion(matrix);
      }
      report.groups.push_back(std::move(entry));
    }
    return report;
  }

  for (std::size_t b = 0; b < by_size_.size(); ++b) {
    SubgroupEntry entry;
    const std::string hi = b + 1 < brackets_.size()
                               ? std::to_string(brackets_[b + 1])
                               : std::string("inf");
    entry.key = "[" + std::to_string(brackets_[b]) + "," + hi + ")";
    const bool any = std::any_of(
        by_size_[b].begin(), by_size_[b].end(),
        [](const ClassIoU& c) { return c.tp + c.fp + c.fn > 0; });
    if (!any) {
      entry.empty = true;
    } else {
      entry.report = report_from_counts(by_size_[b]);
    }
    report.groups.push_back(std::move(entry));
  }
  return report;
}

}  // namespace segfilter
