#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segfilter/types.hpp"

namespace segfilter {

struct ManifestRecord {
  std::string image_id;
  std::string logits_path;  // relative to the manifest directory
  std::optional<std::string> gt_path;
  std::optional<std::string> pseudo_path;
  std::optional<ClassScores> classifier_scores;
  std::optional<PresenceSet> presence;
};

// Dataset bookkeeping: one JSON document listing every image with its
// on-disk tensors and (optionally) classifier scores and presence labels.
struct DatasetManifest {
  int num_classes = 0;
  int background_class = 0;
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;  // directory record paths resolve against

  std::filesystem::path resolve(const std::string& relative) const;
};

// Parses and validates a manifest: unique image ids, score lengths matching
// the foreground class count, presence sets within [0, K) excluding
// background. File existence is checked when records are loaded.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);

struct LoadedRecord {
  LogitVolume logits;
  std::optional<LabelMap> gt;
  std::optional<LabelMap> pseudo;
};

// Loads a record's tensors and cross-checks dimensions; every error names
// the record's image_id.
LoadedRecord load_record(const DatasetManifest& manifest, std::size_t index);

}  // namespace segfilter
