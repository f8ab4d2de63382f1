#include "segfilter/manifest.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "segfilter/error.hpp"
#include "segfilter/tensor_io.hpp"

namespace segfilter {

namespace {

using nlohmann::json;

json require_field(const json& doc, const char* field, const std::string& ctx) {
  if (!doc.contains(field)) {
    raise(ErrorCode::InvalidManifest, ctx + ": missing field \"" + field + "\"");
  }
  return doc.at(field);
}

int require_int(const json& doc, const char* field, const std::string& ctx) {
  const json value = require_field(doc, field, ctx);
  if (!value.is_number_integer()) {
    raise(ErrorCode::InvalidManifest,
          ctx + ": field \"" + field + "\" must be an integer");
  }
  return value.get<int>();
}

}  // namespace

std::filesystem::path DatasetManifest::resolve(const std::string& relative) const {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    raise(ErrorCode::InvalidManifest, path.string() + ": " + err.what());
  }

  const std::string ctx = path.string();
  DatasetManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path()
                                             : std::filesystem::path(".");
  manifest.num_classes = require_int(doc, "num_classes", ctx);
  if (manifest.num_classes < 2) {
    raise(ErrorCode::InvalidManifest,
          ctx + ": num_classes must be >= 2, got " +
              std::to_string(manifest.num_classes));
  }
  manifest.background_class =
      doc.contains("background_class") ? require_int(doc, "background_class", ctx) : 0;
  if (manifest.background_class < 0 ||
      manifest.background_class >= manifest.num_classes) {
    raise(ErrorCode::InvalidManifest,
          ctx + ": background_class " + std::to_string(manifest.background_class) +
              " outside [0, " + std::to_string(manifest.num_classes) + ")");
  }

  const json records = require_field(doc, "records", ctx);
  if (!records.is_array()) {
    raise(ErrorCode::InvalidManifest, ctx + ": \"records\" must be an array");
  }

  std::unordered_set<std::string> seen_ids;
  const int num_fg = foreground_count(manifest.num_classes);
  for (const json& entry : records) {
    ManifestRecord record;
    record.image_id = require_field(entry, "image_id", ctx).get<std::string>();
    const std::string rctx = ctx + ": record " + record.image_id;
    if (!seen_ids.insert(record.image_id).second) {
      raise(ErrorCode::InvalidManifest, ctx + ": duplicate image_id \"" +
                                            record.image_id + "\"");
    }
    record.logits_path = require_field(entry, "logits_path", rctx).get<std::string>();
    if (entry.contains("gt_path")) {
      record.gt_path = entry.at("gt_path").get<std::string>();
    }
    if (entry.contains("pseudo_path")) {
      record.pseudo_path = entry.at("pseudo_path").get<std::string>();
    }
    if (entry.contains("classifier_scores")) {
      const json scores = entry.at("classifier_scores");
      if (!scores.is_array()) {
        raise(ErrorCode::InvalidManifest, rctx + ": classifier_scores must be an array");
      }
      ClassScores parsed;
      for (const json& s : scores) {
        if (!s.is_number()) {
          raise(ErrorCode::InvalidManifest, rctx + ": classifier score is not a number");
        }
        parsed.values.push_back(s.get<double>());
      }
      if (static_cast<int>(parsed.values.size()) != num_fg) {
        raise(ErrorCode::InvalidManifest,
              rctx + ": " + std::to_string(parsed.values.size()) +
                  " classifier scores, expected " + std::to_string(num_fg));
      }
      record.classifier_scores = std::move(parsed);
    }
    if (entry.contains("presence")) {
      const json presence = entry.at("presence");
      if (!presence.is_array()) {
        raise(ErrorCode::InvalidManifest, rctx + ": presence must be an array");
      }
      PresenceSet parsed;
      for (const json& p : presence) {
        const int class_id = p.get<int>();
        if (class_id < 0 || class_id >= manifest.num_classes ||
            class_id == manifest.background_class) {
          raise(ErrorCode::InvalidManifest,
                rctx + ": presence class " + std::to_string(class_id) +
                    " is not a foreground class");
        }
        parsed.insert(class_id);
      }
      record.presence = std::move(parsed);
    }
    manifest.records.push_back(std::move(record));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path) {
  json doc;
  doc["num_classes"] = manifest.num_classes;
  doc["background_class"] = manifest.background_class;
  json records = json::array();
  for (const ManifestRecord& record : manifest.records) {
    json entry;
    entry["image_id"] = record.image_id;
    entry["logits_path"] = record.logits_path;
    if (record.gt_path) entry["gt_path"] = *record.gt_path;
    if (record.pseudo_path) entry["pseudo_path"] = *record.pseudo_path;
    if (record.classifier_scores) {
      entry["classifier_scores"] = record.classifier_scores->values;
    }
    if (record.presence) {
      entry["presence"] = std::vector<int>(record.presence->begin(),
                                           record.presence->end());
    }
    records.push_back(std::move(entry));
  }
  doc["records"] = std::move(records);

  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() +
                                            " for writing");
  out << doc.dump(2) << "\n";
  out.flush();
  if (!out) raise(ErrorCode::IoFailure, "write failed: " + path.string());
}

LoadedRecord load_record(const DatasetManifest& manifest, std::size_t index) {
  const ManifestRecord& record = manifest.records.at(index);
  LoadedRecord loaded;
  loaded.logits = read_logits(manifest.resolve(record.logits_path));
  if (loaded.logits.num_classes != manifest.num_classes) {
    raise(ErrorCode::DimensionMismatch,
          "record " + record.image_id + ": logits have " +
              std::to_string(loaded.logits.num_classes) +
              " classes, manifest says " + std::to_string(manifest.num_classes));
  }

  const auto check_map = [&](const LabelMap& map, const char* kind) {
    if (map.height != loaded.logits.height || map.width != loaded.logits.width) {
      raise(ErrorCode::DimensionMismatch,
            "record " + record.image_id + ": " + kind + " is " +
                std::to_string(map.height) + "x" + std::to_string(map.width) +
                ", logits are " + std::to_string(loaded.logits.height) + "x" +
                std::to_string(loaded.logits.width));
    }
    for (const std::uint8_t label : map.labels) {
      if (label != kIgnoreLabel && label >= manifest.num_classes) {
        raise(ErrorCode::LabelOutOfRange,
              "record " + record.image_id + ": " + kind + " label " +
                  std::to_string(label) + " >= num_classes " +
                  std::to_string(manifest.num_classes));
      }
    }
  };

  if (record.gt_path) {
    loaded.gt = read_label_map(manifest.resolve(*record.gt_path));
    check_map(*loaded.gt, "gt");
  }
  if (record.pseudo_path) {
    loaded.pseudo = read_label_map(manifest.resolve(*record.pseudo_path));
    check_map(*loaded.pseudo, "pseudo");
  }
  return loaded;
}

}  // namespace segfilter
