#include "segfilter/report_io.hpp"

#include <charconv>
#include <fstream>

#include "segfilter/error.hpp"

namespace segfilter {

using nlohmann::json;

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

json to_json(const IoUReport& report) {
  json per_class = json::array();
  for (const ClassIoU& entry : report.per_class) {
    json row;
    row["class_id"] = entry.class_id;
    row["tp"] = entry.tp;
    row["fp"] = entry.fp;
    row["fn"] = entry.fn;
    row["iou"] = entry.iou ? json(*entry.iou) : json(nullptr);
    per_class.push_back(std::move(row));
  }
  return json{{"per_class", std::move(per_class)},
              {"defined_classes", report.defined_classes},
              {"miou", report.miou}};
}

json to_json(const MNetReport& report) {
  json per_class = json::array();
  for (const ClassNet& entry : report.per_class) {
    json row;
    row["class_id"] = entry.class_id;
    row["correct_area"] = entry.correct_area;
    row["incorrect_area"] = entry.incorrect_area;
    row["denom"] = entry.denom;
    row["net"] = entry.net ? json(*entry.net) : json(nullptr);
    per_class.push_back(std::move(row));
  }
  return json{{"per_class", std::move(per_class)},
              {"defined_classes", report.defined_classes},
              {"mnet", report.mnet}};
}

json to_json(const MultiLabelReport& report) {
  json per_class = json::array();
  for (const ClassMultiLabel& entry : report.per_class) {
    json row;
    row["class_id"] = entry.class_id;
    row["positives"] = entry.positives;
    row["accuracy"] = entry.accuracy;
    row["average_precision"] =
        entry.average_precision ? json(*entry.average_precision) : json(nullptr);
    per_class.push_back(std::move(row));
  }
  json doc{{"per_class", std::move(per_class)},
           {"mean_accuracy", report.mean_accuracy},
           {"classes_with_positives", report.classes_with_positives}};
  doc["mean_ap"] = report.mean_ap ? json(*report.mean_ap) : json(nullptr);
  return doc;
}

json to_json(const SubgroupReport& report) {
  json groups = json::array();
  for (const SubgroupEntry& entry : report.groups) {
    json row;
    row["key"] = entry.key;
    row["empty"] = entry.empty;
    row["report"] = entry.empty ? json(nullptr) : to_json(entry.report);
    groups.push_back(std::move(row));
  }
  return json{{"grouping", report.grouping == Grouping::ByClassCount
                               ? "by_class_count"
                               : "by_class_size"},
              {"groups", std::move(groups)}};
}

json to_json(const ConfusionMatrix& confusion) {
  const int k = confusion.num_classes();
  json rows = json::array();
  for (int r = 0; r < k; ++r) {
    json row = json::array();
    for (int c = 0; c < k; ++c) row.push_back(confusion.at(r, c));
    rows.push_back(std::move(row));
  }
  return json{{"num_classes", k}, {"counts", std::move(rows)}};
}

std::string iou_csv(const IoUReport& report) {
  std::string out = "class_id,tp,fp,fn,iou\n";
  for (const ClassIoU& entry : report.per_class) {
    out += std::to_string(entry.class_id) + "," + std::to_string(entry.tp) +
           "," + std::to_string(entry.fp) + "," + std::to_string(entry.fn) +
           "," + (entry.iou ? format_double(*entry.iou) : std::string()) + "\n";
  }
  out += "miou,,,," + format_double(report.miou) + "\n";
  return out;
}

std::string confusion_csv(const ConfusionMatrix& confusion) {
  const int k = confusion.num_classes();
  std::string out = "gt";
  for (int c = 0; c < k; ++c) out += "," + std::to_string(c);
  out += "\n";
  for (int r = 0; r < k; ++r) {
    out += std::to_string(r);
    for (int c = 0; c < k; ++c) out += "," + std::to_string(confusion.at(r, c));
    out += "\n";
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "tau,miou\n";
  for (const SweepPoint& point : points) {
    out += format_double(point.tau) + "," + format_double(point.miou) + "\n";
  }
  return out;
}

std::string mnet_csv(const MNetReport& report) {
  std::string out = "class_id,correct_area,incorrect_area,denom,net\n";
  for (const ClassNet& entry : report.per_class) {
    out += std::to_string(entry.class_id) + "," +
           std::to_string(entry.correct_area) + "," +
           std::to_string(entry.incorrect_area) + "," +
           std::to_string(entry.denom) + "," +
           (entry.net ? format_double(*entry.net) : std::string()) + "\n";
  }
  out += "mnet,,,," + format_double(report.mnet) + "\n";
  return out;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() +
                                            " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) raise(ErrorCode::IoFailure, "write failed: " + path.string());
}

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    raise(ErrorCode::InvalidConfig, path.string() + ": " + err.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace segfilter
