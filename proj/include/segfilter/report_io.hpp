#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segfilter/metrics.hpp"

#include "json.hpp"

namespace segfilter {

// Shortest round-trip decimal representation (std::to_chars); the same
// input value always prints the same bytes.
std::string format_double(double value);

nlohmann::json to_json(const IoUReport& report);
nlohmann::json to_json(const MNetReport& report);
nlohmann::json to_json(const MultiLabelReport& report);
nlohmann::json to_json(const SubgroupReport& report);
nlohmann::json to_json(const ConfusionMatrix& confusion);

// Flat tables. Per-class IoU rows; confusion as a K x K grid with a header
// row of class ids; sweep rows tau,miou; mnet per-class rows.
std::string iou_csv(const IoUReport& report);
std::string confusion_csv(const ConfusionMatrix& confusion);
std::string sweep_csv(const std::vector<SweepPoint>& points);
std::string mnet_csv(const MNetReport& report);

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents);
nlohmann::json parse_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& doc);

}  // namespace segfilter
