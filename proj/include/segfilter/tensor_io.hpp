#pragma once

#include <filesystem>

#include "segfilter/types.hpp"

namespace segfilter {

// SFLT logit container, little-endian throughout:
//   bytes  0..3   magic "SFLT"
//   bytes  4..7   version, u32 = 1
//   bytes  8..11  num_classes K, u32
//   bytes 12..15  height H, u32
//   bytes 16..19  width W, u32
//   then K*H*W IEEE-754 binary32 values, class-major then row-major.
// Loading validates the header, the exact payload length and that every
// value is finite; error messages carry the offending byte offset.
LogitVolume read_logits(const std::filesystem::path& path);
void write_logits(const LogitVolume& volume, const std::filesystem::path& path);

// Label maps travel as binary PGM (P5) with maxval 255, one byte per pixel,
// row-major; 255 is the ignore sentinel. Writing emits the exact header
// "P5\n<W> <H>\n255\n".
LabelMap read_label_map(const std::filesystem::path& path);
void write_label_map(const LabelMap& map, const std::filesystem::path& path);

// Set of non-background, non-ignore class ids occurring at least once.
PresenceSet presence_from_label_map(const LabelMap& gt, int background_class);

}  // namespace segfilter
