#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>

#include "doctest.h"

#include "segfilter/error.hpp"
#include "segfilter/manifest.hpp"
#include "segfilter/tensor_io.hpp"

#include "support.hpp"

using namespace segfilter;
using testsupport::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& err) {
    return err.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("read_logits decodes a 2x1x1 file") {
  TempDir dir;
  // 20-byte header + two little-endian floats 0.5, -0.25
  std::string bytes = "SFLT";
  const auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(1);
  put_u32(2);
  put_u32(1);
  put_u32(1);
  put_u32(std::bit_cast<std::uint32_t>(0.5f));
  put_u32(std::bit_cast<std::uint32_t>(-0.25f));
  testsupport::spit(dir / "v.sflt", bytes);

  const LogitVolume volume = read_logits(dir / "v.sflt");
  CHECK(volume.num_classes == 2);
  CHECK(volume.height == 1);
  CHECK(volume.width == 1);
  CHECK(volume.values == std::vector<float>{0.5f, -0.25f});
}

TEST_CASE("read_logits rejects a bad magic") {
  TempDir dir;
  testsupport::spit(dir / "v.sflt", "XXXX, definitely not a logit file");
  CHECK(code_of([&] { read_logits(dir / "v.sflt"); }) == ErrorCode::BadMagic);
}

TEST_CASE("read_logits reports truncation with the byte offset") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 2;
  volume.height = 2;
  volume.width = 2;
  volume.values.assign(8, 1.0f);
  write_logits(volume, dir / "v.sflt");
  std::string bytes = testsupport::slurp(dir / "v.sflt");
  bytes.resize(bytes.size() - 5);
  testsupport::spit(dir / "v.sflt", bytes);

  try {
    read_logits(dir / "v.sflt");
    FAIL("expected Truncated");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::Truncated);
    CHECK(std::string(err.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("read_logits rejects trailing bytes") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 2;
  volume.height = 1;
  volume.width = 1;
  volume.values = {1.0f, 2.0f};
  write_logits(volume, dir / "v.sflt");
  testsupport::spit(dir / "v.sflt", testsupport::slurp(dir / "v.sflt") + "x");
  CHECK(code_of([&] { read_logits(dir / "v.sflt"); }) == ErrorCode::TrailingBytes);
}

TEST_CASE("read_logits rejects non-finite values naming the offset") {
  TempDir dir;
  std::string bytes = "SFLT";
  const auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(1);
  put_u32(2);
  put_u32(1);
  put_u32(1);
  put_u32(std::bit_cast<std::uint32_t>(1.0f));
  put_u32(std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN()));
  testsupport::spit(dir / "v.sflt", bytes);
  try {
    read_logits(dir / "v.sflt");
    FAIL("expected NonFinite");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::NonFinite);
    CHECK(std::string(err.what()).find("24") != std::string::npos);
  }
}

TEST_CASE("read_logits rejects a one-class header") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 1;
  volume.height = 1;
  volume.width = 1;
  volume.values = {0.0f};
  write_logits(volume, dir / "v.sflt");
  CHECK(code_of([&] { read_logits(dir / "v.sflt"); }) == ErrorCode::BadDimensions);
}

TEST_CASE("write_logits emits the exact byte layout for a 1x1x1 zero volume") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 1;
  volume.height = 1;
  volume.width = 1;
  volume.values = {0.0f};
  write_logits(volume, dir / "v.sflt");

  const std::string bytes = testsupport::slurp(dir / "v.sflt");
  REQUIRE(bytes.size() == 24);  // 20-byte header + 4 payload bytes
  CHECK(bytes.substr(0, 4) == "SFLT");
  const unsigned char expected_header[16] = {1, 0, 0, 0, 1, 0, 0, 0,
                                             1, 0, 0, 0, 1, 0, 0, 0};
  CHECK(std::memcmp(bytes.data() + 4, expected_header, 16) == 0);
  const unsigned char zero[4] = {0, 0, 0, 0};
  CHECK(std::memcmp(bytes.data() + 20, zero, 4) == 0);
}

TEST_CASE("write_logits to a non-existent directory is an I/O error") {
  CHECK(code_of([&] {
          LogitVolume volume;
          volume.num_classes = 2;
          volume.height = 1;
          volume.width = 1;
          volume.values = {0.0f, 1.0f};
          write_logits(volume, "/nonexistent_segfilter_dir/v.sflt");
        }) == ErrorCode::IoFailure);
}

TEST_CASE("logit volumes round-trip bit-exact over random shapes") {
  TempDir dir;
  Rng rng(20240117);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = rng.range(2, 9);
    const int h = rng.range(1, 12);
    const int w = rng.range(1, 12);
    const LogitVolume volume =
        testsupport::random_volume(rng, k, h, w, -1e6, 1e6);
    write_logits(volume, dir / "v.sflt");
    const LogitVolume back = read_logits(dir / "v.sflt");
    REQUIRE(back == volume);
  }
}

TEST_CASE("a 3x4x4 volume survives a write/read cycle bit-exact") {
  TempDir dir;
  Rng rng(7);
  const LogitVolume volume = testsupport::random_volume(rng, 3, 4, 4);
  write_logits(volume, dir / "v.sflt");
  CHECK(read_logits(dir / "v.sflt") == volume);
}

TEST_CASE("label maps encode to P5 with the documented payload") {
  TempDir dir;
  LabelMap map = make_label_map(2, 2);
  map.labels = {0, 1, 255, 2};
  write_label_map(map, dir / "m.pgm");

  const std::string bytes = testsupport::slurp(dir / "m.pgm");
  CHECK(bytes == std::string("P5\n2 2\n255\n") + '\x00' + '\x01' + '\xff' + '\x02');
  CHECK(read_label_map(dir / "m.pgm") == map);
}

TEST_CASE("label maps reject unsupported maxval") {
  TempDir dir;
  testsupport::spit(dir / "m.pgm", "P5\n2 2\n65535\n\0\0\0\0\0\0\0\0");
  CHECK(code_of([&] { read_label_map(dir / "m.pgm"); }) ==
        ErrorCode::UnsupportedMaxval);
}

TEST_CASE("label maps reject non-P5 magic and short payloads") {
  TempDir dir;
  testsupport::spit(dir / "m.pgm", "P6\n2 2\n255\n0000");
  CHECK(code_of([&] { read_label_map(dir / "m.pgm"); }) == ErrorCode::BadMagic);

  testsupport::spit(dir / "short.pgm", std::string("P5\n2 2\n255\n") + "abc");
  CHECK(code_of([&] { read_label_map(dir / "short.pgm"); }) ==
        ErrorCode::SizeMismatch);
}

TEST_CASE("label maps round-trip bit-exact over random contents") {
  TempDir dir;
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = rng.range(1, 16);
    const int w = rng.range(1, 16);
    const LabelMap map = testsupport::random_label_map(rng, h, w, 21, 0.1);
    write_label_map(map, dir / "m.pgm");
    REQUIRE(read_label_map(dir / "m.pgm") == map);
  }
}

TEST_CASE("presence_from_label_map enumerates foreground classes") {
  LabelMap map = make_label_map(2, 2);
  map.labels = {0, 1, 255, 2};
  CHECK(presence_from_label_map(map, 0) == PresenceSet{1, 2});

  const LabelMap all_bg = make_label_map(3, 3, 0);
  CHECK(presence_from_label_map(all_bg, 0).empty());

  const LabelMap all_ignore = make_label_map(3, 3, kIgnoreLabel);
  CHECK(presence_from_label_map(all_ignore, 0).empty());
}

TEST_CASE("manifest round-trips and validates") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 3;
  volume.height = 2;
  volume.width = 2;
  volume.values.assign(12, 0.5f);
  write_logits(volume, dir / "a.sflt");
  LabelMap gt = make_label_map(2, 2, 1);
  write_label_map(gt, dir / "a.pgm");

  DatasetManifest manifest;
  manifest.num_classes = 3;
  manifest.background_class = 0;
  manifest.base_dir = dir.path();
  ManifestRecord record;
  record.image_id = "a";
  record.logits_path = "a.sflt";
  record.gt_path = "a.pgm";
  record.classifier_scores = ClassScores{{1.5, -2.5}};
  record.presence = PresenceSet{1};
  manifest.records.push_back(record);
  write_manifest(manifest, dir / "manifest.json");

  const DatasetManifest back = read_manifest(dir / "manifest.json");
  CHECK(back.num_classes == 3);
  CHECK(back.records.size() == 1);
  CHECK(back.records[0].classifier_scores->values == std::vector<double>{1.5, -2.5});
  CHECK(*back.records[0].presence == PresenceSet{1});

  const LoadedRecord loaded = load_record(back, 0);
  CHECK(loaded.logits == volume);
  CHECK(*loaded.gt == gt);
}

TEST_CASE("manifest rejects duplicate image ids") {
  TempDir dir;
  testsupport::spit(dir / "manifest.json", R"({
    "num_classes": 3,
    "records": [
      {"image_id": "a", "logits_path": "a.sflt"},
      {"image_id": "a", "logits_path": "b.sflt"}
    ]
  })");
  CHECK(code_of([&] { read_manifest(dir / "manifest.json"); }) ==
        ErrorCode::InvalidManifest);
}

TEST_CASE("manifest rejects a wrong score count") {
  TempDir dir;
  testsupport::spit(dir / "manifest.json", R"({
    "num_classes": 3,
    "records": [
      {"image_id": "a", "logits_path": "a.sflt", "classifier_scores": [1.0]}
    ]
  })");
  CHECK(code_of([&] { read_manifest(dir / "manifest.json"); }) ==
        ErrorCode::InvalidManifest);
}

TEST_CASE("loading a record with disagreeing dimensions names the record") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 3;
  volume.height = 10;
  volume.width = 11;
  volume.values.assign(330, 0.0f);
  write_logits(volume, dir / "a.sflt");
  write_label_map(make_label_map(10, 10, 0), dir / "a.pgm");

  DatasetManifest manifest;
  manifest.num_classes = 3;
  manifest.base_dir = dir.path();
  ManifestRecord record;
  record.image_id = "odd_one";
  record.logits_path = "a.sflt";
  record.gt_path = "a.pgm";
  manifest.records.push_back(record);

  try {
    load_record(manifest, 0);
    FAIL("expected DimensionMismatch");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DimensionMismatch);
    CHECK(std::string(err.what()).find("odd_one") != std::string::npos);
  }
}

TEST_CASE("loading a record whose labels exceed the class count fails") {
  TempDir dir;
  LogitVolume volume;
  volume.num_classes = 3;
  volume.height = 2;
  volume.width = 2;
  volume.values.assign(12, 0.0f);
  write_logits(volume, dir / "a.sflt");
  write_label_map(make_label_map(2, 2, 7), dir / "a.pgm");  // label 7 >= K=3

  DatasetManifest manifest;
  manifest.num_classes = 3;
  manifest.base_dir = dir.path();
  ManifestRecord record;
  record.image_id = "overflow";
  record.logits_path = "a.sflt";
  record.gt_path = "a.pgm";
  manifest.records.push_back(record);
  try {
    load_record(manifest, 0);
    FAIL("expected LabelOutOfRange");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::LabelOutOfRange);
    CHECK(std::string(err.what()).find("overflow") != std::string::npos);
  }
}

TEST_CASE("loading a record with a missing file fails") {
  TempDir dir;
  DatasetManifest manifest;
  manifest.num_classes = 3;
  manifest.base_dir = dir.path();
  ManifestRecord record;
  record.image_id = "ghost";
  record.logits_path = "ghost.sflt";
  manifest.records.push_back(record);
  CHECK(code_of([&] { load_record(manifest, 0); }) == ErrorCode::IoFailure);
}
