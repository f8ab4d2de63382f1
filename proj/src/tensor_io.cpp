#include "segfilter/tensor_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "segfilter/error.hpp"

namespace segfilter {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'L', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 20;

void put_u32_le(std::string& out, std::uint32_t value) {
  out.push_back(static_cast<char>(value & 0xff));
  out.push_back(static_cast<char>((value >> 8) & 0xff));
  out.push_back(static_cast<char>((value >> 16) & 0xff));
  out.push_back(static_cast<char>((value >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) raise(ErrorCode::IoFailure, "read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() +
                                            " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) raise(ErrorCode::IoFailure, "write failed: " + path.string());
}

}  // namespace

LogitVolume read_logits(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = path.string();

  if (bytes.size() < 4 || std::memcmp(data, kMagic, 4) != 0) {
    raise(ErrorCode::BadMagic, where + ": expected magic \"SFLT\"");
  }
  if (bytes.size() < kHeaderSize) {
    raise(ErrorCode::Truncated,
          where + ": header is " + std::to_string(bytes.size()) +
              " bytes, need " + std::to_string(kHeaderSize));
  }
  const std::uint32_t version = get_u32_le(data + 4);
  if (version != kVersion) {
    raise(ErrorCode::UnsupportedVersion,
          where + ": version " + std::to_string(version));
  }
  const std::uint32_t k = get_u32_le(data + 8);
  const std::uint32_t h = get_u32_le(data + 12);
  const std::uint32_t w = get_u32_le(data + 16);
  if (k < 2 || h < 1 || w < 1) {
    raise(ErrorCode::BadDimensions, where + ": K=" + std::to_string(k) +
                                        " H=" + std::to_string(h) +
                                        " W=" + std::to_string(w) +
                                        " (need K>=2, H>=1, W>=1)");
  }
  // Guard the K*H*W multiplication before sizing the payload.
  const std::uint64_t count =
      static_cast<std::uint64_t>(k) * h * static_cast<std::uint64_t>(w);
  const std::uint64_t payload = count * 4;
  if (bytes.size() - kHeaderSize < payload) {
    raise(ErrorCode::Truncated,
          where + ": payload is " + std::to_string(bytes.size() - kHeaderSize) +
              " bytes at offset " + std::to_string(kHeaderSize) + ", need " +
              std::to_string(payload));
  }
  if (bytes.size() - kHeaderSize > payload) {
    raise(ErrorCode::TrailingBytes,
          where + ": " +
              std::to_string(bytes.size() - kHeaderSize - payload) +
              " unexpected bytes after offset " +
              std::to_string(kHeaderSize + payload));
  }

  LogitVolume volume;
  volume.num_classes = static_cast<int>(k);
  volume.height = static_cast<int>(h);
  volume.width = static_cast<int>(w);
  volume.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32_le(data + kHeaderSize + i * 4);
    const float value = std::bit_cast<float>(bits);
    if (!std::isfinite(value)) {
      raise(ErrorCode::NonFinite,
            where + ": non-finite value at byte offset " +
                std::to_string(kHeaderSize + i * 4));
    }
    volume.values[i] = value;
  }
  return volume;
}

void write_logits(const LogitVolume& volume, const std::filesystem::path& path) {
  const std::uint64_t count = static_cast<std::uint64_t>(volume.num_classes) *
                              volume.height * volume.width;
  if (volume.num_classes < 1 || volume.height < 1 || volume.width < 1 ||
      volume.values.size() != count) {
    raise(ErrorCode::BadDimensions,
          "volume " + std::to_string(volume.num_classes) + "x" +
              std::to_string(volume.height) + "x" +
              std::to_string(volume.width) + " with " +
              std::to_string(volume.values.size()) + " values");
  }
  std::string bytes;
  bytes.reserve(kHeaderSize + count * 4);
  bytes.append(kMagic, 4);
  put_u32_le(bytes, kVersion);
  put_u32_le(bytes, static_cast<std::uint32_t>(volume.num_classes));
  put_u32_le(bytes, static_cast<std::uint32_t>(volume.height));
  put_u32_le(bytes, static_cast<std::uint32_t>(volume.width));
  for (const float value : volume.values) {
    put_u32_le(bytes, std::bit_cast<std::uint32_t>(value));
  }
  write_file_bytes(path, bytes);
}

namespace {

// Reads one whitespace-delimited ASCII token from a PGM header.
std::string next_pgm_token(const std::string& bytes, std::size_t& pos,
                           const std::string& where) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    ++pos;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    ++pos;
  }
  if (start == pos) raise(ErrorCode::Truncated, where + ": PGM header ended early");
  return bytes.substr(start, pos - start);
}

int parse_pgm_int(const std::string& token, const std::string& where,
                  const char* field) {
  for (char ch : token) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      raise(ErrorCode::BadDimensions,
            where + ": PGM " + field + " \"" + token + "\" is not numeric");
    }
  }
  try {
    return std::stoi(token);
  } catch (const std::exception&) {
    raise(ErrorCode::BadDimensions, where + ": PGM " + field + " out of range");
  }
}

}  // namespace

LabelMap read_label_map(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  const std::string where = path.string();

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    raise(ErrorCode::BadMagic, where + ": expected PGM magic \"P5\"");
  }
  std::size_t pos = 2;
  const int width = parse_pgm_int(next_pgm_token(bytes, pos, where), where, "width");
  const int height = parse_pgm_int(next_pgm_token(bytes, pos, where), where, "height");
  const int maxval = parse_pgm_int(next_pgm_token(bytes, pos, where), where, "maxval");
  if (maxval != 255) {
    raise(ErrorCode::UnsupportedMaxval,
          where + ": maxval " + std::to_string(maxval) + ", only 255 supported");
  }
  if (width < 1 || height < 1) {
    raise(ErrorCode::BadDimensions, where + ": " + std::to_string(width) + "x" +
                                        std::to_string(height));
  }
  if (pos >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    raise(ErrorCode::Truncated, where + ": missing separator after maxval");
  }
  ++pos;  // single whitespace byte before the payload

  const std::size_t expected = static_cast<std::size_t>(width) * height;
  const std::size_t available = bytes.size() - pos;
  if (available < expected) {
    raise(ErrorCode::SizeMismatch,
          where + ": payload has " + std::to_string(available) +
              " bytes, header says " + std::to_string(expected));
  }
  if (available > expected) {
    raise(ErrorCode::TrailingBytes,
          where + ": " + std::to_string(available - expected) +
              " bytes after the pixel payload");
  }

  LabelMap map;
  map.height = height;
  map.width = width;
  map.labels.resize(expected);
  std::memcpy(map.labels.data(), bytes.data() + pos, expected);
  return map;
}

void write_label_map(const LabelMap& map, const std::filesystem::path& path) {
  const std::size_t expected = static_cast<std::size_t>(map.height) * map.width;
  if (map.height < 1 || map.width < 1 || map.labels.size() != expected) {
    raise(ErrorCode::BadDimensions,
          "label map " + std::to_string(map.height) + "x" +
              std::to_string(map.width) + " with " +
              std::to_string(map.labels.size()) + " labels");
  }
  std::string bytes = "P5\n" + std::to_string(map.width) + " " +
                      std::to_string(map.height) + "\n255\n";
  bytes.append(reinterpret_cast<const char*>(map.labels.data()),
               map.labels.size());
  write_file_bytes(path, bytes);
}

PresenceSet presence_from_label_map(const LabelMap& gt, int background_class) {
  PresenceSet present;
  for (const std::uint8_t label : gt.labels) {
    if (label == kIgnoreLabel || label == background_class) continue;
    present.insert(label);
  }
  return present;
}

}  // namespace segfilter
