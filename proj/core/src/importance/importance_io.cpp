#include <string>

#include "codespot/importance/importance.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::importance {

namespace {

constexpr std::string_view kMapMagic = "CSPTIMAP";
constexpr std::string_view kMaskMagic = "CSPTMASK";

void check_version(const BinaryReader& r, std::uint32_t found, std::uint32_t expected) {
  if (found != expected) {
    fail(ErrorKind::kData, r.label() + ": unsupported format version " + std::to_string(found));
  }
}

void check_digest(const BinaryReader& r, std::uint64_t found, std::uint64_t expected) {
  if (found != expected) fail(ErrorKind::kDigest, r.label() + ": registry digest mismatch");
}

}  // namespace

void save_importance_map(const ImportanceMap& map, const std::filesystem::path& path) {
  BinaryWriter w;
  w.magic(kMapMagic);
  w.u32(kMapFormatVersion);
  w.u64(map.registry_digest);
  w.string(map.language_tag);
  w.u64(map.batch_count);
  w.u64(map.scores.size());
  w.f64_array(map.scores);
  w.save(path);
}

ImportanceMap load_importance_map(const std::filesystem::path& path, std::uint64_t expected_digest) {
  BinaryReader r(path);
  r.expect_magic(kMapMagic);
  check_version(r, r.u32(), kMapFormatVersion);
  ImportanceMap map;
  map.registry_digest = r.u64();
  check_digest(r, map.registry_digest, expected_digest);
  map.language_tag = r.string();
  map.batch_count = r.u64();
  map.scores = r.f64_array(r.u64());
  if (!r.at_end()) fail(ErrorKind::kData, r.label() + ": trailing bytes");
  return map;
}

void save_spot_mask(const SpotMask& mask, const std::filesystem::path& path) {
  BinaryWriter w;
  w.magic(kMaskMagic);
  w.u32(kMaskFormatVersion);
  w.f64(mask.k_percent);
  w.f64(mask.threshold_score);
  w.u64(mask.registry_digest);
  w.u64(mask.selected.size());
  w.u64(mask.count());
  std::vector<std::uint8_t> packed((mask.selected.size() + 7) / 8, 0);
  for (std::size_t j = 0; j < mask.selected.size(); ++j) {
    if (mask.selected[j]) packed[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
  }
  w.bytes(packed);
  w.save(path);
}

SpotMask load_spot_mask(const std::filesystem::path& path, std::uint64_t expected_digest) {
  BinaryReader r(path);
  r.expect_magic(kMaskMagic);
  check_version(r, r.u32(), kMaskFormatVersion);
  SpotMask mask;
  mask.k_percent = r.f64();
  mask.threshold_score = r.f64();
  mask.registry_digest = r.u64();
  check_digest(r, mask.registry_digest, expected_digest);
  const std::uint64_t n = r.u64();
  const std::uint64_t count = r.u64();
  const auto packed = r.bytes((n + 7) / 8);
  mask.selected.assign(n, false);
  for (std::size_t j = 0; j < n; ++j) mask.selected[j] = (packed[j / 8] >> (j % 8)) & 1u;
  if (mask.count() != count) fail(ErrorKind::kData, r.label() + ": selected count does not match bitset");
  if (!r.at_end()) fail(ErrorKind::kData, r.label() + ": trailing bytes");
  return mask;
}

}  // namespace codespot::importance
