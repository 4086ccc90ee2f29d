#include "pielab/mask.hpp"

#include <numeric>

namespace pielab {

std::int64_t PruneMask::Entry::active_count() const {
  return std::accumulate(active.begin(), active.end(), std::int64_t{0},
                         [](std::int64_t acc, std::uint8_t b) { return acc + (b ? 1 : 0); });
}

const PruneMask::Entry* PruneMask::find(std::string_view layer) const {
  for (const auto& e : entries)
    if (e.layer == layer) return &e;
  return nullptr;
}

PruneMask::Entry* PruneMask::find(std::string_view layer) {
  for (auto& e : entries)
    if (e.layer == layer) return &e;
  return nullptr;
}

bool is_monotone(const PruneMask& before, const PruneMask& after) {
  for (const auto& b : before.entries) {
    const auto* a = after.find(b.layer);
    if (!a || a->active.size() != b.active.size()) return false;
    for (std::size_t i = 0; i < b.active.size(); ++i)
      if (!b.active[i] && a->active[i]) return false;
  }
  return true;
}

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& active) {
  std::vector<std::uint8_t> out((active.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < active.size(); ++i)
    if (active[i]) out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | (1U << (i % 8)));
  return out;
}

std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& packed, std::size_t count) {
  if (packed.size() * 8 < count) throw FormatError("bit-packed mask shorter than its declared length");
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1U;
  return out;
}

}  // namespace pielab
