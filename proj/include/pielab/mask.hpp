#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pielab/nn/model.hpp"

namespace pielab {

/// Binary keep-mask over the prunable arrays of a ParamSet. Arrays that are not
/// prunable (embeddings, biases, classifier) have no entry.
struct PruneMask {
  struct Entry {
    std::string layer;
    /// Row-major, 1 = active, 0 = pruned.
    std::vector<std::uint8_t> active;

    std::int64_t active_count() const;
    std::int64_t pruned_count() const { return static_cast<std::int64_t>(active.size()) - active_count(); }

    bool operator==(const Entry&) const = default;
  };

  std::vector<Entry> entries;
  /// Target pruned fraction this mask was built for (0 for a fresh mask).
  double target = 0.0;

  const Entry* find(std::string_view layer) const;
  Entry* find(std::string_view layer);

  /// All-active mask with one entry per prunable array.
  template <typename Scalar>
  static PruneMask full(const nn::ParamSet<Scalar>& params) {
    PruneMask m;
    for (const auto& l : params.layers)
      if (l.prunable()) m.entries.push_back({l.name, std::vector<std::uint8_t>(static_cast<std::size_t>(l.value.size()), 1)});
    return m;
  }

  bool operator==(const PruneMask&) const = default;
};

/// Zeroes every pruned position of `params`.
template <typename Scalar>
void apply_mask(nn::ParamSet<Scalar>& params, const PruneMask& mask) {
  for (const auto& e : mask.entries) {
    auto& v = params[e.layer];
    if (static_cast<std::size_t>(v.size()) != e.active.size()) throw Error("mask/parameter shape mismatch for " + e.layer);
    auto* data = v.data();
    for (std::size_t i = 0; i < e.active.size(); ++i)
      if (!e.active[i]) data[i] = Scalar(0);
  }
}

/// True when every position pruned in `before` is also pruned in `after`.
bool is_monotone(const PruneMask& before, const PruneMask& after);

/// Little-endian bit packing used in checkpoints: bit i of byte i/8 is position i.
std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& active);
std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& packed, std::size_t count);

}  // namespace pielab
