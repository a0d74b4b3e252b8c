#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace costfl {

/// Seed plus a label naming the consumer of the stream ("sampling", "sgd",
/// "costs", ...). Equal (seed, label) pairs always yield equal draw sequences.
struct RngSeed {
  std::uint64_t seed = 0;
  std::string stream_label;

  /// Child stream: same seed, label extended with `sub`.
  RngSeed derive(std::string_view sub) const;
  /// Child stream indexed by integers (round, client id, block, ...).
  RngSeed derive(std::uint64_t a, std::uint64_t b = 0) const;

  bool operator==(const RngSeed&) const = default;
};

using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit state derived from the seed and the label; never equal across labels
/// except by hash collision.
std::uint64_t stream_state(const RngSeed& s);

Engine make_engine(const RngSeed& s);

}  // namespace costfl
