#include "costfl/rng.hpp"

namespace costfl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngSeed RngSeed::derive(std::string_view sub) const {
  RngSeed out = *this;
  out.stream_label.append("/").append(sub);
  return out;
}

RngSeed RngSeed::derive(std::uint64_t a, std::uint64_t b) const {
  RngSeed out = *this;
  out.stream_label.append("/").append(std::to_string(a));
  out.stream_label.append(".").append(std::to_string(b));
  return out;
}

std::uint64_t stream_state(const RngSeed& s) {
  return splitmix64(splitmix64(s.seed) ^ fnv1a(s.stream_label));
}

Engine make_engine(const RngSeed& s) {
  std::seed_seq seq{static_cast<std::uint32_t>(stream_state(s)),
                    static_cast<std::uint32_t>(stream_state(s) >> 32),
                    static_cast<std::uint32_t>(s.seed),
                    static_cast<std::uint32_t>(s.seed >> 32)};
  return Engine(seq);
}

}  // namespace costfl
