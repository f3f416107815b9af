#include "epsel/random.hpp"

namespace epsel {

Rng make_rng(Seed seed, Stream stream, std::uint64_t substream) {
  const auto lo = static_cast<std::uint32_t>(seed.value);
  const auto hi = static_cast<std::uint32_t>(seed.value >> 32);
  const auto tag = static_cast<std::uint32_t>(stream);
  const auto sub_lo = static_cast<std::uint32_t>(substream);
  const auto sub_hi = static_cast<std::uint32_t>(substream >> 32);
  std::seed_seq seq{lo, hi, tag, sub_lo, sub_hi};
  return Rng(seq);
}

CVector complex_normal_vector(Rng& rng, Index n, double variance) {
  ComplexNormal draw(variance);
  CVector out(n);
  for (Index i = 0; i < n; ++i) out[i] = draw(rng);
  return out;
}

}  // namespace epsel
