#include "evobayes/rng.hpp"

#include <cmath>

namespace evobayes {

NormalStream::NormalStream(std::uint64_t seed, std::uint32_t tag, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                    index};
  engine_.seed(seq);
}

void brownian_increment(NormalStream& s, double dt, int refinement, double* out, std::size_t n) {
  const int r = refinement < 1 ? 1 : refinement;
  const double scale = std::sqrt(dt / r);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
  for (int sub = 0; sub < r; ++sub) {
    for (std::size_t i = 0; i < n; ++i) out[i] += s();
  }
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

std::vector<NormalStream> make_streams(std::uint64_t seed, std::uint32_t tag, std::size_t count) {
  std::vector<NormalStream> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) out.emplace_back(seed, tag, static_cast<std::uint32_t>(j));
  return out;
}

}  // namespace evobayes
