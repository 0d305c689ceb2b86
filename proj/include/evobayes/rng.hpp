#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace evobayes {

/// Independent deterministic normal stream keyed by (seed, tag, index).
class NormalStream {
 public:
  NormalStream() = default;
  NormalStream(std::uint64_t seed, std::uint32_t tag, std::uint32_t index);
  double operator()() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

/// Brownian increments of variance dt, with optional path coupling: an increment
/// over dt drawn with refinement r is the sum of the r increments over dt/r that a
/// run with step dt/r would draw from the same stream (substep-major, then
/// component order).
void brownian_increment(NormalStream& s, double dt, int refinement, double* out, std::size_t n);

std::vector<NormalStream> make_streams(std::uint64_t seed, std::uint32_t tag, std::size_t count);

}  // namespace evobayes
