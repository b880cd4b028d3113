#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsheat/lattice.hpp"

namespace dsheat {

/// Stateless counter-based generator.
///
/// The 64-bit word for (seed, replica, step, site) is obtained by folding each
/// key component into a splitmix64 finalizer chain:
///   h = mix(seed ^ 0x243f6a8885a308d3)
///   h = mix(h ^ replica); h = mix(h ^ step)
///   h = mix(h ^ (uint32(x_a) + 0x9e3779b97f4a7c15 * (a + 1)))   for each active axis a
/// Temporal draws skip the site fold. Temporal rademacher signs are packed 64
/// to a word: step n reads bit (n mod 64) of word(seed, replica, n / 64). A draw is thus a pure function of its
/// key, independent of enumeration order or worker count.
struct CounterRng {
  static std::uint64_t mix(std::uint64_t z);
  static std::uint64_t word(std::uint64_t seed, std::uint64_t replica, std::uint64_t step);
  static std::uint64_t word(std::uint64_t seed, std::uint64_t replica, std::uint64_t step, const Site& x, int dim);
  /// Uniform on [0, 1) with 53 random bits.
  static double unit(std::uint64_t w) { return static_cast<double>(w >> 11) * 0x1.0p-53; }
};

enum class NoiseMode { spacetime, temporal };
enum class NoiseFamily { rademacher, uniform_symmetric, constant };

std::string to_string(NoiseMode m);
std::string to_string(NoiseFamily f);

struct NoiseStats {
  double mean;
  double variance;
  double bound;  ///< C_xi = sup |xi|
  double p_norm; ///< K_{p,xi} = sup ||xi||_p
};

/// Law of the forcing field xi_n(x). Only bounded families are supported.
class NoiseModel {
 public:
  /// Validates the parameters. `scale` is a for rademacher(a), the half-width
  /// b for uniform_symmetric(b), and the value c for constant(c). A model
  /// flagged `white` must have mean 0 and variance 1 within 1e-12.
  static NoiseModel make(NoiseMode mode, NoiseFamily family, double scale, bool white = false);

  static NoiseModel white_rademacher(NoiseMode mode = NoiseMode::spacetime);
  static NoiseModel white_uniform(NoiseMode mode = NoiseMode::spacetime);

  NoiseMode mode() const { return mode_; }
  NoiseFamily family() const { return family_; }
  double scale() const { return scale_; }
  bool is_white() const { return white_; }
  bool is_deterministic() const { return family_ == NoiseFamily::constant; }

  double mean() const;
  double variance() const;
  double bound() const;
  NoiseStats stats(double p) const;

  /// xi_n(x) for the given stream. Temporal models ignore x.
  double value(std::uint64_t seed, std::uint64_t replica, std::int64_t step, const Site& x, int dim) const;
  /// The single per-step draw of a temporal model (also valid for constant).
  double temporal_value(std::uint64_t seed, std::uint64_t replica, std::int64_t step) const;

  std::string label() const;

 private:
  NoiseModel(NoiseMode mode, NoiseFamily family, double scale, bool white)
      : mode_(mode), family_(family), scale_(scale), white_(white) {}
  double from_word(std::uint64_t w) const;

  NoiseMode mode_;
  NoiseFamily family_;
  double scale_;
  bool white_;
};

/// Identifies one noise path: master seed plus replica id.
struct NoiseStream {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
};

/// Realization of xi_n over a finite region. Values outside the region are
/// never assumed; lookups there throw.
struct NoiseSlice {
  std::int64_t step = 0;
  Box region;
  std::vector<double> values;

  double operator()(const Site& x) const;
  bool covers(const Box& b) const { return region.contains(b); }
};

NoiseSlice sample_slice(const NoiseModel& model, std::int64_t step, const Box& region, const NoiseStream& stream);

NoiseStats noise_stats(const NoiseModel& model, double p);

}  // namespace dsheat
