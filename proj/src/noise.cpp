#include "dsheat/noise.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dsheat {

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::word(std::uint64_t seed, std::uint64_t replica, std::uint64_t step) {
  std::uint64_t h = mix(seed ^ 0x243f6a8885a308d3ULL);
  h = mix(h ^ replica);
  return mix(h ^ step);
}

std::uint64_t CounterRng::word(std::uint64_t seed, std::uint64_t replica, std::uint64_t step, const Site& x,
                               int dim) {
  std::uint64_t h = word(seed, replica, step);
  for (int a = 0; a < dim; ++a) {
    const auto c = static_cast<std::uint64_t>(static_cast<std::uint32_t>(x[a]));
    h = mix(h ^ (c + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(a + 1)));
  }
  return h;
}

std::string to_string(NoiseMode m) { return m == NoiseMode::spacetime ? "spacetime" : "temporal"; }

std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::rademacher:
      return "rademacher";
    case NoiseFamily::uniform_symmetric:
      return "uniform";
    case NoiseFamily::constant:
      return "constant";
  }
  return "unknown";
}

NoiseModel NoiseModel::make(NoiseMode mode, NoiseFamily family, double scale, bool white) {
  if (!std::isfinite(scale)) throw std::invalid_argument("noise scale must be finite");
  if (family != NoiseFamily::constant && !(scale > 0.0))
    throw std::invalid_argument("noise scale must be positive for " + to_string(family));
  NoiseModel m(mode, family, scale, white);
  if (white && (std::abs(m.mean()) > 1e-12 || std::abs(m.variance() - 1.0) > 1e-12)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "noise flagged white but " << m.label() << " has mean " << m.mean() << " and variance " << m.variance();
    throw std::invalid_argument(msg.str());
  }
  return m;
}

NoiseModel NoiseModel::white_rademacher(NoiseMode mode) { return make(mode, NoiseFamily::rademacher, 1.0, true); }

NoiseModel NoiseModel::white_uniform(NoiseMode mode) {
  return make(mode, NoiseFamily::uniform_symmetric, std::sqrt(3.0), true);
}

double NoiseModel::mean() const { return family_ == NoiseFamily::constant ? scale_ : 0.0; }

double NoiseModel::variance() const {
  switch (family_) {
    case NoiseFamily::rademacher:
      return scale_ * scale_;
    case NoiseFamily::uniform_symmetric:
      return scale_ * scale_ / 3.0;
    case NoiseFamily::constant:
      return 0.0;
  }
  return 0.0;
}

double NoiseModel::bound() const { return std::abs(scale_); }

NoiseStats NoiseModel::stats(double p) const {
  if (!(p >= 1.0)) throw std::invalid_argument("moment order p must be >= 1");
  double kp = bound();
  if (family_ == NoiseFamily::uniform_symmetric) kp = scale_ * std::pow(1.0 / (p + 1.0), 1.0 / p);
  return {mean(), variance(), bound(), kp};
}

double NoiseModel::from_word(std::uint64_t w) const {
  switch (family_) {
    case NoiseFamily::rademacher:
      return (w >> 63) ? scale_ : -scale_;
    case NoiseFamily::uniform_symmetric:
      return scale_ * (2.0 * CounterRng::unit(w) - 1.0);
    case NoiseFamily::constant:
      return scale_;
  }
  return 0.0;
}

double NoiseModel::value(std::uint64_t seed, std::uint64_t replica, std::int64_t step, const Site& x, int dim) const {
  if (family_ == NoiseFamily::constant) return scale_;
  if (mode_ == NoiseMode::temporal) return temporal_value(seed, replica, step);
  return from_word(CounterRng::word(seed, replica, static_cast<std::uint64_t>(step), x, dim));
}

double NoiseModel::temporal_value(std::uint64_t seed, std::uint64_t replica, std::int64_t step) const {
  if (family_ == NoiseFamily::constant) return scale_;
  const auto n = static_cast<std::uint64_t>(step);
  if (family_ == NoiseFamily::rademacher)
    return (CounterRng::word(seed, replica, n >> 6) >> (n & 63)) & 1 ? scale_ : -scale_;
  return from_word(CounterRng::word(seed, replica, n));
}

std::string NoiseModel::label() const {
  std::ostringstream s;
  s.precision(17);
  s << to_string(family_) << "(" << scale_ << ")," << to_string(mode_);
  return s.str();
}

double NoiseSlice::operator()(const Site& x) const {
  if (!region.contains(x)) throw std::out_of_range("noise requested outside the sampled region");
  return values[region.index(x)];
}

NoiseSlice sample_slice(const NoiseModel& model, std::int64_t step, const Box& region, const NoiseStream& stream) {
  NoiseSlice slice{step, region, std::vector<double>(region.size())};
  if (model.is_deterministic() || model.mode() == NoiseMode::temporal) {
    const double v = model.temporal_value(stream.seed, stream.replica, step);
    std::fill(slice.values.begin(), slice.values.end(), v);
    return slice;
  }
  const int dim = region.dim();
  region.for_each([&](const Site& x, std::size_t i) {
    slice.values[i] = model.value(stream.seed, stream.replica, step, x, dim);
  });
  return slice;
}

NoiseStats noise_stats(const NoiseModel& model, double p) { return model.stats(p); }

}  // namespace dsheat
