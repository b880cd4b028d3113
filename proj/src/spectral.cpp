#include "dsheat/spectral.hpp"

#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dsheat {

namespace {

int default_max_terms(int dim) {
  switch (dim) {
    case 1:
      return 20000;
    case 2:
      return 1500;
    default:
      return 250;
  }
}

void require_lambda(double lambda) {
  if (!(lambda > 1.0) || !std::isfinite(lambda)) throw std::invalid_argument("Upsilon needs lambda > 1");
}

}  // namespace

SpectralProfile::SpectralProfile(WalkKernel kernel, int quadrature_points, double series_tolerance)
    : kernel_(std::move(kernel)),
      points_(quadrature_points > 0 ? quadrature_points : default_quadrature_points(kernel_.dim())),
      tolerance_(series_tolerance),
      max_terms_(default_max_terms(kernel_.dim())),
      slice_(LatticeField::delta(kernel_.dim())) {
  for (const auto& e : kernel_.entries()) reflected_.push_back({-e.offset, e.prob});
  q_.push_back(1.0);
}

double SpectralProfile::q(int k) {
  if (k < 0) throw std::invalid_argument("overlap index must be nonnegative");
  while (static_cast<int>(q_.size()) <= k) {
    slice_ = convolve_gather(reflected_, slice_);
    // The far shell of P^n holds values like (2d)^{-n}; they underflow into
    // subnormals and keep the box at full radius. Entries below 1e-40 of the
    // peak move q_n by far less than its rounding error, so drop them.
    double peak = 0.0;
    for (double v : slice_.values()) peak = std::max(peak, std::abs(v));
    for (double& v : slice_.mutable_values())
      if (std::abs(v) < 1e-40 * peak) v = 0.0;
    slice_.trim();
    double s = 0.0;
    for (double v : slice_.values()) s += v * v;
    q_.push_back(s);
  }
  return q_[static_cast<std::size_t>(k)];
}

double upsilon_quadrature(const WalkKernel& kernel, double lambda, int points) {
  require_lambda(lambda);
  if (points <= 0) points = default_quadrature_points(kernel.dim());
  return torus_mean(kernel.dim(), points, [&](std::span<const double> xi) {
    return 1.0 / (lambda - std::norm(char_function(kernel, xi)));
  });
}

SeriesValue upsilon_series(SpectralProfile& profile, double lambda, double tolerance) {
  require_lambda(lambda);
  if (tolerance <= 0.0) tolerance = profile.series_tolerance();
  SeriesValue out;
  double sum = 0.0;
  double weight = 1.0;  // lambda^{-n}
  const double geometric = 1.0 / (1.0 - 1.0 / lambda);
  for (int n = 0;; ++n) {
    const double qn = profile.q(n);
    // Everything from n on is at most q_n lambda^{-n} / (1 - 1/lambda).
    const double tail = qn * weight * geometric / lambda;
    if (tail < tolerance || n >= profile.max_terms()) {
      out.value = sum / lambda;
      out.error_bound = tail;
      out.terms = n;
      out.converged = tail < tolerance;
      return out;
    }
    sum += qn * weight;
    weight /= lambda;
  }
}

double upsilon(SpectralProfile& profile, double lambda, UpsilonMethod method) {
  if (method == UpsilonMethod::quadrature)
    return upsilon_quadrature(profile.kernel(), lambda, profile.quadrature_points());
  return upsilon_series(profile, lambda).value;
}

namespace {

// True iff Upsilon(lambda) > x, decided from partial sums and the tail bound.
// Terms are added until the bracket [partial, partial + tail] excludes x, or
// the tail is negligible relative to x (then the partial sum decides).
bool upsilon_exceeds(SpectralProfile& profile, double lambda, double x) {
  const double target = x * lambda;  // compare lambda Upsilon(lambda) with x lambda
  const double geometric = 1.0 / (1.0 - 1.0 / lambda);
  double sum = 0.0;
  double weight = 1.0;
  for (int n = 0;; ++n) {
    const double qn = profile.q(n);
    const double tail = qn * weight * geometric;
    if (sum > target) return true;
    if (sum + tail <= target) return false;
    if (tail < 1e-16 * target || n >= profile.max_terms()) return sum > target;
    sum += qn * weight;
    weight /= lambda;
  }
}

}  // namespace

double upsilon_inverse(SpectralProfile& profile, double x) {
  if (std::isnan(x) || x <= 0.0) throw std::invalid_argument("Upsilon inverse needs x > 0");
  if (std::isinf(x)) return 0.0;
  double lo = 1.0 + 1e-12;
  if (!upsilon_exceeds(profile, lo, x)) return 1.0;
  double hi = 2.0;
  while (upsilon_exceeds(profile, hi, x)) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-13 * lo) {
    const double mid = 0.5 * (lo + hi);
    if (upsilon_exceeds(profile, mid, x))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double burkholder_constant(double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("Burkholder constant needs p >= 2");
  if (p == 2.0) return 1.0;
  return 18.0 * p * std::sqrt(p / (p - 1.0));
}

BoundReport liapounov_bounds(SpectralProfile& profile, double p, const SigmaSpec& sigma) {
  BoundReport r;
  r.p = p;
  r.cp = burkholder_constant(p);
  r.lip = sigma.lip();
  r.lower_sigma = sigma.lower();
  auto half_log_inverse = [&](double scale) {
    const double x = scale == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (scale * scale);
    const double inv = upsilon_inverse(profile, x);
    return inv == 0.0 ? -std::numeric_limits<double>::infinity() : 0.5 * std::log(inv);
  };
  r.upper = half_log_inverse(r.cp * r.lip);
  r.lower = half_log_inverse(r.lower_sigma);
  return r;
}

namespace simple_walk {

double overlap(int n) {
  if (n < 0) throw std::invalid_argument("overlap index must be nonnegative");
  double q = 1.0;
  for (int k = 1; k <= n; ++k) q *= (2.0 * k - 1.0) / (2.0 * k);
  return q;
}

double overlap_generating_function(double x) {
  if (!(std::abs(x) < 1.0)) throw std::invalid_argument("generating function needs |x| < 1");
  return 1.0 / std::sqrt(1.0 - x);
}

double upsilon(double lambda) {
  require_lambda(lambda);
  return 1.0 / std::sqrt(lambda * (lambda - 1.0));
}

double upsilon_inverse_of_nu(double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  const double nu4 = nu * nu * nu * nu;
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * nu4));
}

double threshold_from_generating_function(double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  const double nu2 = nu * nu;
  auto below = [&](double lambda) { return overlap_generating_function(1.0 / lambda) < lambda / nu2; };
  double lo = 1.0, hi = 2.0;
  while (!below(hi)) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-15 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (below(mid) ? hi : lo) = mid;
  }
  return hi;
}

double kummer_value(double lambda) {
  require_lambda(lambda);
  return boost::math::hypergeometric_1F1(0.5, 1.0, 1.0 / lambda);
}

}  // namespace simple_walk

}  // namespace dsheat
