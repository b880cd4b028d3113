#pragma once

#include <vector>

#include "dsheat/sigma.hpp"
#include "dsheat/walk_kernel.hpp"

namespace dsheat {

/// Kernel plus a lazily extended cache of the overlaps q_k.
///
/// Holds mutable cache state; give each thread its own profile.
class SpectralProfile {
 public:
  explicit SpectralProfile(WalkKernel kernel, int quadrature_points = 0, double series_tolerance = 1e-14);

  const WalkKernel& kernel() const { return kernel_; }
  int quadrature_points() const { return points_; }
  double series_tolerance() const { return tolerance_; }
  /// Upper limit on cached overlaps; series evaluations report their achieved
  /// error when they hit it.
  int max_terms() const { return max_terms_; }
  void set_max_terms(int n) { max_terms_ = n; }

  /// q_k, extending the cache by self-convolution as needed.
  double q(int k);
  const std::vector<double>& cached_q() const { return q_; }

 private:
  WalkKernel kernel_;
  int points_;
  double tolerance_;
  int max_terms_;
  std::vector<double> q_;
  LatticeField slice_;
  std::vector<KernelEntry> reflected_;
};

struct SeriesValue {
  double value = 0.0;
  double error_bound = 0.0;  ///< rigorous bound on the truncation error
  int terms = 0;
  bool converged = false;
};

enum class UpsilonMethod { quadrature, series };

/// Upsilon(lambda) = (2 pi)^{-d} int dxi / (lambda - |phi(xi)|^2), lambda > 1.
double upsilon_quadrature(const WalkKernel& kernel, double lambda, int points = 0);
/// Upsilon(lambda) = lambda^{-1} sum_n lambda^{-n} q_n, truncated once the
/// tail bound q_N lambda^{-N} / (lambda - 1) drops below `tolerance`
/// (q_n is nonincreasing, so q_N majorizes the tail terms).
SeriesValue upsilon_series(SpectralProfile& profile, double lambda, double tolerance = 0.0);
double upsilon(SpectralProfile& profile, double lambda, UpsilonMethod method);

/// Extended inverse sup{lambda > 1 : Upsilon(lambda) > x} with sup of the empty
/// set = 1, and 0 for x = +infinity. Bisection on the series to relative
/// accuracy 1e-13 in lambda. Throws for x <= 0.
double upsilon_inverse(SpectralProfile& profile, double x);

/// Constant used in the p-th moment bounds: exactly 1 at p = 2, otherwise the
/// generic bound 18 p sqrt(p/(p-1)). Throws for p < 2.
double burkholder_constant(double p);

struct BoundReport {
  double p = 2.0;
  double cp = 1.0;
  double lip = 0.0;
  double lower_sigma = 0.0;
  double upper = 0.0;  ///< 1/2 ln Upsilon^{-1}((c_p Lip)^{-2})
  double lower = 0.0;  ///< 1/2 ln Upsilon^{-1}(L_sigma^{-2})
};

BoundReport liapounov_bounds(SpectralProfile& profile, double p, const SigmaSpec& sigma);

/// Closed forms for the one-dimensional simple symmetric walk.
namespace simple_walk {

/// q_n = (2n-1)!!/(2n)!!, accumulated as a product of ratios.
double overlap(int n);
/// sum_n q_n x^n = (1 - x)^{-1/2}, |x| < 1.
double overlap_generating_function(double x);
/// lambda Upsilon(lambda) = (1 - 1/lambda)^{-1/2}, so Upsilon(lambda) = 1/sqrt(lambda (lambda - 1)).
double upsilon(double lambda);
/// Root of lambda (lambda - 1) = nu^4.
double upsilon_inverse_of_nu(double nu);
/// inf{lambda > 1 : sum_n q_n lambda^{-n} < lambda / nu^2}, found by bisection
/// on the generating function.
double threshold_from_generating_function(double nu);
/// 1F1(1/2; 1; 1/lambda), reported next to the generating-function value.
double kummer_value(double lambda);

}  // namespace simple_walk

}  // namespace dsheat
