#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsheat/lattice.hpp"
#include "dsheat/noise.hpp"
#include "dsheat/sigma.hpp"
#include "dsheat/walk_kernel.hpp"

namespace dsheat {

/// Everything needed to run one replica of the recursion.
struct SimulationConfig {
  WalkKernel kernel;
  SigmaSpec sigma;
  NoiseModel noise;
  LatticeField u0;
  std::optional<Box> box;  ///< mandatory when sigma(0) != 0
};

enum class MomentTarget { sites, sup };

struct MomentRequest {
  double p = 2.0;
  MomentTarget target = MomentTarget::sites;
  Box sites;              ///< sites to track when target == sites
  bool absolute = true;   ///< E|u|^p, otherwise E u^p
  int n_max = 10;
  int replicas = 1000;
  std::uint64_t seed = 0;
  int workers = 0;
  int blocks = 64;        ///< fixed replica partition; keeps results worker-independent
};

/// Per-step moment estimates. `value[n][i]` refers to site i of `sites` in
/// row-major order, or to M_n when target == sup (one column).
struct MomentSeries {
  double p = 2.0;
  MomentTarget target = MomentTarget::sites;
  Box sites;
  bool absolute = true;
  int replicas = 0;
  std::vector<std::vector<double>> value;
  std::vector<std::vector<double>> stderr_;

  int horizon() const { return static_cast<int>(value.size()) - 1; }
  /// Column i as a series in n.
  std::vector<double> column(std::size_t i = 0) const;
};

MomentSeries mc_moments(const SimulationConfig& config, const MomentRequest& request);

/// m_n(x) = E[u_n(x)^2] for sigma(z) = nu z and white space-time noise, from
///   m_{n+1}(x) = (P^{n+1} u0)(x)^2 + nu^2 sum_{j<=n} sum_y (P^{n-j}_{x,y})^2 m_j(y).
std::vector<LatticeField> exact_second_moment(const WalkKernel& kernel, const LatticeField& u0, double nu, int n_max);

/// sup_x of each field.
std::vector<double> sup_series(const std::vector<LatticeField>& fields);

struct ExponentEstimate {
  double p = 2.0;
  double gamma_hat = 0.0;    ///< per-step log growth rate
  double uncertainty = 0.0;  ///< regression standard error of the slope
  int n1 = 0;
  int n2 = 0;
  bool usable = true;        ///< false when the window holds nonpositive values
  std::string note;
};

/// Least-squares slope of ln(values[n]) against n over [n1, n2].
ExponentEstimate estimate_exponent(std::span<const double> values, int n1, int n2, double p = 2.0);
/// Same, with the default window: the last quarter of the horizon.
ExponentEstimate estimate_exponent(std::span<const double> values, double p = 2.0);
/// (ln values[n2] - ln values[n1]) / (n2 - n1).
ExponentEstimate ratio_estimate(std::span<const double> values, int n1, int n2, double p = 2.0);

// --- Temporal noise --------------------------------------------------------

/// Gamma(p) = ln E[(1 + xi)^p] for a bounded temporal family with scale < 1.
double temporal_gamma(const NoiseModel& noise, double p);
/// Gamma'(0+) = E ln(1 + xi).
double temporal_gamma_prime0(const NoiseModel& noise);

struct TemporalMoments {
  double p = 2.0;
  std::uint64_t paths = 0;
  std::vector<double> mean;    ///< sample mean of U_n^p, n = 0..n_max
  std::vector<double> stderr_;
  std::vector<double> exact;   ///< U_0^p e^{n Gamma(p)}
};

/// Sample moments of U_n = U_0 prod_{j<n} (1 + xi_j) driven by the same
/// temporal draws the lattice solver uses for replicas 0..paths-1. Rademacher
/// paths are tallied by their sign counts, which makes 10^9 paths cheap.
TemporalMoments temporal_moment_mc(const NoiseModel& noise, double u0_total, double p, int n_max,
                                   std::uint64_t paths, std::uint64_t seed, int workers = 0);

struct TemporalRequest {
  std::vector<double> p_grid{0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  int n_max = 200;
  int paths = 50;  ///< lattice paths for (1/n) ln M_n and the product identity
  std::uint64_t seed = 0;
  int workers = 0;
};

struct TemporalReport {
  std::string distribution;
  std::vector<double> p_grid;
  std::vector<double> gamma;
  double gamma_prime0 = 0.0;
  bool gamma_zero_at_zero = true;
  bool gamma_convex = true;
  int n_max = 0;
  double u0_total = 0.0;
  /// ln E U_{n_max}^p = p ln U_0 + n_max Gamma(p), one per grid point.
  std::vector<double> log_moment_prediction;
  int paths = 0;
  double log_sup_rate_mean = 0.0;  ///< mean over paths of (1/n_max) ln M_{n_max}
  double log_sup_rate_stderr = 0.0;
  double log_total_rate_mean = 0.0;  ///< mean over paths of (1/n_max) ln U_{n_max}
  double max_identity_error = 0.0;   ///< max relative |sum_x u_n(x) - U_n| over paths and steps
};

/// Validates the temporal-model assumptions (temporal noise with
/// scale <= P_{0,0} < 1, u0 >= 0 with positive finite mass) and simulates
/// `paths` lattice paths with sigma(z) = z.
TemporalReport temporal_report(const WalkKernel& kernel, const NoiseModel& noise, const LatticeField& u0,
                               const TemporalRequest& request);

// --- Intermittency ---------------------------------------------------------

enum class Verdict { intermittent, not_intermittent, inconclusive };
std::string to_string(Verdict v);

struct ClauseResult {
  std::string name;
  Verdict outcome = Verdict::inconclusive;  ///< intermittent means "clause holds"
  std::string detail;
};

struct IntermittencyVerdict {
  Verdict outcome = Verdict::inconclusive;
  std::vector<ClauseResult> clauses;
  bool positivity = false;
};

/// Weak-intermittency verdict from exponent estimates at increasing p.
/// Clauses: gamma(1) = 0, gamma(2) > 0, gamma(p)/p strictly increasing,
/// p -> gamma(p) convex, each judged with `z` uncertainties of slack. Without
/// the positivity flag the moments are absolute rather than signed, so a
/// passing set of clauses is reported as inconclusive.
IntermittencyVerdict intermittency_verdict(std::span<const ExponentEstimate> estimates, bool positivity,
                                           double z = 2.0);

}  // namespace dsheat
