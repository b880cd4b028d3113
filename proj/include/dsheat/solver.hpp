#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsheat/lattice.hpp"
#include "dsheat/noise.hpp"
#include "dsheat/sigma.hpp"
#include "dsheat/walk_kernel.hpp"

namespace dsheat {

/// Thrown when a step would need noise (or resolved values) outside what the
/// caller sampled.
class RegionTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One application of u_{n+1}(x) = (P u_n)(x) + sigma(u_n(x)) xi_n(x).
///
/// With sigma(0) = 0, an exact-everywhere u and xi covering support(u) the
/// update is closed on support(u) dilated by R. Otherwise the result is
/// resolved on (resolved(u) eroded by R) intersected with the noise region;
/// when u is exact everywhere that is the noise region itself. Throws
/// RegionTooSmall when nothing stays resolved.
LatticeField step(const LatticeField& u, const WalkKernel& kernel, const SigmaSpec& sigma, const NoiseSlice& xi);

struct RunMetadata {
  std::string kernel;
  std::string sigma;
  std::string noise;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::optional<Box> box;
};

struct Trajectory {
  std::vector<LatticeField> fields;  ///< u_0 .. u_{n_max}
  RunMetadata meta;

  int horizon() const { return static_cast<int>(fields.size()) - 1; }
  const LatticeField& at(int n) const { return fields.at(static_cast<std::size_t>(n)); }
};

/// Noise region used for step n of a run: the bounding box when one is given,
/// otherwise the support box of u_n (requires sigma(0) = 0).
Box noise_region(const LatticeField& u, const std::optional<Box>& box);

/// Streams u_0..u_{n_max} to `visit` without keeping the trajectory.
/// Returning false from `visit` stops the run early.
void evolve_each(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0, const NoiseModel& noise,
                 int n_max, const NoiseStream& stream, const std::optional<Box>& box,
                 const std::function<bool(int, const LatticeField&)>& visit);

/// The unique forward solution for n = 0..n_max. A bounding box is mandatory
/// when sigma(0) != 0.
Trajectory evolve(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0, const NoiseModel& noise,
                  int n_max, const NoiseStream& stream, const std::optional<Box>& box = std::nullopt);

/// u_{n+1} rebuilt from the closed-form sum
///   (P^{n+1} u_0)(x) + sum_{j<=n} sum_y P^{n-j}_{x,y} sigma(u_j(y)) xi_j(y),
/// using precomputed n-step tables (no step-by-step recursion) and the
/// u_j of `trajectory`. Noise is resampled from the same stream.
LatticeField duhamel_eval(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0,
                          const NoiseModel& noise, const NoiseStream& stream, const Trajectory& trajectory, int n);

/// Sites where `a` and `b` are both resolved; the largest absolute difference there.
double max_abs_diff_resolved(const LatticeField& a, const LatticeField& b);

// --- Picard iteration ------------------------------------------------------

/// Picard iterates f^(0..iterations) for one noise path; f^(l)[n] is the field
/// at time n. f^(0) = u_0 at every time and
/// f^(l+1)_{n+1} = P^{n+1} u_0 + (A f^(l))_n with
/// (A f)_n(x) = sum_{j<=n} sum_y P^{n-j}_{x,y} sigma(f_j(y)) xi_j(y).
/// Requires sigma(0) = 0.
std::vector<std::vector<LatticeField>> picard_iterates(const WalkKernel& kernel, const SigmaSpec& sigma,
                                                       const LatticeField& u0, const NoiseModel& noise,
                                                       const NoiseStream& stream, int n_max, int iterations);

struct PicardOptions {
  int n_max = 20;
  int iterations = 6;
  double lambda = 1.2720196495140689;  ///< sqrt of the golden ratio
  double p = 2.0;
  int replicas = 4000;
  std::uint64_t seed = 0;
  int workers = 0;
  int blocks = 20;  ///< jackknife groups; fixed so results do not depend on workers
};

struct PicardReport {
  /// d_l = sup_n sup_x lambda^{-n} ||f^(l+1)_n(x) - f^(l)_n(x)||_p (Monte Carlo), l = 0..iterations-1.
  std::vector<double> distance;
  std::vector<double> distance_se;
  /// d_{l+1}/d_l and its jackknife standard error (NaN when d_l = 0).
  std::vector<double> ratio;
  std::vector<double> ratio_se;
  /// c_p Lip_sigma sqrt(Upsilon(lambda^2)).
  double predicted_factor = 0.0;
  bool contraction_expected = true;
  std::string warning;
};

PicardReport picard_solve(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0,
                          const NoiseModel& noise, const PicardOptions& options);

// --- Structural checks -----------------------------------------------------

struct SupportRow {
  int n = 0;
  int radius = 0;            ///< R_n (max-norm)
  std::size_t count = 0;     ///< number of nonzero sites
  std::size_t ball_count = 0;  ///< (2 (R_0 + n R) + 1)^d
  bool radius_recursion = true;  ///< R_n <= R_{n-1} + R (always true at n = 0)
};

/// Support radius and size per step. With sigma(0) = 0 every row must satisfy
/// the radius recursion; `all_ok` says whether it did.
struct SupportReport {
  std::vector<SupportRow> rows;
  bool all_ok = true;
};

SupportReport support_metrics(const Trajectory& t, const WalkKernel& kernel);

struct ComparisonVerdict {
  double stay_probability = 0.0;
  double noise_bound = 0.0;
  double lip = 0.0;
  bool holds = false;  ///< P_{0,0} >= C_xi Lip_sigma
};

ComparisonVerdict check_comparison(const WalkKernel& kernel, const SigmaSpec& sigma, const NoiseModel& noise);

struct PairedPathResult {
  ComparisonVerdict verdict;
  int paths = 0;
  std::size_t checks = 0;  ///< (path, n, site) triples examined
  std::size_t order_violations = 0;
  std::size_t positivity_violations = 0;
  double min_gap = 0.0;  ///< min of u_n - v_n over everything examined
};

/// Evolves u0 and v0 along the same noise paths and counts sites where
/// u_n < v_n, or v_n < 0 when v0 >= 0 (only asserted when the verdict holds,
/// but always counted).
PairedPathResult paired_comparison(const WalkKernel& kernel, const SigmaSpec& sigma, const NoiseModel& noise,
                                   const LatticeField& u0, const LatticeField& v0, int n_max, int paths,
                                   std::uint64_t seed, int workers = 0);

}  // namespace dsheat
