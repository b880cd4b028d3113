#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dsheat/lattice.hpp"

namespace dsheat {

struct KernelEntry {
  Site offset;
  double prob;
};

/// One-step transition probabilities P_{0,z} of a finite-range random walk on Z^d.
///
/// Translation invariant: P_{x,y} = table[y - x]. Immutable after construction.
class WalkKernel {
 public:
  /// Simple symmetric walk: mass 1/(2d) on each unit neighbour.
  static WalkKernel simple(int dim);
  /// Stays put with probability `stay`, otherwise a simple step.
  static WalkKernel lazy(int dim, double stay);
  /// Arbitrary finite table. Throws std::invalid_argument if it is not a
  /// probability distribution (negative mass, sum off by more than 1e-12,
  /// non-finite entries, duplicate offsets).
  static WalkKernel custom(int dim, std::vector<KernelEntry> table);

  int dim() const { return dim_; }
  /// Max-norm radius of the support.
  int radius() const { return radius_; }
  std::span<const KernelEntry> entries() const { return entries_; }

  double operator()(const Site& z) const;
  double transition(const Site& x, const Site& y) const { return (*this)(y - x); }
  double stay_probability() const { return (*this)(Site{0, 0, 0}); }
  bool is_symmetric() const;

  /// Short human-readable description ("simple(1)", "lazy(1,0.5)", "custom(2)").
  const std::string& label() const { return label_; }

 private:
  WalkKernel(int dim, std::vector<KernelEntry> entries, std::string label);

  int dim_ = 1;
  int radius_ = 0;
  std::vector<KernelEntry> entries_;
  std::string label_;
};

/// P^n_{0,z} for a fixed n.
struct KernelSlice {
  int steps = 0;
  LatticeField probs;

  int dim() const { return probs.dim(); }
  double operator()(const Site& z) const { return probs(z); }
  /// Nonzero entries as a table.
  std::vector<KernelEntry> entries() const;
};

/// out(x) = sum_z weights(z) f(x + z), evaluated exactly on the dilated storage box.
LatticeField convolve_gather(std::span<const KernelEntry> weights, const LatticeField& f);

/// (Pf)(x) = sum_y P_{x,y} f(y).
LatticeField apply_transition(const WalkKernel& kernel, const LatticeField& f);
/// (P^n f)(x) = sum_y P^n_{x,y} f(y) using a precomputed slice.
LatticeField apply_slice(const KernelSlice& slice, const LatticeField& f);

KernelSlice n_step_kernel(const WalkKernel& kernel, int n);
/// Slices for n = 0..n_max, built by repeated self-convolution.
std::vector<KernelSlice> kernel_powers(const WalkKernel& kernel, int n_max);

/// phi(xi) = sum_x exp(i x.xi) P_{0,x}.
std::complex<double> char_function(const WalkKernel& kernel, std::span<const double> xi);

/// Default per-axis point count for torus quadrature (4096 in d=1, 512 in d=2, 96 in d=3).
int default_quadrature_points(int dim);

/// (2 pi)^{-d} times the integral of f over (-pi, pi]^d, by the composite
/// rectangle rule with `points` nodes per axis. f receives a span of length d.
template <class F>
double torus_mean(int dim, int points, F&& f) {
  const double h = 2.0 * std::numbers::pi / points;
  double xi[kMaxDim] = {0.0, 0.0, 0.0};
  long double sum = 0.0L;
  std::vector<int> k(static_cast<std::size_t>(dim), 0);
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(points);
  for (std::size_t i = 0; i < total; ++i) {
    for (int a = 0; a < dim; ++a) xi[a] = -std::numbers::pi + h * k[static_cast<std::size_t>(a)];
    sum += f(std::span<const double>(xi, static_cast<std::size_t>(dim)));
    for (int a = dim - 1; a >= 0; --a) {
      if (++k[static_cast<std::size_t>(a)] < points) break;
      k[static_cast<std::size_t>(a)] = 0;
    }
  }
  return static_cast<double>(sum / static_cast<long double>(total));
}

enum class OverlapMethod { convolution, quadrature };

/// q_k = sum_z (P^k_{0,z})^2, either from the k-step table or as the torus
/// mean of |phi|^{2k}. `points` = 0 selects the default resolution.
double overlap_q(const WalkKernel& kernel, int k, OverlapMethod method, int points = 0);
/// q_0..q_{k_max} by convolution.
std::vector<double> overlap_sequence(const WalkKernel& kernel, int k_max);

}  // namespace dsheat
