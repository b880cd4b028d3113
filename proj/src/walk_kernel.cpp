#include "dsheat/walk_kernel.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dsheat {

namespace {

constexpr double kMassTolerance = 1e-12;

std::vector<KernelEntry> simple_entries(int dim, double move_mass) {
  std::vector<KernelEntry> out;
  for (int a = 0; a < dim; ++a) {
    for (int sign : {-1, 1}) {
      Site z{0, 0, 0};
      z[a] = sign;
      out.push_back({z, move_mass / (2.0 * dim)});
    }
  }
  return out;
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("kernel dimension must be in 1..3");
}

std::vector<KernelEntry> reflected(std::span<const KernelEntry> e) {
  std::vector<KernelEntry> out(e.begin(), e.end());
  for (auto& x : out) x.offset = -x.offset;
  return out;
}

}  // namespace

WalkKernel::WalkKernel(int dim, std::vector<KernelEntry> entries, std::string label)
    : dim_(dim), entries_(std::move(entries)), label_(std::move(label)) {
  check_dim(dim_);
  std::set<Site> seen;
  double sum = 0.0;
  for (auto& e : entries_) {
    if (!std::isfinite(e.prob)) throw std::invalid_argument("kernel probability is not finite");
    if (e.prob < 0.0) throw std::invalid_argument("kernel has negative mass at " + to_string(e.offset, dim_));
    for (int a = dim_; a < kMaxDim; ++a)
      if (e.offset[a] != 0) throw std::invalid_argument("kernel offset has coordinates beyond its dimension");
    if (!seen.insert(e.offset).second)
      throw std::invalid_argument("kernel offset listed twice: " + to_string(e.offset, dim_));
    sum += e.prob;
  }
  if (std::abs(sum - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "kernel mass sums to " << sum << ", not 1";
    throw std::invalid_argument(msg.str());
  }
  std::erase_if(entries_, [](const KernelEntry& e) { return e.prob == 0.0; });
  std::sort(entries_.begin(), entries_.end(),
            [](const KernelEntry& a, const KernelEntry& b) { return a.offset < b.offset; });
  for (const auto& e : entries_) radius_ = std::max(radius_, max_norm(e.offset));
}

WalkKernel WalkKernel::simple(int dim) {
  check_dim(dim);
  return WalkKernel(dim, simple_entries(dim, 1.0), "simple(" + std::to_string(dim) + ")");
}

WalkKernel WalkKernel::lazy(int dim, double stay) {
  check_dim(dim);
  if (!(stay > 0.0 && stay < 1.0)) throw std::invalid_argument("lazy walk stay probability must lie in (0,1)");
  auto e = simple_entries(dim, 1.0 - stay);
  e.push_back({Site{0, 0, 0}, stay});
  std::ostringstream label;
  label << "lazy(" << dim << "," << stay << ")";
  return WalkKernel(dim, std::move(e), label.str());
}

WalkKernel WalkKernel::custom(int dim, std::vector<KernelEntry> table) {
  if (table.empty()) throw std::invalid_argument("custom kernel table is empty");
  return WalkKernel(dim, std::move(table), "custom(" + std::to_string(dim) + ")");
}

double WalkKernel::operator()(const Site& z) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), z,
                             [](const KernelEntry& e, const Site& s) { return e.offset < s; });
  return (it != entries_.end() && it->offset == z) ? it->prob : 0.0;
}

bool WalkKernel::is_symmetric() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [&](const KernelEntry& e) { return (*this)(-e.offset) == e.prob; });
}

std::vector<KernelEntry> KernelSlice::entries() const {
  std::vector<KernelEntry> out;
  probs.for_each_nonzero([&](const Site& s, double v) { out.push_back({s, v}); });
  return out;
}

LatticeField convolve_gather(std::span<const KernelEntry> weights, const LatticeField& f) {
  const int dim = f.dim();
  if (f.storage().is_empty() || weights.empty()) return LatticeField(dim);
  int r = 0;
  for (const auto& w : weights) r = std::max(r, max_norm(w.offset));
  const Box out_box = f.storage().dilated(r);
  std::vector<double> out(out_box.size(), 0.0);

  // Contribution of f(y) lands at x = y - z; row-major indices are affine in
  // the site, so each weight is a fixed linear shift.
  std::ptrdiff_t stride[kMaxDim] = {0, 0, 0};
  std::ptrdiff_t st = 1;
  for (int a = dim - 1; a >= 0; --a) {
    stride[a] = st;
    st *= out_box.extent(a);
  }
  std::vector<std::ptrdiff_t> shift;
  shift.reserve(weights.size());
  for (const auto& w : weights) {
    std::ptrdiff_t d = 0;
    for (int a = 0; a < dim; ++a) d -= w.offset[a] * stride[a];
    shift.push_back(d);
  }

  const auto& vals = f.values();
  for_each_row(f.storage(), out_box, [&](std::size_t fi, std::size_t oi, std::size_t len) {
    const double* src = vals.data() + fi;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      double* dst = out.data() + static_cast<std::ptrdiff_t>(oi) + shift[k];
      const double w = weights[k].prob;
      for (std::size_t j = 0; j < len; ++j) dst[j] += w * src[j];
    }
  });
  LatticeField result(out_box, std::move(out));
  return result;
}

LatticeField apply_transition(const WalkKernel& kernel, const LatticeField& f) {
  if (kernel.dim() != f.dim()) throw std::invalid_argument("kernel and field dimensions differ");
  return convolve_gather(kernel.entries(), f);
}

LatticeField apply_slice(const KernelSlice& slice, const LatticeField& f) {
  if (slice.dim() != f.dim()) throw std::invalid_argument("kernel slice and field dimensions differ");
  const auto e = slice.entries();
  return convolve_gather(e, f);
}

std::vector<KernelSlice> kernel_powers(const WalkKernel& kernel, int n_max) {
  if (n_max < 0) throw std::invalid_argument("step count must be nonnegative");
  std::vector<KernelSlice> out;
  out.reserve(static_cast<std::size_t>(n_max) + 1);
  out.push_back({0, LatticeField::delta(kernel.dim())});
  // P^n_{0,z} = sum_w P^{n-1}_{0,w} P_{w,z}: a gather with the reflected table.
  const auto refl = reflected(kernel.entries());
  for (int n = 1; n <= n_max; ++n) {
    LatticeField next = convolve_gather(refl, out.back().probs);
    next.trim();
    out.push_back({n, std::move(next)});
  }
  return out;
}

KernelSlice n_step_kernel(const WalkKernel& kernel, int n) {
  if (n < 0) throw std::invalid_argument("step count must be nonnegative");
  const auto refl = reflected(kernel.entries());
  KernelSlice s{0, LatticeField::delta(kernel.dim())};
  for (int k = 1; k <= n; ++k) {
    s.probs = convolve_gather(refl, s.probs);
    s.probs.trim();
    s.steps = k;
  }
  return s;
}

std::complex<double> char_function(const WalkKernel& kernel, std::span<const double> xi) {
  if (static_cast<int>(xi.size()) != kernel.dim()) throw std::invalid_argument("frequency has wrong dimension");
  std::complex<double> acc = 0.0;
  for (const auto& e : kernel.entries()) {
    double phase = 0.0;
    for (int a = 0; a < kernel.dim(); ++a) phase += e.offset[a] * xi[static_cast<std::size_t>(a)];
    acc += e.prob * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc;
}

int default_quadrature_points(int dim) {
  switch (dim) {
    case 1:
      return 4096;
    case 2:
      return 512;
    default:
      return 96;
  }
}

double overlap_q(const WalkKernel& kernel, int k, OverlapMethod method, int points) {
  if (k < 0) throw std::invalid_argument("overlap index must be nonnegative");
  if (method == OverlapMethod::convolution) {
    const auto slice = n_step_kernel(kernel, k);
    double q = 0.0;
    for (double v : slice.probs.values()) q += v * v;
    return q;
  }
  if (points <= 0) points = default_quadrature_points(kernel.dim());
  return torus_mean(kernel.dim(), points, [&](std::span<const double> xi) {
    return std::pow(std::norm(char_function(kernel, xi)), k);
  });
}

std::vector<double> overlap_sequence(const WalkKernel& kernel, int k_max) {
  std::vector<double> q;
  q.reserve(static_cast<std::size_t>(k_max) + 1);
  const auto refl = reflected(kernel.entries());
  LatticeField slice = LatticeField::delta(kernel.dim());
  for (int k = 0; k <= k_max; ++k) {
    if (k > 0) {
      slice = convolve_gather(refl, slice);
      slice.trim();
    }
    double s = 0.0;
    for (double v : slice.values()) s += v * v;
    q.push_back(s);
  }
  return q;
}

}  // namespace dsheat
