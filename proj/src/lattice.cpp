#include "dsheat/lattice.hpp"

#include <cmath>

namespace dsheat {

std::string to_string(const Site& s, int dim) {
  std::string out = "(";
  for (int a = 0; a < dim; ++a) {
    if (a) out += ",";
    out += std::to_string(s[a]);
  }
  return out + ")";
}

Box::Box(int dim, const Site& lo, const Site& hi) : dim_(dim), lo_(lo), hi_(hi) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension must be in 1..3");
  for (int a = dim; a < kMaxDim; ++a) lo_[a] = hi_[a] = 0;
  for (int a = 0; a < dim; ++a) {
    if (hi_[a] < lo_[a]) {
      *this = empty(dim);
      return;
    }
  }
}

Box Box::ball(int dim, int r) {
  Site lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    lo[a] = -r;
    hi[a] = r;
  }
  return Box(dim, lo, hi);
}

Box Box::empty(int dim) {
  Box b;
  b.dim_ = dim;
  b.lo_ = {0, 0, 0};
  b.hi_ = {-1, 0, 0};
  return b;
}

std::size_t Box::size() const {
  if (is_empty()) return 0;
  std::size_t n = 1;
  for (int a = 0; a < dim_; ++a) n *= static_cast<std::size_t>(hi_[a] - lo_[a] + 1);
  return n;
}

bool Box::contains(const Site& s) const {
  if (is_empty()) return false;
  for (int a = 0; a < dim_; ++a)
    if (s[a] < lo_[a] || s[a] > hi_[a]) return false;
  return true;
}

bool Box::contains(const Box& other) const {
  if (other.is_empty()) return true;
  return contains(other.lo_) && contains(other.hi_);
}

std::size_t Box::index(const Site& s) const {
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a)
    idx = idx * static_cast<std::size_t>(hi_[a] - lo_[a] + 1) + static_cast<std::size_t>(s[a] - lo_[a]);
  return idx;
}

Site Box::site(std::size_t index) const {
  Site s{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    const auto ext = static_cast<std::size_t>(hi_[a] - lo_[a] + 1);
    s[a] = lo_[a] + static_cast<int>(index % ext);
    index /= ext;
  }
  return s;
}

Box Box::dilated(int r) const {
  if (is_empty()) return *this;
  Site lo = lo_, hi = hi_;
  for (int a = 0; a < dim_; ++a) {
    lo[a] -= r;
    hi[a] += r;
  }
  return Box(dim_, lo, hi);
}

Box Box::eroded(int r) const { return dilated(-r); }

Box Box::intersect(const Box& other) const {
  if (is_empty() || other.is_empty()) return empty(dim_);
  Site lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    lo[a] = std::max(lo_[a], other.lo_[a]);
    hi[a] = std::min(hi_[a], other.hi_[a]);
  }
  return Box(dim_, lo, hi);
}

Box Box::hull(const Box& other) const {
  if (is_empty()) return other;
  if (other.is_empty()) return *this;
  Site lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    lo[a] = std::min(lo_[a], other.lo_[a]);
    hi[a] = std::max(hi_[a], other.hi_[a]);
  }
  return Box(dim_, lo, hi);
}

int Box::radius() const {
  if (is_empty()) return 0;
  int r = 0;
  for (int a = 0; a < dim_; ++a) r = std::max({r, std::abs(lo_[a]), std::abs(hi_[a])});
  return r;
}

bool Box::operator==(const Box& other) const {
  if (is_empty() || other.is_empty()) return is_empty() == other.is_empty() && dim_ == other.dim_;
  return dim_ == other.dim_ && lo_ == other.lo_ && hi_ == other.hi_;
}

LatticeField::LatticeField(int dim) : dim_(dim), box_(Box::empty(dim)) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension must be in 1..3");
}

LatticeField::LatticeField(const Box& storage, std::vector<double> values)
    : dim_(storage.dim()), box_(storage), values_(std::move(values)) {
  if (values_.size() != box_.size()) throw std::invalid_argument("value count does not match storage box");
}

LatticeField LatticeField::delta(int dim, double mass, const Site& at) {
  LatticeField f(dim);
  f.set(at, mass);
  return f;
}

LatticeField LatticeField::uniform_box(int dim, int radius, double value) {
  const Box b = Box::ball(dim, radius);
  return LatticeField(b, std::vector<double>(b.size(), value));
}

double LatticeField::operator()(const Site& s) const {
  return box_.contains(s) ? values_[box_.index(s)] : 0.0;
}

void LatticeField::grow_to_include(const Site& s) {
  if (box_.contains(s)) return;
  const Box target = box_.hull(Box(dim_, s, s));
  *this = expanded_to(target);
}

void LatticeField::set(const Site& s, double v) {
  if (v == 0.0 && !box_.contains(s)) return;
  grow_to_include(s);
  tight_ = false;
  values_[box_.index(s)] = v;
}

void LatticeField::add(const Site& s, double v) {
  if (v == 0.0) return;
  grow_to_include(s);
  tight_ = false;
  values_[box_.index(s)] += v;
}

bool LatticeField::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

int LatticeField::support_radius() const {
  int r = 0;
  for_each_nonzero([&](const Site& s, double) { r = std::max(r, max_norm(s)); });
  return r;
}

std::size_t LatticeField::support_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

double LatticeField::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double LatticeField::total() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

Box LatticeField::support_box() const {
  if (tight_) return box_;
  Site lo{0, 0, 0}, hi{0, 0, 0};
  bool any = false;
  const int last = dim_ - 1;
  for_each_row(box_, box_, [&](std::size_t start, std::size_t, std::size_t len) {
    std::size_t first = 0;
    while (first < len && values_[start + first] == 0.0) ++first;
    if (first == len) return;
    std::size_t end = len;
    while (values_[start + end - 1] == 0.0) --end;
    Site a = box_.site(start + first);
    Site b = a;
    b[last] += static_cast<int>(end - 1 - first);
    if (!any) {
      lo = a;
      hi = b;
      any = true;
      return;
    }
    for (int k = 0; k < dim_; ++k) {
      lo[k] = std::min(lo[k], a[k]);
      hi[k] = std::max(hi[k], b[k]);
    }
  });
  return any ? Box(dim_, lo, hi) : Box::empty(dim_);
}

void LatticeField::trim() {
  const Box sb = support_box();
  tight_ = true;
  if (sb == box_) return;
  std::vector<double> v(sb.size());
  for_each_row(sb, box_, [&](std::size_t si, std::size_t bi, std::size_t len) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(bi), len, v.begin() + static_cast<std::ptrdiff_t>(si));
  });
  box_ = sb;
  values_ = std::move(v);
}

LatticeField LatticeField::expanded_to(const Box& box) const {
  if (!box.contains(box_.intersect(support_box())))
    throw std::invalid_argument("expanded_to: target box drops nonzero entries");
  LatticeField out(box, std::vector<double>(box.size(), 0.0));
  out.resolved_ = resolved_;
  box_.for_each([&](const Site& s, std::size_t i) {
    if (values_[i] != 0.0) out.values_[box.index(s)] = values_[i];
  });
  return out;
}

LatticeField LatticeField::restricted_to(const Box& box) const {
  LatticeField out(box, std::vector<double>(box.size(), 0.0));
  box.for_each([&](const Site& s, std::size_t i) { out.values_[i] = (*this)(s); });
  out.resolved_ = box;
  return out;
}

void LatticeField::add_field(const LatticeField& other) {
  if (other.dim_ != dim_) throw std::invalid_argument("field dimensions differ");
  if (other.box_.is_empty()) return;
  if (!box_.contains(other.box_)) *this = expanded_to(box_.hull(other.box_));
  tight_ = false;
  other.box_.for_each([&](const Site& s, std::size_t i) {
    if (other.values_[i] != 0.0) values_[box_.index(s)] += other.values_[i];
  });
}

double max_abs_diff(const LatticeField& a, const LatticeField& b) {
  double m = 0.0;
  a.storage().for_each([&](const Site& s, std::size_t i) { m = std::max(m, std::abs(a.values()[i] - b(s))); });
  b.storage().for_each([&](const Site& s, std::size_t i) { m = std::max(m, std::abs(b.values()[i] - a(s))); });
  return m;
}

}  // namespace dsheat
