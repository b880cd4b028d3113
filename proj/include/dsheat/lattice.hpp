#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsheat {

inline constexpr int kMaxDim = 3;

/// A point of Z^d. Coordinates beyond the active dimension are kept at zero.
using Site = std::array<int, kMaxDim>;

inline int max_norm(const Site& s) {
  int r = 0;
  for (int c : s) r = std::max(r, c < 0 ? -c : c);
  return r;
}

inline Site operator+(Site a, const Site& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
  return a;
}

inline Site operator-(Site a, const Site& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
  return a;
}

inline Site operator-(Site a) {
  for (int& c : a) c = -c;
  return a;
}

std::string to_string(const Site& s, int dim);

/// Axis-aligned box [lo, hi] (inclusive) in Z^d. An empty box has hi < lo on axis 0.
class Box {
 public:
  Box() = default;
  Box(int dim, const Site& lo, const Site& hi);

  /// The max-norm ball of radius r around the origin.
  static Box ball(int dim, int r);
  static Box empty(int dim);

  int dim() const { return dim_; }
  const Site& lo() const { return lo_; }
  const Site& hi() const { return hi_; }
  bool is_empty() const { return hi_[0] < lo_[0]; }

  int extent(int axis) const { return is_empty() ? 0 : hi_[axis] - lo_[axis] + 1; }
  std::size_t size() const;
  bool contains(const Site& s) const;
  bool contains(const Box& other) const;

  /// Row-major linear index; last active axis is contiguous.
  std::size_t index(const Site& s) const;
  Site site(std::size_t index) const;

  Box dilated(int r) const;
  Box eroded(int r) const;
  Box intersect(const Box& other) const;
  Box hull(const Box& other) const;

  /// Largest max-norm of a site in the box (0 for an empty box).
  int radius() const;

  /// Visits every site in row-major order together with its linear index.
  template <class F>
  void for_each(F&& f) const {
    if (is_empty()) return;
    Site s = lo_;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      f(static_cast<const Site&>(s), i);
      for (int a = dim_ - 1; a >= 0; --a) {
        if (++s[a] <= hi_[a]) break;
        s[a] = lo_[a];
      }
    }
  }

  bool operator==(const Box& other) const;

 private:
  int dim_ = 1;
  Site lo_{0, 0, 0};
  Site hi_{-1, -1, -1};
};

/// Walks `inner` (which must lie inside `outer`) one contiguous row at a time:
/// f(inner_offset, outer_offset, length) per row along the last axis.
template <class F>
void for_each_row(const Box& inner, const Box& outer, F&& f) {
  if (inner.is_empty()) return;
  const int last = inner.dim() - 1;
  const auto len = static_cast<std::size_t>(inner.hi()[last] - inner.lo()[last] + 1);
  const std::size_t rows = inner.size() / len;
  Site s = inner.lo();
  for (std::size_t r = 0; r < rows; ++r) {
    f(r * len, outer.index(s), len);
    for (int a = last - 1; a >= 0; --a) {
      if (++s[a] <= inner.hi()[a]) break;
      s[a] = inner.lo()[a];
    }
  }
}

/// Real-valued function on Z^d with finite support.
///
/// Values live on a dense storage box; sites outside the box are exactly zero.
/// Zeros inside the box count as absent: the support, support radius and
/// support count only see nonzero entries. A field may additionally carry a
/// `resolved` box, meaning its values are only known there (boxed runs with
/// sigma(0) != 0); an unresolved-everywhere field has no such box.
class LatticeField {
 public:
  explicit LatticeField(int dim = 1);
  LatticeField(const Box& storage, std::vector<double> values);

  static LatticeField delta(int dim, double mass = 1.0, const Site& at = {0, 0, 0});
  static LatticeField uniform_box(int dim, int radius, double value);

  int dim() const { return dim_; }
  const Box& storage() const { return box_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() {
    tight_ = false;
    return values_;
  }

  double operator()(const Site& s) const;
  void set(const Site& s, double v);
  void add(const Site& s, double v);

  bool is_zero() const;
  /// Max-norm of the farthest nonzero site; 0 for the zero field.
  int support_radius() const;
  std::size_t support_count() const;
  double sup_norm() const;
  double total() const;
  /// Smallest box containing every nonzero site (empty box for the zero field).
  Box support_box() const;

  /// Shrinks storage to the support box.
  void trim();
  /// Re-expresses the field on a larger (or equal) storage box.
  LatticeField expanded_to(const Box& box) const;
  /// Copy of the values inside `box` (storage = box), marked resolved there.
  LatticeField restricted_to(const Box& box) const;
  /// this += other, growing storage as needed.
  void add_field(const LatticeField& other);

  const std::optional<Box>& resolved() const { return resolved_; }
  void set_resolved(std::optional<Box> b) { resolved_ = std::move(b); }
  bool is_exact_everywhere() const { return !resolved_.has_value(); }

  template <class F>
  void for_each_nonzero(F&& f) const {
    box_.for_each([&](const Site& s, std::size_t i) {
      if (values_[i] != 0.0) f(s, values_[i]);
    });
  }

 private:
  void grow_to_include(const Site& s);

  int dim_;
  Box box_;
  std::vector<double> values_;
  std::optional<Box> resolved_;
  bool tight_ = false;  // storage box known to equal the support box
};

/// Largest absolute sitewise difference over the union of both storages.
double max_abs_diff(const LatticeField& a, const LatticeField& b);

}  // namespace dsheat
