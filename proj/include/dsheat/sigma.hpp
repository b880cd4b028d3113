#pragma once

#include <functional>
#include <string>

namespace dsheat {

/// Diffusion coefficient sigma together with the constants the bounds need.
class SigmaSpec {
 public:
  enum class Kind { linear, affine, custom };

  struct Constants {
    double lip = 0.0;     ///< optimal Lipschitz constant
    double lower = 0.0;   ///< L_sigma = inf_z |sigma(z)/z|
    double growth = 0.0;  ///< C_sigma in |sigma(z)| <= C_sigma |z| + C~_sigma
    double offset = 0.0;  ///< C~_sigma
  };

  /// sigma(z) = nu z.
  static SigmaSpec linear(double nu);
  /// sigma(z) = nu z + c.
  static SigmaSpec affine(double nu, double c);
  /// Caller-supplied sigma with declared constants. The declaration is
  /// spot-checked on a grid; inconsistent constants throw std::invalid_argument.
  static SigmaSpec custom(std::function<double(double)> fn, Constants declared, std::string label);

  double operator()(double z) const {
    switch (kind_) {
      case Kind::linear:
        return slope_ * z;
      case Kind::affine:
        return slope_ * z + intercept_;
      case Kind::custom:
        return fn_(z);
    }
    return 0.0;
  }

  Kind kind() const { return kind_; }
  double lip() const { return c_.lip; }
  double lower() const { return c_.lower; }
  double growth() const { return c_.growth; }
  double offset() const { return c_.offset; }
  double at_zero() const { return (*this)(0.0); }
  const Constants& constants() const { return c_; }
  /// Slope nu for linear and affine kinds.
  double slope() const { return slope_; }
  const std::string& label() const { return label_; }

 private:
  SigmaSpec() = default;

  Kind kind_ = Kind::linear;
  double slope_ = 0.0;
  double intercept_ = 0.0;
  std::function<double(double)> fn_;
  Constants c_;
  std::string label_;
};

}  // namespace dsheat
