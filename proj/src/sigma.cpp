#include "dsheat/sigma.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dsheat {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// Relative slack for the sampled checks; declared constants are exact, the
// evaluations are not.
constexpr double kSlack = 1e-9;

void spot_check(const SigmaSpec& s) {
  const auto& c = s.constants();
  if (c.lip < 0 || c.lower < 0 || c.growth < 0 || c.offset < 0)
    throw std::invalid_argument("sigma constants must be nonnegative");
  constexpr int kPoints = 401;
  constexpr double kRange = 50.0;
  for (int i = 0; i < kPoints; ++i) {
    const double x = -kRange + 2.0 * kRange * i / (kPoints - 1);
    const double sx = s(x);
    if (!std::isfinite(sx)) throw std::invalid_argument("sigma(" + num(x) + ") is not finite");
    if (std::abs(sx) > c.growth * std::abs(x) + c.offset + kSlack * (1 + std::abs(sx)))
      throw std::invalid_argument("declared growth constants violated at z = " + num(x));
    if (x != 0.0 && std::abs(sx) < c.lower * std::abs(x) - kSlack * (1 + std::abs(sx)))
      throw std::invalid_argument("declared L_sigma violated at z = " + num(x));
    for (double h : {1e-3, 0.37, 5.0}) {
      const double y = x + h;
      if (std::abs(s(y) - sx) > c.lip * h + kSlack * (1 + std::abs(sx)))
        throw std::invalid_argument("declared Lipschitz constant violated near z = " + num(x));
    }
  }
}

}  // namespace

SigmaSpec SigmaSpec::linear(double nu) {
  if (!std::isfinite(nu)) throw std::invalid_argument("sigma slope must be finite");
  SigmaSpec s;
  s.kind_ = Kind::linear;
  s.slope_ = nu;
  s.c_ = {std::abs(nu), std::abs(nu), std::abs(nu), 0.0};
  s.label_ = "linear(" + num(nu) + ")";
  return s;
}

SigmaSpec SigmaSpec::affine(double nu, double c) {
  if (!std::isfinite(nu) || !std::isfinite(c)) throw std::invalid_argument("sigma parameters must be finite");
  if (c == 0.0) {
    SigmaSpec s = linear(nu);
    s.kind_ = Kind::affine;
    s.label_ = "affine(" + num(nu) + "," + num(c) + ")";
    return s;
  }
  SigmaSpec s;
  s.kind_ = Kind::affine;
  s.slope_ = nu;
  s.intercept_ = c;
  // |nu z + c| / |z| reaches 0 at z = -c/nu, or tends to 0 as z grows when nu = 0.
  s.c_ = {std::abs(nu), 0.0, std::abs(nu), std::abs(c)};
  s.label_ = "affine(" + num(nu) + "," + num(c) + ")";
  return s;
}

SigmaSpec SigmaSpec::custom(std::function<double(double)> fn, Constants declared, std::string label) {
  if (!fn) throw std::invalid_argument("custom sigma needs a callable");
  SigmaSpec s;
  s.kind_ = Kind::custom;
  s.fn_ = std::move(fn);
  s.c_ = declared;
  s.label_ = std::move(label);
  spot_check(s);
  return s;
}

}  // namespace dsheat
