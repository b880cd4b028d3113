#include "dsheat/moments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "dsheat/parallel.hpp"
#include "dsheat/solver.hpp"

namespace dsheat {

std::vector<double> MomentSeries::column(std::size_t i) const {
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& row : value) out.push_back(row.at(i));
  return out;
}

namespace {

double moment_of(double v, double p, bool absolute) {
  if (absolute) v = std::abs(v);
  if (p == 2.0) return v * v;
  if (p == 1.0) return v;
  return std::pow(v, p);
}

}  // namespace

MomentSeries mc_moments(const SimulationConfig& cfg, const MomentRequest& req) {
  if (req.replicas < 2) throw std::invalid_argument("moment estimates need at least 2 replicas");
  if (!(req.p >= 1.0)) throw std::invalid_argument("moment order p must be >= 1");
  if (!req.absolute && req.p != std::floor(req.p))
    throw std::invalid_argument("signed moments need an integer p");
  if (req.target == MomentTarget::sites && req.sites.is_empty())
    throw std::invalid_argument("no sites requested");
  if (req.n_max < 0) throw std::invalid_argument("horizon must be nonnegative");

  const std::size_t cols = req.target == MomentTarget::sup ? 1 : req.sites.size();
  const std::size_t rows = static_cast<std::size_t>(req.n_max) + 1;
  const std::size_t blocks = static_cast<std::size_t>(std::clamp(req.blocks, 1, req.replicas));
  std::vector<std::vector<RunningStat>> acc(blocks, std::vector<RunningStat>(rows * cols));

  for_each_block(blocks, req.workers, [&](std::size_t b) {
    const auto [begin, end] = block_range(static_cast<std::size_t>(req.replicas), blocks, b);
    auto& a = acc[b];
    for (std::size_t r = begin; r < end; ++r) {
      evolve_each(cfg.kernel, cfg.sigma, cfg.u0, cfg.noise, req.n_max, {req.seed, r}, cfg.box,
                  [&](int n, const LatticeField& u) {
                    RunningStat* row = &a[static_cast<std::size_t>(n) * cols];
                    if (req.target == MomentTarget::sup) {
                      row->push(moment_of(u.sup_norm(), req.p, true));
                      return true;
                    }
                    if (u.resolved() && !u.resolved()->contains(req.sites))
                      throw RegionTooSmall("requested sites leave the resolved region at step " + std::to_string(n));
                    req.sites.for_each(
                        [&](const Site& x, std::size_t i) { row[i].push(moment_of(u(x), req.p, req.absolute)); });
                    return true;
                  });
    }
  });

  MomentSeries s;
  s.p = req.p;
  s.target = req.target;
  s.sites = req.sites;
  s.absolute = req.absolute;
  s.replicas = req.replicas;
  s.value.assign(rows, std::vector<double>(cols));
  s.stderr_.assign(rows, std::vector<double>(cols));
  for (std::size_t k = 0; k < rows * cols; ++k) {
    RunningStat total;
    for (std::size_t b = 0; b < blocks; ++b) total.merge(acc[b][k]);
    s.value[k / cols][k % cols] = total.mean;
    s.stderr_[k / cols][k % cols] = total.stderr_of_mean();
  }
  return s;
}

std::vector<LatticeField> exact_second_moment(const WalkKernel& kernel, const LatticeField& u0, double nu,
                                              int n_max) {
  if (!(nu >= 0.0)) throw std::invalid_argument("nu must be nonnegative");
  if (n_max < 0) throw std::invalid_argument("horizon must be nonnegative");
  const auto powers = kernel_powers(kernel, n_max);
  std::vector<std::vector<KernelEntry>> squared;
  squared.reserve(powers.size());
  for (const auto& slice : powers) {
    auto e = slice.entries();
    for (auto& w : e) w.prob *= w.prob;
    squared.push_back(std::move(e));
  }

  std::vector<LatticeField> m;
  m.reserve(static_cast<std::size_t>(n_max) + 1);
  const double nu2 = nu * nu;
  for (int n = 0; n <= n_max; ++n) {
    LatticeField mn = apply_slice(powers[static_cast<std::size_t>(n)], u0);
    for (double& v : mn.mutable_values()) v *= v;
    if (nu2 != 0.0) {
      for (int j = 0; j < n; ++j) {
        LatticeField term = convolve_gather(squared[static_cast<std::size_t>(n - 1 - j)], m[static_cast<std::size_t>(j)]);
        for (double& v : term.mutable_values()) v *= nu2;
        mn.add_field(term);
      }
    }
    mn.trim();
    m.push_back(std::move(mn));
  }
  return m;
}

std::vector<double> sup_series(const std::vector<LatticeField>& fields) {
  std::vector<double> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(f.sup_norm());
  return out;
}

namespace {

void check_window(std::span<const double> values, int n1, int n2) {
  if (n1 < 0 || n2 <= n1 || static_cast<std::size_t>(n2) >= values.size())
    throw std::invalid_argument("exponent window must satisfy 0 <= n1 < n2 <= horizon");
}

bool positive_on(std::span<const double> values, int n1, int n2) {
  for (int n = n1; n <= n2; ++n)
    if (!(values[static_cast<std::size_t>(n)] > 0.0) || !std::isfinite(values[static_cast<std::size_t>(n)]))
      return false;
  return true;
}

}  // namespace

ExponentEstimate estimate_exponent(std::span<const double> values, int n1, int n2, double p) {
  check_window(values, n1, n2);
  ExponentEstimate e{p, 0.0, 0.0, n1, n2, true, "least squares"};
  if (!positive_on(values, n1, n2)) {
    e.usable = false;
    e.gamma_hat = std::numeric_limits<double>::quiet_NaN();
    e.uncertainty = std::numeric_limits<double>::quiet_NaN();
    e.note = "nonpositive values in window";
    return e;
  }
  const double k = n2 - n1 + 1;
  double mx = 0.0, my = 0.0;
  for (int n = n1; n <= n2; ++n) {
    mx += n;
    my += std::log(values[static_cast<std::size_t>(n)]);
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (int n = n1; n <= n2; ++n) {
    const double dx = n - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(values[static_cast<std::size_t>(n)]) - my);
  }
  e.gamma_hat = sxy / sxx;
  if (k > 2) {
    double rss = 0.0;
    for (int n = n1; n <= n2; ++n) {
      const double r = std::log(values[static_cast<std::size_t>(n)]) - my - e.gamma_hat * (n - mx);
      rss += r * r;
    }
    e.uncertainty = std::sqrt(rss / (k - 2.0) / sxx);
  }
  return e;
}

ExponentEstimate estimate_exponent(std::span<const double> values, double p) {
  const int horizon = static_cast<int>(values.size()) - 1;
  if (horizon < 1) throw std::invalid_argument("series too short for an exponent");
  const int n1 = std::min(horizon - 1, horizon - horizon / 4);
  return estimate_exponent(values, n1, horizon, p);
}

ExponentEstimate ratio_estimate(std::span<const double> values, int n1, int n2, double p) {
  check_window(values, n1, n2);
  ExponentEstimate e{p, 0.0, 0.0, n1, n2, true, "endpoint ratio"};
  const double a = values[static_cast<std::size_t>(n1)];
  const double b = values[static_cast<std::size_t>(n2)];
  if (!(a > 0.0) || !(b > 0.0)) {
    e.usable = false;
    e.gamma_hat = std::numeric_limits<double>::quiet_NaN();
    e.note = "nonpositive endpoint";
    return e;
  }
  e.gamma_hat = (std::log(b) - std::log(a)) / (n2 - n1);
  return e;
}

// --- Temporal noise --------------------------------------------------------

namespace {

void require_temporal_family(const NoiseModel& noise) {
  if (noise.is_deterministic()) {
    if (!(noise.scale() > -1.0)) throw std::invalid_argument("constant noise must exceed -1");
    return;
  }
  if (!(noise.scale() < 1.0))
    throw std::invalid_argument("noise scale must be < 1 so that ln(1 + xi) is defined");
}

}  // namespace

double temporal_gamma(const NoiseModel& noise, double p) {
  require_temporal_family(noise);
  if (!(p >= 0.0)) throw std::invalid_argument("Gamma(p) needs p >= 0");
  if (p == 0.0) return 0.0;
  const double s = noise.scale();
  switch (noise.family()) {
    case NoiseFamily::rademacher:
      return std::log(0.5 * (std::pow(1.0 + s, p) + std::pow(1.0 - s, p)));
    case NoiseFamily::uniform_symmetric:
      return std::log((std::pow(1.0 + s, p + 1.0) - std::pow(1.0 - s, p + 1.0)) / ((p + 1.0) * 2.0 * s));
    case NoiseFamily::constant:
      return p * std::log1p(s);
  }
  return 0.0;
}

double temporal_gamma_prime0(const NoiseModel& noise) {
  require_temporal_family(noise);
  const double s = noise.scale();
  switch (noise.family()) {
    case NoiseFamily::rademacher:
      return 0.5 * (std::log1p(s) + std::log1p(-s));
    case NoiseFamily::uniform_symmetric: {
      auto antideriv = [](double t) { return t * std::log(t) - t; };
      return (antideriv(1.0 + s) - antideriv(1.0 - s)) / (2.0 * s);
    }
    case NoiseFamily::constant:
      return std::log1p(s);
  }
  return 0.0;
}

namespace {

constexpr std::size_t kTemporalBlocks = 64;

// Rademacher route: path r contributes one sign bit per step, so U_n^p only
// depends on how many of its first n bits are set. Short horizons tally each
// path in byte chunks as (set bits before the chunk, chunk value) and expand
// counts per (n, k) afterwards; the chunk table grows like n^2 * 256, so long
// horizons count (n, k) directly. Integer tallies sum to the same table in any
// order, so finished blocks merge into one shared table.
constexpr int kChunkedHorizon = 256;

std::vector<std::vector<std::uint64_t>> rademacher_sign_counts(int n_max, std::uint64_t paths, std::uint64_t seed,
                                                                int workers) {
  const std::size_t kdim = static_cast<std::size_t>(n_max) + 1;
  const std::uint64_t per_block = (paths + kTemporalBlocks - 1) / kTemporalBlocks;
  if (per_block >= (std::uint64_t{1} << 32)) throw std::invalid_argument("too many temporal paths per block");
  std::vector<std::vector<std::uint64_t>> counts(kdim, std::vector<std::uint64_t>(kdim, 0));
  counts[0][0] = paths;
  std::mutex merge_mutex;

  if (n_max > kChunkedHorizon) {
    // Row n holds k = 0..n at offset n (n + 1) / 2.
    auto row = [](std::size_t n) { return n * (n + 1) / 2; };
    for_each_block(kTemporalBlocks, workers, [&](std::size_t b) {
      std::vector<std::uint32_t> t(row(kdim), 0);
      const auto [begin, end] = block_range(paths, kTemporalBlocks, b);
      for (std::uint64_t r = begin; r < end; ++r) {
        std::size_t k = 0;
        std::uint64_t w = 0;
        for (std::size_t n = 0; n + 1 < kdim; ++n) {
          if (n % 64 == 0) w = CounterRng::word(seed, r, n / 64);
          k += (w >> (n % 64)) & 1u;
          ++t[row(n + 1) + k];
        }
      }
      std::lock_guard lock(merge_mutex);
      for (std::size_t n = 1; n < kdim; ++n)
        for (std::size_t k = 0; k <= n; ++k) counts[n][k] += t[row(n) + k];
    });
    return counts;
  }

  constexpr std::size_t kBits = 8;
  constexpr std::size_t kValues = 1u << kBits;
  constexpr std::size_t kPerWord = 64 / kBits;
  const std::size_t chunks = (static_cast<std::size_t>(n_max) + kBits - 1) / kBits;
  // Chunk c sees at most kBits * c set bits before it; offsets pack the rows.
  std::vector<std::size_t> base(chunks + 1, 0);
  for (std::size_t c = 0; c < chunks; ++c) base[c + 1] = base[c] + (kBits * c + 1) * kValues;
  const std::size_t cells = base[chunks];
  std::vector<std::uint64_t> merged(cells, 0);
  for_each_block(kTemporalBlocks, workers, [&](std::size_t b) {
    std::vector<std::uint32_t> t(cells, 0);
    const auto [begin, end] = block_range(paths, kTemporalBlocks, b);
    for (std::uint64_t r = begin; r < end; ++r) {
      std::size_t k0 = 0;
      std::uint64_t w = 0;
      for (std::size_t c = 0; c < chunks; ++c) {
        if (c % kPerWord == 0) w = CounterRng::word(seed, r, c / kPerWord);
        const auto v = static_cast<std::size_t>((w >> (kBits * (c % kPerWord))) & (kValues - 1));
        ++t[base[c] + k0 * kValues + v];
        k0 += static_cast<std::size_t>(std::popcount(v));
      }
    }
    std::lock_guard lock(merge_mutex);
    for (std::size_t i = 0; i < cells; ++i) merged[i] += t[i];
  });

  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k0 = 0; k0 <= kBits * c; ++k0) {
      for (std::size_t v = 0; v < kValues; ++v) {
        const std::uint64_t total = merged[base[c] + k0 * kValues + v];
        if (total == 0) continue;
        for (std::size_t i = 1; i <= kBits; ++i) {
          const std::size_t n = kBits * c + i;
          if (n > static_cast<std::size_t>(n_max)) break;
          counts[n][k0 + static_cast<std::size_t>(std::popcount(v & ((1u << i) - 1)))] += total;
        }
      }
    }
  }
  return counts;
}

}  // namespace

TemporalMoments temporal_moment_mc(const NoiseModel& noise, double u0_total, double p, int n_max,
                                   std::uint64_t paths, std::uint64_t seed, int workers) {
  if (noise.mode() != NoiseMode::temporal && !noise.is_deterministic())
    throw std::invalid_argument("temporal moments need a temporal noise model");
  if (paths < 2) throw std::invalid_argument("temporal moments need at least 2 paths");
  if (n_max < 0) throw std::invalid_argument("horizon must be nonnegative");
  if (!(u0_total > 0.0)) throw std::invalid_argument("U_0 must be positive");
  const double gamma = temporal_gamma(noise, p);

  TemporalMoments out;
  out.p = p;
  out.paths = paths;
  const auto rows = static_cast<std::size_t>(n_max) + 1;
  out.mean.assign(rows, 0.0);
  out.stderr_.assign(rows, 0.0);
  out.exact.assign(rows, 0.0);
  const double log_u0p = p * std::log(u0_total);
  for (std::size_t n = 0; n < rows; ++n) out.exact[n] = std::exp(log_u0p + static_cast<double>(n) * gamma);

  const double N = static_cast<double>(paths);
  if (noise.family() == NoiseFamily::rademacher) {
    const auto counts = rademacher_sign_counts(n_max, paths, seed, workers);
    const double lp = p * std::log1p(noise.scale());
    const double lm = p * std::log1p(-noise.scale());
    for (std::size_t n = 0; n < rows; ++n) {
      auto weight = [&](std::size_t k) {
        return std::exp(log_u0p + static_cast<double>(k) * lp + static_cast<double>(n - k) * lm);
      };
      double mean = 0.0;
      for (std::size_t k = 0; k <= n; ++k) mean += static_cast<double>(counts[n][k]) * weight(k);
      mean /= N;
      double ss = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        const double d = weight(k) - mean;
        ss += static_cast<double>(counts[n][k]) * d * d;
      }
      out.mean[n] = mean;
      out.stderr_[n] = std::sqrt(ss / (N - 1.0) / N);
    }
    return out;
  }

  std::vector<std::vector<RunningStat>> acc(kTemporalBlocks, std::vector<RunningStat>(rows));
  for_each_block(kTemporalBlocks, workers, [&](std::size_t b) {
    const auto [begin, end] = block_range(paths, kTemporalBlocks, b);
    for (std::uint64_t r = begin; r < end; ++r) {
      double u = u0_total;
      acc[b][0].push(std::pow(u, p));
      for (int n = 0; n < n_max; ++n) {
        u *= 1.0 + noise.temporal_value(seed, r, n);
        acc[b][static_cast<std::size_t>(n) + 1].push(std::pow(u, p));
      }
    }
  });
  for (std::size_t n = 0; n < rows; ++n) {
    RunningStat total;
    for (const auto& a : acc) total.merge(a[n]);
    out.mean[n] = total.mean;
    out.stderr_[n] = total.stderr_of_mean();
  }
  return out;
}

TemporalReport temporal_report(const WalkKernel& kernel, const NoiseModel& noise, const LatticeField& u0,
                               const TemporalRequest& req) {
  if (noise.mode() != NoiseMode::temporal || noise.is_deterministic())
    throw std::invalid_argument("temporal report needs random temporal noise");
  const double stay = kernel.stay_probability();
  if (!(stay < 1.0)) throw std::invalid_argument("kernel must move: P_{0,0} < 1");
  if (!(noise.scale() < 1.0))
    throw std::invalid_argument("noise scale must be < 1 so that ln(1 + xi) is defined");
  if (!(noise.bound() <= stay)) throw std::invalid_argument("noise bound must not exceed P_{0,0}");
  if (std::any_of(u0.values().begin(), u0.values().end(), [](double v) { return v < 0.0; }))
    throw std::invalid_argument("initial data must be nonnegative");
  const double u0_total = u0.total();
  if (!(u0_total > 0.0) || !std::isfinite(u0_total)) throw std::invalid_argument("initial mass must be positive");
  if (req.n_max < 1) throw std::invalid_argument("horizon must be at least 1");
  if (req.paths < 1) throw std::invalid_argument("need at least one path");

  TemporalReport rep;
  rep.distribution = noise.label();
  rep.p_grid = req.p_grid;
  for (double p : req.p_grid) rep.gamma.push_back(temporal_gamma(noise, p));
  rep.gamma_prime0 = temporal_gamma_prime0(noise);
  rep.gamma_zero_at_zero = std::abs(temporal_gamma(noise, 0.0)) == 0.0;
  for (std::size_t i = 1; i + 1 < rep.p_grid.size(); ++i) {
    const double h1 = rep.p_grid[i] - rep.p_grid[i - 1];
    const double h2 = rep.p_grid[i + 1] - rep.p_grid[i];
    const double s = (rep.gamma[i + 1] - rep.gamma[i]) / h2 - (rep.gamma[i] - rep.gamma[i - 1]) / h1;
    if (s < -1e-12) rep.gamma_convex = false;
  }
  rep.n_max = req.n_max;
  rep.u0_total = u0_total;
  for (std::size_t i = 0; i < rep.p_grid.size(); ++i)
    rep.log_moment_prediction.push_back(rep.p_grid[i] * std::log(u0_total) + req.n_max * rep.gamma[i]);

  struct PathResult {
    double log_sup = 0.0;
    double log_total = 0.0;
    double identity = 0.0;
  };
  std::vector<PathResult> results(static_cast<std::size_t>(req.paths));
  const SigmaSpec sigma = SigmaSpec::linear(1.0);
  for_each_block(results.size(), req.workers, [&](std::size_t r) {
    auto& res = results[r];
    double U = u0_total;
    evolve_each(kernel, sigma, u0, noise, req.n_max, {req.seed, r}, std::nullopt, [&](int n, const LatticeField& u) {
      if (n > 0) U *= 1.0 + noise.temporal_value(req.seed, r, n - 1);
      res.identity = std::max(res.identity, std::abs(u.total() - U) / std::abs(U));
      if (n == req.n_max) {
        res.log_sup = std::log(u.sup_norm()) / n;
        res.log_total = std::log(U) / n;
      }
      return true;
    });
  });

  RunningStat sup_rate, total_rate;
  for (const auto& r : results) {
    sup_rate.push(r.log_sup);
    total_rate.push(r.log_total);
    rep.max_identity_error = std::max(rep.max_identity_error, r.identity);
  }
  rep.paths = req.paths;
  rep.log_sup_rate_mean = sup_rate.mean;
  rep.log_sup_rate_stderr = sup_rate.stderr_of_mean();
  rep.log_total_rate_mean = total_rate.mean;
  return rep;
}

// --- Intermittency ---------------------------------------------------------

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::intermittent:
      return "intermittent";
    case Verdict::not_intermittent:
      return "not intermittent";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

namespace {

// holds when x > z u, fails when x + z u <= 0, inconclusive in between
Verdict positive_with_slack(double x, double u, double z) {
  if (x > z * u) return Verdict::intermittent;
  if (x + z * u <= 0.0) return Verdict::not_intermittent;
  return Verdict::inconclusive;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

IntermittencyVerdict intermittency_verdict(std::span<const ExponentEstimate> estimates, bool positivity, double z) {
  std::vector<ExponentEstimate> e(estimates.begin(), estimates.end());
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.p < b.p; });
  IntermittencyVerdict v;
  v.positivity = positivity;

  for (const auto& x : e) {
    if (!x.usable) {
      v.clauses.push_back({"usable estimates", Verdict::inconclusive, "p = " + fmt(x.p) + ": " + x.note});
      v.outcome = Verdict::inconclusive;
      return v;
    }
  }
  auto find = [&](double p) -> const ExponentEstimate* {
    for (const auto& x : e)
      if (x.p == p) return &x;
    return nullptr;
  };

  ClauseResult g1{"gamma(1) = 0", Verdict::inconclusive, "no estimate at p = 1"};
  if (const auto* x = find(1.0)) {
    g1.outcome = std::abs(x->gamma_hat) <= z * x->uncertainty ? Verdict::intermittent : Verdict::not_intermittent;
    g1.detail = "gamma(1) = " + fmt(x->gamma_hat) + " +- " + fmt(x->uncertainty);
  }
  v.clauses.push_back(g1);

  ClauseResult g2{"gamma(2) > 0", Verdict::inconclusive, "no estimate at p = 2"};
  if (const auto* x = find(2.0)) {
    g2.outcome = positive_with_slack(x->gamma_hat, x->uncertainty, z);
    g2.detail = "gamma(2) = " + fmt(x->gamma_hat) + " +- " + fmt(x->uncertainty);
  }
  v.clauses.push_back(g2);

  ClauseResult inc{"gamma(p)/p strictly increasing", Verdict::intermittent, ""};
  if (e.size() < 2) {
    inc.outcome = Verdict::inconclusive;
    inc.detail = "fewer than two grid points";
  }
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const double d = e[i + 1].gamma_hat / e[i + 1].p - e[i].gamma_hat / e[i].p;
    const double u = std::hypot(e[i + 1].uncertainty / e[i + 1].p, e[i].uncertainty / e[i].p);
    const Verdict c = positive_with_slack(d, u, z);
    if (c == Verdict::not_intermittent || (c == Verdict::inconclusive && inc.outcome == Verdict::intermittent)) {
      inc.outcome = c;
      inc.detail = "p = " + fmt(e[i].p) + " -> " + fmt(e[i + 1].p) + ": difference " + fmt(d) + " +- " + fmt(u);
    }
    if (inc.outcome == Verdict::not_intermittent) break;
  }
  v.clauses.push_back(inc);

  ClauseResult cvx{"gamma convex", Verdict::intermittent, ""};
  if (e.size() < 3) {
    cvx.outcome = Verdict::inconclusive;
    cvx.detail = "fewer than three grid points";
  }
  for (std::size_t i = 1; i + 1 < e.size(); ++i) {
    const double h1 = e[i].p - e[i - 1].p;
    const double h2 = e[i + 1].p - e[i].p;
    const double s = (e[i + 1].gamma_hat - e[i].gamma_hat) / h2 - (e[i].gamma_hat - e[i - 1].gamma_hat) / h1;
    const double u = std::sqrt(std::pow(e[i + 1].uncertainty / h2, 2) +
                               std::pow(e[i].uncertainty * (1.0 / h1 + 1.0 / h2), 2) +
                               std::pow(e[i - 1].uncertainty / h1, 2));
    if (s + z * u < 0.0) {
      cvx.outcome = Verdict::not_intermittent;
      cvx.detail = "second difference at p = " + fmt(e[i].p) + " is " + fmt(s) + " +- " + fmt(u);
      break;
    }
  }
  v.clauses.push_back(cvx);

  bool all = true;
  v.outcome = Verdict::intermittent;
  for (const auto& c : v.clauses) {
    if (c.outcome == Verdict::not_intermittent) {
      v.outcome = Verdict::not_intermittent;
      return v;
    }
    all = all && c.outcome == Verdict::intermittent;
  }
  if (!all || !positivity) v.outcome = Verdict::inconclusive;
  return v;
}

}  // namespace dsheat
