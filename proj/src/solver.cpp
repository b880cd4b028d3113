#include "dsheat/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsheat/parallel.hpp"
#include "dsheat/spectral.hpp"

namespace dsheat {

namespace {

bool closed_dynamics(const LatticeField& u, const SigmaSpec& sigma) {
  return u.is_exact_everywhere() && sigma.at_zero() == 0.0;
}

// sigma(f(y)) xi(y) over `region`.
LatticeField forcing(const LatticeField& f, const SigmaSpec& sigma, const NoiseSlice& xi, const Box& region) {
  std::vector<double> g(region.size(), 0.0);
  region.for_each([&](const Site& y, std::size_t i) {
    const double s = sigma(f(y));
    if (s != 0.0) g[i] = s * xi(y);
  });
  return LatticeField(region, std::move(g));
}

}  // namespace

LatticeField step(const LatticeField& u, const WalkKernel& kernel, const SigmaSpec& sigma, const NoiseSlice& xi) {
  if (u.dim() != kernel.dim()) throw std::invalid_argument("field and kernel dimensions differ");

  if (closed_dynamics(u, sigma) && xi.covers(u.support_box())) {
    LatticeField out = apply_transition(kernel, u);
    const Box& ub = u.storage();
    const Box ob = out.storage();
    auto& ov = out.mutable_values();
    const auto& uv = u.values();
    const bool same_region = xi.region == ub;
    for_each_row(ub, ob, [&](std::size_t ui, std::size_t oi, std::size_t len) {
      const std::size_t xi0 = same_region ? ui : xi.region.index(ub.site(ui));
      for (std::size_t k = 0; k < len; ++k)
        if (uv[ui + k] != 0.0) ov[oi + k] += sigma(uv[ui + k]) * xi.values[xi0 + k];
    });
    out.trim();
    return out;
  }

  const Box target = u.resolved() ? u.resolved()->eroded(kernel.radius()).intersect(xi.region) : xi.region;
  if (target.is_empty())
    throw RegionTooSmall("no site stays resolved at step " + std::to_string(xi.step + 1) + "; enlarge the box");
  std::vector<double> vals(target.size());
  const auto entries = kernel.entries();
  target.for_each([&](const Site& x, std::size_t i) {
    double pu = 0.0;
    for (const auto& e : entries) pu += e.prob * u(x + e.offset);
    vals[i] = pu + sigma(u(x)) * xi.values[xi.region.index(x)];
  });
  LatticeField out(target, std::move(vals));
  out.set_resolved(target);
  return out;
}

Box noise_region(const LatticeField& u, const std::optional<Box>& box) {
  if (box) return *box;
  return u.support_box();
}

void evolve_each(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0, const NoiseModel& noise,
                 int n_max, const NoiseStream& stream, const std::optional<Box>& box,
                 const std::function<bool(int, const LatticeField&)>& visit) {
  if (n_max < 0) throw std::invalid_argument("horizon must be nonnegative");
  if (sigma.at_zero() != 0.0 && !box)
    throw std::invalid_argument("sigma(0) != 0 forces every site; supply a bounding box");
  if (u0.dim() != kernel.dim()) throw std::invalid_argument("initial field and kernel dimensions differ");
  LatticeField u = u0;
  u.set_resolved(std::nullopt);
  if (!visit(0, u)) return;
  for (int n = 0; n < n_max; ++n) {
    const NoiseSlice xi = sample_slice(noise, n, noise_region(u, box), stream);
    u = step(u, kernel, sigma, xi);
    if (!visit(n + 1, u)) return;
  }
}

Trajectory evolve(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0, const NoiseModel& noise,
                  int n_max, const NoiseStream& stream, const std::optional<Box>& box) {
  Trajectory t;
  t.meta = {kernel.label(), sigma.label(), noise.label(), stream.seed, stream.replica, box};
  t.fields.reserve(static_cast<std::size_t>(std::max(n_max, 0)) + 1);
  evolve_each(kernel, sigma, u0, noise, n_max, stream, box, [&](int, const LatticeField& u) {
    t.fields.push_back(u);
    return true;
  });
  return t;
}

LatticeField duhamel_eval(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0,
                          const NoiseModel& noise, const NoiseStream& stream, const Trajectory& trajectory, int n) {
  if (n < 0 || n + 1 > trajectory.horizon()) throw std::invalid_argument("Duhamel step outside the trajectory");
  const auto powers = kernel_powers(kernel, n + 1);
  LatticeField result = apply_slice(powers[static_cast<std::size_t>(n) + 1], u0);
  const bool closed = sigma.at_zero() == 0.0 && !trajectory.meta.box;
  for (int j = 0; j <= n; ++j) {
    const LatticeField& uj = trajectory.at(j);
    Box region;
    if (closed) {
      region = uj.support_box();
    } else {
      const Box& b = *trajectory.meta.box;
      region = uj.resolved() ? uj.resolved()->intersect(b) : b;
    }
    if (region.is_empty()) continue;
    const NoiseSlice xi = sample_slice(noise, j, region, stream);
    result.add_field(apply_slice(powers[static_cast<std::size_t>(n - j)], forcing(uj, sigma, xi, region)));
  }
  if (!closed) {
    const auto& target = trajectory.at(n + 1).resolved();
    if (target) return result.restricted_to(*target);
  }
  result.trim();
  return result;
}

double max_abs_diff_resolved(const LatticeField& a, const LatticeField& b) {
  if (a.is_exact_everywhere() && b.is_exact_everywhere()) return max_abs_diff(a, b);
  Box region = a.resolved() ? *a.resolved() : *b.resolved();
  if (a.resolved() && b.resolved()) region = a.resolved()->intersect(*b.resolved());
  double m = 0.0;
  region.for_each([&](const Site& s, std::size_t) { m = std::max(m, std::abs(a(s) - b(s))); });
  return m;
}

// --- Picard ----------------------------------------------------------------

namespace {

struct PicardPath {
  Box region;
  std::vector<std::vector<LatticeField>> iterates;
};

PicardPath run_picard(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0,
                      const NoiseModel& noise, const NoiseStream& stream, int n_max, int iterations) {
  if (sigma.at_zero() != 0.0) throw std::invalid_argument("Picard diagnostics need sigma(0) = 0");
  if (n_max < 0 || iterations < 0) throw std::invalid_argument("Picard horizon and iteration count must be >= 0");
  PicardPath path;
  // Every iterate at time n lives in support(u0) dilated by nR.
  path.region = u0.support_box().dilated(n_max * kernel.radius());

  std::vector<NoiseSlice> xi;
  std::vector<LatticeField> free;  // P^n u0
  xi.reserve(static_cast<std::size_t>(n_max));
  free.push_back(u0);
  for (int n = 0; n < n_max; ++n) {
    xi.push_back(sample_slice(noise, n, path.region, stream));
    free.push_back(apply_transition(kernel, free.back()));
  }

  path.iterates.emplace_back(static_cast<std::size_t>(n_max) + 1, u0);
  for (int l = 0; l < iterations; ++l) {
    const auto& prev = path.iterates.back();
    std::vector<LatticeField> next;
    next.reserve(static_cast<std::size_t>(n_max) + 1);
    next.push_back(u0);
    // (A f)_n = P (A f)_{n-1} + sigma(f_n) xi_n
    LatticeField acc(u0.dim());
    for (int n = 0; n < n_max; ++n) {
      acc = apply_transition(kernel, acc);
      if (!path.region.is_empty())
        acc.add_field(forcing(prev[static_cast<std::size_t>(n)], sigma, xi[static_cast<std::size_t>(n)], path.region));
      LatticeField f = free[static_cast<std::size_t>(n) + 1];
      f.add_field(acc);
      f.trim();
      next.push_back(std::move(f));
    }
    path.iterates.push_back(std::move(next));
  }
  return path;
}

}  // namespace

std::vector<std::vector<LatticeField>> picard_iterates(const WalkKernel& kernel, const SigmaSpec& sigma,
                                                       const LatticeField& u0, const NoiseModel& noise,
                                                       const NoiseStream& stream, int n_max, int iterations) {
  return run_picard(kernel, sigma, u0, noise, stream, n_max, iterations).iterates;
}

PicardReport picard_solve(const WalkKernel& kernel, const SigmaSpec& sigma, const LatticeField& u0,
                          const NoiseModel& noise, const PicardOptions& opt) {
  if (opt.replicas < 2) throw std::invalid_argument("Picard diagnostics need at least 2 replicas");
  if (!(opt.lambda > 1.0)) throw std::invalid_argument("Picard weight lambda must exceed 1");
  if (!(opt.p >= 2.0)) throw std::invalid_argument("Picard norm order p must be >= 2");
  const int blocks = std::clamp(opt.blocks, 2, opt.replicas);
  const int L = opt.iterations;
  const Box region = u0.support_box().dilated(opt.n_max * kernel.radius());
  const std::size_t sites = region.size();
  const std::size_t times = static_cast<std::size_t>(opt.n_max) + 1;
  const std::size_t cells = static_cast<std::size_t>(L) * times * sites;

  // Per block: sum over replicas of |f^(l+1)_n(x) - f^(l)_n(x)|^p.
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(blocks), std::vector<double>(cells, 0.0));
  std::vector<double> counts(static_cast<std::size_t>(blocks), 0.0);
  for_each_block(static_cast<std::size_t>(blocks), opt.workers, [&](std::size_t b) {
    const auto [begin, end] = block_range(static_cast<std::size_t>(opt.replicas), static_cast<std::size_t>(blocks), b);
    auto& s = sums[b];
    for (std::size_t r = begin; r < end; ++r) {
      const auto path = run_picard(kernel, sigma, u0, noise, {opt.seed, r}, opt.n_max, L);
      for (int l = 0; l < L; ++l) {
        for (std::size_t n = 0; n < times; ++n) {
          const auto& fa = path.iterates[static_cast<std::size_t>(l) + 1][n];
          const auto& fb = path.iterates[static_cast<std::size_t>(l)][n];
          const std::size_t base = (static_cast<std::size_t>(l) * times + n) * sites;
          region.for_each([&](const Site& x, std::size_t i) {
            s[base + i] += std::pow(std::abs(fa(x) - fb(x)), opt.p);
          });
        }
      }
    }
    counts[b] = static_cast<double>(end - begin);
  });

  std::vector<double> total(cells, 0.0);
  double total_count = 0.0;
  for (int b = 0; b < blocks; ++b) {
    for (std::size_t c = 0; c < cells; ++c) total[c] += sums[static_cast<std::size_t>(b)][c];
    total_count += counts[static_cast<std::size_t>(b)];
  }

  auto distances = [&](const std::vector<double>& s, double count, int skip_block) {
    std::vector<double> d(static_cast<std::size_t>(L), 0.0);
    for (int l = 0; l < L; ++l) {
      double best = 0.0;
      double weight = 1.0;  // lambda^{-n}
      for (std::size_t n = 0; n < times; ++n) {
        const std::size_t base = (static_cast<std::size_t>(l) * times + n) * sites;
        for (std::size_t i = 0; i < sites; ++i) {
          double v = s[base + i];
          if (skip_block >= 0) v -= sums[static_cast<std::size_t>(skip_block)][base + i];
          best = std::max(best, weight * std::pow(std::max(v, 0.0) / count, 1.0 / opt.p));
        }
        weight /= opt.lambda;
      }
      d[static_cast<std::size_t>(l)] = best;
    }
    return d;
  };
  auto ratios = [&](const std::vector<double>& d) {
    std::vector<double> r;
    for (int l = 0; l + 1 < L; ++l) {
      const double den = d[static_cast<std::size_t>(l)];
      r.push_back(den > 0.0 ? d[static_cast<std::size_t>(l) + 1] / den : std::numeric_limits<double>::quiet_NaN());
    }
    return r;
  };

  PicardReport rep;
  rep.distance = distances(total, total_count, -1);
  rep.ratio = ratios(rep.distance);

  // Delete-one-block jackknife.
  std::vector<std::vector<double>> jd, jr;
  for (int b = 0; b < blocks; ++b) {
    auto d = distances(total, total_count - counts[static_cast<std::size_t>(b)], b);
    jr.push_back(ratios(d));
    jd.push_back(std::move(d));
  }
  auto jackknife_se = [&](const std::vector<std::vector<double>>& samples, std::size_t k) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s[k];
    mean /= blocks;
    double ss = 0.0;
    for (const auto& s : samples) ss += (s[k] - mean) * (s[k] - mean);
    return std::sqrt(ss * (blocks - 1.0) / blocks);
  };
  for (std::size_t k = 0; k < rep.distance.size(); ++k) rep.distance_se.push_back(jackknife_se(jd, k));
  for (std::size_t k = 0; k < rep.ratio.size(); ++k) rep.ratio_se.push_back(jackknife_se(jr, k));

  SpectralProfile profile(kernel);
  rep.predicted_factor =
      burkholder_constant(opt.p) * sigma.lip() * std::sqrt(upsilon_series(profile, opt.lambda * opt.lambda).value);
  rep.contraction_expected = rep.predicted_factor < 1.0;
  if (!rep.contraction_expected)
    rep.warning = "predicted factor >= 1: the weighted norm gives no contraction at this lambda";
  return rep;
}

// --- Structural checks -----------------------------------------------------

SupportReport support_metrics(const Trajectory& t, const WalkKernel& kernel) {
  SupportReport rep;
  if (t.fields.empty()) return rep;
  const int r0 = t.fields.front().support_radius();
  const int dim = kernel.dim();
  int prev = r0;
  for (int n = 0; n <= t.horizon(); ++n) {
    const auto& u = t.at(n);
    SupportRow row;
    row.n = n;
    row.radius = u.support_radius();
    row.count = u.support_count();
    std::size_t side = 2 * static_cast<std::size_t>(r0 + n * kernel.radius()) + 1;
    row.ball_count = 1;
    for (int a = 0; a < dim; ++a) row.ball_count *= side;
    row.radius_recursion = n == 0 || row.radius <= prev + kernel.radius();
    rep.all_ok = rep.all_ok && row.radius_recursion && row.count <= row.ball_count;
    prev = row.radius;
    rep.rows.push_back(row);
  }
  return rep;
}

ComparisonVerdict check_comparison(const WalkKernel& kernel, const SigmaSpec& sigma, const NoiseModel& noise) {
  ComparisonVerdict v;
  v.stay_probability = kernel.stay_probability();
  v.noise_bound = noise.bound();
  v.lip = sigma.lip();
  v.holds = v.stay_probability >= v.noise_bound * v.lip;
  return v;
}

PairedPathResult paired_comparison(const WalkKernel& kernel, const SigmaSpec& sigma, const NoiseModel& noise,
                                   const LatticeField& u0, const LatticeField& v0, int n_max, int paths,
                                   std::uint64_t seed, int workers) {
  const Box init = u0.storage().hull(v0.storage());
  bool ordered = true;
  init.for_each([&](const Site& x, std::size_t) { ordered = ordered && u0(x) >= v0(x); });
  if (!ordered) throw std::invalid_argument("paired comparison needs u0 >= v0");
  const bool v_nonneg = std::all_of(v0.values().begin(), v0.values().end(), [](double v) { return v >= 0.0; });

  constexpr std::size_t kBlock = 16;
  const std::size_t blocks = (static_cast<std::size_t>(paths) + kBlock - 1) / kBlock;
  std::vector<PairedPathResult> parts(blocks);
  for_each_block(blocks, workers, [&](std::size_t b) {
    auto& part = parts[b];
    part.min_gap = std::numeric_limits<double>::infinity();
    const std::size_t end = std::min(static_cast<std::size_t>(paths), (b + 1) * kBlock);
    for (std::size_t r = b * kBlock; r < end; ++r) {
      const NoiseStream stream{seed, r};
      const auto tu = evolve(kernel, sigma, u0, noise, n_max, stream);
      const auto tv = evolve(kernel, sigma, v0, noise, n_max, stream);
      for (int n = 0; n <= n_max; ++n) {
        const auto& u = tu.at(n);
        const auto& v = tv.at(n);
        u.storage().hull(v.storage()).for_each([&](const Site& x, std::size_t) {
          const double gap = u(x) - v(x);
          ++part.checks;
          part.min_gap = std::min(part.min_gap, gap);
          if (gap < 0.0) ++part.order_violations;
          if (v_nonneg && v(x) < 0.0) ++part.positivity_violations;
        });
      }
      ++part.paths;
    }
  });

  PairedPathResult out;
  out.verdict = check_comparison(kernel, sigma, noise);
  out.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : parts) {
    out.paths += p.paths;
    out.checks += p.checks;
    out.order_violations += p.order_violations;
    out.positivity_violations += p.positivity_violations;
    out.min_gap = std::min(out.min_gap, p.min_gap);
  }
  return out;
}

}  // namespace dsheat
