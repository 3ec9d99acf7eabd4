#include "hybridfilt/em.hpp"

#include "hybridfilt/error.hpp"
#include "step_kernel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>

namespace hybridfilt {

using detail::StepKernel;

FilteredStats e_step(const YPath& path, const ModelSpec& spec, const Vector& theta0,
                     const FilterOptions& options) {
  return e_step(PathBasis(path, spec), theta0, options);
}

FilteredStats e_step(const PathBasis& basis, const Vector& theta0, const FilterOptions& options) {
  const ModelSpec& spec = basis.spec();
  require_admissible(spec, theta0, "theta0");
  const int k = basis.k();
  const int L = basis.L();
  const bool lattice = options.scheme == Scheme::kLattice;

  // Statistic layout: counts and occupations per ordered pair (i != j), then
  // drift_lin per l, then gram per unordered pair l <= m.
  struct Pair {
    int from, to;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) pairs.push_back({i, j});
  std::vector<std::pair<int, int>> gram_pairs;
  for (int l = 0; l < L; ++l)
    for (int q = l; q < L; ++q) gram_pairs.push_back({l, q});
  const std::size_t P = pairs.size();
  const std::size_t n_stats = 2 * P + L + gram_pairs.size();
  const std::size_t count_off = 0, occ_off = P, lin_off = 2 * P, gram_off = 2 * P + L;

  std::vector<double> F(n_stats * k, 0.0), Fn(n_stats * k, 0.0), tmp(k);
  std::vector<double> sigma(spec.init_dist.data(), spec.init_dist.data() + k), next(k);
  std::vector<double> lin_src(static_cast<std::size_t>(L) * k), gram_src(gram_pairs.size() * k);
  double log_mass = 0.0;

  const Vector psi0 = spec.family.psi(theta0);
  StepKernel kernel(basis, theta0, options.scheme);
  for (std::size_t m = 0; m < basis.steps(); ++m) {
    kernel.build(m);
    const double h = basis.h(m);

    // Per-state source densities for items 3 and 4.
    for (int i = 0; i < k; ++i) {
      for (int l = 0; l < L; ++l) {
        double v = basis.lin(m, l, i);
        if (lattice) {
          double drift = 0.0;
          for (int r = 0; r < L; ++r) drift += psi0[r] * basis.gram(m, l, r, i);
          v -= drift * h;
        }
        lin_src[l * k + i] = v;
      }
      for (std::size_t g = 0; g < gram_pairs.size(); ++g)
        gram_src[g * k + i] = basis.gram(m, gram_pairs[g].first, gram_pairs[g].second, i) * h;
    }

    kernel.apply(sigma.data(), next.data());
    if (!lattice) StepKernel::clamp(next.data(), k);
    const double c = std::accumulate(next.begin(), next.end(), 0.0);
    if (!(c > 0.0) || !std::isfinite(c)) throw NumericalError("filter mass is not positive");
    const double inv_c = 1.0 / c;

    auto step_vec = [&](std::size_t s, auto&& add_source) {
      double* f = F.data() + s * k;
      double* fn = Fn.data() + s * k;
      if (lattice) {
        // F <- A (F + src) for items 2-4; item 1 adds after the product.
        for (int i = 0; i < k; ++i) tmp[i] = f[i];
        add_source(tmp.data(), true);
        kernel.apply(tmp.data(), fn);
      } else {
        kernel.apply(f, fn);
        add_source(fn, false);
      }
      for (int i = 0; i < k; ++i) fn[i] *= inv_c;
    };

    for (std::size_t p = 0; p < P; ++p) {
      const int i = pairs[p].from, j = pairs[p].to;
      const double q = kernel.rate[j + k * i];
      // Item 1: transitions i -> j.
      {
        double* f = F.data() + (count_off + p) * k;
        double* fn = Fn.data() + (count_off + p) * k;
        kernel.apply(f, fn);
        fn[j] += (lattice ? kernel.A[j + k * i] : q * h) * sigma[i];
        for (int a = 0; a < k; ++a) fn[a] *= inv_c;
      }
      // Item 2: occupation weighted by q_ji.
      step_vec(occ_off + p, [&](double* v, bool) { v[i] += q * h * sigma[i]; });
    }
    for (int l = 0; l < L; ++l)
      step_vec(lin_off + l, [&](double* v, bool) {
        for (int i = 0; i < k; ++i) v[i] += sigma[i] * lin_src[l * k + i];
      });
    for (std::size_t g = 0; g < gram_pairs.size(); ++g)
      step_vec(gram_off + g, [&](double* v, bool) {
        for (int i = 0; i < k; ++i) v[i] += sigma[i] * gram_src[g * k + i];
      });

    F.swap(Fn);
    for (int i = 0; i < k; ++i) sigma[i] = next[i] * inv_c;
    log_mass += kernel.shift + std::log(c);
  }

  FilteredStats s;
  static_cast<SufficientStats&>(s) = SufficientStats::zeros(k, L);
  s.theta_ref = theta0;
  s.log_mass = log_mass;
  auto total = [&](std::size_t idx) {
    const double* f = F.data() + idx * k;
    return std::accumulate(f, f + k, 0.0);
  };
  for (std::size_t p = 0; p < P; ++p) {
    s.n_count(pairs[p].to, pairs[p].from) = total(count_off + p);
    s.occupation(pairs[p].to, pairs[p].from) = total(occ_off + p);
  }
  for (int l = 0; l < L; ++l) s.drift_lin[l] = total(lin_off + l);
  for (std::size_t g = 0; g < gram_pairs.size(); ++g) {
    const double v = total(gram_off + g);
    s.gram(gram_pairs[g].first, gram_pairs[g].second) = v;
    s.gram(gram_pairs[g].second, gram_pairs[g].first) = v;
  }
  return s;
}

double q_function(const FilteredStats& stats, const ModelSpec& spec, const Vector& theta) {
  require_admissible(spec, theta);
  return stats_log_lik(stats, spec, theta);
}

Vector m_step(const FilteredStats& stats, const ModelSpec& spec, MStepInfo* info,
              const MStepOptions& options) {
  return mle_complete(stats, spec, info, options);
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kTol: return "tol";
    case StopReason::kMaxIter: return "max_iter";
    case StopReason::kNonIncrease: return "non_increase";
  }
  return "unknown";
}

EMTrace em_run(const YPath& path, const ModelSpec& spec, const Vector& theta_init,
               const EMOptions& options) {
  return em_run(PathBasis(path, spec), theta_init, options);
}

EMTrace em_run(const PathBasis& basis, const Vector& theta_init, const EMOptions& options) {
  const ModelSpec& spec = basis.spec();
  require_admissible(spec, theta_init, "theta_init");
  if (options.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");

  EMTrace trace;
  Vector theta = theta_init;
  FilteredStats stats = e_step(basis, theta, options.filter);
  const double base = stats.log_mass;
  trace.iterates.push_back({theta, 0.0, stats});

  for (int it = 0; it < options.max_iter; ++it) {
    const Vector next = m_step(stats, spec, nullptr, options.m_step);
    FilteredStats next_stats = e_step(basis, next, options.filter);
    const double ll = next_stats.log_mass - base;
    const double prev_ll = trace.iterates.back().loglik;
    const double change = (next - theta).cwiseAbs().maxCoeff();
    trace.iterates.push_back({next, ll, next_stats});
    spdlog::debug("em iteration {}: loglik {:.12g}, step {:.3g}", it + 1, ll, change);
    if (ll < prev_ll - options.decrease_slack) {
      trace.stop_reason = StopReason::kNonIncrease;
      spdlog::warn("EM likelihood decreased by {:.3g}; consider a smaller dt", prev_ll - ll);
      return trace;
    }
    theta = next;
    stats = std::move(next_stats);
    if (change < options.tol) {
      trace.converged = true;
      trace.stop_reason = StopReason::kTol;
      return trace;
    }
  }
  trace.stop_reason = StopReason::kMaxIter;
  return trace;
}

}  // namespace hybridfilt
