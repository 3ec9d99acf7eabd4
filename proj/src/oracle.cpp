#include "hybridfilt/oracle.hpp"

#include "hybridfilt/clocks.hpp"
#include "hybridfilt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace hybridfilt {

namespace {

void check_path(const YPath& path, const ModelSpec& spec) {
  path.validate();
  if (path.dim() != spec.dims.d) throw ConfigError("path dimension does not match the model");
}

// Log density ratio of N(dy; mu h, eps^2 h I) to N(dy; 0, eps^2 h I).
double emission_log_ratio(const Vector& dy, const Vector& mu, double h, double eps) {
  const double var = eps * eps * h;
  return (dy.squaredNorm() - (dy - mu * h).squaredNorm()) / (2.0 * var);
}

struct HmmStep {
  Matrix transition;  // column i: distribution of the next state given i
  Vector log_emission;
};

HmmStep hmm_step(const YPath& path, const ModelSpec& spec, const Vector& theta, std::size_t m,
                 std::size_t& clipped) {
  const int k = spec.dims.k;
  const double h = path.times[m + 1] - path.times[m];
  const Point y = path.y_at(m);
  const Matrix q = build_q_matrix(spec, theta, y);
  const Matrix c = build_c_matrix(spec, theta, y);
  const Vector dy = (path.y.row(static_cast<Eigen::Index>(m + 1)) -
                     path.y.row(static_cast<Eigen::Index>(m)))
                        .transpose();
  HmmStep s;
  for (int i = 0; i < k; ++i)
    if (-q(i, i) * h >= 1.0)
      throw StepTooLargeError("dt * exit rate >= 1 at t=" + format_double(path.times[m]));
  s.transition = Matrix::Identity(k, k) + q * h;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double& v = s.transition(j, i);
      if (v < 0.0 || v > 1.0) {
        v = std::clamp(v, 0.0, 1.0);
        ++clipped;
      }
    }
    s.transition.col(i) /= s.transition.col(i).sum();
  }
  s.log_emission.resize(k);
  for (int i = 0; i < k; ++i)
    s.log_emission[i] = emission_log_ratio(dy, c.col(i), h, spec.epsilon);
  return s;
}

}  // namespace

HmmForwardResult hmm_forward_oracle(const YPath& path, const ModelSpec& spec, const Vector& theta) {
  check_path(path, spec);
  require_admissible(spec, theta);
  const int k = spec.dims.k;
  HmmForwardResult r;
  r.probs.resize(static_cast<Eigen::Index>(path.size()), k);
  Vector alpha = spec.init_dist;
  r.probs.row(0) = alpha.transpose();
  for (std::size_t m = 0; m + 1 < path.size(); ++m) {
    const HmmStep s = hmm_step(path, spec, theta, m, r.clipped);
    const double top = s.log_emission.maxCoeff();
    Vector weighted = alpha.array() * (s.log_emission.array() - top).exp();
    const double total = weighted.sum();
    r.log_evidence += top + std::log(total);
    alpha = s.transition * (weighted / total);
    alpha /= alpha.sum();
    r.probs.row(static_cast<Eigen::Index>(m + 1)) = alpha.transpose();
  }
  return r;
}

RowMatrix hmm_smoother_oracle(const YPath& path, const ModelSpec& spec, const Vector& theta) {
  const HmmForwardResult fwd = hmm_forward_oracle(path, spec, theta);
  const int k = spec.dims.k;
  const std::size_t n = path.size() - 1;
  RowMatrix post(static_cast<Eigen::Index>(n + 1), k);
  Vector beta = Vector::Ones(k);
  post.row(static_cast<Eigen::Index>(n)) = fwd.probs.row(static_cast<Eigen::Index>(n));
  std::size_t clipped = 0;
  for (std::size_t m = n; m-- > 0;) {
    const HmmStep s = hmm_step(path, spec, theta, m, clipped);
    const double top = s.log_emission.maxCoeff();
    Vector b = (s.transition.transpose() * beta).array() * (s.log_emission.array() - top).exp();
    beta = b / b.maxCoeff();
    Vector p = fwd.probs.row(static_cast<Eigen::Index>(m)).transpose().cwiseProduct(beta);
    post.row(static_cast<Eigen::Index>(m)) = (p / p.sum()).transpose();
  }
  return post;
}

std::string Functional::name() const {
  switch (kind) {
    case Kind::kFilterAt: return "filter[" + std::to_string(a) + "]@" + format_double(t);
    case Kind::kCount: return "n_count(" + std::to_string(a) + "," + std::to_string(b) + ")";
    case Kind::kOccupation:
      return "occupation(" + std::to_string(a) + "," + std::to_string(b) + ")";
    case Kind::kDriftLin: return "drift_lin(" + std::to_string(a) + ")";
    case Kind::kGram: return "gram(" + std::to_string(a) + "," + std::to_string(b) + ")";
    case Kind::kLambdaMass: return "lambda_mass";
  }
  return "unknown";
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

OracleEstimate self_normalized_mean(const std::vector<double>& log_w,
                                    const std::vector<double>& values) {
  const std::size_t n = log_w.size();
  if (n < 2 || values.size() != n) throw ConfigError("need at least two weighted samples");
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(n), wf(n);
  for (std::size_t p = 0; p < n; ++p) {
    w[p] = std::exp(log_w[p] - top);
    wf[p] = w[p] * values[p];
  }
  const double total = pairwise_sum(w.data(), n);
  const double mean = pairwise_sum(wf.data(), n) / total;
  for (std::size_t p = 0; p < n; ++p) {
    const double r = w[p] / total * (values[p] - mean);
    wf[p] = r * r;
  }
  return {mean, std::sqrt(pairwise_sum(wf.data(), n)), n};
}

namespace {

// Per-step quantities along the frozen observation at the oracle's theta.
struct FrozenTable {
  std::size_t n = 0;
  int k = 0, L = 0;
  std::vector<double> h;
  std::vector<double> rate;      // (n+1) x k x k, index (m*k + from)*k + to
  std::vector<double> log_w;     // n x k
  std::vector<double> lin;       // n x L x k
  std::vector<double> gram;      // n x L x L x k
};

FrozenTable build_table(const YPath& path, const ModelSpec& spec, const Vector& theta) {
  const int k = spec.dims.k, d = spec.dims.d, L = spec.dims.L;
  const ThetaModel model(spec, theta);
  FrozenTable t;
  t.n = path.size() - 1;
  t.k = k;
  t.L = L;
  t.h.resize(t.n);
  t.rate.assign((t.n + 1) * k * k, 0.0);
  t.log_w.resize(t.n * k);
  t.lin.resize(t.n * L * k);
  t.gram.resize(t.n * L * L * k);
  Vector mu(d), dy(d);
  Matrix basis(d, std::max(L, 1));
  for (std::size_t m = 0; m <= t.n; ++m) {
    const Point y = path.y_at(m);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j) t.rate[(m * k + i) * k + j] = model.rate(i, j, y);
    if (m == t.n) break;
    t.h[m] = path.times[m + 1] - path.times[m];
    dy = (path.y.row(static_cast<Eigen::Index>(m + 1)) - path.y.row(static_cast<Eigen::Index>(m)))
             .transpose();
    for (int i = 0; i < k; ++i) {
      model.drift(i, y, {mu.data(), static_cast<std::size_t>(d)});
      t.log_w[m * k + i] = emission_log_ratio(dy, mu, t.h[m], spec.epsilon);
      for (int l = 0; l < L; ++l)
        spec.family.mu_basis[l].evaluate(i, y, {basis.col(l).data(), static_cast<std::size_t>(d)});
      for (int l = 0; l < L; ++l) {
        t.lin[(m * L + l) * k + i] = basis.col(l).dot(dy - mu * t.h[m]);
        for (int q = 0; q < L; ++q)
          t.gram[((m * L + l) * L + q) * k + i] = basis.col(l).dot(basis.col(q)) * t.h[m];
      }
    }
  }
  return t;
}

struct ParticleOut {
  double log_lambda = 0.0;
  std::vector<double> values;
};

}  // namespace

std::vector<OracleEstimate> mc_conditional_oracle(const YPath& path, const ModelSpec& spec,
                                                  const Vector& theta,
                                                  const std::vector<Functional>& functionals,
                                                  const OracleOptions& options) {
  check_path(path, spec);
  require_admissible(spec, theta);
  if (options.n_particles < 2) throw ConfigError("n_particles must be >= 2");
  const int k = spec.dims.k, d = spec.dims.d, L = spec.dims.L;
  for (const auto& f : functionals) {
    const bool ok = [&] {
      switch (f.kind) {
        case Functional::Kind::kFilterAt:
          return f.a >= 0 && f.a < k && f.t >= path.times.front() && f.t <= path.times.back();
        case Functional::Kind::kCount:
        case Functional::Kind::kOccupation:
          return f.a >= 0 && f.a < k && f.b >= 0 && f.b < k && f.a != f.b;
        case Functional::Kind::kDriftLin: return f.a >= 0 && f.a < L;
        case Functional::Kind::kGram: return f.a >= 0 && f.a < L && f.b >= 0 && f.b < L;
        case Functional::Kind::kLambdaMass: return true;
      }
      return false;
    }();
    if (!ok) throw ConfigError("invalid oracle functional " + f.name());
  }

  const FrozenTable table = build_table(path, spec, theta);
  const ThetaModel model(spec, theta);
  const std::size_t n = table.n;
  const std::size_t nf = functionals.size();
  std::vector<std::size_t> filter_index(nf, 0);
  for (std::size_t f = 0; f < nf; ++f)
    if (functionals[f].kind == Functional::Kind::kFilterAt) {
      const auto it = std::lower_bound(path.times.begin(), path.times.end(), functionals[f].t);
      std::size_t idx = static_cast<std::size_t>(it - path.times.begin());
      if (idx == path.size()) --idx;
      if (idx > 0 && functionals[f].t - path.times[idx - 1] <= path.times[idx] - functionals[f].t)
        --idx;
      filter_index[f] = idx;
    }

  const std::size_t np = options.n_particles;
  std::vector<double> log_lambda(np);
  std::vector<double> values(np * nf);
  const RandomStream init_base(options.seed, StreamId::kInitialState);
  const RandomStream clock_base(options.seed, StreamId::kClocks);

  auto run_particle = [&](std::size_t p) {
    RandomStream init_rng = init_base.split(p);
    RandomStream clock_rng = clock_base.split(p);
    int x = sample_categorical(as_point(spec.init_dist), init_rng.uniform());
    ClockSet clocks(k);
    clocks.restart(x, clock_rng);
    Matrix counts = Matrix::Zero(k, k);
    Matrix occ = Matrix::Zero(k, k);  // (j, i): sum of q_ji(Y_m) * time in i
    std::vector<int> state_at(n + 1);
    std::vector<double> r0(k), r1(k), rmid(k);
    Vector ymid(d);
    double log_l = 0.0;
    state_at[0] = x;
    for (std::size_t m = 0; m < n; ++m) {
      const double h = table.h[m];
      log_l += table.log_w[m * k + x];
      const double* rl = &table.rate[(m * k) * k];
      const double* rr = &table.rate[((m + 1) * k) * k];
      for (int j = 0; j < k; ++j) {
        r0[j] = rl[x * k + j];
        r1[j] = rr[x * k + j];
      }
      double start = 0.0;  // fraction of the step already covered
      while (true) {
        const double seg = (1.0 - start) * h;
        const auto fire = clocks.advance(r0, r1, seg);
        const double stop = fire ? start + fire->fraction * (1.0 - start) : 1.0;
        for (int j = 0; j < k; ++j)
          if (j != x) occ(j, x) += rl[x * k + j] * (stop - start) * h;
        if (!fire) break;
        counts(fire->target, x) += 1.0;
        x = fire->target;
        clocks.restart(x, clock_rng);
        if (stop >= 1.0) break;
        ymid = (1.0 - stop) * path.y.row(static_cast<Eigen::Index>(m)).transpose() +
               stop * path.y.row(static_cast<Eigen::Index>(m + 1)).transpose();
        for (int j = 0; j < k; ++j) {
          r0[j] = j == x ? 0.0 : model.rate(x, j, as_point(ymid));
          r1[j] = rr[x * k + j];
        }
        start = stop;
      }
      state_at[m + 1] = x;
    }
    log_lambda[p] = log_l;
    double* out = values.data() + p * nf;
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& fn = functionals[f];
      double v = 0.0;
      switch (fn.kind) {
        case Functional::Kind::kFilterAt: v = state_at[filter_index[f]] == fn.a ? 1.0 : 0.0; break;
        case Functional::Kind::kCount: v = counts(fn.a, fn.b); break;
        case Functional::Kind::kOccupation: v = occ(fn.a, fn.b); break;
        case Functional::Kind::kDriftLin:
          for (std::size_t m = 0; m < n; ++m) v += table.lin[(m * L + fn.a) * k + state_at[m]];
          break;
        case Functional::Kind::kGram:
          for (std::size_t m = 0; m < n; ++m)
            v += table.gram[((m * L + fn.a) * L + fn.b) * k + state_at[m]];
          break;
        case Functional::Kind::kLambdaMass: v = 1.0; break;
      }
      out[f] = v;
    }
  };

  const int workers = std::max(1, std::min<int>(options.jobs, static_cast<int>(np)));
  if (workers == 1) {
    for (std::size_t p = 0; p < np; ++p) run_particle(p);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t p = w; p < np; p += workers) run_particle(p);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<OracleEstimate> out(nf);
  std::vector<double> column(np);
  for (std::size_t f = 0; f < nf; ++f) {
    if (functionals[f].kind == Functional::Kind::kLambdaMass) {
      // Plain mean of Lambda_T, scaled by the largest weight for safety.
      const double top = *std::max_element(log_lambda.begin(), log_lambda.end());
      for (std::size_t p = 0; p < np; ++p) column[p] = std::exp(log_lambda[p] - top);
      const double mean = pairwise_sum(column.data(), np) / static_cast<double>(np);
      for (std::size_t p = 0; p < np; ++p) column[p] = (column[p] - mean) * (column[p] - mean);
      const double var = pairwise_sum(column.data(), np) / static_cast<double>(np - 1);
      const double scale = std::exp(top);
      out[f] = {mean * scale, std::sqrt(var / static_cast<double>(np)) * scale, np};
      continue;
    }
    for (std::size_t p = 0; p < np; ++p) column[p] = values[p * nf + f];
    out[f] = self_normalized_mean(log_lambda, column);
  }
  return out;
}

OracleEstimate mc_conditional_oracle(const YPath& path, const ModelSpec& spec, const Vector& theta,
                                     const Functional& functional, const OracleOptions& options) {
  return mc_conditional_oracle(path, spec, theta, std::vector<Functional>{functional}, options)
      .front();
}

}  // namespace hybridfilt
