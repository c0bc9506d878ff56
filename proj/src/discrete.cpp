#include "trigs/discrete.hpp"

#include <cmath>
#include <ostream>

#include "text_util.hpp"
#include "trigs/errors.hpp"

namespace trigs {

namespace {

void validate(const Objective& f, const IpatreParams& p) {
  if (!f.has_prox()) throw MissingCapability("ipatre: '" + f.name + "' has no proximal map");
  if (p.iters < 2) throw InvalidArgument("ipatre: iters must be >= 2");
  if (!(p.c > 0.0)) throw InvalidArgument("ipatre: c must be > 0");
  if (p.x0.size() != f.dim) throw InvalidArgument("ipatre: x0 dimension mismatch");
  if (p.x1 && p.x1->size() != f.dim) throw InvalidArgument("ipatre: x1 dimension mismatch");
}

// z_k = y_k − (c/k²) x_k
Vector extrapolate(const Vector& x_k, const Vector& x_km1, long k, const IpatreParams& p) {
  const double kk = static_cast<double>(k);
  const Vector y = x_k + momentum_coefficient(p.alpha, k) * (x_k - x_km1);
  return y - (p.c / (kk * kk)) * x_k;
}

}  // namespace

Vector ipatre_step(const Objective& f, const Vector& x_k, const Vector& x_km1, long k,
                   const IpatreParams& params) {
  if (k < 1) throw InvalidArgument("ipatre_step: k must be >= 1");
  return f.proximal(1.0, extrapolate(x_k, x_km1, k, params));
}

IterateLog ipatre_run(const Objective& f, const IpatreParams& params) {
  validate(f, params);
  IterateLog log{"ipatre", params, std::nullopt, {}};
  log.records.reserve(static_cast<std::size_t>(params.iters));

  Vector x_prev = params.x0;
  Vector x = params.x1.value_or(params.x0);
  const auto record = [&](long k, const Vector& xk, const Vector& xkm1, double resid) {
    log.records.push_back({k, xk, f.gap(xk), (xk - xkm1).norm(), resid, f.dist_min_norm(xk)});
  };
  record(1, x, x_prev, f.smooth() ? f.grad(x).norm() : std::nan(""));

  for (long k = 1; k < params.iters; ++k) {
    const Vector z = extrapolate(x, x_prev, k, params);
    Vector x_next = f.prox(1.0, z);
    const double resid = f.smooth() ? f.grad(x_next).norm() : (z - x_next).norm();
    x_prev = std::move(x);
    x = std::move(x_next);
    record(k + 1, x, x_prev, resid);
  }
  return log;
}

double moreau_value(const Objective& f, double lambda, const Vector& x) {
  if (!(lambda > 0.0)) throw InvalidArgument("moreau: lambda must be > 0");
  const Vector p = f.proximal(lambda, x);
  return f(p) + (x - p).squaredNorm() / (2.0 * lambda);
}

Vector moreau_grad(const Objective& f, double lambda, const Vector& x) {
  if (!(lambda > 0.0)) throw InvalidArgument("moreau: lambda must be > 0");
  return (x - f.proximal(lambda, x)) / lambda;
}

Vector prox_of_envelope(const Objective& f, double lambda, double theta, const Vector& x) {
  if (!(lambda > 0.0) || !(theta > 0.0)) throw InvalidArgument("prox_of_envelope: lambda, theta must be > 0");
  const double s = lambda + theta;
  return (lambda / s) * x + (theta / s) * f.proximal(s, x);
}

Objective moreau_envelope(const Objective& f, double lambda) {
  if (!f.has_prox()) throw MissingCapability("moreau envelope: '" + f.name + "' has no proximal map");
  if (!(lambda > 0.0)) throw InvalidArgument("moreau: lambda must be > 0");
  Objective env;
  env.name = f.name + "@moreau";
  env.dim = f.dim;
  env.eval = [f, lambda](const Vector& x) { return moreau_value(f, lambda, x); };
  env.grad = [f, lambda](const Vector& x) { return moreau_grad(f, lambda, x); };
  env.prox = [f, lambda](double theta, const Vector& x) {
    return prox_of_envelope(f, lambda, theta, x);
  };
  env.known_min_value = f.known_min_value;
  env.known_min_norm_solution = f.known_min_norm_solution;
  return env;
}

IterateLog ipatre_ns_run(const Objective& f, const MoreauParams& moreau, const IpatreParams& params) {
  validate(f, params);
  const double lambda = moreau.lambda;
  if (!(lambda > 0.0)) throw InvalidArgument("ipatre-ns: lambda must be > 0");
  IterateLog log{"ipatre-ns", params, moreau, {}};
  log.records.reserve(static_cast<std::size_t>(params.iters));

  const auto record = [&](long k, const Vector& xk, const Vector& xkm1) {
    const Vector p = f.prox(lambda, xk);
    const double gap = f.known_min_value ? f(p) - *f.known_min_value : std::nan("");
    log.records.push_back({k, xk, gap, (xk - xkm1).norm(), (xk - p).norm(), f.dist_min_norm(xk)});
  };

  Vector x_prev = params.x0;
  Vector x = params.x1.value_or(params.x0);
  record(1, x, x_prev);
  const double w_keep = lambda / (1.0 + lambda);
  const double w_prox = 1.0 / (1.0 + lambda);
  for (long k = 1; k < params.iters; ++k) {
    const Vector z = extrapolate(x, x_prev, k, params);
    Vector x_next = w_keep * z + w_prox * f.prox(lambda + 1.0, z);
    x_prev = std::move(x);
    x = std::move(x_next);
    record(k + 1, x, x_prev);
  }
  return log;
}

long default_decimation(std::size_t records) {
  constexpr std::size_t kMaxRows = 10'000;
  return static_cast<long>(std::max<std::size_t>(1, (records + kMaxRows - 1) / kMaxRows));
}

void write_iterate_csv(std::ostream& os, const IterateLog& log, long every) {
  if (every <= 0) every = default_decimation(log.records.size());
  const auto n = log.records.empty() ? 0 : log.records.front().x.size();
  os << "k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  os << ",f_gap,step_norm,resid_norm,dist_min_norm\n";
  for (std::size_t i = 0; i < log.records.size(); i += static_cast<std::size_t>(every)) {
    const auto& r = log.records[i];
    os << r.k;
    for (Eigen::Index j = 0; j < n; ++j) os << ',' << detail::fmt17(r.x[j]);
    os << ',' << detail::fmt17(r.f_gap) << ',' << detail::fmt17(r.step_norm) << ','
       << detail::fmt17(r.resid_norm) << ',' << detail::fmt17(r.dist_min_norm) << '\n';
  }
}

}  // namespace trigs
