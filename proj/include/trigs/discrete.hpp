#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trigs/objectives.hpp"

namespace trigs {

struct IpatreParams {
  double alpha = 4.0;  // momentum α_k = 1 − α/k
  double c = 1.0;      // Tikhonov weight c/k²
  long iters = 1000;   // number of logged iterates x_1 .. x_iters
  Vector x0;
  std::optional<Vector> x1;  // defaults to x0
};

struct MoreauParams {
  double lambda = 1.0;
};

struct IterateRecord {
  long k = 0;
  Vector x;
  double f_gap = 0.0;       // f(x_k) − min f; at prox_{λf}(x_k) for the nonsmooth variant
  double step_norm = 0.0;   // ‖x_k − x_{k−1}‖
  double resid_norm = 0.0;  // gradient norm, or its prox-residual surrogate
  double dist_min_norm = 0.0;
};

struct IterateLog {
  std::string algorithm;  // "ipatre" or "ipatre-ns"
  IpatreParams params;
  std::optional<MoreauParams> moreau;
  std::vector<IterateRecord> records;  // k = 1 .. iters
};

inline double momentum_coefficient(double alpha, long k) { return 1.0 - alpha / static_cast<double>(k); }

/// y_k = x_k + α_k(x_k − x_{k−1}),  x_{k+1} = prox_f(y_k − (c/k²) x_k).
Vector ipatre_step(const Objective& f, const Vector& x_k, const Vector& x_km1, long k,
                   const IpatreParams& params);

IterateLog ipatre_run(const Objective& f, const IpatreParams& params);

/// f_λ(x) = f(p) + ‖x − p‖²/(2λ) with p = prox_{λf}(x).
double moreau_value(const Objective& f, double lambda, const Vector& x);
/// ∇f_λ(x) = (x − prox_{λf}(x)) / λ.
Vector moreau_grad(const Objective& f, double lambda, const Vector& x);
/// prox_{θ f_λ}(x) = λ/(λ+θ) x + θ/(λ+θ) prox_{(λ+θ)f}(x).
Vector prox_of_envelope(const Objective& f, double lambda, double theta, const Vector& x);

/// The Moreau envelope as a smooth Objective with the same minimizers.
Objective moreau_envelope(const Objective& f, double lambda);

/// x_{k+1} = λ/(1+λ) z_k + 1/(1+λ) prox_{(1+λ)f}(z_k),  z_k = y_k − (c/k²) x_k.
IterateLog ipatre_ns_run(const Objective& f, const MoreauParams& moreau, const IpatreParams& params);

/// Row stride keeping an n-record log at ≤ 10⁴ CSV rows.
long default_decimation(std::size_t records);

/// Iterate CSV: "k,x1..xn,f_gap,step_norm,resid_norm,dist_min_norm", every
/// `every`-th record starting with the first (0 selects default_decimation).
void write_iterate_csv(std::ostream& os, const IterateLog& log, long every = 0);

}  // namespace trigs
