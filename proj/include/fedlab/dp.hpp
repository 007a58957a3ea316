#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fedlab/model.hpp"
#include "fedlab/rng.hpp"

namespace fedlab {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Noise configuration for the distributed discrete Gaussian mechanism.
// Per-client scale is sqrt(n)*sigma/sqrt(|K| - r); with r > 0 the shares are
// inflated so the aggregate stays sufficiently noised when r clients fail.
struct NoiseParams {
  double sigma = 0.0;
  std::size_t n = 0;        // model parameter count
  std::size_t k_size = 0;   // |K|
  double nu = 1e-4;
  std::size_t r = 0;        // tolerated failures

  double per_client_scale() const;
  // Lower bound on sigma from the distributed-mechanism theorem.
  double sigma_lower_bound() const;
};

// Integer sample from the discrete Gaussian with real mean mu and scale xi.
// Rejection sampling with a discrete Laplace proposal.
int64_t sample_discrete_gaussian(double mu, double xi, Rng& rng);

// pdf/pmf ratio bound between the continuous and discrete Gaussians:
// 2*exp(-2*pi^2*xi^2) / (1 - exp(-6*pi^2*xi^2)).
double kappa(double xi);

// Log moment of the subsampled continuous Gaussian mechanism,
// log max(E1, E2), by adaptive numerical integration.
double alpha_continuous(int lambda, double xi, double c_frac);

// Additive correction for the discrete mechanism:
// log((1+kappa)^lambda / (1-kappa)^(lambda+1)).
double alpha_discrete_correction(int lambda, double xi);

// Distributed-mechanism correction: the discrete correction at total scale
// xi_total plus 3*log((1+nu)/(1-nu)).
double alpha_distributed_correction(int lambda, double xi_total, double nu);

enum class Mechanism { kContinuous, kDiscrete, kDiscreteDistributed };

// Lambda-indexed accumulated log moments; (epsilon, delta) by minimizing
// over the grid. Per-round moments compose additively.
class PrivacyAccountant {
 public:
  PrivacyAccountant(Mechanism mech, double c_frac, std::size_t lambda_max = 64);

  // Log moment of one round at noise multiplier sigma (sensitivity-normalized
  // scale; corrections use xi_total and nu for the distributed mechanism).
  std::vector<double> round_alpha(double sigma, double xi_total,
                                  double nu) const;

  void accumulate(const std::vector<double>& alpha);
  // Epsilon after composing `t_rounds` identical rounds of `alpha`.
  double epsilon(const std::vector<double>& alpha, std::size_t t_rounds,
                 double delta, int* best_lambda = nullptr) const;
  // Epsilon from the accumulated state.
  double epsilon(double delta, int* best_lambda = nullptr) const;

  const std::vector<int>& lambda_grid() const { return lambda_grid_; }
  const std::vector<double>& accumulated() const { return accumulated_; }
  Mechanism mechanism() const { return mech_; }
  double sampling_fraction() const { return c_frac_; }

 private:
  Mechanism mech_;
  double c_frac_;
  std::vector<int> lambda_grid_;
  std::vector<double> accumulated_;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationResult {
  double sigma = 0.0;
  double epsilon = 0.0;
};

// Smallest sigma in [1e-2, 1e3] (relative tolerance 1e-3) whose composed
// epsilon is at most target_epsilon.
CalibrationResult calibrate_sigma(Mechanism mech, double target_epsilon,
                                  double delta, double c_frac,
                                  std::size_t t_rounds, std::size_t n,
                                  std::size_t k_size, double nu = 1e-4);

// L2 clipping: v / max(1, ||v||_2 / s).
ParamVector clip_l2(const ParamVector& v, double s);

// Tail bound for the discrete Gaussian: 2*exp(-t^2/2)*(1+nu)/(1-nu),
// valid for xi > sqrt(ln(2+2/nu)/(2*pi^2)).
double concentration_bound(double t, double xi, double nu);

}  // namespace fedlab
