#include "fedlab/dp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace fedlab {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_gauss_pdf(double x, double mu, double xi) {
  double z = (x - mu) / xi;
  return -0.5 * z * z - std::log(std::sqrt(2.0 * kPi) * xi);
}

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Adaptive Simpson on f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  // Intervals near machine resolution cannot meet the halved tolerance, but
  // with the integrand shifted to max 1 their contribution is negligible.
  bool vanishing = (b - a) <= 1e-12 * (std::abs(a) + std::abs(b) + 1.0);
  if (std::abs(delta) <= 15.0 * tol || vanishing) {
    return left + right + delta / 15.0;
  }
  if (depth <= 0) throw NumericError("alpha integration did not converge");
  // Keep the absolute tolerance per subinterval instead of halving it;
  // halving over-refines exponentially varying integrands by orders of
  // magnitude while buying accuracy far beyond the 1e-12 target.
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

// log of int exp(g(x)) dx over [a, b]: shift by the grid max so the
// integrand stays in range, then integrate the shifted exponential.
double log_integral_exp(const std::function<double(double)>& g, double a,
                        double b) {
  const int kScan = 4096;
  double m = -kInf;
  for (int i = 0; i <= kScan; ++i) {
    double x = a + (b - a) * i / kScan;
    m = std::max(m, g(x));
  }
  if (m == -kInf) return -kInf;
  auto f = [&](double x) { return std::exp(g(x) - m); };
  double integral = integrate(f, a, b, 1e-12);
  return m + std::log(integral);
}

}  // namespace

double NoiseParams::per_client_scale() const {
  if (k_size <= r) throw DomainError("NoiseParams: |K| must exceed r");
  return std::sqrt(double(n)) * sigma / std::sqrt(double(k_size - r));
}

double NoiseParams::sigma_lower_bound() const {
  return std::sqrt(double(k_size) * std::log(2.0 + 2.0 / nu) /
                   (2.0 * double(n) * kPi * kPi));
}

int64_t sample_discrete_gaussian(double mu, double xi, Rng& rng) {
  if (!(xi > 0.0)) throw DomainError("sample_discrete_gaussian: xi must be > 0");
  const double c = std::floor(mu + 0.5);
  const double e = mu - c;  // |e| <= 1/2
  const double t = std::floor(xi) + 1.0;  // discrete Laplace scale
  // Acceptance envelope constant: max of target/proposal log-ratio.
  const double log_m = xi * xi / (2.0 * t * t) + std::abs(e) / t;

  for (int attempt = 0; attempt < 10000; ++attempt) {
    // Discrete Laplace proposal, p(x) ~ exp(-|x - c| / t).
    double u = 0.0;
    while (u == 0.0) u = rng.uniform();
    int64_t k = static_cast<int64_t>(std::floor(-t * std::log(u)));
    int s = rng.sign_flip();
    if (k == 0 && s < 0) continue;  // avoid double-counting zero
    double x = c + double(s) * double(k);
    double d = x - mu;
    double log_accept = -d * d / (2.0 * xi * xi) + double(k) / t - log_m;
    double v = 0.0;
    while (v == 0.0) v = rng.uniform();
    if (std::log(v) < log_accept) return static_cast<int64_t>(x);
  }
  throw NumericError("discrete Gaussian sampler exceeded proposal cap");
}

double kappa(double xi) {
  if (!(xi > 0.0)) throw DomainError("kappa: xi must be > 0");
  double a = std::exp(-2.0 * kPi * kPi * xi * xi);
  double b = std::exp(-6.0 * kPi * kPi * xi * xi);
  return 2.0 * a / (1.0 - b);
}

double alpha_continuous(int lambda, double xi, double c_frac) {
  if (lambda < 1) throw DomainError("alpha_continuous: lambda must be >= 1");
  if (!(xi > 0.0)) throw DomainError("alpha_continuous: xi must be > 0");
  if (c_frac < 0.0 || c_frac > 1.0) {
    throw DomainError("alpha_continuous: C must be in [0, 1]");
  }
  if (c_frac == 0.0) return 0.0;

  auto log_eta0 = [&](double x) { return log_gauss_pdf(x, 0.0, xi); };
  auto log_eta1 = [&](double x) {
    if (c_frac == 1.0) return log_gauss_pdf(x, 1.0, xi);
    return log_sum_exp(std::log(1.0 - c_frac) + log_gauss_pdf(x, 0.0, xi),
                       std::log(c_frac) + log_gauss_pdf(x, 1.0, xi));
  };
  // The E2 integrand peaks near x = lambda + 1; size the window to cover it.
  double hi = 1.0 + double(lambda) + 20.0 * xi;
  double lo = -hi;

  auto g1 = [&](double x) {
    double l0 = log_eta0(x);
    return l0 + double(lambda) * (l0 - log_eta1(x));
  };
  auto g2 = [&](double x) {
    double l1 = log_eta1(x);
    return l1 + double(lambda) * (l1 - log_eta0(x));
  };
  double log_e1 = log_integral_exp(g1, lo, hi);
  double log_e2 = log_integral_exp(g2, lo, hi);
  return std::max(log_e1, log_e2);
}

double alpha_discrete_correction(int lambda, double xi) {
  double k = kappa(xi);
  if (k >= 1.0) throw DomainError("alpha_discrete_correction: kappa(xi) >= 1");
  return double(lambda) * std::log1p(k) - double(lambda + 1) * std::log1p(-k);
}

double alpha_distributed_correction(int lambda, double xi_total, double nu) {
  if (!(nu > 0.0 && nu < 1.0)) {
    throw DomainError("alpha_distributed_correction: nu must be in (0, 1)");
  }
  return alpha_discrete_correction(lambda, xi_total) +
         3.0 * (std::log1p(nu) - std::log1p(-nu));
}

PrivacyAccountant::PrivacyAccountant(Mechanism mech, double c_frac,
                                     std::size_t lambda_max)
    : mech_(mech), c_frac_(c_frac) {
  if (lambda_max < 1) throw ConfigError("accountant: empty lambda grid");
  for (std::size_t l = 1; l <= lambda_max; ++l) {
    lambda_grid_.push_back(int(l));
  }
  accumulated_.assign(lambda_grid_.size(), 0.0);
}

std::vector<double> PrivacyAccountant::round_alpha(double sigma,
                                                   double xi_total,
                                                   double nu) const {
  std::vector<double> out(lambda_grid_.size());
  for (std::size_t i = 0; i < lambda_grid_.size(); ++i) {
    int lambda = lambda_grid_[i];
    double a = alpha_continuous(lambda, sigma, c_frac_);
    if (mech_ != Mechanism::kContinuous) {
      if (kappa(xi_total) >= 1.0) {
        a = kInf;  // xi too small for the discrete approximation
      } else if (mech_ == Mechanism::kDiscrete) {
        a += alpha_discrete_correction(lambda, xi_total);
      } else {
        a += alpha_distributed_correction(lambda, xi_total, nu);
      }
    }
    out[i] = a;
  }
  return out;
}

void PrivacyAccountant::accumulate(const std::vector<double>& alpha) {
  for (std::size_t i = 0; i < accumulated_.size(); ++i) {
    accumulated_[i] += alpha[i];
  }
}

double PrivacyAccountant::epsilon(const std::vector<double>& alpha,
                                  std::size_t t_rounds, double delta,
                                  int* best_lambda) const {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("epsilon: delta must be in (0, 1)");
  }
  double best = kInf;
  for (std::size_t i = 0; i < lambda_grid_.size(); ++i) {
    double a = double(t_rounds) * alpha[i];
    if (!std::isfinite(a)) continue;
    double eps = (a - std::log(delta)) / double(lambda_grid_[i]);
    if (eps < best) {
      best = eps;
      if (best_lambda) *best_lambda = lambda_grid_[i];
    }
  }
  return best;
}

double PrivacyAccountant::epsilon(double delta, int* best_lambda) const {
  return epsilon(accumulated_, 1, delta, best_lambda);
}

CalibrationResult calibrate_sigma(Mechanism mech, double target_epsilon,
                                  double delta, double c_frac,
                                  std::size_t t_rounds, std::size_t n,
                                  std::size_t k_size, double nu) {
  if (!(target_epsilon > 0.0)) {
    throw CalibrationError("calibrate_sigma: target epsilon must be positive");
  }
  PrivacyAccountant acct(mech, c_frac);
  auto eps_of = [&](double sigma) {
    double xi_total = std::sqrt(double(n)) * sigma;
    auto alpha = acct.round_alpha(sigma, xi_total, nu);
    return acct.epsilon(alpha, t_rounds, delta);
  };
  (void)k_size;

  double lo = 1e-2, hi = 1e3;
  if (eps_of(hi) > target_epsilon) {
    throw CalibrationError("calibrate_sigma: target unreachable for sigma <= 1e3");
  }
  if (eps_of(lo) <= target_epsilon) {
    return {lo, eps_of(lo)};
  }
  while (hi / lo > 1.0 + 1e-3) {
    double mid = std::sqrt(lo * hi);
    if (eps_of(mid) <= target_epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, eps_of(hi)};
}

ParamVector clip_l2(const ParamVector& v, double s) {
  if (!(s > 0.0)) throw DomainError("clip_l2: S must be positive");
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  double scale = 1.0 / std::max(1.0, std::sqrt(norm_sq) / s);
  ParamVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale;
  return out;
}

double concentration_bound(double t, double xi, double nu) {
  if (!(nu > 0.0 && nu < 1.0)) {
    throw DomainError("concentration_bound: nu must be in (0, 1)");
  }
  if (!(xi > std::sqrt(std::log(2.0 + 2.0 / nu) / (2.0 * kPi * kPi)))) {
    throw DomainError("concentration_bound: xi below validity threshold");
  }
  return 2.0 * std::exp(-t * t / 2.0) * (1.0 + nu) / (1.0 - nu);
}

}  // namespace fedlab
