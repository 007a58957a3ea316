#pragma once

#include <cstddef>
#include <string>

#include "fedlab/dp.hpp"

namespace fedlab {

// Inputs to the convergence-bound calculators. The bounds assume a fixed
// server scale gamma = sqrt((f0 - f*) / (||L||_1 * T_cl)), T_gd = 1 and
// |B| = T_cl; check_hypotheses flags configs that violate them.
struct BoundParams {
  double tau_l1 = 0.0;          // ||tau||_1
  double smoothness_l1 = 0.0;   // ||L||_1
  double f0_minus_fstar = 0.0;
  std::size_t t_cl = 1;
  double c_frac = 0.0;
  std::size_t n_clients = 0;    // N
  double alpha_frac = 0.0;      // fraction of malicious clients
  std::size_t n_params = 0;
  double sigma = 0.0;
};

// SignFed under the random update attack:
// (2/sqrt(T)) * (sqrt(2)||tau||_1 / ((1-alpha) sqrt(CN)) + sqrt(||L||_1 (f0-f*)))
double bound_random_attack(const BoundParams& p);

struct DpBound {
  double total = 0.0;
  double privacy_cost = 0.0;  // the sqrt(3n) sigma ||tau||_1 / (CN) term
};

// DP-SignFed:
// (2/sqrt(T)) * (||tau||_1/sqrt(CN) + sqrt(3n) sigma ||tau||_1/(CN) + sqrt(||L||_1 (f0-f*)))
DpBound bound_dp(const BoundParams& p);

// Gradient-ascent rate shape 1/((1-2*alpha) sqrt(CN) T); constants are not
// specified, only the shape is reported.
double rate_gradient_ascent(const BoundParams& p);

// Theorem hypothesis gamma for the bound calculators.
double bound_gamma(const BoundParams& p);

enum class ProtocolKind { kStdFed, kSignFed, kDpSignFed, kDpStdFed };

ProtocolKind protocol_from_string(const std::string& s);
std::string protocol_to_string(ProtocolKind p);

// Cumulative upstream bits per client after `round` rounds:
// signfed C*round*n, stdfed and dp-stdfed 32*C*round*n,
// dp-signfed modulus_bits*C*round*n.
double bandwidth_bits(ProtocolKind protocol, double c_frac, std::size_t round,
                      std::size_t n_params, unsigned mod_bits);

// Megabytes at 1e6 bytes per MB.
inline double bits_to_mb(double bits) { return bits / 8.0 / 1e6; }

}  // namespace fedlab
