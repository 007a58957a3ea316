#include "fedlab/theory.hpp"

#include <cmath>

namespace fedlab {

double bound_random_attack(const BoundParams& p) {
  if (p.alpha_frac >= 1.0) {
    throw DomainError("bound_random_attack: alpha must be < 1");
  }
  double cn = p.c_frac * double(p.n_clients);
  double t = double(p.t_cl);
  return (2.0 / std::sqrt(t)) *
         (std::sqrt(2.0) * p.tau_l1 / ((1.0 - p.alpha_frac) * std::sqrt(cn)) +
          std::sqrt(p.smoothness_l1 * p.f0_minus_fstar));
}

DpBound bound_dp(const BoundParams& p) {
  double cn = p.c_frac * double(p.n_clients);
  double t = double(p.t_cl);
  DpBound out;
  out.privacy_cost = std::sqrt(3.0 * double(p.n_params)) * p.sigma * p.tau_l1 / cn;
  out.total = (2.0 / std::sqrt(t)) *
              (p.tau_l1 / std::sqrt(cn) + out.privacy_cost +
               std::sqrt(p.smoothness_l1 * p.f0_minus_fstar));
  return out;
}

double rate_gradient_ascent(const BoundParams& p) {
  if (p.alpha_frac >= 0.5) {
    throw DomainError("rate_gradient_ascent: requires alpha < 1/2");
  }
  double cn = p.c_frac * double(p.n_clients);
  return 1.0 / ((1.0 - 2.0 * p.alpha_frac) * std::sqrt(cn) * double(p.t_cl));
}

double bound_gamma(const BoundParams& p) {
  return std::sqrt(p.f0_minus_fstar / (p.smoothness_l1 * double(p.t_cl)));
}

ProtocolKind protocol_from_string(const std::string& s) {
  if (s == "stdfed") return ProtocolKind::kStdFed;
  if (s == "signfed") return ProtocolKind::kSignFed;
  if (s == "dp-signfed") return ProtocolKind::kDpSignFed;
  if (s == "dp-stdfed") return ProtocolKind::kDpStdFed;
  throw ConfigError("unknown protocol: " + s);
}

std::string protocol_to_string(ProtocolKind p) {
  switch (p) {
    case ProtocolKind::kStdFed: return "stdfed";
    case ProtocolKind::kSignFed: return "signfed";
    case ProtocolKind::kDpSignFed: return "dp-signfed";
    case ProtocolKind::kDpStdFed: return "dp-stdfed";
  }
  return "?";
}

double bandwidth_bits(ProtocolKind protocol, double c_frac, std::size_t round,
                      std::size_t n_params, unsigned mod_bits) {
  double base = c_frac * double(round) * double(n_params);
  switch (protocol) {
    case ProtocolKind::kSignFed: return base;
    case ProtocolKind::kStdFed: return 32.0 * base;
    case ProtocolKind::kDpSignFed: return double(mod_bits) * base;
    case ProtocolKind::kDpStdFed: return 32.0 * base;
  }
  return 0.0;
}

}  // namespace fedlab
