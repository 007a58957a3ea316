#include "fedlab/adversary.hpp"

namespace fedlab {

AttackKind attack_from_string(const std::string& s) {
  if (s == "none") return AttackKind::kNone;
  if (s == "random-update") return AttackKind::kRandomUpdate;
  if (s == "gradient-ascent") return AttackKind::kGradientAscent;
  if (s == "sign-inversion") return AttackKind::kSignInversion;
  if (s == "in-backdoor") return AttackKind::kInBackdoor;
  if (s == "out-backdoor") return AttackKind::kOutBackdoor;
  throw ConfigError("unknown attack kind: " + s);
}

std::string attack_to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kRandomUpdate: return "random-update";
    case AttackKind::kGradientAscent: return "gradient-ascent";
    case AttackKind::kSignInversion: return "sign-inversion";
    case AttackKind::kInBackdoor: return "in-backdoor";
    case AttackKind::kOutBackdoor: return "out-backdoor";
  }
  return "?";
}

ParamVector random_update(std::size_t n, double sigma_adv, Rng& rng) {
  if (!(sigma_adv > 0.0)) throw ConfigError("random_update: sigma_adv must be > 0");
  ParamVector v(n);
  for (double& x : v) x = rng.normal(0.0, sigma_adv);
  return v;
}

ParamVector gradient_ascent_update(const ModelSpec& spec, const ParamVector& w,
                                   const LocalData& pooled, std::size_t t_gd,
                                   std::size_t batch_size, double eta,
                                   double eta_adv, Rng& rng) {
  if (pooled.size() == 0) {
    throw ConfigError("gradient_ascent_update: empty pooled dataset");
  }
  ParamVector after = gradient_steps(spec, w, pooled, t_gd, batch_size, eta, rng);
  ParamVector delta(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    delta[i] = eta_adv * (after[i] - w[i]);
  }
  return delta;
}

SignVector sign_inversion(const SignVector& s) {
  SignVector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = int8_t(-s[i]);
  return out;
}

ParamVector backdoor_update(const ModelSpec& spec, const ParamVector& w,
                            const LocalData& poisoned, std::size_t t_gd,
                            std::size_t batch_size, double eta, double eta_adv,
                            Rng& rng) {
  ParamVector after = local_sgd(spec, w, poisoned, t_gd, batch_size, eta, rng);
  ParamVector delta(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    delta[i] = eta_adv * (after[i] - w[i]);
  }
  return delta;
}

}  // namespace fedlab
