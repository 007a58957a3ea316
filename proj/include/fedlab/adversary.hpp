#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedlab/model.hpp"
#include "fedlab/rng.hpp"

namespace fedlab {

enum class AttackKind {
  kNone,
  kRandomUpdate,
  kGradientAscent,
  kSignInversion,
  kInBackdoor,
  kOutBackdoor,
};

AttackKind attack_from_string(const std::string& s);
std::string attack_to_string(AttackKind k);

struct AdversaryConfig {
  AttackKind kind = AttackKind::kNone;
  double malicious_fraction = 0.0;
  double sigma_adv = 200.0;
  double eta_adv = 1.0;
  std::size_t source_class = 0;  // backdoor source / excluded class
  std::size_t target_class = 0;
  // DP protocols: malicious clients skip their noise share and boost the
  // transmitted integers instead.
  bool omit_dp_noise = true;
  // When set, the malicious set is re-drawn as a fraction of the sampled
  // clients each round instead of a fixed subset of the population.
  bool per_round_fraction = false;
};

using SignVector = std::vector<int8_t>;  // entries are -1 or +1

// Isotropic Gaussian update G(0, sigma_adv * I); independent per caller
// stream (attackers do not collude here).
ParamVector random_update(std::size_t n, double sigma_adv, Rng& rng);

// Colluding gradient ascent on the pooled malicious data: t_gd ascent steps
// at rate eta, delta scaled by eta_adv. Every colluder submits this same
// result.
ParamVector gradient_ascent_update(const ModelSpec& spec, const ParamVector& w,
                                   const LocalData& pooled, std::size_t t_gd,
                                   std::size_t batch_size, double eta,
                                   double eta_adv, Rng& rng);

SignVector sign_inversion(const SignVector& s);

// Honest-style local training on the poisoned shard, delta boosted by
// eta_adv. Sign protocols see only the (boost-invariant) signs.
ParamVector backdoor_update(const ModelSpec& spec, const ParamVector& w,
                            const LocalData& poisoned, std::size_t t_gd,
                            std::size_t batch_size, double eta, double eta_adv,
                            Rng& rng);

}  // namespace fedlab
