#include "fedlab/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedlab/secure_agg.hpp"

namespace fedlab {
namespace {

// Parallel map over [0, count) with a fixed result slot per index. Each task
// derives its own RNG streams, so the thread count never changes results.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  unsigned use = std::min<std::size_t>(threads, count);
  for (unsigned tid = 0; tid < use; ++tid) {
    pool.emplace_back([&, tid] {
      for (std::size_t i = tid; i < count; i += use) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void RoundConfig::validate() const {
  if (n_clients < 1) throw ConfigError("clients.N must be >= 1");
  if (!(c_frac > 0.0 && c_frac <= 1.0)) throw ConfigError("clients.C must be in (0, 1]");
  if (protocol == ProtocolKind::kSignFed || protocol == ProtocolKind::kDpSignFed) {
    if (!(gamma > 0.0)) throw ConfigError("rounds.gamma must be > 0 for sign protocols");
  }
  if (protocol == ProtocolKind::kDpStdFed && !clip_calibrate && !(clip_s > 0.0)) {
    throw ConfigError("privacy.clip_s must be > 0 for dp-stdfed");
  }
  if (sigma < 0.0) throw ConfigError("privacy.sigma must be >= 0");
}

std::vector<std::size_t> sample_clients(std::size_t n, double c_frac,
                                        Rng& rng) {
  std::size_t k = std::max<std::size_t>(
      1, std::size_t(std::llround(c_frac * double(n))));
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: first k entries are a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.uniform_int(n - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

std::vector<std::size_t> choose_malicious(uint64_t seed, std::size_t n,
                                          double fraction) {
  std::size_t m = std::size_t(std::llround(fraction * double(n)));
  Rng rng = Rng::derive(seed, {kStreamAttack, 0});
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + rng.uniform_int(n - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

SignVector sign_of(const ParamVector& v, Rng& rng) {
  SignVector s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) throw NumericError("sign: NaN input");
    if (v[i] > 0.0) {
      s[i] = 1;
    } else if (v[i] < 0.0) {
      s[i] = -1;
    } else {
      s[i] = int8_t(rng.sign_flip());
    }
  }
  return s;
}

ParamVector stdfed_aggregate(const std::vector<ParamVector>& updates,
                             const std::vector<double>& sizes) {
  if (updates.empty() || updates.size() != sizes.size()) {
    throw ConfigError("stdfed_aggregate: updates/sizes mismatch");
  }
  std::size_t n = updates[0].size();
  double total = 0.0;
  for (double s : sizes) {
    if (!(s > 0.0)) throw ConfigError("stdfed_aggregate: sizes must be > 0");
    total += s;
  }
  ParamVector out(n, 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    if (updates[k].size() != n) {
      throw ConfigError("stdfed_aggregate: length mismatch");
    }
    double wgt = sizes[k] / total;
    for (std::size_t i = 0; i < n; ++i) out[i] += wgt * updates[k][i];
  }
  return out;
}

ParamVector signfed_aggregate(const std::vector<SignVector>& sign_vectors,
                              double gamma, Rng& rng) {
  if (sign_vectors.empty()) {
    throw ConfigError("signfed_aggregate: need at least one vector");
  }
  std::size_t n = sign_vectors[0].size();
  ParamVector sum(n, 0.0);
  for (const auto& s : sign_vectors) {
    if (s.size() != n) throw ConfigError("signfed_aggregate: length mismatch");
    for (std::size_t i = 0; i < n; ++i) sum[i] += double(s[i]);
  }
  SignVector agg = sign_of(sum, rng);
  ParamVector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = gamma * double(agg[i]);
  return out;
}

FederatedRun::FederatedRun(ModelSpec spec, RoundConfig cfg, AdversaryConfig adv,
                           std::vector<LocalData> shards, Dataset test_set,
                           LocalData backdoor_test)
    : spec_(spec),
      cfg_(cfg),
      adv_(adv),
      shards_(std::move(shards)),
      test_(std::move(test_set)),
      backdoor_test_(std::move(backdoor_test)) {
  cfg_.validate();
  if (shards_.size() != cfg_.n_clients) {
    throw ConfigError("shard count does not match clients.N");
  }
  shard_sizes_.reserve(shards_.size());
  for (const auto& s : shards_) shard_sizes_.push_back(double(s.size()));

  Rng init_rng = Rng::derive(cfg_.seed, {kStreamInit});
  w_ = init_params(spec_, init_rng);

  // Fixed malicious subset, chosen once per run.
  if (adv_.kind != AttackKind::kNone && !adv_.per_round_fraction) {
    malicious_ =
        choose_malicious(cfg_.seed, cfg_.n_clients, adv_.malicious_fraction);
  }

  // Colluders pool their data once (gradient ascent).
  if (adv_.kind == AttackKind::kGradientAscent) {
    ascent_pool_.input_dim = spec_.input_dim;
    for (std::size_t k : malicious_) {
      ascent_pool_.features.insert(ascent_pool_.features.end(),
                                   shards_[k].features.begin(),
                                   shards_[k].features.end());
      ascent_pool_.labels.insert(ascent_pool_.labels.end(),
                                 shards_[k].labels.begin(),
                                 shards_[k].labels.end());
    }
  }

  if (cfg_.protocol == ProtocolKind::kDpStdFed && cfg_.clip_calibrate) {
    cfg_.clip_s = calibrate_median_norm();
  }

  Batch eval;
  eval.input_dim = test_.input_dim;
  eval.features = test_.features;
  eval.labels = test_.labels;
  initial_loss_ = forward_loss(spec_, w_, eval);
}

double FederatedRun::calibrate_median_norm() const {
  std::vector<double> norms(cfg_.n_clients);
  parallel_for(cfg_.n_clients, cfg_.threads, [&](std::size_t k) {
    ParamVector d = honest_delta(k, 0);
    double sq = 0.0;
    for (double x : d) sq += x * x;
    norms[k] = std::sqrt(sq);
  });
  return median_of(std::move(norms));
}

bool FederatedRun::is_malicious(
    std::size_t client, const std::vector<std::size_t>& round_malicious) const {
  const auto& set = adv_.per_round_fraction ? round_malicious : malicious_;
  return std::binary_search(set.begin(), set.end(), client);
}

ParamVector FederatedRun::honest_delta(std::size_t client,
                                       std::size_t t) const {
  Rng rng = Rng::derive(cfg_.seed, {kStreamBatch, t, client});
  ParamVector after = local_sgd(spec_, w_, shards_[client], cfg_.t_gd,
                                cfg_.batch_size, cfg_.eta, rng);
  ParamVector delta(w_.size());
  for (std::size_t i = 0; i < w_.size(); ++i) delta[i] = after[i] - w_[i];
  return delta;
}

RoundRecord FederatedRun::run_round(std::size_t t) {
  auto started = std::chrono::steady_clock::now();
  RoundRecord rec;
  rec.t = t;

  const std::size_t n = w_.size();
  bool weights_ok = true;
  for (double x : w_) {
    if (!std::isfinite(x)) weights_ok = false;
  }

  Rng sample_rng = Rng::derive(cfg_.seed, {kStreamClientSample, t});
  std::vector<std::size_t> selected =
      sample_clients(cfg_.n_clients, cfg_.c_frac, sample_rng);
  const std::size_t k_size = selected.size();

  std::vector<std::size_t> round_malicious;
  if (adv_.kind != AttackKind::kNone && adv_.per_round_fraction) {
    std::size_t m = std::size_t(
        std::llround(adv_.malicious_fraction * double(k_size)));
    Rng mrng = Rng::derive(cfg_.seed, {kStreamAttack, t, 0xa11});
    std::vector<std::size_t> pool = selected;
    for (std::size_t i = 0; i < m && i < pool.size(); ++i) {
      std::size_t j = i + mrng.uniform_int(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(std::min(m, pool.size()));
    std::sort(pool.begin(), pool.end());
    round_malicious = std::move(pool);
  }

  if (weights_ok) {
    // Shared colluding ascent update, one per round.
    ParamVector ascent_delta;
    if (adv_.kind == AttackKind::kGradientAscent && !ascent_pool_.labels.empty()) {
      Rng arng = Rng::derive(cfg_.seed, {kStreamAttack, t});
      ascent_delta =
          gradient_ascent_update(spec_, w_, ascent_pool_, cfg_.t_gd,
                                 cfg_.batch_size, cfg_.eta, adv_.eta_adv, arng);
    }

    // Stage 1: per-client outbound message, independent across clients.
    std::vector<ParamVector> deltas(k_size);       // stdfed / dp-stdfed
    std::vector<SignVector> signs(k_size);         // sign protocols
    std::vector<std::vector<int64_t>> ints(k_size);  // dp-signfed
    const bool sign_path = cfg_.protocol == ProtocolKind::kSignFed ||
                           cfg_.protocol == ProtocolKind::kDpSignFed;
    const double xi = cfg_.sigma > 0.0
                          ? std::sqrt(double(n)) * cfg_.sigma /
                                std::sqrt(double(k_size - cfg_.failures_r))
                          : 0.0;
    if (cfg_.protocol == ProtocolKind::kDpSignFed) {
      unsigned sized = modulus_bits(double(n), cfg_.sigma, k_size, 1.0, 12.0);
      // Never let the ring be too tight for a plain sum of signs.
      unsigned floor_bits = 2;
      while ((uint64_t(1) << (floor_bits - 1)) <= k_size) ++floor_bits;
      mod_bits_ = std::max(sized, floor_bits);
    }

    parallel_for(k_size, cfg_.threads, [&](std::size_t idx) {
      std::size_t k = selected[idx];
      bool mal = adv_.kind != AttackKind::kNone &&
                 is_malicious(k, round_malicious);

      ParamVector delta;
      if (mal && adv_.kind == AttackKind::kRandomUpdate) {
        Rng arng = Rng::derive(cfg_.seed, {kStreamAttack, t, k});
        delta = random_update(n, adv_.sigma_adv, arng);
      } else if (mal && adv_.kind == AttackKind::kGradientAscent) {
        delta = ascent_delta;
      } else if (mal && (adv_.kind == AttackKind::kInBackdoor ||
                         adv_.kind == AttackKind::kOutBackdoor)) {
        Rng brng = Rng::derive(cfg_.seed, {kStreamBatch, t, k});
        // Shard was poisoned at data-arrangement time; sign protocols see
        // boost-invariant signs, stdfed sees the boosted delta.
        delta = backdoor_update(spec_, w_, shards_[k], cfg_.t_gd,
                                cfg_.batch_size, cfg_.eta, adv_.eta_adv, brng);
      } else {
        delta = honest_delta(k, t);
        if (mal && adv_.kind == AttackKind::kSignInversion) {
          for (double& x : delta) x = -x;
        }
      }

      if (sign_path) {
        Rng tie = Rng::derive(cfg_.seed, {kStreamSignTie, t, k});
        SignVector s = sign_of(delta, tie);
        if (cfg_.protocol == ProtocolKind::kSignFed) {
          signs[idx] = std::move(s);
          return;
        }
        // DP-SignFed integer message.
        std::vector<int64_t> z(n);
        if (mal && adv_.omit_dp_noise) {
          int64_t boost = std::max<int64_t>(1, std::llround(adv_.eta_adv));
          for (std::size_t i = 0; i < n; ++i) z[i] = boost * int64_t(s[i]);
        } else if (xi > 0.0) {
          Rng nrng = Rng::derive(cfg_.seed, {kStreamNoise, t, k});
          for (std::size_t i = 0; i < n; ++i) {
            z[i] = sample_discrete_gaussian(double(s[i]), xi, nrng);
          }
        } else {
          for (std::size_t i = 0; i < n; ++i) z[i] = int64_t(s[i]);
        }
        ints[idx] = std::move(z);
        return;
      }

      if (cfg_.protocol == ProtocolKind::kDpStdFed) {
        ParamVector clipped = clip_l2(delta, cfg_.clip_s);
        if (mal && adv_.omit_dp_noise) {
          for (double& x : clipped) x *= adv_.eta_adv;
        } else if (cfg_.sigma > 0.0) {
          Rng nrng = Rng::derive(cfg_.seed, {kStreamNoise, t, k});
          double scale = cfg_.clip_s * cfg_.sigma /
                         std::sqrt(double(k_size - cfg_.failures_r));
          for (double& x : clipped) x += nrng.normal(0.0, scale);
        }
        deltas[idx] = std::move(clipped);
        return;
      }

      deltas[idx] = std::move(delta);
    });

    // Stage 2: aggregation barrier, fixed iteration order.
    if (cfg_.protocol == ProtocolKind::kStdFed) {
      std::vector<double> sizes(k_size);
      for (std::size_t i = 0; i < k_size; ++i) {
        sizes[i] = shard_sizes_[selected[i]];
      }
      ParamVector agg = stdfed_aggregate(deltas, sizes);
      for (std::size_t i = 0; i < n; ++i) w_[i] += agg[i];
    } else if (cfg_.protocol == ProtocolKind::kSignFed) {
      Rng tie = Rng::derive(cfg_.seed, {kStreamServerTie, t});
      ParamVector agg = signfed_aggregate(signs, cfg_.gamma, tie);
      for (std::size_t i = 0; i < n; ++i) w_[i] += agg[i];
    } else if (cfg_.protocol == ProtocolKind::kDpSignFed) {
      uint64_t mask_seed = Rng::derive(cfg_.seed, {kStreamMask, t}).next_u64();
      auto masks = gen_masks(selected, n, mod_bits_, mask_seed);
      std::vector<MaskedIntVector> cipher(k_size);
      for (std::size_t i = 0; i < k_size; ++i) {
        cipher[i] = enc(ints[i], masks[i], mod_bits_);
      }
      std::vector<int64_t> noisy_sum =
          decode_sum(sum_masked(cipher, mod_bits_), mod_bits_);
      ParamVector as_real(n);
      for (std::size_t i = 0; i < n; ++i) as_real[i] = double(noisy_sum[i]);
      Rng tie = Rng::derive(cfg_.seed, {kStreamServerTie, t});
      SignVector agg = sign_of(as_real, tie);
      for (std::size_t i = 0; i < n; ++i) {
        w_[i] += cfg_.gamma * double(agg[i]);
      }
    } else {  // dp-stdfed: unweighted mean of noisy clipped updates
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t idx = 0; idx < k_size; ++idx) acc += deltas[idx][i];
        w_[i] += acc / double(k_size);
      }
    }
  }

  evaluate(rec);
  rec.cumulative_bits =
      bandwidth_bits(cfg_.protocol, cfg_.c_frac, t, n, mod_bits_);
  update_divergence(rec);
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  records_.push_back(rec);
  return rec;
}

void FederatedRun::evaluate(RoundRecord& rec) const {
  bool finite = true;
  for (double x : w_) {
    if (!std::isfinite(x)) finite = false;
  }
  rec.per_class_accuracy.assign(test_.num_classes, 0.0);
  if (!finite) {
    rec.accuracy = 0.0;
    if (!backdoor_test_.labels.empty()) rec.attack_accuracy = 0.0;
    return;
  }

  auto preds = predict(spec_, w_, test_.features, test_.size());
  std::vector<std::size_t> correct(test_.num_classes, 0), count(test_.num_classes, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++count[test_.labels[i]];
    if (preds[i] == test_.labels[i]) {
      ++hits;
      ++correct[test_.labels[i]];
    }
  }
  rec.accuracy = test_.size() ? double(hits) / double(test_.size()) : 0.0;
  for (std::size_t c = 0; c < test_.num_classes; ++c) {
    rec.per_class_accuracy[c] =
        count[c] ? double(correct[c]) / double(count[c]) : 0.0;
  }

  if (!backdoor_test_.labels.empty()) {
    auto bd = predict(spec_, w_, backdoor_test_.features,
                      backdoor_test_.size());
    std::size_t hit_target = 0;
    for (std::size_t p : bd) {
      if (p == adv_.target_class) ++hit_target;
    }
    rec.attack_accuracy = double(hit_target) / double(bd.size());
  }
}

void FederatedRun::update_divergence(RoundRecord& rec) {
  bool finite = true;
  for (double x : w_) {
    if (!std::isfinite(x)) finite = false;
  }
  if (!finite) {
    diverged_ = true;
  } else {
    Batch eval;
    eval.input_dim = test_.input_dim;
    eval.features = test_.features;
    eval.labels = test_.labels;
    double loss = forward_loss(spec_, w_, eval);
    if (!std::isfinite(loss) || loss > 10.0 * initial_loss_) {
      if (++bad_loss_streak_ >= 10) diverged_ = true;
    } else {
      bad_loss_streak_ = 0;
    }
  }
  rec.diverged = diverged_;
}

std::vector<RoundRecord> FederatedRun::run_all() {
  for (std::size_t t = 1; t <= cfg_.t_cl; ++t) run_round(t);
  return records_;
}

ExperimentSummary FederatedRun::summary() const {
  ExperimentSummary s;
  s.diverged = diverged_;
  for (const auto& r : records_) {
    if (r.accuracy > s.best_accuracy) {
      s.best_accuracy = r.accuracy;
      s.best_round = r.t;
      s.bandwidth_bits_at_best = r.cumulative_bits;
    }
  }
  if ((cfg_.protocol == ProtocolKind::kDpSignFed ||
       cfg_.protocol == ProtocolKind::kDpStdFed) &&
      cfg_.sigma > 0.0 && !records_.empty()) {
    Mechanism mech = cfg_.protocol == ProtocolKind::kDpSignFed
                         ? Mechanism::kDiscreteDistributed
                         : Mechanism::kContinuous;
    PrivacyAccountant acct(mech, cfg_.c_frac);
    double xi_total = std::sqrt(double(spec_.param_count())) * cfg_.sigma;
    auto alpha = acct.round_alpha(cfg_.sigma, xi_total, cfg_.nu);
    s.epsilon = acct.epsilon(alpha, records_.size(), cfg_.delta);
  }
  return s;
}

std::vector<RoundRecord> run_experiment(FederatedRun& run) {
  return run.run_all();
}

}  // namespace fedlab
