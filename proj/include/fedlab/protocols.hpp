#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedlab/adversary.hpp"
#include "fedlab/data.hpp"
#include "fedlab/dp.hpp"
#include "fedlab/model.hpp"
#include "fedlab/theory.hpp"

namespace fedlab {

struct RoundConfig {
  ProtocolKind protocol = ProtocolKind::kSignFed;
  std::size_t n_clients = 0;   // N
  double c_frac = 0.1;         // C
  std::size_t t_cl = 0;
  std::size_t t_gd = 1;
  std::size_t batch_size = 10;
  double eta = 0.215;
  double gamma = 0.001;        // sign protocols
  double clip_s = 1.0;         // dp-stdfed sensitivity
  bool clip_calibrate = false; // derive S as the median client norm at w0
  double sigma = 0.0;          // dp protocols noise multiplier
  double nu = 1e-4;
  std::size_t failures_r = 0;  // noise-share inflation
  double delta = 1e-5;
  uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct RoundRecord {
  std::size_t t = 0;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::optional<double> attack_accuracy;
  double cumulative_bits = 0.0;
  double wall_time_s = 0.0;
  bool diverged = false;
};

struct ExperimentSummary {
  double best_accuracy = 0.0;
  std::size_t best_round = 0;
  double bandwidth_bits_at_best = 0.0;
  std::optional<double> epsilon;
  bool diverged = false;
};

// |K| = round(C*N), minimum 1; uniform without replacement.
std::vector<std::size_t> sample_clients(std::size_t n, double c_frac,
                                        Rng& rng);

// The fixed malicious subset for a run: round(fraction*N) ids, sorted.
// Shared by the orchestrator and by data poisoning so both agree.
std::vector<std::size_t> choose_malicious(uint64_t seed, std::size_t n,
                                          double fraction);

// Coordinatewise sign; zeros resolved to +-1 uniformly via rng.
SignVector sign_of(const ParamVector& v, Rng& rng);

// Weighted sum: sum_k (|D_k| / sum_j |D_j|) * delta_k.
ParamVector stdfed_aggregate(const std::vector<ParamVector>& updates,
                             const std::vector<double>& sizes);

// gamma * sign(sum of signs) per coordinate, ties broken via rng.
ParamVector signfed_aggregate(const std::vector<SignVector>& sign_vectors,
                              double gamma, Rng& rng);

// Round-driven orchestrator over one client population. Client shards are
// fixed at construction; attacks only replace malicious clients' outbound
// messages (the honest path never branches on the adversary).
class FederatedRun {
 public:
  FederatedRun(ModelSpec spec, RoundConfig cfg, AdversaryConfig adv,
               std::vector<LocalData> shards, Dataset test_set,
               LocalData backdoor_test = {});

  RoundRecord run_round(std::size_t t);
  std::vector<RoundRecord> run_all();

  ExperimentSummary summary() const;
  const ParamVector& weights() const { return w_; }
  const std::vector<std::size_t>& malicious_clients() const {
    return malicious_;
  }
  bool diverged() const { return diverged_; }
  unsigned dp_modulus_bits() const { return mod_bits_; }
  double clip_s() const { return cfg_.clip_s; }

 private:
  bool is_malicious(std::size_t client,
                    const std::vector<std::size_t>& round_malicious) const;
  ParamVector honest_delta(std::size_t client, std::size_t t) const;
  void evaluate(RoundRecord& rec) const;
  void update_divergence(RoundRecord& rec);
  double calibrate_median_norm() const;

  ModelSpec spec_;
  RoundConfig cfg_;
  AdversaryConfig adv_;
  std::vector<LocalData> shards_;
  std::vector<double> shard_sizes_;
  Dataset test_;
  LocalData backdoor_test_;
  LocalData ascent_pool_;  // union of malicious shards (gradient ascent)

  ParamVector w_;
  std::vector<std::size_t> malicious_;  // sorted fixed malicious set
  std::vector<RoundRecord> records_;
  double initial_loss_ = 0.0;
  int bad_loss_streak_ = 0;
  bool diverged_ = false;
  unsigned mod_bits_ = 0;
};

// Convenience wrapper: builds the run and executes all T_cl rounds.
std::vector<RoundRecord> run_experiment(FederatedRun& run);

}  // namespace fedlab
