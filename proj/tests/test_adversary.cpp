#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedlab/adversary.hpp"
#include "fedlab/data.hpp"
#include "testutil.hpp"

using namespace fedlab;

namespace {

LocalData two_blob_data(std::size_t rows, uint64_t seed) {
  Dataset ds = make_synthetic(2, 3, rows / 2, 4.0, seed);
  LocalData d;
  d.input_dim = ds.input_dim;
  d.features = ds.features;
  d.labels = ds.labels;
  return d;
}

}  // namespace

TEST_CASE("attack names round-trip") {
  for (AttackKind k :
       {AttackKind::kNone, AttackKind::kRandomUpdate, AttackKind::kGradientAscent,
        AttackKind::kSignInversion, AttackKind::kInBackdoor,
        AttackKind::kOutBackdoor}) {
    CHECK(attack_from_string(attack_to_string(k)) == k);
  }
  CHECK_THROWS_AS(attack_from_string("mega-attack"), ConfigError);
}

TEST_CASE("random update has the configured scale and zero mean") {
  Rng rng(1);
  const std::size_t n = 1000000;
  ParamVector v = random_update(n, 200.0, rng);
  double sum = 0.0, sumsq = 0.0;
  for (double x : v) {
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / double(n);
  double sd = std::sqrt(sumsq / double(n) - mean * mean);
  CHECK(std::fabs(mean) < 3.0 * 200.0 / std::sqrt(double(n)));
  CHECK(std::fabs(sd - 200.0) / 200.0 < 0.01);
  CHECK_THROWS_AS(random_update(4, 0.0, rng), ConfigError);
}

TEST_CASE("two attackers with distinct streams produce distinct vectors") {
  Rng r1 = Rng::derive(5, {1, 1});
  Rng r2 = Rng::derive(5, {1, 2});
  ParamVector a = random_update(16, 200.0, r1);
  ParamVector b = random_update(16, 200.0, r2);
  CHECK(a != b);
}

TEST_CASE("one ascent step is minus one descent step on the same batch") {
  ModelSpec spec{ModelKind::kLogisticRegression, 3, 0, 2};
  LocalData data = two_blob_data(10, 2);
  ParamVector w(spec.param_count(), 0.1);
  Rng r1(3), r2(3);  // identical batch schedules
  ParamVector up = gradient_ascent_update(spec, w, data, 1, 10, 0.215, 1.0, r1);
  ParamVector down = local_sgd(spec, w, data, 1, 10, 0.215, r2);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(up[i] == doctest::Approx(-(down[i] - w[i])).epsilon(1e-12));
  }
}

TEST_CASE("gradient ascent increases the pooled loss") {
  ModelSpec spec{ModelKind::kLogisticRegression, 3, 0, 2};
  LocalData data = two_blob_data(40, 4);
  // Start from a partially trained point so there is loss to gain.
  ParamVector w(spec.param_count(), 0.0);
  Rng pre(5);
  w = local_sgd(spec, w, data, 20, 10, 0.215, pre);
  Batch full{data.features, data.labels, 3};
  double before = forward_loss(spec, w, full);
  Rng rng(6);
  ParamVector delta = gradient_ascent_update(spec, w, data, 10, 10, 0.215, 1.0, rng);
  ParamVector after = w;
  for (std::size_t i = 0; i < w.size(); ++i) after[i] += delta[i];
  CHECK(forward_loss(spec, after, full) > before);
  LocalData empty;
  empty.input_dim = 3;
  CHECK_THROWS_AS(gradient_ascent_update(spec, w, empty, 1, 10, 0.215, 1.0, rng),
                  ConfigError);
}

TEST_CASE("boosting scales the transmitted ascent delta linearly") {
  ModelSpec spec{ModelKind::kLogisticRegression, 3, 0, 2};
  LocalData data = two_blob_data(20, 7);
  ParamVector w(spec.param_count(), 0.05);
  Rng r1(8), r2(8);
  ParamVector base = gradient_ascent_update(spec, w, data, 3, 5, 0.215, 1.0, r1);
  ParamVector boosted = gradient_ascent_update(spec, w, data, 3, 5, 0.215, 10.0, r2);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(boosted[i] == doctest::Approx(10.0 * base[i]).epsilon(1e-12));
  }
}

TEST_CASE("sign inversion negates and is an involution") {
  SignVector s = {+1, -1, -1, +1};
  SignVector inv = sign_inversion(s);
  CHECK(inv == SignVector{-1, +1, +1, -1});
  CHECK(sign_inversion(inv) == s);
}

TEST_CASE("sign inversion equals gradient ascent at one local step") {
  // With T_gd = 1 and the same batch, the ascent delta is the exact negation
  // of the honest delta, so its signs are the inverted honest signs.
  ModelSpec spec{ModelKind::kLogisticRegression, 3, 0, 2};
  LocalData data = two_blob_data(10, 9);
  ParamVector w(spec.param_count(), 0.2);
  Rng r1(10), r2(10);
  ParamVector honest_after = local_sgd(spec, w, data, 1, 10, 0.215, r1);
  ParamVector ascent = gradient_ascent_update(spec, w, data, 1, 10, 0.215, 1.0, r2);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double honest_delta = honest_after[i] - w[i];
    if (honest_delta == 0.0) continue;
    int8_t honest_sign = honest_delta > 0 ? int8_t(1) : int8_t(-1);
    int8_t ascent_sign = ascent[i] > 0 ? int8_t(1) : int8_t(-1);
    CHECK(ascent_sign == -honest_sign);
  }
}

TEST_CASE("backdoor update boosts linearly and leaves signs unchanged") {
  ModelSpec spec{ModelKind::kLogisticRegression, 3, 0, 2};
  LocalData poisoned = two_blob_data(20, 11);
  relabel_in_backdoor(poisoned, 0, 1);
  ParamVector w(spec.param_count(), 0.0);
  Rng r1(12), r2(12), r3(12);
  ParamVector d1 = backdoor_update(spec, w, poisoned, 5, 10, 0.215, 1.0, r1);
  ParamVector d7 = backdoor_update(spec, w, poisoned, 5, 10, 0.215, 7.0, r2);
  ParamVector d5000 = backdoor_update(spec, w, poisoned, 5, 10, 0.215, 5000.0, r3);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(d7[i] == doctest::Approx(7.0 * d1[i]).epsilon(1e-12));
    CHECK(std::signbit(d5000[i]) == std::signbit(d1[i]));
  }
}

TEST_CASE("a 5000x boosted sign dominates 100 honest contributions") {
  // |boosted entry| = 5000 > |K| = 100, so one omitter outweighs every
  // honest client in the decoded integer sum.
  double boosted = 5000.0 * 1.0;
  CHECK(std::fabs(boosted) > 100.0);
}
