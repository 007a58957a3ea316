// fedlab command-line front end.
//
// Verbs:
//   run        — execute one experiment from a JSON config, write metrics.csv,
//                summary.json and manifest.json into the output directory
//   accountant — privacy accountant: `epsilon` from sigma, or `sigma`
//                calibrated to a target epsilon
//   bounds     — analytic convergence-bound and bandwidth calculators
//
// Default output directory comes from FEDLAB_OUT_DIR (falls back to ".").

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fedlab/dp.hpp"
#include "fedlab/experiment.hpp"
#include "fedlab/secure_agg.hpp"
#include "fedlab/theory.hpp"

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("FEDLAB_OUT_DIR");
  return env ? env : ".";
}

fedlab::Mechanism mechanism_from_string(const std::string& s) {
  if (s == "continuous") return fedlab::Mechanism::kContinuous;
  if (s == "discrete") return fedlab::Mechanism::kDiscrete;
  if (s == "discrete-distributed") {
    return fedlab::Mechanism::kDiscreteDistributed;
  }
  throw CLI::ValidationError(
      "mechanism",
      "must be continuous, discrete or discrete-distributed (got " + s + ")");
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  fedlab::ExperimentConfig cfg =
      fedlab::ExperimentConfig::from_json_file(config_path);
  fedlab::ExperimentOutput out = fedlab::execute_experiment(cfg);
  fedlab::write_outputs(cfg, out, out_dir);
  std::printf("rounds: %zu\n", out.records.size());
  std::printf("best_accuracy: %.6f (round %zu)\n", out.summary.best_accuracy,
              out.summary.best_round);
  std::printf("bandwidth_mb_at_best: %.6f\n",
              fedlab::bits_to_mb(out.summary.bandwidth_bits_at_best));
  if (out.summary.epsilon) {
    std::printf("epsilon: %.6f\n", *out.summary.epsilon);
  }
  if (out.dp_modulus_bits) {
    std::printf("modulus_bits: %u\n", out.dp_modulus_bits);
  }
  std::printf("diverged: %s\n", out.summary.diverged ? "true" : "false");
  return 0;
}

struct AccountantFlags {
  double sigma = 1.0;
  double epsilon = 1.0;
  double delta = 1e-5;
  double c_frac = 1.0 / 60.0;
  std::size_t t_rounds = 200;
  std::size_t n = 0;
  std::size_t k_size = 0;
  double nu = 1e-4;
  std::string mechanism = "continuous";
};

// Distributed/discrete corrections need the total per-sum scale
// xi_total = sqrt(n) * sigma; 0 when n is not given (plain mechanism).
double xi_total_of(const AccountantFlags& f, double sigma) {
  return f.n ? std::sqrt(double(f.n)) * sigma : sigma;
}

int cmd_accountant_epsilon(const AccountantFlags& f) {
  fedlab::Mechanism mech = mechanism_from_string(f.mechanism);
  fedlab::PrivacyAccountant acct(mech, f.c_frac);
  std::vector<double> alpha =
      acct.round_alpha(f.sigma, xi_total_of(f, f.sigma), f.nu);
  int best = 0;
  double eps = acct.epsilon(alpha, f.t_rounds, f.delta, &best);
  std::printf("mechanism: %s\n", f.mechanism.c_str());
  std::printf("sigma: %.6g  delta: %.3g  C: %.6g  T: %zu\n", f.sigma, f.delta,
              f.c_frac, f.t_rounds);
  std::printf("lambda  T*alpha(lambda)  (T*alpha - log(delta))/lambda\n");
  const auto& grid = acct.lambda_grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double comp = double(f.t_rounds) * alpha[i];
    double eps_l = (comp - std::log(f.delta)) / grid[i];
    std::printf("%6d  %15.8g  %15.8g%s\n", grid[i], comp, eps_l,
                grid[i] == best ? "  <-- minimizer" : "");
  }
  std::printf("epsilon: %.8g (lambda = %d)\n", eps, best);
  return 0;
}

int cmd_accountant_sigma(const AccountantFlags& f) {
  fedlab::Mechanism mech = mechanism_from_string(f.mechanism);
  fedlab::CalibrationResult res = fedlab::calibrate_sigma(
      mech, f.epsilon, f.delta, f.c_frac, f.t_rounds, f.n, f.k_size, f.nu);
  std::printf("mechanism: %s\n", f.mechanism.c_str());
  std::printf("target_epsilon: %.6g  delta: %.3g  C: %.6g  T: %zu\n",
              f.epsilon, f.delta, f.c_frac, f.t_rounds);
  std::printf("sigma: %.8g\n", res.sigma);
  std::printf("achieved_epsilon: %.8g\n", res.epsilon);
  return 0;
}

struct BoundsFlags {
  double tau_l1 = 1.0;
  double smoothness_l1 = 1.0;
  double f0_minus_fstar = 1.0;
  std::size_t t_cl = 100;
  double c_frac = 0.1;
  std::size_t n_clients = 1000;
  double alpha_frac = 0.0;
  std::size_t n_params = 0;
  double sigma = 0.0;
  unsigned mod_bits = 0;
  std::string protocol = "signfed";
};

int cmd_bounds(const BoundsFlags& f) {
  fedlab::BoundParams p;
  p.tau_l1 = f.tau_l1;
  p.smoothness_l1 = f.smoothness_l1;
  p.f0_minus_fstar = f.f0_minus_fstar;
  p.t_cl = f.t_cl;
  p.c_frac = f.c_frac;
  p.n_clients = f.n_clients;
  p.alpha_frac = f.alpha_frac;
  p.n_params = f.n_params;
  p.sigma = f.sigma;
  std::printf("gamma: %.8g\n", fedlab::bound_gamma(p));
  std::printf("bound_random_attack: %.8g\n", fedlab::bound_random_attack(p));
  if (f.n_params) {
    fedlab::DpBound dp = fedlab::bound_dp(p);
    std::printf("bound_dp: %.8g (privacy cost %.8g)\n", dp.total,
                dp.privacy_cost);
  }
  if (f.alpha_frac < 0.5) {
    std::printf("rate_gradient_ascent: %.8g\n",
                fedlab::rate_gradient_ascent(p));
  }
  if (f.n_params) {
    fedlab::ProtocolKind proto = fedlab::protocol_from_string(f.protocol);
    double bits = fedlab::bandwidth_bits(proto, f.c_frac, f.t_cl, f.n_params,
                                         f.mod_bits);
    std::printf("bandwidth after %zu rounds: %.8g bits (%.6f MB)\n", f.t_cl,
                bits, fedlab::bits_to_mb(bits));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning protocol laboratory"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string out_dir = default_out_dir();
  CLI::App* run = app.add_subcommand("run", "Execute one experiment");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("-o,--out", out_dir,
                  "Output directory (default $FEDLAB_OUT_DIR or '.')");

  // accountant
  AccountantFlags af;
  CLI::App* acct = app.add_subcommand("accountant", "Privacy accountant");
  acct->require_subcommand(1);
  CLI::App* eps = acct->add_subcommand("epsilon", "Epsilon from sigma");
  eps->add_option("--sigma", af.sigma, "Noise multiplier")->required();
  CLI::App* sig = acct->add_subcommand("sigma", "Calibrate sigma to epsilon");
  sig->add_option("--epsilon", af.epsilon, "Target epsilon")->required();
  for (CLI::App* sub : {eps, sig}) {
    sub->add_option("--delta", af.delta, "Failure probability (default 1e-5)");
    sub->add_option("--C", af.c_frac, "Sampling fraction q = C");
    sub->add_option("--T", af.t_rounds, "Composed rounds");
    sub->add_option("--n", af.n, "Model parameter count (distributed)");
    sub->add_option("--K", af.k_size, "Clients per round (distributed)");
    sub->add_option("--nu", af.nu, "Approximation slack");
    sub->add_option("--mechanism", af.mechanism,
                    "continuous | discrete | discrete-distributed");
  }

  // bounds
  BoundsFlags bf;
  CLI::App* bounds = app.add_subcommand("bounds", "Convergence-bound tables");
  bounds->add_option("--tau-l1", bf.tau_l1, "||tau||_1");
  bounds->add_option("--smoothness-l1", bf.smoothness_l1, "||L||_1");
  bounds->add_option("--gap", bf.f0_minus_fstar, "f(w_0) - f*");
  bounds->add_option("--T", bf.t_cl, "Rounds");
  bounds->add_option("--C", bf.c_frac, "Sampling fraction");
  bounds->add_option("--N", bf.n_clients, "Client count");
  bounds->add_option("--alpha", bf.alpha_frac, "Malicious fraction");
  bounds->add_option("--n", bf.n_params, "Model parameter count");
  bounds->add_option("--sigma", bf.sigma, "Noise multiplier");
  bounds->add_option("--mod-bits", bf.mod_bits, "Ring bits (dp-signfed)");
  bounds->add_option("--protocol", bf.protocol,
                     "stdfed | signfed | dp-signfed | dp-stdfed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*acct) {
      if (*eps) return cmd_accountant_epsilon(af);
      return cmd_accountant_sigma(af);
    }
    return cmd_bounds(bf);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
