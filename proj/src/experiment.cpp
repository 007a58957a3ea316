#include "fedlab/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace fedlab {
namespace {

using nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

const json& require(const json& j, const std::string& key,
                    const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) field_error(path + key, "missing");
  return *it;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  int version = get_or(j, "schema_version", 1);
  if (version != 1) field_error("schema_version", "unsupported version");

  cfg.round.protocol =
      protocol_from_string(require(j, "protocol", "").get<std::string>());
  cfg.round.seed = get_or<uint64_t>(j, "seed", 0);
  cfg.round.threads = get_or<unsigned>(j, "threads", 1);

  const json& ds = require(j, "dataset", "");
  cfg.dataset_kind = require(ds, "kind", "dataset.").get<std::string>();
  if (cfg.dataset_kind == "mnist") {
    cfg.mnist_path = require(ds, "path", "dataset.").get<std::string>();
  } else if (cfg.dataset_kind == "synthetic") {
    cfg.synth_classes = get_or<std::size_t>(ds, "classes", 2);
    cfg.synth_dim = get_or<std::size_t>(ds, "dim", 10);
    cfg.synth_per_class = get_or<std::size_t>(ds, "per_class", 1000);
    cfg.synth_separation = get_or<double>(ds, "separation", 4.0);
    cfg.synth_test_fraction = get_or<double>(ds, "test_fraction", 0.2);
  } else {
    field_error("dataset.kind", "must be 'synthetic' or 'mnist'");
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    std::string kind = get_or<std::string>(m, "kind", "logistic-regression");
    if (kind == "logistic-regression") {
      cfg.model.kind = ModelKind::kLogisticRegression;
    } else if (kind == "mlp-1-hidden") {
      cfg.model.kind = ModelKind::kMlp1Hidden;
      cfg.model.hidden_dim = get_or<std::size_t>(m, "hidden_dim", 32);
    } else {
      field_error("model.kind", "must be 'logistic-regression' or 'mlp-1-hidden'");
    }
  }

  if (j.contains("partition")) {
    const json& p = j["partition"];
    std::string mode = get_or<std::string>(p, "mode", "iid");
    if (mode == "iid") {
      cfg.partition_mode = PartitionMode::kIid;
    } else if (mode == "label-sorted-shards") {
      cfg.partition_mode = PartitionMode::kLabelSortedShards;
    } else {
      field_error("partition.mode", "must be 'iid' or 'label-sorted-shards'");
    }
    cfg.per_client = get_or<std::size_t>(p, "per_client", 0);
  }

  const json& cl = require(j, "clients", "");
  cfg.round.n_clients = require(cl, "N", "clients.").get<std::size_t>();
  cfg.round.c_frac = require(cl, "C", "clients.").get<double>();

  const json& r = require(j, "rounds", "");
  cfg.round.t_cl = require(r, "T_cl", "rounds.").get<std::size_t>();
  cfg.round.t_gd = get_or<std::size_t>(r, "T_gd", 1);
  cfg.round.batch_size = get_or<std::size_t>(r, "batch_size", 10);
  cfg.round.eta = get_or<double>(r, "eta", 0.215);
  cfg.round.gamma = get_or<double>(r, "gamma", 0.001);

  if (j.contains("privacy")) {
    const json& pv = j["privacy"];
    cfg.round.sigma = get_or<double>(pv, "sigma", 0.0);
    cfg.round.clip_s = get_or<double>(pv, "clip_s", 1.0);
    cfg.round.clip_calibrate = get_or<bool>(pv, "clip_calibrate", false);
    cfg.round.nu = get_or<double>(pv, "nu", 1e-4);
    cfg.round.failures_r = get_or<std::size_t>(pv, "failures_r", 0);
    cfg.round.delta = get_or<double>(pv, "delta", 1e-5);
  }

  if (j.contains("adversary")) {
    const json& a = j["adversary"];
    cfg.adversary.kind =
        attack_from_string(get_or<std::string>(a, "kind", "none"));
    cfg.adversary.malicious_fraction = get_or<double>(a, "fraction", 0.0);
    cfg.adversary.sigma_adv = get_or<double>(a, "sigma_adv", 200.0);
    cfg.adversary.eta_adv = get_or<double>(a, "eta_adv", 1.0);
    cfg.adversary.source_class = get_or<std::size_t>(a, "source_class", 0);
    cfg.adversary.target_class = get_or<std::size_t>(a, "target_class", 1);
    cfg.adversary.omit_dp_noise = get_or<bool>(a, "omit_dp_noise", true);
    cfg.adversary.per_round_fraction =
        get_or<bool>(a, "per_round_fraction", false);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json_string(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["protocol"] = protocol_to_string(round.protocol);
  j["seed"] = round.seed;
  j["threads"] = round.threads;
  if (dataset_kind == "mnist") {
    j["dataset"] = {{"kind", "mnist"}, {"path", mnist_path}};
  } else {
    j["dataset"] = {{"kind", "synthetic"},
                    {"classes", synth_classes},
                    {"dim", synth_dim},
                    {"per_class", synth_per_class},
                    {"separation", synth_separation},
                    {"test_fraction", synth_test_fraction}};
  }
  j["model"] = {{"kind", model.kind == ModelKind::kLogisticRegression
                             ? "logistic-regression"
                             : "mlp-1-hidden"}};
  if (model.kind == ModelKind::kMlp1Hidden) {
    j["model"]["hidden_dim"] = model.hidden_dim;
  }
  j["partition"] = {{"mode", partition_mode == PartitionMode::kIid
                                 ? "iid"
                                 : "label-sorted-shards"},
                    {"per_client", per_client}};
  j["clients"] = {{"N", round.n_clients}, {"C", round.c_frac}};
  j["rounds"] = {{"T_cl", round.t_cl},
                 {"T_gd", round.t_gd},
                 {"batch_size", round.batch_size},
                 {"eta", round.eta},
                 {"gamma", round.gamma}};
  j["privacy"] = {{"sigma", round.sigma},
                  {"clip_s", round.clip_s},
                  {"clip_calibrate", round.clip_calibrate},
                  {"nu", round.nu},
                  {"failures_r", round.failures_r},
                  {"delta", round.delta}};
  j["adversary"] = {{"kind", attack_to_string(adversary.kind)},
                    {"fraction", adversary.malicious_fraction},
                    {"sigma_adv", adversary.sigma_adv},
                    {"eta_adv", adversary.eta_adv},
                    {"source_class", adversary.source_class},
                    {"target_class", adversary.target_class},
                    {"omit_dp_noise", adversary.omit_dp_noise},
                    {"per_round_fraction", adversary.per_round_fraction}};
  return j.dump(2);
}

ExperimentOutput execute_experiment(const ExperimentConfig& cfg) {
  Dataset train, test;
  if (cfg.dataset_kind == "mnist") {
    MnistData m = load_mnist(cfg.mnist_path);
    train = std::move(m.train);
    test = std::move(m.test);
  } else {
    Dataset all = make_synthetic(cfg.synth_classes, cfg.synth_dim,
                                 cfg.synth_per_class, cfg.synth_separation,
                                 cfg.round.seed);
    // Deterministic train/test split.
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(cfg.round.seed, {kStreamData, 1});
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::size_t j = rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }
    std::size_t n_test =
        std::size_t(cfg.synth_test_fraction * double(all.size()));
    auto take = [&](std::size_t begin, std::size_t count) {
      Dataset d;
      d.input_dim = all.input_dim;
      d.num_classes = all.num_classes;
      d.name = all.name;
      for (std::size_t i = begin; i < begin + count; ++i) {
        const double* x = all.features.data() + order[i] * all.input_dim;
        d.features.insert(d.features.end(), x, x + all.input_dim);
        d.labels.push_back(all.labels[order[i]]);
      }
      return d;
    };
    test = take(0, n_test);
    train = take(n_test, all.size() - n_test);
  }

  ModelSpec spec = cfg.model;
  spec.input_dim = train.input_dim;
  spec.num_classes = train.num_classes;

  AdversaryConfig adv = cfg.adversary;
  std::vector<std::size_t> malicious =
      adv.kind != AttackKind::kNone && !adv.per_round_fraction
          ? choose_malicious(cfg.round.seed, cfg.round.n_clients,
                             adv.malicious_fraction)
          : std::vector<std::size_t>{};

  LocalData backdoor_test;
  backdoor_test.input_dim = test.input_dim;
  std::vector<LocalData> shards;

  if (adv.kind == AttackKind::kOutBackdoor) {
    // Honest pool loses the excluded class; its samples (relabeled to the
    // target) go to the malicious clients.
    OutBackdoorSplit split =
        build_out_backdoor(train, adv.source_class, adv.target_class);
    std::size_t per_client =
        cfg.per_client ? cfg.per_client
                       : split.honest.size() / cfg.round.n_clients;
    Partition part = partition(split.honest, cfg.round.n_clients, per_client,
                               cfg.partition_mode, cfg.round.seed);
    shards.reserve(cfg.round.n_clients);
    for (std::size_t k = 0; k < cfg.round.n_clients; ++k) {
      shards.push_back(split.honest.subset(part.client_indices[k]));
    }
    // Deal the poisoned pool round-robin across malicious clients.
    for (std::size_t i = 0; i < split.malicious_pool.size(); ++i) {
      if (malicious.empty()) break;
      std::size_t k = malicious[i % malicious.size()];
      const double* x =
          split.malicious_pool.features.data() + i * train.input_dim;
      shards[k].features.insert(shards[k].features.end(), x,
                                x + train.input_dim);
      shards[k].labels.push_back(split.malicious_pool.labels[i]);
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (test.labels[i] != adv.source_class) continue;
      const double* x = test.features.data() + i * test.input_dim;
      backdoor_test.features.insert(backdoor_test.features.end(), x,
                                    x + test.input_dim);
      backdoor_test.labels.push_back(test.labels[i]);
    }
  } else {
    std::size_t per_client =
        cfg.per_client ? cfg.per_client : train.size() / cfg.round.n_clients;
    Partition part = partition(train, cfg.round.n_clients, per_client,
                               cfg.partition_mode, cfg.round.seed);
    shards.reserve(cfg.round.n_clients);
    for (std::size_t k = 0; k < cfg.round.n_clients; ++k) {
      shards.push_back(train.subset(part.client_indices[k]));
    }
    if (adv.kind == AttackKind::kInBackdoor) {
      for (std::size_t k : malicious) {
        relabel_in_backdoor(shards[k], adv.source_class, adv.target_class);
      }
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.labels[i] != adv.source_class) continue;
        const double* x = test.features.data() + i * test.input_dim;
        backdoor_test.features.insert(backdoor_test.features.end(), x,
                                      x + test.input_dim);
        backdoor_test.labels.push_back(test.labels[i]);
      }
    }
  }

  FederatedRun run(spec, cfg.round, adv, std::move(shards), std::move(test),
                   std::move(backdoor_test));
  ExperimentOutput out;
  out.records = run.run_all();
  if (!out.records.empty()) out.summary = run.summary();
  out.dp_modulus_bits = run.dp_modulus_bits();
  return out;
}

std::string metrics_csv(const std::vector<RoundRecord>& records,
                        std::size_t num_classes) {
  std::ostringstream os;
  os << "t,accuracy";
  for (std::size_t c = 0; c < num_classes; ++c) os << ",acc_class_" << c;
  os << ",attack_accuracy,cumulative_bits,diverged\n";
  for (const auto& r : records) {
    os << r.t << ',' << fmt17(r.accuracy);
    for (double a : r.per_class_accuracy) os << ',' << fmt17(a);
    os << ',';
    if (r.attack_accuracy) os << fmt17(*r.attack_accuracy);
    os << ',' << fmt17(r.cumulative_bits) << ',' << (r.diverged ? 1 : 0)
       << '\n';
  }
  return os.str();
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out,
                   const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::size_t classes =
      out.records.empty() ? 0 : out.records.front().per_class_accuracy.size();
  {
    std::ofstream f(out_dir + "/metrics.csv", std::ios::binary);
    f << metrics_csv(out.records, classes);
  }
  {
    json s;
    if (!out.records.empty()) {
      s["best_accuracy"] = out.summary.best_accuracy;
      s["best_round"] = out.summary.best_round;
      s["bandwidth_bits_at_best"] = out.summary.bandwidth_bits_at_best;
      s["bandwidth_mb_at_best"] =
          bits_to_mb(out.summary.bandwidth_bits_at_best);
      s["diverged"] = out.summary.diverged;
      if (out.summary.epsilon) {
        s["epsilon"] = *out.summary.epsilon;
      } else {
        s["epsilon"] = nullptr;
      }
      if (out.dp_modulus_bits) s["dp_modulus_bits"] = out.dp_modulus_bits;
    }
    std::ofstream f(out_dir + "/summary.json", std::ios::binary);
    f << s.dump(2) << '\n';
  }
  {
    std::ofstream f(out_dir + "/manifest.json", std::ios::binary);
    f << cfg.to_json() << '\n';
  }
}

}  // namespace fedlab
