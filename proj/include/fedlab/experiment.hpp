#pragma once

#include <string>
#include <vector>

#include "fedlab/protocols.hpp"

namespace fedlab {

// Declarative description of one federated run. Parsed from versioned JSON;
// (config, seed) fully determines the outputs.
struct ExperimentConfig {
  // dataset
  std::string dataset_kind = "synthetic";  // synthetic | mnist
  std::string mnist_path;
  std::size_t synth_classes = 2;
  std::size_t synth_dim = 10;
  std::size_t synth_per_class = 1000;
  double synth_separation = 4.0;
  double synth_test_fraction = 0.2;

  // model
  ModelSpec model;

  // partitioning
  PartitionMode partition_mode = PartitionMode::kIid;
  std::size_t per_client = 0;  // 0 = divide evenly

  RoundConfig round;
  AdversaryConfig adversary;

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_string(const std::string& text);
  std::string to_json() const;  // resolved config, for the run manifest
};

struct ExperimentOutput {
  std::vector<RoundRecord> records;
  ExperimentSummary summary;
  unsigned dp_modulus_bits = 0;
};

// Builds data, partitions, applies backdoor arrangements, and runs T_cl
// rounds.
ExperimentOutput execute_experiment(const ExperimentConfig& cfg);

// Writes metrics.csv, summary.json and manifest.json into out_dir.
void write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out,
                   const std::string& out_dir);

// CSV with 17 significant digits so replays diff byte-exact.
std::string metrics_csv(const std::vector<RoundRecord>& records,
                        std::size_t num_classes);

}  // namespace fedlab
