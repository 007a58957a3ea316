#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedlab/model.hpp"
#include "fedlab/rng.hpp"

namespace fedlab {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<double> features;  // row-major rows x input_dim
  std::vector<std::size_t> labels;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }

  LocalData subset(const std::vector<std::size_t>& indices) const;
};

struct MnistData {
  Dataset train;
  Dataset test;
};

// Reads the four standard IDX files (train/t10k images+labels) from `path`.
// Pixels are scaled into [0, 1].
MnistData load_mnist(const std::string& path);

// Single IDX pair loader, exposed for tests that synthesize files.
Dataset load_idx_pair(const std::string& image_path,
                      const std::string& label_path, const std::string& name);

// Gaussian blobs: class c centered at separation * e_{c mod dim}, unit
// covariance.
Dataset make_synthetic(std::size_t num_classes, std::size_t dim,
                       std::size_t per_class, double separation,
                       uint64_t seed);

enum class PartitionMode { kIid, kLabelSortedShards };

struct Partition {
  std::vector<std::vector<std::size_t>> client_indices;
};

// IID: uniform without replacement. Label-sorted shards: sort by label, cut
// into 2N shards, deal two shards per client.
Partition partition(const Dataset& dataset, std::size_t n_clients,
                    std::size_t per_client, PartitionMode mode, uint64_t seed);

// In-backdoor relabeling: every source_class sample in the shard gets
// target_class; features untouched.
void relabel_in_backdoor(LocalData& shard, std::size_t source_class,
                         std::size_t target_class);

struct OutBackdoorSplit {
  Dataset honest;           // excluded_class removed
  LocalData malicious_pool; // excluded_class samples, relabeled to target
};

// Out-backdoor: honest data loses excluded_class entirely; the malicious pool
// carries those samples labeled as target_class.
OutBackdoorSplit build_out_backdoor(const Dataset& dataset,
                                    std::size_t excluded_class,
                                    std::size_t target_class);

}  // namespace fedlab
