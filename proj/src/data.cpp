#include "fedlab/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace fedlab {
namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

uint32_t read_be32(std::ifstream& f, const std::string& file) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("truncated file: " + file);
  }
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) |
         (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

}  // namespace

LocalData Dataset::subset(const std::vector<std::size_t>& indices) const {
  LocalData out;
  out.input_dim = input_dim;
  out.features.resize(indices.size() * input_dim);
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(features.data() + indices[i] * input_dim, input_dim,
                out.features.data() + i * input_dim);
    out.labels[i] = labels[indices[i]];
  }
  return out;
}

Dataset load_idx_pair(const std::string& image_path,
                      const std::string& label_path, const std::string& name) {
  std::ifstream imgs(image_path, std::ios::binary);
  if (!imgs) throw FormatError("cannot open " + image_path);
  uint32_t magic = read_be32(imgs, image_path);
  if (magic != kImageMagic) {
    throw FormatError("bad magic number in " + image_path);
  }
  uint32_t count = read_be32(imgs, image_path);
  uint32_t rows = read_be32(imgs, image_path);
  uint32_t cols = read_be32(imgs, image_path);

  std::ifstream lbls(label_path, std::ios::binary);
  if (!lbls) throw FormatError("cannot open " + label_path);
  if (read_be32(lbls, label_path) != kLabelMagic) {
    throw FormatError("bad magic number in " + label_path);
  }
  uint32_t lcount = read_be32(lbls, label_path);
  if (lcount != count) {
    throw FormatError("image/label count mismatch between " + image_path +
                      " and " + label_path);
  }

  Dataset ds;
  ds.name = name;
  ds.input_dim = std::size_t(rows) * cols;
  ds.num_classes = 10;
  ds.features.resize(std::size_t(count) * ds.input_dim);
  ds.labels.resize(count);

  std::vector<unsigned char> buf(ds.input_dim);
  for (uint32_t i = 0; i < count; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()),
                   std::streamsize(buf.size()))) {
      throw FormatError("truncated file: " + image_path);
    }
    for (std::size_t p = 0; p < buf.size(); ++p) {
      ds.features[std::size_t(i) * ds.input_dim + p] = buf[p] / 255.0;
    }
    char y;
    if (!lbls.get(y)) throw FormatError("truncated file: " + label_path);
    ds.labels[i] = static_cast<unsigned char>(y);
  }
  return ds;
}

MnistData load_mnist(const std::string& path) {
  MnistData d;
  d.train = load_idx_pair(path + "/train-images-idx3-ubyte",
                          path + "/train-labels-idx1-ubyte", "mnist-train");
  d.test = load_idx_pair(path + "/t10k-images-idx3-ubyte",
                         path + "/t10k-labels-idx1-ubyte", "mnist-test");
  return d;
}

Dataset make_synthetic(std::size_t num_classes, std::size_t dim,
                       std::size_t per_class, double separation,
                       uint64_t seed) {
  if (per_class < 1) throw ConfigError("make_synthetic: per_class must be >= 1");
  Dataset ds;
  ds.name = "synthetic";
  ds.input_dim = dim;
  ds.num_classes = num_classes;
  ds.features.resize(num_classes * per_class * dim);
  ds.labels.resize(num_classes * per_class);

  Rng rng = Rng::derive(seed, {kStreamData});
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      double* x = ds.features.data() + row * dim;
      for (std::size_t i = 0; i < dim; ++i) x[i] = rng.normal();
      x[c % dim] += separation;
      ds.labels[row] = c;
    }
  }
  return ds;
}

Partition partition(const Dataset& dataset, std::size_t n_clients,
                    std::size_t per_client, PartitionMode mode,
                    uint64_t seed) {
  if (n_clients * per_client > dataset.size()) {
    throw ConfigError("partition: dataset too small for " +
                      std::to_string(n_clients) + " clients of " +
                      std::to_string(per_client));
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::derive(seed, {kStreamPartition});

  if (mode == PartitionMode::kIid) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::size_t j = rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }
  } else {
    // Stable sort by label, then deal 2 contiguous shards per client.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return dataset.labels[a] < dataset.labels[b];
                     });
  }

  Partition p;
  p.client_indices.resize(n_clients);
  if (mode == PartitionMode::kIid) {
    std::size_t pos = 0;
    for (auto& shard : p.client_indices) {
      shard.assign(order.begin() + std::ptrdiff_t(pos),
                   order.begin() + std::ptrdiff_t(pos + per_client));
      pos += per_client;
    }
  } else {
    std::size_t shard_len = per_client / 2;
    if (shard_len == 0) throw ConfigError("partition: per_client must be >= 2 for shards");
    // Deal the 2N shards in random order, two per client.
    std::vector<std::size_t> shard_ids(2 * n_clients);
    std::iota(shard_ids.begin(), shard_ids.end(), 0);
    for (std::size_t i = shard_ids.size() - 1; i > 0; --i) {
      std::size_t j = rng.uniform_int(i + 1);
      std::swap(shard_ids[i], shard_ids[j]);
    }
    for (std::size_t k = 0; k < n_clients; ++k) {
      for (int half = 0; half < 2; ++half) {
        std::size_t s = shard_ids[2 * k + std::size_t(half)];
        std::size_t begin = s * shard_len;
        for (std::size_t i = 0; i < shard_len; ++i) {
          p.client_indices[k].push_back(order[begin + i]);
        }
      }
      // Odd per_client: pad from the tail pool beyond the 2N shards.
      while (p.client_indices[k].size() < per_client) {
        std::size_t tail = 2 * n_clients * shard_len + k;
        p.client_indices[k].push_back(order[tail]);
      }
    }
  }
  return p;
}

void relabel_in_backdoor(LocalData& shard, std::size_t source_class,
                         std::size_t target_class) {
  for (auto& y : shard.labels) {
    if (y == source_class) y = target_class;
  }
}

OutBackdoorSplit build_out_backdoor(const Dataset& dataset,
                                    std::size_t excluded_class,
                                    std::size_t target_class) {
  OutBackdoorSplit split;
  split.honest.input_dim = dataset.input_dim;
  split.honest.num_classes = dataset.num_classes;
  split.honest.name = dataset.name + "-outbd-honest";
  split.malicious_pool.input_dim = dataset.input_dim;

  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const double* x = dataset.features.data() + r * dataset.input_dim;
    if (dataset.labels[r] == excluded_class) {
      split.malicious_pool.features.insert(split.malicious_pool.features.end(),
                                           x, x + dataset.input_dim);
      split.malicious_pool.labels.push_back(target_class);
    } else {
      split.honest.features.insert(split.honest.features.end(), x,
                                   x + dataset.input_dim);
      split.honest.labels.push_back(dataset.labels[r]);
    }
  }
  return split;
}

}  // namespace fedlab
