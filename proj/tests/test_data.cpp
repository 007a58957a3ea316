#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "fedlab/data.hpp"
#include "fedlab/model.hpp"

using namespace fedlab;

namespace {

void write_be32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                        (unsigned char)(v >> 8), (unsigned char)v};
  f.write(reinterpret_cast<char*>(b), 4);
}

// Writes a tiny IDX image/label pair: `count` images of rows x cols with
// pixel = (i + p) % 256, label = i % 10.
void write_idx_pair(const std::string& img_path, const std::string& lbl_path,
                    uint32_t count, uint32_t rows, uint32_t cols,
                    uint32_t img_magic = 0x00000803,
                    uint32_t lbl_magic = 0x00000801) {
  std::ofstream img(img_path, std::ios::binary);
  write_be32(img, img_magic);
  write_be32(img, count);
  write_be32(img, rows);
  write_be32(img, cols);
  for (uint32_t i = 0; i < count; ++i) {
    for (uint32_t p = 0; p < rows * cols; ++p) {
      img.put(char((i + p) % 256));
    }
  }
  std::ofstream lbl(lbl_path, std::ios::binary);
  write_be32(lbl, lbl_magic);
  write_be32(lbl, count);
  for (uint32_t i = 0; i < count; ++i) lbl.put(char(i % 10));
}

std::string temp_dir() {
  std::string d =
      (std::filesystem::temp_directory_path() / "fedlab_data_test").string();
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("idx loader round-trips synthesized files") {
  std::string dir = temp_dir();
  std::string img = dir + "/img", lbl = dir + "/lbl";
  write_idx_pair(img, lbl, 37, 4, 5);
  Dataset ds = load_idx_pair(img, lbl, "tiny");
  CHECK(ds.size() == 37);
  CHECK(ds.input_dim == 20);
  for (double p : ds.features) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // Independent byte-level label histogram.
  std::map<std::size_t, std::size_t> want;
  {
    std::ifstream f(lbl, std::ios::binary);
    f.seekg(8);
    char y;
    while (f.get(y)) ++want[(unsigned char)y];
  }
  std::map<std::size_t, std::size_t> got;
  for (std::size_t y : ds.labels) ++got[y];
  CHECK(got == want);
  // Spot-check a pixel: image 3, pixel 7 = (3+7)/255.
  CHECK(ds.features[3 * 20 + 7] == doctest::Approx(10.0 / 255.0));
}

TEST_CASE("idx loader rejects bad magic and truncation, naming the file") {
  std::string dir = temp_dir();
  std::string img = dir + "/img_bad", lbl = dir + "/lbl_ok";
  write_idx_pair(img, lbl, 5, 2, 2, /*img_magic=*/0xdeadbeef);
  try {
    load_idx_pair(img, lbl, "x");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("img_bad") != std::string::npos);
  }

  std::string img2 = dir + "/img_trunc", lbl2 = dir + "/lbl_trunc";
  write_idx_pair(img2, lbl2, 5, 2, 2);
  std::filesystem::resize_file(img2, 20);  // cut into the pixel data
  try {
    load_idx_pair(img2, lbl2, "x");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("img_trunc") != std::string::npos);
  }
}

TEST_CASE("mnist directory loader wires the four standard files") {
  std::string dir = temp_dir() + "/mnist";
  std::filesystem::create_directories(dir);
  write_idx_pair(dir + "/train-images-idx3-ubyte",
                 dir + "/train-labels-idx1-ubyte", 30, 3, 3);
  write_idx_pair(dir + "/t10k-images-idx3-ubyte",
                 dir + "/t10k-labels-idx1-ubyte", 10, 3, 3);
  MnistData m = load_mnist(dir);
  CHECK(m.train.size() == 30);
  CHECK(m.test.size() == 10);
  CHECK(m.train.input_dim == 9);
}

TEST_CASE("synthetic blobs: counts, determinism, separability") {
  Dataset a = make_synthetic(2, 3, 100, 10.0, 5);
  CHECK(a.size() == 200);
  CHECK(a.num_classes == 2);
  Dataset b = make_synthetic(2, 3, 100, 10.0, 5);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  Dataset c = make_synthetic(2, 3, 100, 10.0, 6);
  CHECK(a.features != c.features);

  // Widely separated blobs are centrally learnable to >= 99% train accuracy.
  ModelSpec spec{ModelKind::kLogisticRegression, 3, 0, 2};
  LocalData all;
  all.input_dim = 3;
  all.features = a.features;
  all.labels = a.labels;
  ParamVector w(spec.param_count(), 0.0);
  Rng rng(1);
  w = local_sgd(spec, w, all, 500, 20, 0.5, rng);
  auto pred = predict(spec, w, a.features, a.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += pred[i] == a.labels[i];
  CHECK(double(hit) / double(a.size()) >= 0.99);
}

TEST_CASE("iid partition is disjoint, sized, reproducible, and balanced") {
  Dataset ds = make_synthetic(4, 2, 600, 2.0, 9);  // 2400 rows
  Partition p = partition(ds, 4, 500, PartitionMode::kIid, 11);
  REQUIRE(p.client_indices.size() == 4);
  std::set<std::size_t> seen;
  for (const auto& shard : p.client_indices) {
    CHECK(shard.size() == 500);
    for (std::size_t i : shard) CHECK(seen.insert(i).second);  // disjoint
  }
  Partition p2 = partition(ds, 4, 500, PartitionMode::kIid, 11);
  CHECK(p.client_indices == p2.client_indices);

  // Per-client label frequencies within 5 points of global (25% each).
  for (const auto& shard : p.client_indices) {
    std::array<double, 4> freq{};
    for (std::size_t i : shard) freq[ds.labels[i]] += 1.0 / 500.0;
    for (double f : freq) CHECK(std::fabs(f - 0.25) < 0.05);
  }
}

TEST_CASE("label-sorted shard dealing yields at most 2 labels per client") {
  Dataset ds = make_synthetic(10, 2, 100, 1.0, 3);  // 1000 rows, label-pure shards
  Partition p = partition(ds, 10, 100, PartitionMode::kLabelSortedShards, 4);
  for (const auto& shard : p.client_indices) {
    CHECK(shard.size() == 100);
    std::set<std::size_t> labels;
    for (std::size_t i : shard) labels.insert(ds.labels[i]);
    CHECK(labels.size() <= 2);
  }
}

TEST_CASE("partition rejects insufficient data") {
  Dataset ds = make_synthetic(2, 2, 10, 1.0, 1);  // 20 rows
  CHECK_THROWS_AS(partition(ds, 3, 10, PartitionMode::kIid, 1), ConfigError);
}

TEST_CASE("in-backdoor relabel: idempotent, feature-preserving, complete") {
  Dataset ds = make_synthetic(10, 2, 20, 1.0, 7);
  LocalData shard = ds.subset({0, 1, 100, 101, 102, 150});
  std::vector<double> orig_features = shard.features;
  std::vector<std::size_t> orig_labels = shard.labels;

  relabel_in_backdoor(shard, 5, 7);
  for (std::size_t y : shard.labels) CHECK(y != 5);
  CHECK(shard.features == orig_features);
  for (std::size_t i = 0; i < shard.size(); ++i) {
    if (orig_labels[i] != 5) CHECK(shard.labels[i] == orig_labels[i]);
    else CHECK(shard.labels[i] == 7);
  }
  std::vector<std::size_t> once = shard.labels;
  relabel_in_backdoor(shard, 5, 7);
  CHECK(shard.labels == once);  // idempotent
}

TEST_CASE("out-backdoor split: exclusion, relabeling, conservation") {
  Dataset ds = make_synthetic(10, 2, 30, 1.0, 8);
  OutBackdoorSplit split = build_out_backdoor(ds, 0, 1);
  for (std::size_t y : split.honest.labels) CHECK(y != 0);
  for (std::size_t y : split.malicious_pool.labels) CHECK(y == 1);
  // Independent tally: nothing dropped, counts conserved.
  std::size_t zeros = 0;
  for (std::size_t y : ds.labels) zeros += y == 0;
  CHECK(split.malicious_pool.size() == zeros);
  CHECK(split.honest.size() + split.malicious_pool.size() == ds.size());
}
