#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedlab/rng.hpp"

namespace fedlab {

using ParamVector = std::vector<double>;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelKind { kLogisticRegression, kMlp1Hidden };

// Classifier family: softmax output, cross-entropy loss, hand-derived
// gradients. Parameter count is a pure function of the spec.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;  // mlp only
  std::size_t num_classes = 2;

  std::size_t param_count() const;
};

struct Batch {
  // Row-major |B| x input_dim.
  std::vector<double> features;
  std::vector<std::size_t> labels;
  std::size_t input_dim = 0;

  std::size_t size() const { return labels.size(); }
};

// Glorot-style uniform init in [-r, r], r = sqrt(6/(fan_in+fan_out)).
ParamVector init_params(const ModelSpec& spec, Rng& rng);

// Mean cross-entropy over the batch.
double forward_loss(const ModelSpec& spec, const ParamVector& w,
                    const Batch& batch);

// Gradient of forward_loss with respect to w, same length as w.
ParamVector gradient(const ModelSpec& spec, const ParamVector& w,
                     const Batch& batch);

// Class predictions (argmax of logits) for accuracy evaluation.
std::vector<std::size_t> predict(const ModelSpec& spec, const ParamVector& w,
                                 const std::vector<double>& features,
                                 std::size_t rows);

struct LocalData {
  std::vector<double> features;  // row-major
  std::vector<std::size_t> labels;
  std::size_t input_dim = 0;

  std::size_t size() const { return labels.size(); }
};

// Runs exactly t_gd mini-batch SGD steps. Batches are drawn without
// replacement within an epoch, reshuffled per epoch, all via rng.
ParamVector local_sgd(const ModelSpec& spec, const ParamVector& w0,
                      const LocalData& data, std::size_t t_gd,
                      std::size_t batch_size, double eta, Rng& rng);

// Same batch schedule as local_sgd, stepping w += step_scale * gradient.
// step_scale = -eta gives descent, +eta gives ascent.
ParamVector gradient_steps(const ModelSpec& spec, const ParamVector& w0,
                           const LocalData& data, std::size_t t_gd,
                           std::size_t batch_size, double step_scale, Rng& rng);

}  // namespace fedlab
