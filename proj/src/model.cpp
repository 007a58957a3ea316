#include "fedlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedlab {
namespace {

void check_dims(const ModelSpec& spec, const ParamVector& w,
                const Batch& batch) {
  if (batch.input_dim != spec.input_dim) {
    throw ConfigError("batch input_dim " + std::to_string(batch.input_dim) +
                      " does not match model input_dim " +
                      std::to_string(spec.input_dim));
  }
  if (w.size() != spec.param_count()) {
    throw ConfigError("parameter vector length " + std::to_string(w.size()) +
                      " does not match model parameter count " +
                      std::to_string(spec.param_count()));
  }
  for (std::size_t y : batch.labels) {
    if (y >= spec.num_classes) {
      throw ConfigError("label out of range: " + std::to_string(y));
    }
  }
}

// Numerically stable softmax cross-entropy on one row; fills probs.
double row_ce(const std::vector<double>& logits, std::size_t label,
              std::vector<double>& probs) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - mx);
    denom += probs[c];
  }
  for (double& p : probs) p /= denom;
  return -(logits[label] - mx - std::log(denom));
}

// Parameter layout, logistic regression: W[in][classes] then b[classes].
// MLP: W1[in][hidden], b1[hidden], W2[hidden][classes], b2[classes].
struct MlpView {
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
};

MlpView mlp_view(const ModelSpec& s, const double* p) {
  MlpView v;
  v.w1 = p;
  v.b1 = p + s.input_dim * s.hidden_dim;
  v.w2 = v.b1 + s.hidden_dim;
  v.b2 = v.w2 + s.hidden_dim * s.num_classes;
  return v;
}

void logits_logreg(const ModelSpec& s, const double* p, const double* x,
                   std::vector<double>& out) {
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    double z = p[s.input_dim * s.num_classes + c];
    for (std::size_t i = 0; i < s.input_dim; ++i) {
      z += x[i] * p[i * s.num_classes + c];
    }
    out[c] = z;
  }
}

void logits_mlp(const ModelSpec& s, const double* p, const double* x,
                std::vector<double>& hidden, std::vector<double>& out) {
  MlpView v = mlp_view(s, p);
  for (std::size_t h = 0; h < s.hidden_dim; ++h) {
    double z = v.b1[h];
    for (std::size_t i = 0; i < s.input_dim; ++i) {
      z += x[i] * v.w1[i * s.hidden_dim + h];
    }
    hidden[h] = z > 0.0 ? z : 0.0;  // ReLU
  }
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    double z = v.b2[c];
    for (std::size_t h = 0; h < s.hidden_dim; ++h) {
      z += hidden[h] * v.w2[h * s.num_classes + c];
    }
    out[c] = z;
  }
}

}  // namespace

std::size_t ModelSpec::param_count() const {
  switch (kind) {
    case ModelKind::kLogisticRegression:
      return input_dim * num_classes + num_classes;
    case ModelKind::kMlp1Hidden:
      return input_dim * hidden_dim + hidden_dim +
             hidden_dim * num_classes + num_classes;
  }
  return 0;
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  ParamVector w(spec.param_count());
  auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in,
                  std::size_t fan_out) {
    double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) {
      w[begin + i] = (2.0 * rng.uniform() - 1.0) * r;
    }
  };
  if (spec.kind == ModelKind::kLogisticRegression) {
    fill(0, spec.input_dim * spec.num_classes, spec.input_dim,
         spec.num_classes);
    // biases start at zero
  } else {
    std::size_t n1 = spec.input_dim * spec.hidden_dim;
    fill(0, n1, spec.input_dim, spec.hidden_dim);
    std::size_t off = n1 + spec.hidden_dim;
    fill(off, spec.hidden_dim * spec.num_classes, spec.hidden_dim,
         spec.num_classes);
  }
  return w;
}

double forward_loss(const ModelSpec& spec, const ParamVector& w,
                    const Batch& batch) {
  check_dims(spec, w, batch);
  std::vector<double> logits(spec.num_classes), probs(spec.num_classes);
  std::vector<double> hidden(spec.hidden_dim);
  double total = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double* x = batch.features.data() + r * spec.input_dim;
    if (spec.kind == ModelKind::kLogisticRegression) {
      logits_logreg(spec, w.data(), x, logits);
    } else {
      logits_mlp(spec, w.data(), x, hidden, logits);
    }
    total += row_ce(logits, batch.labels[r], probs);
  }
  return total / static_cast<double>(batch.size());
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& w,
                     const Batch& batch) {
  check_dims(spec, w, batch);
  ParamVector g(w.size(), 0.0);
  std::vector<double> logits(spec.num_classes), probs(spec.num_classes);
  std::vector<double> hidden(spec.hidden_dim);
  double inv_b = 1.0 / static_cast<double>(batch.size());

  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double* x = batch.features.data() + r * spec.input_dim;
    if (spec.kind == ModelKind::kLogisticRegression) {
      logits_logreg(spec, w.data(), x, logits);
      row_ce(logits, batch.labels[r], probs);
      for (std::size_t c = 0; c < spec.num_classes; ++c) {
        double d = (probs[c] - (c == batch.labels[r] ? 1.0 : 0.0)) * inv_b;
        for (std::size_t i = 0; i < spec.input_dim; ++i) {
          g[i * spec.num_classes + c] += d * x[i];
        }
        g[spec.input_dim * spec.num_classes + c] += d;
      }
    } else {
      logits_mlp(spec, w.data(), x, hidden, logits);
      row_ce(logits, batch.labels[r], probs);
      MlpView v = mlp_view(spec, w.data());
      std::size_t n1 = spec.input_dim * spec.hidden_dim;
      double* g_w1 = g.data();
      double* g_b1 = g.data() + n1;
      double* g_w2 = g_b1 + spec.hidden_dim;
      double* g_b2 = g_w2 + spec.hidden_dim * spec.num_classes;
      for (std::size_t c = 0; c < spec.num_classes; ++c) {
        double d = (probs[c] - (c == batch.labels[r] ? 1.0 : 0.0)) * inv_b;
        for (std::size_t h = 0; h < spec.hidden_dim; ++h) {
          g_w2[h * spec.num_classes + c] += d * hidden[h];
        }
        g_b2[c] += d;
      }
      for (std::size_t h = 0; h < spec.hidden_dim; ++h) {
        if (hidden[h] <= 0.0) continue;  // ReLU gate
        double dh = 0.0;
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
          dh += (probs[c] - (c == batch.labels[r] ? 1.0 : 0.0)) * inv_b *
                v.w2[h * spec.num_classes + c];
        }
        for (std::size_t i = 0; i < spec.input_dim; ++i) {
          g_w1[i * spec.hidden_dim + h] += dh * x[i];
        }
        g_b1[h] += dh;
      }
    }
  }
  return g;
}

std::vector<std::size_t> predict(const ModelSpec& spec, const ParamVector& w,
                                 const std::vector<double>& features,
                                 std::size_t rows) {
  std::vector<std::size_t> out(rows);
  std::vector<double> logits(spec.num_classes), hidden(spec.hidden_dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = features.data() + r * spec.input_dim;
    if (spec.kind == ModelKind::kLogisticRegression) {
      logits_logreg(spec, w.data(), x, logits);
    } else {
      logits_mlp(spec, w.data(), x, hidden, logits);
    }
    out[r] = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  return out;
}

ParamVector local_sgd(const ModelSpec& spec, const ParamVector& w0,
                      const LocalData& data, std::size_t t_gd,
                      std::size_t batch_size, double eta, Rng& rng) {
  if (eta <= 0.0) throw ConfigError("local_sgd: eta must be positive");
  return gradient_steps(spec, w0, data, t_gd, batch_size, -eta, rng);
}

ParamVector gradient_steps(const ModelSpec& spec, const ParamVector& w0,
                           const LocalData& data, std::size_t t_gd,
                           std::size_t batch_size, double step_scale,
                           Rng& rng) {
  if (data.size() == 0) throw ConfigError("local_sgd: empty dataset");
  if (t_gd < 1) throw ConfigError("local_sgd: t_gd must be >= 1");

  ParamVector w = w0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces shuffle on first step

  Batch batch;
  batch.input_dim = spec.input_dim;
  std::size_t bs = std::min(batch_size, data.size());

  for (std::size_t step = 0; step < t_gd; ++step) {
    if (cursor >= order.size()) {
      // Fisher-Yates reshuffle at epoch boundary.
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::size_t j = rng.uniform_int(i + 1);
        std::swap(order[i], order[j]);
      }
      cursor = 0;
    }
    std::size_t take = std::min(bs, order.size() - cursor);
    batch.features.assign(take * spec.input_dim, 0.0);
    batch.labels.assign(take, 0);
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t src = order[cursor + i];
      std::copy_n(data.features.data() + src * spec.input_dim, spec.input_dim,
                  batch.features.data() + i * spec.input_dim);
      batch.labels[i] = data.labels[src];
    }
    cursor += take;

    ParamVector g = gradient(spec, w, batch);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += step_scale * g[i];
  }
  return w;
}

}  // namespace fedlab
