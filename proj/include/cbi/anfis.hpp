// Copyright 2026 The CBI Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// First-order Sugeno ANFIS over RGB pixels with hybrid training: consequents by
// ridge-regularised least squares, premises by batch gradient descent.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"
#include "cbi/samples.hpp"

namespace cbi {

inline constexpr double kInputScale = 255.0;
inline constexpr double kMinWidth = 1e-3;

inline double gaussian_membership(double x, double center, double width) {
  const double d = (x - center) / width;
  return std::exp(-0.5 * d * d);
}

struct MembershipFunction {
  double center = 0.5;  // normalized channel value
  double width = 0.1;   // Gaussian sigma, normalized units

  double operator()(double x) const { return gaussian_membership(x, center, width); }
  friend bool operator==(const MembershipFunction&, const MembershipFunction&) = default;
};

struct SugenoRule {
  std::array<MembershipFunction, 3> premise;  // r, g, b
  std::array<double, 4> consequent{};         // j, k, l, z on normalized inputs

  double output(const std::array<double, 3>& x) const {
    return consequent[0] * x[0] + consequent[1] * x[1] + consequent[2] * x[2] + consequent[3];
  }
  friend bool operator==(const SugenoRule&, const SugenoRule&) = default;
};

/// Gray level round(255 k / (n-1)) for class k of n.
inline std::vector<double> default_class_targets(int num_classes = kNumClasses) {
  std::vector<double> t;
  for (int k = 0; k < num_classes; ++k) {
    t.push_back(num_classes == 1 ? 0.0 : std::round(255.0 * k / (num_classes - 1)));
  }
  return t;
}

struct AnfisModel {
  std::vector<SugenoRule> rules;
  std::vector<double> class_targets = default_class_targets();

  static constexpr double input_scale = kInputScale;

  std::size_t num_classes() const { return class_targets.size(); }

  void validate() const {
    if (rules.empty()) throw Error(ErrorKind::ConfigError, "model needs at least one rule");
    if (class_targets.empty()) throw Error(ErrorKind::ConfigError, "model needs at least one class target");
    for (std::size_t i = 0; i < class_targets.size(); ++i) {
      const double t = class_targets[i];
      if (!(t >= 0.0 && t <= 255.0)) throw Error(ErrorKind::ConfigError, "class target outside [0,255]");
      if (i > 0 && !(t > class_targets[i - 1])) {
        throw Error(ErrorKind::ConfigError, "class targets must be strictly increasing");
      }
    }
    for (const SugenoRule& rule : rules) {
      for (const MembershipFunction& mf : rule.premise) {
        if (!std::isfinite(mf.center) || !(mf.width >= kMinWidth) || !std::isfinite(mf.width)) {
          throw Error(ErrorKind::ConfigError, "membership function needs finite center and width >= 1e-3");
        }
      }
      for (double c : rule.consequent) {
        if (!std::isfinite(c)) throw Error(ErrorKind::ConfigError, "non-finite consequent coefficient");
      }
    }
  }

  friend bool operator==(const AnfisModel&, const AnfisModel&) = default;
};

inline std::array<double, 3> normalize(Rgb p) {
  return {p.r / kInputScale, p.g / kInputScale, p.b / kInputScale};
}

namespace detail {

/// Normalized weighted average of rule outputs; the unweighted mean when every
/// firing strength is zero. Shared by every inference path so they agree bitwise.
inline double combine(std::span<const double> firing, std::span<const double> outputs) {
  double total = 0.0;
  for (double w : firing) total += w;
  double y = 0.0;
  if (total > 0.0) {
    for (std::size_t i = 0; i < firing.size(); ++i) y += (firing[i] / total) * outputs[i];
  } else {
    for (double f : outputs) y += f;
    y /= static_cast<double>(outputs.size());
  }
  return y;
}

struct ForwardPass {
  std::vector<double> firing;   // w_i
  std::vector<double> outputs;  // f_i
  double total = 0.0;           // sum of w_i
  double y = 0.0;               // normalized output
};

inline void forward(const AnfisModel& model, const std::array<double, 3>& x, ForwardPass& fp) {
  const std::size_t n = model.rules.size();
  fp.firing.resize(n);
  fp.outputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SugenoRule& rule = model.rules[i];
    fp.firing[i] = rule.premise[0](x[0]) * rule.premise[1](x[1]) * rule.premise[2](x[2]);
    fp.outputs[i] = rule.output(x);
  }
  fp.total = 0.0;
  for (double w : fp.firing) fp.total += w;
  fp.y = combine(fp.firing, fp.outputs);
}

/// Normalized firing strengths, uniform when the total is zero.
inline void normalized_firing(const ForwardPass& fp, std::vector<double>& out) {
  out.resize(fp.firing.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fp.total > 0.0 ? fp.firing[i] / fp.total : 1.0 / static_cast<double>(out.size());
  }
}

}  // namespace detail

/// Output gray level (0-255 scale, unclamped) for one pixel.
inline double evaluate(const AnfisModel& model, Rgb pixel) {
  detail::ForwardPass fp;
  detail::forward(model, normalize(pixel), fp);
  return fp.y * kInputScale;
}

/// Index of the class target nearest to `o`; ties go to the lower index.
inline int nearest_class(std::span<const double> targets, double o) {
  int best = 0;
  for (std::size_t k = 1; k < targets.size(); ++k) {
    if (std::abs(o - targets[k]) < std::abs(o - targets[static_cast<std::size_t>(best)])) {
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline int classify(const AnfisModel& model, Rgb pixel) {
  return nearest_class(model.class_targets, evaluate(model, pixel));
}

/// Table-driven evaluator for image filtering. Memberships are tabulated per
/// channel value, so results are bit-identical to evaluate(). Immutable after
/// construction and safe to share between threads.
class PixelEvaluator {
 public:
  explicit PixelEvaluator(const AnfisModel& model) : model_(model) {
    model_.validate();
    const std::size_t n = model_.rules.size();
    lut_.resize(n * 3 * 256);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (int v = 0; v < 256; ++v) {
          lut_[(i * 3 + c) * 256 + static_cast<std::size_t>(v)] = model_.rules[i].premise[c](v / kInputScale);
        }
      }
    }
  }

  const AnfisModel& model() const { return model_; }

  double evaluate(Rgb p) const {
    const std::size_t n = model_.rules.size();
    thread_local std::vector<double> firing;
    thread_local std::vector<double> outputs;
    firing.resize(n);
    outputs.resize(n);
    const auto x = normalize(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double* t = &lut_[i * 3 * 256];
      firing[i] = t[p.r] * t[256 + p.g] * t[512 + p.b];
      outputs[i] = model_.rules[i].output(x);
    }
    return detail::combine(firing, outputs) * kInputScale;
  }

  int classify(Rgb p) const { return nearest_class(model_.class_targets, evaluate(p)); }

 private:
  AnfisModel model_;
  std::vector<double> lut_;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double ridge = 1e-8;
  /// Recorded for provenance; training itself is full-batch and draws no random numbers.
  std::uint64_t seed = 7;
  /// Gray-level RMSE improvement below which an epoch counts as stalled.
  double convergence_delta = 1e-6;

  void validate() const {
    if (epochs < 0) throw Error(ErrorKind::ConfigError, "epochs must be non-negative");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw Error(ErrorKind::ConfigError, "learning_rate must be positive and finite");
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw Error(ErrorKind::ConfigError, "ridge must be >= 0");
    if (!(convergence_delta >= 0.0) || !std::isfinite(convergence_delta)) {
      throw Error(ErrorKind::ConfigError, "convergence_delta must be >= 0");
    }
  }
};

/// Consecutive stalled epochs that stop training early.
inline constexpr int kStallEpochs = 10;

inline double target_of(const AnfisModel& model, const ClassSample& s) {
  return model.class_targets[static_cast<std::size_t>(s.class_id)] / kInputScale;
}

/// Sum of squared errors in normalized output units (gray / 255).
inline double sse(const AnfisModel& model, std::span<const ClassSample> samples) {
  detail::ForwardPass fp;
  double total = 0.0;
  for (const ClassSample& s : samples) {
    detail::forward(model, normalize(s.rgb()), fp);
    const double e = fp.y - target_of(model, s);
    total += e * e;
  }
  return total;
}

/// Root-mean-square error in gray levels.
inline double rmse(const AnfisModel& model, std::span<const ClassSample> samples) {
  if (samples.empty()) return 0.0;
  return kInputScale * std::sqrt(sse(model, samples) / static_cast<double>(samples.size()));
}

/// Gradient of sse() with respect to the premise parameters, laid out as
/// [rule][channel][center, width].
struct PremiseGradient {
  std::vector<double> values;

  static std::size_t index(std::size_t rule, std::size_t channel, bool width) {
    return (rule * 3 + channel) * 2 + (width ? 1 : 0);
  }
  double center(std::size_t rule, std::size_t channel) const { return values[index(rule, channel, false)]; }
  double width(std::size_t rule, std::size_t channel) const { return values[index(rule, channel, true)]; }
};

inline PremiseGradient premise_gradient(const AnfisModel& model, std::span<const ClassSample> samples) {
  PremiseGradient grad;
  grad.values.assign(model.rules.size() * 6, 0.0);
  detail::ForwardPass fp;
  for (const ClassSample& s : samples) {
    const auto x = normalize(s.rgb());
    detail::forward(model, x, fp);
    if (!(fp.total > 0.0)) continue;  // fallback mean does not depend on premises
    const double e = fp.y - target_of(model, s);
    for (std::size_t i = 0; i < model.rules.size(); ++i) {
      // d sse / d w_i = 2 e (f_i - y) / sum(w)
      const double dw = 2.0 * e * (fp.outputs[i] - fp.y) / fp.total;
      if (dw == 0.0 || fp.firing[i] == 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        const MembershipFunction& mf = model.rules[i].premise[c];
        const double d = x[c] - mf.center;
        const double inv_w2 = 1.0 / (mf.width * mf.width);
        grad.values[PremiseGradient::index(i, c, false)] += dw * fp.firing[i] * d * inv_w2;
        grad.values[PremiseGradient::index(i, c, true)] += dw * fp.firing[i] * d * d * inv_w2 / mf.width;
      }
    }
  }
  return grad;
}

/// Solves all consequent coefficients jointly with premises held fixed,
/// minimising sse + ridge * |theta|^2.
inline void fit_consequents(AnfisModel& model, std::span<const ClassSample> samples, double ridge) {
  const auto n_rules = static_cast<Eigen::Index>(model.rules.size());
  const Eigen::Index cols = 4 * n_rules;
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index rows = ridge > 0.0 ? n + cols : n;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
  detail::ForwardPass fp;
  std::vector<double> wbar;
  for (Eigen::Index r = 0; r < n; ++r) {
    const ClassSample& s = samples[static_cast<std::size_t>(r)];
    const auto x = normalize(s.rgb());
    detail::forward(model, x, fp);
    detail::normalized_firing(fp, wbar);
    for (Eigen::Index i = 0; i < n_rules; ++i) {
      const double w = wbar[static_cast<std::size_t>(i)];
      a(r, 4 * i + 0) = w * x[0];
      a(r, 4 * i + 1) = w * x[1];
      a(r, 4 * i + 2) = w * x[2];
      a(r, 4 * i + 3) = w;
    }
    y(r) = target_of(model, s);
  }
  if (ridge > 0.0) {
    a.bottomRows(cols).diagonal().setConstant(std::sqrt(ridge));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (ridge == 0.0 && qr.rank() < cols) {
    throw Error(ErrorKind::SingularSystem, "consequent least-squares system is rank deficient (rank " +
                                               std::to_string(qr.rank()) + " of " + std::to_string(cols) + ")");
  }
  const Eigen::VectorXd theta = qr.solve(y);
  for (Eigen::Index i = 0; i < n_rules; ++i) {
    for (Eigen::Index c = 0; c < 4; ++c) {
      model.rules[static_cast<std::size_t>(i)].consequent[static_cast<std::size_t>(c)] = theta(4 * i + c);
    }
  }
}

/// One rule per class: centers at the per-class channel means, widths at the
/// per-class sample standard deviations (floored), consequents at the class target.
inline AnfisModel initialize_model(std::span<const ClassSample> samples, int num_classes = kNumClasses) {
  AnfisModel model;
  model.class_targets = default_class_targets(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    std::array<double, 3> sum{};
    std::array<double, 3> sum_sq{};
    int count = 0;
    for (const ClassSample& s : samples) {
      if (s.class_id != k) continue;
      const auto x = normalize(s.rgb());
      for (std::size_t c = 0; c < 3; ++c) {
        sum[c] += x[c];
        sum_sq[c] += x[c] * x[c];
      }
      ++count;
    }
    if (count == 0) throw Error(ErrorKind::MissingClass, "no samples for class " + std::to_string(k));
    SugenoRule rule;
    for (std::size_t c = 0; c < 3; ++c) {
      const double mean = sum[c] / count;
      const double var = count > 1 ? std::max(0.0, (sum_sq[c] - count * mean * mean) / (count - 1)) : 0.0;
      rule.premise[c] = {mean, std::max(kMinWidth, std::sqrt(var))};
    }
    rule.consequent = {0.0, 0.0, 0.0, model.class_targets[static_cast<std::size_t>(k)] / kInputScale};
    model.rules.push_back(rule);
  }
  return model;
}

struct TrainResult {
  AnfisModel model;
  double initial_rmse = 0.0;
  /// Gray-level RMSE of the returned model.
  double final_rmse = 0.0;
  /// Gray-level RMSE after the initial least-squares pass (entry 0) and after each epoch.
  std::vector<double> rmse_trace;
  int epochs_run = 0;
  bool converged = false;
};

/// Hybrid training. A least-squares consequent pass always runs first, even
/// with zero epochs. Each epoch then takes one gradient step on the premises and
/// refits the consequents. The best model seen (including `init`) is returned,
/// so its RMSE never exceeds the initial one.
inline TrainResult train(std::span<const ClassSample> samples, const TrainConfig& config, AnfisModel init) {
  config.validate();
  init.validate();
  if (samples.empty()) throw Error(ErrorKind::MissingClass, "no training samples");
  std::vector<int> counts(init.num_classes(), 0);
  for (const ClassSample& s : samples) {
    if (s.class_id < 0 || static_cast<std::size_t>(s.class_id) >= init.num_classes()) {
      throw Error(ErrorKind::ConfigError, "sample class " + std::to_string(s.class_id) + " has no target");
    }
    ++counts[static_cast<std::size_t>(s.class_id)];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw Error(ErrorKind::MissingClass, "no samples for class " + std::to_string(k));
  }

  TrainResult result;
  result.initial_rmse = rmse(init, samples);

  AnfisModel current = init;
  fit_consequents(current, samples, config.ridge);
  double current_rmse = rmse(current, samples);
  result.rmse_trace.push_back(current_rmse);

  AnfisModel best = current;
  double best_rmse = current_rmse;
  int stalled = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const PremiseGradient grad = premise_gradient(current, samples);
    for (std::size_t i = 0; i < current.rules.size(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        MembershipFunction& mf = current.rules[i].premise[c];
        mf.center = std::clamp(mf.center - config.learning_rate * grad.center(i, c), 0.0, 1.0);
        mf.width = std::max(kMinWidth, mf.width - config.learning_rate * grad.width(i, c));
      }
    }
    fit_consequents(current, samples, config.ridge);
    const double next_rmse = rmse(current, samples);
    result.rmse_trace.push_back(next_rmse);
    result.epochs_run = epoch;
    if (next_rmse < best_rmse) {
      best = current;
      best_rmse = next_rmse;
    }
    stalled = (current_rmse - next_rmse < config.convergence_delta) ? stalled + 1 : 0;
    current_rmse = next_rmse;
    if (stalled >= kStallEpochs) {
      result.converged = true;
      break;
    }
  }

  if (result.initial_rmse < best_rmse) {
    best = std::move(init);
    best_rmse = result.initial_rmse;
  }
  result.model = std::move(best);
  result.final_rmse = best_rmse;
  return result;
}

}  // namespace cbi
