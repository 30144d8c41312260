#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gridssl/losses.hpp"
#include "gridssl/model.hpp"
#include "gridssl/rng.hpp"
#include "gridssl/trajectory.hpp"

namespace gridssl {

enum class ClipMode { value, norm };
enum class Precision { f64, f32 };

struct SchedulerConfig {
  double factor = 0.5;
  std::size_t patience = 1000;  // updates without improvement before a cut
  double threshold = 1e-4;      // relative improvement criterion
  double lr_min = 1e-8;
};

struct TrainConfig {
  std::size_t n_units = 128, hidden = 256;
  bool train_g0 = false;

  std::size_t batch_size = 130, traj_len = 60;
  VelocityConfig velocity{};
  bool permute = true;  // shared-endpoint permutation batches; off = independent

  LossConfig loss{};
  double norm_eps = 1e-8;

  double learning_rate = 2e-5;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double weight_decay = 0.0;
  double clip_value = 0.1;
  ClipMode clip_mode = ClipMode::value;
  std::size_t accumulate_batches = 2;
  std::size_t max_steps = 2000000;  // optimizer updates
  SchedulerConfig scheduler{};

  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 = initial + final only
  Precision precision = Precision::f64;
  std::size_t worker_threads = 1;  // >1 overlaps batch generation with compute

  void validate() const {
    if (n_units == 0 || hidden == 0) throw ConfigError("model sizes must be positive");
    if (batch_size == 0 || traj_len == 0) throw ConfigError("batch shape must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(clip_value > 0)) throw ConfigError("clip_value must be positive");
    if (accumulate_batches == 0) throw ConfigError("accumulate_batches must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw ConfigError("adam betas must lie in [0,1)");
    if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
    if (weight_decay < 0) throw ConfigError("weight_decay must be nonnegative");
    if (!(scheduler.factor > 0 && scheduler.factor <= 1))
      throw ConfigError("scheduler factor must lie in (0,1]");
    if (scheduler.patience == 0) throw ConfigError("scheduler patience must be >= 1");
    if (scheduler.threshold < 0) throw ConfigError("scheduler threshold must be nonnegative");
    if (scheduler.lr_min < 0) throw ConfigError("lr_min must be nonnegative");
    if (!(velocity.lo < velocity.hi)) throw ConfigError("velocity range is empty");
    loss.validate();
  }
};

// Reduce-on-plateau with a relative threshold: a loss improves on the best
// seen so far when loss < best * (1 - threshold). After `patience`
// non-improving updates in a row the rate is multiplied by `factor`, never
// dropping below lr_min. The rate never increases.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, const SchedulerConfig& cfg) : lr_(lr), cfg_(cfg) {}

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t wait() const { return wait_; }

  void step(double loss) {
    if (loss < best_ * (1.0 - cfg_.threshold)) {
      best_ = loss;
      wait_ = 0;
      return;
    }
    if (++wait_ >= cfg_.patience) {
      lr_ = std::max(lr_ * cfg_.factor, cfg_.lr_min);
      wait_ = 0;
    }
  }

  void restore(double lr, double best, std::size_t wait) {
    lr_ = lr;
    best_ = best;
    wait_ = wait;
  }

 private:
  double lr_;
  SchedulerConfig cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

// Clip gradients in place; returns the global pre-clip L2 norm. Value mode
// clamps every component to [-clip, clip]; norm mode rescales the whole
// gradient so its global norm is at most clip.
template <class Real>
double clip_gradients(std::vector<Tensor<Real>>& grads, ClipMode mode,
                      double clip) {
  double nsq = 0;
  for (const auto& g : grads)
    for (Real x : g.v) nsq += static_cast<double>(x) * static_cast<double>(x);
  double norm = std::sqrt(nsq);
  if (mode == ClipMode::value) {
    const Real c = static_cast<Real>(clip);
    for (auto& g : grads)
      for (Real& x : g.v) x = std::clamp(x, -c, c);
  } else if (norm > clip) {
    const Real s = static_cast<Real>(clip / norm);
    for (auto& g : grads)
      for (Real& x : g.v) x *= s;
  }
  return norm;
}

// Optimizer + scheduler payload stored next to a checkpoint ("GSTS").
// Moments are kept in f64 regardless of training precision; every f32 value
// widens exactly, so f32 state round-trips bit-for-bit.
struct TrainState {
  std::uint64_t updates = 0;
  std::uint64_t micro_count = 0;  // micro-batches consumed so far
  double lr = 0;
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t wait = 0;
  std::vector<Tensor<double>> m, v;  // per trainable tensor, model order
};

void save_train_state(const std::string& path, const TrainState& s);
TrainState load_train_state(const std::string& path);

struct UpdateStats {
  double lr = 0;         // rate used for this update
  double grad_norm = 0;  // global L2 norm of the averaged gradient, pre-clip
};

// One metrics-log record per optimizer update. Loss fields are means over the
// accumulated micro-batches; pair and qualifying-step counts are sums, and the
// starvation flag is set when any micro-batch starved.
struct MetricsRecord {
  std::uint64_t update = 0;  // 1-based
  LossBreakdown loss{};
  double lr = 0;
  double grad_norm = 0;
};

// Single JSON object, fixed key order, floats at full f64 round-trip
// precision. No trailing newline.
std::string format_metrics_line(const MetricsRecord& r);

// AdamW with decoupled weight decay over the SIC objective. Gradients from
// micro_step() accumulate until apply_update(), which averages them over the
// micro-batches, clips, and applies the bias-corrected update.
template <class Real>
class Trainer {
 public:
  Trainer(ModelParams<Real> params, const TrainConfig& cfg)
      : p_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (auto* t : p_.trainable()) {
      m_.emplace_back(t->shape);
      v_.emplace_back(t->shape);
      pending_.emplace_back(t->shape);
    }
  }

  ModelParams<Real>& params() { return p_; }
  const ModelParams<Real>& params() const { return p_; }
  std::uint64_t update_count() const { return t_; }
  std::size_t micros_pending() const { return micros_; }
  const std::vector<Tensor<Real>>& pending() const { return pending_; }

  // Forward/backward on one micro-batch; gradients are added to the pending
  // accumulator. Throws NumericError on a non-finite loss or gradient.
  LossBreakdown micro_step(const TrajectoryBatch& batch, const PairMask& mask) {
    Graph<Real> g;
    auto u = build_unroll(g, p_, batch, static_cast<Real>(cfg_.norm_eps));
    auto L = build_sic_loss(g, u, batch, mask, cfg_.loss);
    if (!std::isfinite(L.values.total))
      throw NumericError("non-finite training loss");
    g.backward(L.total);

    std::vector<typename Graph<Real>::Id> ids{u.leaf.w1, u.leaf.b1, u.leaf.w2,
                                              u.leaf.b2, u.leaf.w3, u.leaf.b3};
    if (p_.train_g0) ids.push_back(u.leaf.g0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto* gr = g.grad_of(ids[i]);
      if (!gr) continue;  // loss did not touch this tensor
      auto& acc = pending_[i].v;
      for (std::size_t k = 0; k < acc.size(); ++k) {
        if (!std::isfinite((*gr)[k])) throw NumericError("non-finite gradient");
        acc[k] += (*gr)[k];
      }
    }
    ++micros_;
    return L.values;
  }

  UpdateStats apply_update(double lr) {
    if (micros_ == 0) throw ConfigError("update requested with no pending gradients");
    const Real inv = static_cast<Real>(1.0 / static_cast<double>(micros_));
    for (auto& g : pending_)
      for (Real& x : g.v) x *= inv;

    UpdateStats st;
    st.lr = lr;
    st.grad_norm = clip_gradients(pending_, cfg_.clip_mode, cfg_.clip_value);

    ++t_;
    const Real bc1 = static_cast<Real>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const Real bc2 = static_cast<Real>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const Real b1 = static_cast<Real>(cfg_.beta1);
    const Real b2 = static_cast<Real>(cfg_.beta2);
    const Real eps = static_cast<Real>(cfg_.adam_eps);
    const Real step = static_cast<Real>(lr);
    const Real decay = static_cast<Real>(1.0 - lr * cfg_.weight_decay);

    auto tr = p_.trainable();
    for (std::size_t i = 0; i < tr.size(); ++i) {
      auto& th = tr[i]->v;
      auto& m = m_[i].v;
      auto& v = v_[i].v;
      auto& gr = pending_[i].v;
      for (std::size_t k = 0; k < th.size(); ++k) {
        m[k] = b1 * m[k] + (Real(1) - b1) * gr[k];
        v[k] = b2 * v[k] + (Real(1) - b2) * gr[k] * gr[k];
        const Real mhat = m[k] / bc1;
        const Real vhat = v[k] / bc2;
        th[k] = decay * th[k] - step * mhat / (std::sqrt(vhat) + eps);
        gr[k] = Real(0);
      }
    }
    micros_ = 0;
    return st;
  }

  // Optimizer portion of the training state (scheduler fields left for the
  // caller). Only meaningful at an update boundary.
  TrainState snapshot_opt() const {
    if (micros_ != 0)
      throw ConfigError("training state snapshot inside an accumulation window");
    TrainState s;
    s.updates = t_;
    for (const auto& t : m_) s.m.push_back(Tensor<double>::cast(t));
    for (const auto& t : v_) s.v.push_back(Tensor<double>::cast(t));
    return s;
  }

  void restore_opt(const TrainState& s) {
    if (s.m.size() != m_.size() || s.v.size() != v_.size())
      throw ConfigError("training state does not match the model layout");
    for (std::size_t i = 0; i < m_.size(); ++i) {
      if (s.m[i].size() != m_[i].size() || s.v[i].size() != v_[i].size())
        throw ConfigError("training state does not match the model layout");
      for (std::size_t k = 0; k < m_[i].size(); ++k) {
        m_[i].v[k] = static_cast<Real>(s.m[i].v[k]);
        v_[i].v[k] = static_cast<Real>(s.v[i].v[k]);
      }
    }
    t_ = s.updates;
  }

 private:
  ModelParams<Real> p_;
  TrainConfig cfg_;
  std::vector<Tensor<Real>> m_, v_, pending_;
  std::uint64_t t_ = 0;     // updates applied
  std::size_t micros_ = 0;  // micro-batches in the pending accumulator
};

struct TrainResult {
  std::uint64_t updates = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double final_lr = 0;
  std::string last_checkpoint;
  std::string metrics_path;
};

// Full run: parameter init (or resume), counter-seeded batch generation,
// accumulation, scheduling, metrics log, and checkpoints in run_dir.
//   - ckpt_step0 is always written for a fresh run, ckpt_step{k} every
//     checkpoint_every updates and at max_steps.
//   - metrics.jsonl gets one line per update (format_metrics_line).
//   - resume continues bit-identically in f64 from a ckpt_step{k}.gsck whose
//     .gsts sibling holds the optimizer state.
//   - a non-finite loss/gradient dumps diverged.gsck + diverged.json (with the
//     offending batch seed) into run_dir and rethrows NumericError.
TrainResult run_training(const TrainConfig& cfg, const std::string& run_dir,
                         const std::string& resume_checkpoint = "");

}  // namespace gridssl
