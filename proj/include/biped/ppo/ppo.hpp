// Copyright 2026 The biped_sim2real Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Clipped-surrogate PPO update with value regression and the mirror
// symmetry term, over flat minibatches (feed-forward) or fixed-length
// episode chunks (recurrent).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "biped/config_file.hpp"
#include "biped/nn/adam.hpp"
#include "biped/ppo/mirror.hpp"
#include "biped/ppo/rollout.hpp"

namespace biped::ppo {

struct PpoConfig {
  double learning_rate = 1e-4;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  int epochs = 4;
  int minibatch = 512;  // steps
  int rollouts_per_batch = 64;
  int max_rollout_length = 400;
  double symmetry_weight = 4.0;
  double entropy_weight = 0.0;
  double value_weight = 0.5;
  double max_grad_norm = 1.0;  // per network; <= 0 disables
  int chunk_length = 40;       // recurrent BPTT window
  std::int64_t sample_budget = 5'000'000;

  void Validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate: must be > 0");
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip: must be in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma: must be in (0, 1]");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("ppo.lambda: must be in (0, 1]");
    if (epochs <= 0) throw ConfigError("ppo.epochs: must be > 0");
    if (minibatch <= 0) throw ConfigError("ppo.minibatch: must be > 0");
    if (rollouts_per_batch <= 0) throw ConfigError("ppo.rollouts_per_batch: must be > 0");
    if (max_rollout_length <= 0) throw ConfigError("ppo.max_rollout_length: must be > 0");
    if (!(symmetry_weight >= 0.0)) throw ConfigError("ppo.symmetry_weight: must be >= 0");
    if (!(entropy_weight >= 0.0)) throw ConfigError("ppo.entropy_weight: must be >= 0");
    if (!(value_weight > 0.0)) throw ConfigError("ppo.value_weight: must be > 0");
    if (chunk_length <= 0) throw ConfigError("ppo.chunk_length: must be > 0");
    if (sample_budget <= 0) throw ConfigError("ppo.sample_budget: must be > 0");
  }
};

inline PpoConfig LoadPpoConfig(const KeyValueConfig& cfg) {
  PpoConfig p;
  p.learning_rate = cfg.GetDouble("ppo.learning_rate", p.learning_rate);
  p.clip = cfg.GetDouble("ppo.clip", p.clip);
  p.gamma = cfg.GetDouble("ppo.gamma", p.gamma);
  p.lambda = cfg.GetDouble("ppo.lambda", p.lambda);
  p.epochs = static_cast<int>(cfg.GetInt("ppo.epochs", p.epochs));
  p.minibatch = static_cast<int>(cfg.GetInt("ppo.minibatch", p.minibatch));
  p.rollouts_per_batch =
      static_cast<int>(cfg.GetInt("ppo.rollouts_per_batch", p.rollouts_per_batch));
  p.max_rollout_length =
      static_cast<int>(cfg.GetInt("ppo.max_rollout_length", p.max_rollout_length));
  p.symmetry_weight = cfg.GetDouble("ppo.symmetry_weight", p.symmetry_weight);
  p.entropy_weight = cfg.GetDouble("ppo.entropy_weight", p.entropy_weight);
  p.value_weight = cfg.GetDouble("ppo.value_weight", p.value_weight);
  p.max_grad_norm = cfg.GetDouble("ppo.max_grad_norm", p.max_grad_norm);
  p.chunk_length = static_cast<int>(cfg.GetInt("ppo.chunk_length", p.chunk_length));
  p.sample_budget = cfg.GetInt("ppo.sample_budget", p.sample_budget);
  p.Validate();
  return p;
}

/// Surrogate objective min(r A, clip(r) A) for one sample, and its
/// derivative with respect to log pi (zero where the clipped branch is active).
struct Surrogate {
  double value;
  double dlogp;
  bool clipped;
};

inline Surrogate ClippedSurrogate(double ratio, double advantage, double clip) {
  const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  const double unclipped = ratio * advantage;
  const double bounded = clipped_ratio * advantage;
  if (unclipped <= bounded) return {unclipped, unclipped, false};
  return {bounded, 0.0, true};
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double symmetry_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
  bool skipped = false;
  std::string message;
};

/// One minibatch: a list of steps, either independent (feed-forward) or
/// grouped into chunks of consecutive steps of one episode.
struct Chunk {
  int start = 0;   // first step index in the batch
  int length = 0;  // valid steps
  int carry = -1;  // index into the batch carries (recurrent)
};

class PpoUpdater {
 public:
  PpoUpdater(nn::ActorCritic<float>& net, const PpoConfig& cfg, MirrorSpec mirror)
      : net_(net),
        cfg_(cfg),
        mirror_(std::move(mirror)),
        adam_(net.NumParams(), cfg.learning_rate) {}

  const PpoConfig& config() const { return cfg_; }

  /// Runs the configured epochs over `batch`. `advantages` must already be
  /// normalized. On a non-finite loss or gradient the parameters and the
  /// optimizer state are restored to their values before the call.
  UpdateStats Update(const RolloutBatch& batch, const std::vector<double>& advantages,
                     const std::vector<double>& returns, Rng& rng) {
    const Vector<float> saved_params = net_.params();
    const nn::Adam<float> saved_adam = adam_;
    UpdateStats total;
    const std::vector<Chunk> chunks = MakeChunks(batch);
    const int per_minibatch = net_.spec().recurrent()
                                  ? std::max(1, cfg_.minibatch / cfg_.chunk_length)
                                  : cfg_.minibatch;
    std::vector<int> order(chunks.size());
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t from = 0; from < order.size(); from += per_minibatch) {
        const std::size_t to = std::min(order.size(), from + per_minibatch);
        std::vector<const Chunk*> mb;
        for (std::size_t i = from; i < to; ++i) mb.push_back(&chunks[order[i]]);
        const UpdateStats s = Minibatch(batch, advantages, returns, mb);
        if (s.skipped) {
          net_.params() = saved_params;
          adam_ = saved_adam;
          total.skipped = true;
          total.message = s.message;
          return total;
        }
        total.policy_loss += s.policy_loss;
        total.value_loss += s.value_loss;
        total.symmetry_loss += s.symmetry_loss;
        total.entropy += s.entropy;
        total.approx_kl += s.approx_kl;
        total.clip_fraction += s.clip_fraction;
        total.grad_norm += s.grad_norm;
        ++total.minibatches;
      }
    }
    if (total.minibatches > 0) {
      const double n = total.minibatches;
      total.policy_loss /= n;
      total.value_loss /= n;
      total.symmetry_loss /= n;
      total.entropy /= n;
      total.approx_kl /= n;
      total.clip_fraction /= n;
      total.grad_norm /= n;
    }
    return total;
  }

  /// Losses and the unclipped gradient of the total loss for one minibatch.
  UpdateStats LossGradient(const RolloutBatch& batch, const std::vector<double>& advantages,
                           const std::vector<double>& returns, const std::vector<const Chunk*>& mb,
                           Vector<float>& grad) {
    const bool recurrent = net_.spec().recurrent();
    const int n = static_cast<int>(mb.size());
    const int steps = recurrent ? batch.chunk_length : 1;
    const int width = batch.input_width;

    // Time-major inputs and a validity mask (padding past a chunk's end).
    std::vector<Matrix<float>> xs(steps, Matrix<float>::Zero(width, n));
    std::vector<RowVector> mask(steps, RowVector::Zero(n));
    for (int b = 0; b < n; ++b) {
      for (int t = 0; t < mb[b]->length; ++t) {
        xs[t].col(b) = batch.inputs.col(mb[b]->start + t);
        mask[t](b) = 1.0f;
      }
    }
    typename nn::ActorCritic<float>::State state;
    if (recurrent) {
      std::vector<const CarryColumns*> a, c;
      for (const Chunk* ch : mb) {
        a.push_back(&batch.actor_carries[ch->carry]);
        c.push_back(&batch.critic_carries[ch->carry]);
      }
      state.actor = StackCarries(a);
      state.critic = StackCarries(c);
    } else {
      state = net_.InitialState(n);
    }

    typename nn::ActorCritic<float>::Cache cache;
    std::vector<Matrix<float>> means, values;
    net_.Forward(xs, state, means, values, &cache);

    const Vector<float> log_std = net_.LogStd();
    const Eigen::VectorXd sigma = log_std.cast<double>().array().exp();
    double count = 0.0;
    for (const auto& m : mask) count += m.sum();

    UpdateStats s;
    std::vector<Matrix<float>> dmeans(steps, Matrix<float>::Zero(kActionSize, n));
    std::vector<Matrix<float>> dvalues(steps, Matrix<float>::Zero(1, n));
    Eigen::VectorXd dlog_std = Eigen::VectorXd::Zero(kActionSize);
    for (int b = 0; b < n; ++b) {
      for (int t = 0; t < mb[b]->length; ++t) {
        const int i = mb[b]->start + t;
        const Eigen::VectorXd mu = means[t].col(b).cast<double>();
        const Eigen::VectorXd z =
            (batch.actions.col(i).cast<double>() - mu).cwiseQuotient(sigma);
        const double logp = -log_std.cast<double>().sum() - 0.5 * z.squaredNorm() -
                            0.5 * std::log(2.0 * M_PI) * kActionSize;
        const double log_ratio = logp - batch.log_probs[i];
        const double ratio = std::exp(log_ratio);
        const Surrogate sur = ClippedSurrogate(ratio, advantages[i], cfg_.clip);
        s.policy_loss -= sur.value;
        s.clip_fraction += sur.clipped ? 1.0 : 0.0;
        s.approx_kl += (ratio - 1.0) - log_ratio;
        // d(-surrogate)/d mean and d log_std through log pi.
        const double g = -sur.dlogp / count;
        dmeans[t].col(b) = (g * z.cwiseQuotient(sigma)).cast<float>();
        dlog_std += g * (z.array().square() - 1.0).matrix();

        const double v = values[t](0, b);
        const double err = v - returns[i];
        s.value_loss += err * err;
        dvalues[t](0, b) = static_cast<float>(2.0 * cfg_.value_weight * err / count);
      }
    }
    s.policy_loss /= count;
    s.value_loss /= count;
    s.clip_fraction /= count;
    s.approx_kl /= count;
    s.entropy = static_cast<double>(nn::GaussianEntropy<float>(log_std));

    grad = Vector<float>::Zero(net_.NumParams());
    const bool symmetry = cfg_.symmetry_weight > 0.0;
    // Feed-forward: the unmirrored symmetry branch reuses the forward pass
    // above, so only the mirrored one runs again.
    typename nn::Body<float>::Cache mirror_cache;
    Matrix<float> sym_grad;
    if (symmetry && !recurrent) {
      nn::Carry<float> carry = net_.InitialState(n).actor;
      std::vector<Matrix<float>> mirrored;
      net_.ForwardActor({mirror_.observation.Apply(xs[0])}, carry, mirrored, &mirror_cache);
      const Matrix<float> diff = mirror_.action.Apply(means[0]) - mirrored[0];
      s.symmetry_loss = static_cast<double>(diff.squaredNorm()) / n;
      sym_grad = static_cast<float>(2.0 * cfg_.symmetry_weight / n) * diff;
      dmeans[0] += mirror_.action.Apply(sym_grad);
    }
    net_.Backward(cache, dmeans, dvalues, grad);
    dlog_std.array() -= cfg_.entropy_weight;
    grad.segment(net_.log_std_offset(), kActionSize) +=
        dlog_std.cast<float>().cwiseProduct(net_.LogStdPassMask());
    if (symmetry && !recurrent) {
      net_.BackwardActor(mirror_cache, {Matrix<float>(-sym_grad)}, grad);
    } else if (symmetry) {
      // Both branches from a zero carry: the mirrored branch has no stored one.
      s.symmetry_loss = SymmetryLoss<float>(net_, mirror_, xs, mask, cfg_.symmetry_weight, &grad);
    }

    const double total =
        s.policy_loss + cfg_.value_weight * s.value_loss + cfg_.symmetry_weight * s.symmetry_loss -
        cfg_.entropy_weight * s.entropy;
    if (!std::isfinite(total) || !grad.allFinite()) {
      s.skipped = true;
      s.message = "non-finite loss or gradient; update discarded";
    }
    return s;
  }

 private:
  std::vector<Chunk> MakeChunks(const RolloutBatch& batch) const {
    std::vector<Chunk> chunks;
    if (!net_.spec().recurrent()) {
      chunks.reserve(batch.steps());
      for (int t = 0; t < batch.steps(); ++t) chunks.push_back({t, 1, -1});
      return chunks;
    }
    // Chunks never cross an episode boundary; each starts at a stored carry.
    std::size_t c = 0;
    for (const EpisodeInfo& e : batch.episodes) {
      const int end = e.segment.start + e.segment.length;
      for (; c < batch.chunk_starts.size() && batch.chunk_starts[c] < end; ++c) {
        const int start = batch.chunk_starts[c];
        chunks.push_back({start, std::min(batch.chunk_length, end - start), static_cast<int>(c)});
      }
    }
    return chunks;
  }

  UpdateStats Minibatch(const RolloutBatch& batch, const std::vector<double>& advantages,
                        const std::vector<double>& returns, const std::vector<const Chunk*>& mb) {
    Vector<float> grad;
    UpdateStats s = LossGradient(batch, advantages, returns, mb, grad);
    if (s.skipped) return s;
    // Actor (with log-std) and critic are clipped separately so the value
    // regression cannot swamp the policy step.
    const int critic = net_.critic_offset();
    const int critic_len = net_.log_std_offset() - critic;
    Vector<float> actor_grad(critic + kActionSize);
    actor_grad << grad.head(critic), grad.tail(kActionSize);
    Vector<float> critic_grad = grad.segment(critic, critic_len);
    const double na = nn::ClipGradNorm(actor_grad, cfg_.max_grad_norm);
    const double nc = nn::ClipGradNorm(critic_grad, cfg_.max_grad_norm);
    s.grad_norm = std::sqrt(na * na + nc * nc);
    grad.head(critic) = actor_grad.head(critic);
    grad.tail(kActionSize) = actor_grad.tail(kActionSize);
    grad.segment(critic, critic_len) = critic_grad;
    adam_.Step(net_.params(), grad);
    return s;
  }

  nn::ActorCritic<float>& net_;
  PpoConfig cfg_;
  MirrorSpec mirror_;
  nn::Adam<float> adam_;
};

}  // namespace biped::ppo
