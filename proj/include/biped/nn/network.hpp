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

// Network bodies with hand-written reverse mode. Batches are column-major:
// every column is one sample. Parameters live in one flat vector owned by the
// caller; bodies only hold offsets into it.
//
// Both bodies expose the same sequence interface. A feedforward body treats
// each time step independently; the recurrent body threads its carry (h, c
// per layer) through the steps.

#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "biped/common.hpp"

namespace biped::nn {

enum class Architecture { kFeedForward, kFeedForwardHistory, kRecurrent };

inline const char* ToString(Architecture a) {
  switch (a) {
    case Architecture::kFeedForward: return "ff";
    case Architecture::kFeedForwardHistory: return "ff-history";
    case Architecture::kRecurrent: return "lstm";
  }
  return "?";
}

inline Architecture ParseArchitecture(const std::string& s) {
  if (s == "ff") return Architecture::kFeedForward;
  if (s == "ff-history") return Architecture::kFeedForwardHistory;
  if (s == "lstm") return Architecture::kRecurrent;
  throw ConfigError("network.architecture: expected ff, ff-history or lstm, got '" + s + "'");
}

struct NetworkSpec {
  Architecture arch = Architecture::kFeedForward;
  int observation_size = kObservationSize;
  std::vector<int> hidden = {256, 256};
  int action_size = kActionSize;
  int history = 4;  // observations per input for the history variant

  static NetworkSpec Default(Architecture a) {
    NetworkSpec s;
    s.arch = a;
    if (a == Architecture::kRecurrent) s.hidden = {128, 128};
    return s;
  }

  int InputWidth() const {
    return arch == Architecture::kFeedForwardHistory ? observation_size * history
                                                     : observation_size;
  }
  bool recurrent() const { return arch == Architecture::kRecurrent; }

  void Validate() const {
    if (observation_size <= 0) throw ConfigError("network.observation_size: must be > 0");
    if (action_size <= 0) throw ConfigError("network.action_size: must be > 0");
    if (hidden.empty()) throw ConfigError("network.hidden: need at least one layer");
    for (int h : hidden) {
      if (h <= 0) throw ConfigError("network.hidden: widths must be > 0");
    }
    if (arch == Architecture::kFeedForwardHistory && history < 1) {
      throw ConfigError("network.history: must be >= 1");
    }
  }

  bool operator==(const NetworkSpec&) const = default;
};

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Hands out consecutive ranges of the flat parameter vector.
class ParamAllocator {
 public:
  int Take(int n) {
    const int at = size_;
    size_ += n;
    return at;
  }
  int size() const { return size_; }

 private:
  int size_ = 0;
};

struct DenseSlot {
  int rows = 0;
  int cols = 0;
  int weight = 0;  // offset of the column-major rows x cols block
  int bias = 0;

  static DenseSlot Allocate(int rows, int cols, ParamAllocator& alloc) {
    DenseSlot d{rows, cols, 0, 0};
    d.weight = alloc.Take(rows * cols);
    d.bias = alloc.Take(rows);
    return d;
  }

  template <typename S>
  Eigen::Map<const Matrix<S>> W(const S* p) const {
    return {p + weight, rows, cols};
  }
  template <typename S>
  Eigen::Map<Matrix<S>> W(S* p) const {
    return {p + weight, rows, cols};
  }
  template <typename S>
  Eigen::Map<const Vector<S>> b(const S* p) const {
    return {p + bias, rows};
  }
  template <typename S>
  Eigen::Map<Vector<S>> b(S* p) const {
    return {p + bias, rows};
  }
};

/// Orthogonal rows/columns scaled by `gain`.
template <typename S>
void OrthogonalInit(Eigen::Map<Matrix<S>> w, double gain, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const int r = static_cast<int>(w.rows());
  const int c = static_cast<int>(w.cols());
  const int big = std::max(r, c);
  const int small = std::min(r, c);
  Eigen::MatrixXd g(big, small);
  for (int j = 0; j < small; ++j) {
    for (int i = 0; i < big; ++i) g(i, j) = n(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (int j = 0; j < small; ++j) {
    if (d[j] < 0) q.col(j) *= -1.0;
  }
  if (r >= c) {
    w = (gain * q).cast<S>();
  } else {
    w = (gain * q.transpose()).cast<S>();
  }
}

template <typename S>
struct Carry {
  std::vector<Matrix<S>> h;  // per layer, hidden x batch
  std::vector<Matrix<S>> c;

  bool empty() const { return h.empty(); }
  int batch() const { return h.empty() ? 0 : static_cast<int>(h[0].cols()); }
};

/// Linear layers with ReLU between them and a linear output.
template <typename S>
class MlpBody {
 public:
  struct Cache {
    // activations[t][l] is the input to layer l at step t.
    std::vector<std::vector<Matrix<S>>> activations;
  };

  MlpBody() = default;
  MlpBody(int input, const std::vector<int>& hidden, int output, ParamAllocator& alloc) {
    int in = input;
    for (int h : hidden) {
      layers_.push_back(DenseSlot::Allocate(h, in, alloc));
      in = h;
    }
    layers_.push_back(DenseSlot::Allocate(output, in, alloc));
  }

  void Init(S* p, double output_gain, Rng& rng) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const bool last = l + 1 == layers_.size();
      OrthogonalInit<S>(layers_[l].W(p), last ? output_gain : std::sqrt(2.0), rng);
      layers_[l].b(p).setZero();
    }
  }

  Carry<S> InitialCarry(int) const { return {}; }

  Matrix<S> Step(const S* p, const Matrix<S>& x, std::vector<Matrix<S>>* acts) const {
    Matrix<S> a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const DenseSlot& d = layers_[l];
      Matrix<S> z = d.W(p) * a;
      z.colwise() += d.b(p);
      if (acts) acts->push_back(std::move(a));
      if (l + 1 < layers_.size()) z = z.cwiseMax(S(0));
      a = std::move(z);
    }
    return a;
  }

  void Forward(const S* p, const std::vector<Matrix<S>>& xs, Carry<S>&, std::vector<Matrix<S>>& ys,
               Cache* cache) const {
    ys.resize(xs.size());
    if (cache) cache->activations.assign(xs.size(), {});
    for (std::size_t t = 0; t < xs.size(); ++t) {
      ys[t] = Step(p, xs[t], cache ? &cache->activations[t] : nullptr);
    }
  }

  void Backward(const S* p, const Cache& cache, const std::vector<Matrix<S>>& dys, S* g) const {
    for (std::size_t t = 0; t < dys.size(); ++t) {
      const auto& acts = cache.activations[t];
      Matrix<S> dz = dys[t];
      for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        const DenseSlot& d = layers_[l];
        d.W(g).noalias() += dz * acts[l].transpose();
        d.b(g) += dz.rowwise().sum();
        if (l == 0) break;
        Matrix<S> da = d.W(p).transpose() * dz;
        // acts[l] is the ReLU output of layer l - 1.
        dz = (acts[l].array() > S(0)).select(da, S(0));
      }
    }
  }

  const std::vector<DenseSlot>& layers() const { return layers_; }

 private:
  std::vector<DenseSlot> layers_;
};

/// Stacked LSTM layers (gate order i, f, g, o) and a linear output layer.
template <typename S>
class LstmBody {
 public:
  struct LayerSlot {
    int hidden = 0;
    DenseSlot input;      // 4H x in, carries the gate bias
    int recurrent = 0;    // offset of 4H x H
  };

  struct StepCache {
    std::vector<Matrix<S>> x, h_prev, c_prev, i, f, g, o, tanh_c;
  };
  struct Cache {
    std::vector<StepCache> steps;
    std::vector<Matrix<S>> top;  // top hidden state per step
  };

  LstmBody() = default;
  LstmBody(int input, const std::vector<int>& hidden, int output, ParamAllocator& alloc) {
    int in = input;
    for (int h : hidden) {
      LayerSlot l;
      l.hidden = h;
      l.input = DenseSlot::Allocate(4 * h, in, alloc);
      l.recurrent = alloc.Take(4 * h * h);
      layers_.push_back(l);
      in = h;
    }
    head_ = DenseSlot::Allocate(output, in, alloc);
  }

  void Init(S* p, double output_gain, Rng& rng) const {
    for (const LayerSlot& l : layers_) {
      const int h = l.hidden;
      auto wx = l.input.W(p);
      auto wh = Wh(p, l);
      for (int gate = 0; gate < 4; ++gate) {
        Matrix<S> bx(h, wx.cols()), bh(h, h);
        Eigen::Map<Matrix<S>> mx(bx.data(), h, wx.cols()), mh(bh.data(), h, h);
        OrthogonalInit<S>(mx, 1.0, rng);
        OrthogonalInit<S>(mh, 1.0, rng);
        wx.middleRows(gate * h, h) = bx;
        wh.middleRows(gate * h, h) = bh;
      }
      auto b = l.input.b(p);
      b.setZero();
      b.segment(h, h).setOnes();  // forget gate starts open
    }
    OrthogonalInit<S>(head_.W(p), output_gain, rng);
    head_.b(p).setZero();
  }

  Carry<S> InitialCarry(int batch) const {
    Carry<S> c;
    for (const LayerSlot& l : layers_) {
      c.h.push_back(Matrix<S>::Zero(l.hidden, batch));
      c.c.push_back(Matrix<S>::Zero(l.hidden, batch));
    }
    return c;
  }

  void Forward(const S* p, const std::vector<Matrix<S>>& xs, Carry<S>& carry,
               std::vector<Matrix<S>>& ys, Cache* cache) const {
    const int batch = xs.empty() ? 0 : static_cast<int>(xs[0].cols());
    if (carry.empty()) carry = InitialCarry(batch);
    ys.resize(xs.size());
    if (cache) {
      cache->steps.assign(xs.size(), {});
      cache->top.assign(xs.size(), {});
    }
    for (std::size_t t = 0; t < xs.size(); ++t) {
      StepCache* sc = cache ? &cache->steps[t] : nullptr;
      Matrix<S> x = xs[t];
      for (std::size_t k = 0; k < layers_.size(); ++k) {
        const LayerSlot& l = layers_[k];
        const int h = l.hidden;
        Matrix<S> z = l.input.W(p) * x;
        z.noalias() += Wh(p, l) * carry.h[k];
        z.colwise() += l.input.b(p);
        Matrix<S> i = Sigmoid(z.topRows(h));
        Matrix<S> f = Sigmoid(z.middleRows(h, h));
        Matrix<S> g = z.middleRows(2 * h, h).array().tanh().matrix();
        Matrix<S> o = Sigmoid(z.bottomRows(h));
        Matrix<S> c = f.cwiseProduct(carry.c[k]) + i.cwiseProduct(g);
        Matrix<S> tc = c.array().tanh().matrix();
        Matrix<S> hn = o.cwiseProduct(tc);
        if (sc) {
          sc->x.push_back(std::move(x));
          sc->h_prev.push_back(carry.h[k]);
          sc->c_prev.push_back(carry.c[k]);
          sc->i.push_back(std::move(i));
          sc->f.push_back(std::move(f));
          sc->g.push_back(std::move(g));
          sc->o.push_back(std::move(o));
          sc->tanh_c.push_back(tc);
        }
        carry.c[k] = std::move(c);
        carry.h[k] = hn;
        x = std::move(hn);
      }
      ys[t] = head_.W(p) * x;
      ys[t].colwise() += head_.b(p);
      if (cache) cache->top[t] = std::move(x);
    }
  }

  /// Truncated at the sequence start: the initial carry is a constant.
  void Backward(const S* p, const Cache& cache, const std::vector<Matrix<S>>& dys, S* g) const {
    const int n = static_cast<int>(layers_.size());
    const int T = static_cast<int>(dys.size());
    if (T == 0) return;
    const int batch = static_cast<int>(dys[0].cols());
    std::vector<Matrix<S>> dh_next(n), dc_next(n);
    for (int k = 0; k < n; ++k) {
      dh_next[k] = Matrix<S>::Zero(layers_[k].hidden, batch);
      dc_next[k] = Matrix<S>::Zero(layers_[k].hidden, batch);
    }
    for (int t = T - 1; t >= 0; --t) {
      const StepCache& sc = cache.steps[t];
      head_.W(g).noalias() += dys[t] * cache.top[t].transpose();
      head_.b(g) += dys[t].rowwise().sum();
      Matrix<S> dh = head_.W(p).transpose() * dys[t];
      for (int k = n - 1; k >= 0; --k) {
        const LayerSlot& l = layers_[k];
        const int h = l.hidden;
        dh += dh_next[k];
        const auto& o = sc.o[k].array();
        const auto& tc = sc.tanh_c[k].array();
        const auto& i = sc.i[k].array();
        const auto& f = sc.f[k].array();
        const auto& gg = sc.g[k].array();
        Matrix<S> dc =
            (dh.array() * o * (S(1) - tc * tc)).matrix() + dc_next[k];
        Matrix<S> dz(4 * h, batch);
        dz.topRows(h) = (dc.array() * gg * i * (S(1) - i)).matrix();
        dz.middleRows(h, h) = (dc.array() * sc.c_prev[k].array() * f * (S(1) - f)).matrix();
        dz.middleRows(2 * h, h) = (dc.array() * i * (S(1) - gg * gg)).matrix();
        dz.bottomRows(h) = (dh.array() * tc * o * (S(1) - o)).matrix();
        dc_next[k] = (dc.array() * f).matrix();
        l.input.W(g).noalias() += dz * sc.x[k].transpose();
        Wh(g, l).noalias() += dz * sc.h_prev[k].transpose();
        l.input.b(g) += dz.rowwise().sum();
        dh_next[k].noalias() = Wh(p, l).transpose() * dz;
        if (k > 0) dh = l.input.W(p).transpose() * dz;
      }
    }
  }

  const std::vector<LayerSlot>& layers() const { return layers_; }

 private:
  static Matrix<S> Sigmoid(const Matrix<S>& z) {
    return (S(1) / (S(1) + (-z.array()).exp())).matrix();
  }
  static Eigen::Map<const Matrix<S>> Wh(const S* p, const LayerSlot& l) {
    return {p + l.recurrent, 4 * l.hidden, l.hidden};
  }
  static Eigen::Map<Matrix<S>> Wh(S* p, const LayerSlot& l) {
    return {p + l.recurrent, 4 * l.hidden, l.hidden};
  }

  std::vector<LayerSlot> layers_;
  DenseSlot head_;
};

/// One network (actor or critic) of either family behind a common interface.
template <typename S>
class Body {
 public:
  struct Cache {
    typename MlpBody<S>::Cache mlp;
    typename LstmBody<S>::Cache lstm;
  };

  Body() = default;
  Body(const NetworkSpec& spec, int output, ParamAllocator& alloc) : recurrent_(spec.recurrent()) {
    if (recurrent_) {
      lstm_ = LstmBody<S>(spec.InputWidth(), spec.hidden, output, alloc);
    } else {
      mlp_ = MlpBody<S>(spec.InputWidth(), spec.hidden, output, alloc);
    }
  }

  void Init(S* p, double output_gain, Rng& rng) const {
    recurrent_ ? lstm_.Init(p, output_gain, rng) : mlp_.Init(p, output_gain, rng);
  }

  Carry<S> InitialCarry(int batch) const {
    return recurrent_ ? lstm_.InitialCarry(batch) : Carry<S>{};
  }

  void Forward(const S* p, const std::vector<Matrix<S>>& xs, Carry<S>& carry,
               std::vector<Matrix<S>>& ys, Cache* cache) const {
    if (recurrent_) {
      lstm_.Forward(p, xs, carry, ys, cache ? &cache->lstm : nullptr);
    } else {
      mlp_.Forward(p, xs, carry, ys, cache ? &cache->mlp : nullptr);
    }
  }

  void Backward(const S* p, const Cache& cache, const std::vector<Matrix<S>>& dys, S* g) const {
    recurrent_ ? lstm_.Backward(p, cache.lstm, dys, g) : mlp_.Backward(p, cache.mlp, dys, g);
  }

  bool recurrent() const { return recurrent_; }

 private:
  bool recurrent_ = false;
  MlpBody<S> mlp_;
  LstmBody<S> lstm_;
};

}  // namespace biped::nn
