#pragma once
// Training harness: a two-layer toy CNN in compressed and plain editions,
// classical-momentum SGD, and per-epoch history over the full training set.
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "autograd.hpp"
#include "data.hpp"
#include "layer.hpp"
#include "plan.hpp"
#include "prng.hpp"
#include "tensor.hpp"

namespace compconv {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  long batch_size = 32;
  long epochs = 20;
  std::uint64_t seed = 0;
  // (epoch, factor) pairs; the factor multiplies the learning rate at the
  // start of that 1-based epoch.
  std::vector<std::pair<long, double>> lr_schedule;
};

struct EpochStats {
  long epoch = 0;  // 1-based
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Small two-stage CNN for the stripe task: conv(1->12) and conv(12->24),
// each followed by relu and 2x2 pooling, then global average pooling into a
// two-way classifier.  The compressed edition replaces both convolutions
// with compact layers (depth 2, then depth 3).
struct ToyNet {
  bool compressed = false;
  CompConvLayer l1, l2;
  Tensor fc_w, fc_b;
};

inline ToyNet make_toy_net(bool compressed, std::uint64_t seed, long classes = 2) {
  if (classes < 2) throw std::invalid_argument("make_toy_net: need at least two classes");
  ToyNet net;
  net.compressed = compressed;
  HostSpec host;  // 3x3, stride 1, same padding
  CompPlan p1 = compressed ? build_plan(1, 12, DepthPolicy::global(2)) : vanilla_plan(1, 12);
  CompPlan p2 = compressed ? build_plan(12, 24, DepthPolicy::global(3)) : vanilla_plan(12, 24);
  net.l1 = init_layer(p1, host, InitConfig::he_normal(), mix_seed(seed, 100));
  net.l2 = init_layer(p2, host, InitConfig::he_normal(), mix_seed(seed, 101));

  SplitMix64 g = derive_substream(seed, Stream::weight_init, 999);
  double std_fc = std::sqrt(2.0 / 24.0);
  net.fc_w = Tensor(classes, 24, 1, 1);
  for (double& v : net.fc_w.data) v = std_fc * g.next_normal();
  net.fc_b = Tensor(1, classes, 1, 1);  // zero bias
  return net;
}

namespace detail {

inline std::vector<Tensor*> net_params(ToyNet& net) {
  std::vector<Tensor*> ps;
  for (CompConvLayer* l : {&net.l1, &net.l2}) {
    ps.push_back(&l->inner_weights);
    for (Tensor& t : l->square_weights) ps.push_back(&t);
    if (l->plan.tail_channels > 0) ps.push_back(&l->tail_weights);
  }
  ps.push_back(&net.fc_w);
  ps.push_back(&net.fc_b);
  return ps;
}

// Builds the forward graph; leaf ids come back in net_params order.
inline long net_forward(Graph& g, const ToyNet& net, const Tensor& batch,
                        std::vector<long>* param_ids) {
  long x = g.leaf(batch, false);
  GraphLayer l1 = graph_compconv(g, net.l1, x);
  long h = g.maxpool(g.relu(l1.out));
  GraphLayer l2 = graph_compconv(g, net.l2, h);
  long h2 = g.maxpool(g.relu(l2.out));
  long feat = g.gap(h2);
  long w = g.leaf(net.fc_w, true);
  long b = g.leaf(net.fc_b, true);
  if (param_ids) {
    param_ids->insert(param_ids->end(), l1.params.begin(), l1.params.end());
    param_ids->insert(param_ids->end(), l2.params.begin(), l2.params.end());
    param_ids->push_back(w);
    param_ids->push_back(b);
  }
  return g.dense(feat, w, b);
}

}  // namespace detail

// Mean loss and argmax accuracy over a dataset (forward only, batched).
inline EvalResult evaluate(const ToyNet& net, const Dataset& ds, long batch_size = 64) {
  ScopedFastMode fast;
  EvalResult res;
  long n = ds.size();
  if (n == 0) return res;
  std::vector<std::size_t> order(static_cast<std::size_t>(n), 0);
  for (long i = 0; i < n; ++i) order[std::size_t(i)] = std::size_t(i);
  double loss_sum = 0.0;
  long correct = 0;
  for (long at = 0; at < n; at += batch_size) {
    long count = std::min(batch_size, n - at);
    auto [batch, labels] = take_batch(ds, order, std::size_t(at), std::size_t(count));
    Graph g;
    long logits = detail::net_forward(g, net, batch, nullptr);
    const Tensor& z = g.value(logits);
    for (long i = 0; i < count; ++i) {
      long best = 0;
      for (long c = 1; c < z.shape.c; ++c)
        if (z.at(i, c, 0, 0) > z.at(i, best, 0, 0)) best = c;
      if (best == labels[std::size_t(i)]) ++correct;
    }
    long loss_node = g.softmax_ce(logits, labels);
    loss_sum += g.value(loss_node).at(0, 0, 0, 0) * double(count);
  }
  res.loss = loss_sum / double(n);
  res.accuracy = double(correct) / double(n);
  return res;
}

// Minibatch SGD with classical momentum:
//   v <- momentum * v - lr * grad;  w <- w + v
// Shuffles per epoch, applies the schedule at epoch start, and records the
// full-training-set loss and accuracy at the end of every epoch.
inline std::vector<EpochStats> train(ToyNet& net, const Dataset& ds, const TrainConfig& cfg) {
  if (cfg.batch_size <= 0 || cfg.epochs < 0)
    throw std::invalid_argument("train: batch_size must be positive and epochs non-negative");
  std::vector<Tensor*> params = detail::net_params(net);
  std::vector<Tensor> velocity;
  for (Tensor* p : params) velocity.emplace_back(p->shape.n, p->shape.c, p->shape.h, p->shape.w);

  std::vector<EpochStats> history;
  long n = ds.size();
  std::vector<std::size_t> order(static_cast<std::size_t>(n), 0);
  for (long i = 0; i < n; ++i) order[std::size_t(i)] = std::size_t(i);

  double lr = cfg.lr;
  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (const auto& [at_epoch, factor] : cfg.lr_schedule)
      if (at_epoch == epoch) lr *= factor;

    SplitMix64 rng = derive_substream(cfg.seed, Stream::epoch_shuffle, std::uint64_t(epoch));
    fisher_yates(order, rng);

    {
      ScopedFastMode fast;
      for (long at = 0; at < n; at += cfg.batch_size) {
        long count = std::min(cfg.batch_size, n - at);
        auto [batch, labels] = take_batch(ds, order, std::size_t(at), std::size_t(count));
        Graph g;
        std::vector<long> ids;
        long logits = detail::net_forward(g, net, batch, &ids);
        long loss_node = g.softmax_ce(logits, labels);
        if (!std::isfinite(g.value(loss_node).at(0, 0, 0, 0)))
          throw std::runtime_error(
              "train: loss became non-finite (epoch " + std::to_string(epoch) +
              "); lower the learning rate");
        g.backward(loss_node);
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Tensor& grad = g.grad(ids[p]);
          Tensor& v = velocity[p];
          Tensor& w = *params[p];
          for (std::size_t i = 0; i < w.data.size(); ++i) {
            v.data[i] = cfg.momentum * v.data[i] - lr * grad.data[i];
            w.data[i] += v.data[i];
          }
        }
      }
    }

    EvalResult eval = evaluate(net, ds, cfg.batch_size);
    history.push_back({epoch, eval.loss, eval.accuracy});
  }
  return history;
}

// Persists a trained toy net as one weight blob per layer plus the two
// classifier tensors, all under a common path prefix.
inline void save_toy_net(const ToyNet& net, const std::string& prefix) {
  export_weights(net.l1, prefix + ".l1.ccw");
  export_weights(net.l2, prefix + ".l2.ccw");
  save_tensor(net.fc_w, prefix + ".fc_w.cct", Dtype::f64);
  save_tensor(net.fc_b, prefix + ".fc_b.cct", Dtype::f64);
}

inline ToyNet load_toy_net(const std::string& prefix, bool compressed) {
  ToyNet net;
  net.compressed = compressed;
  net.l1 = import_weights(prefix + ".l1.ccw");
  net.l2 = import_weights(prefix + ".l2.ccw");
  net.fc_w = load_tensor(prefix + ".fc_w.cct");
  net.fc_b = load_tensor(prefix + ".fc_b.cct");
  return net;
}

}  // namespace compconv
