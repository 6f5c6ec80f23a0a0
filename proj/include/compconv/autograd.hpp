#pragma once
// Minimal reverse-mode autodiff over the reference ops.  Nodes live in an
// arena owned by a Graph; creation order is topological order, so backward
// is one reverse sweep.  Each op's backward mirrors its forward loops
// exactly, accumulating into the gradients of its inputs; ops that read a
// source channel several times (cyclic slices) therefore accumulate
// naturally.
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "layer.hpp"
#include "tensor.hpp"

namespace compconv {

class Graph {
public:
  enum class Op {
    leaf,
    conv2d,
    concat,
    slice,
    shuffle,
    subsample,
    relu,
    maxpool,
    gap,
    dense,
    softmax_ce,
  };

  struct Node {
    Tensor value;
    Tensor grad;  // allocated on demand, same shape as value
    Op op = Op::leaf;
    std::vector<long> inputs;
    bool requires_grad = false;  // leaves only: parameters and probed inputs

    ConvSpec conv;                // conv2d
    long slice_start = 0;         // slice
    long slice_len = 0;
    bool slice_wrap = false;
    long shuffle_g = 1;           // shuffle
    long sub_s = 1;               // subsample
    std::vector<long> labels;     // softmax_ce
    Tensor aux;                   // softmax_ce: cached probabilities
  };

  std::vector<Node> nodes;

  const Tensor& value(long id) const { return nodes[std::size_t(id)].value; }
  const Tensor& grad(long id) const { return nodes[std::size_t(id)].grad; }

  long leaf(Tensor t, bool requires_grad = false) {
    Node n;
    n.value = std::move(t);
    n.op = Op::leaf;
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  long conv2d(long x, long w, const ConvSpec& spec) {
    Node n;
    n.op = Op::conv2d;
    n.inputs = {x, w};
    n.conv = spec;
    n.value = compconv::conv2d(value(x), value(w), spec);
    return push(std::move(n));
  }

  long concat(const std::vector<long>& parts) {
    Node n;
    n.op = Op::concat;
    n.inputs = parts;
    std::vector<Tensor> vals;
    for (long p : parts) vals.push_back(value(p));
    n.value = concat_channels(vals);
    return push(std::move(n));
  }

  long slice(long x, long start, long len, bool wrap) {
    Node n;
    n.op = Op::slice;
    n.inputs = {x};
    n.slice_start = start;
    n.slice_len = len;
    n.slice_wrap = wrap;
    n.value = slice_channels(value(x), start, len, wrap);
    return push(std::move(n));
  }

  long shuffle(long x, long g) {
    Node n;
    n.op = Op::shuffle;
    n.inputs = {x};
    n.shuffle_g = g;
    n.value = channel_shuffle(value(x), g);
    return push(std::move(n));
  }

  long subsample(long x, long s) {
    Node n;
    n.op = Op::subsample;
    n.inputs = {x};
    n.sub_s = s;
    n.value = spatial_subsample(value(x), s);
    return push(std::move(n));
  }

  long relu(long x) {
    Node n;
    n.op = Op::relu;
    n.inputs = {x};
    n.value = compconv::relu(value(x));
    return push(std::move(n));
  }

  long maxpool(long x) {
    Node n;
    n.op = Op::maxpool;
    n.inputs = {x};
    n.value = maxpool2x2(value(x));
    return push(std::move(n));
  }

  long gap(long x) {
    Node n;
    n.op = Op::gap;
    n.inputs = {x};
    n.value = global_avg_pool(value(x));
    return push(std::move(n));
  }

  long dense(long x, long w, long b) {
    Node n;
    n.op = Op::dense;
    n.inputs = {x, w, b};
    n.value = compconv::dense(value(x), value(w), value(b));
    return push(std::move(n));
  }

  // Mean cross-entropy of softmax(logits) against integer labels; the
  // probabilities are cached for the fused backward pass.
  long softmax_ce(long logits, const std::vector<long>& labels) {
    const Tensor& z = value(logits);
    if (z.shape.h != 1 || z.shape.w != 1)
      throw std::invalid_argument("softmax_ce: expects (n, classes, 1, 1) logits");
    if (long(labels.size()) != z.shape.n)
      throw std::invalid_argument("softmax_ce: one label per sample required");
    long n = z.shape.n, classes = z.shape.c;
    Node node;
    node.op = Op::softmax_ce;
    node.inputs = {logits};
    node.labels = labels;
    node.aux = Tensor(n, classes, 1, 1);
    double loss = 0.0;
    for (long b = 0; b < n; ++b) {
      if (labels[std::size_t(b)] < 0 || labels[std::size_t(b)] >= classes)
        throw std::invalid_argument("softmax_ce: label out of range");
      double zmax = z.at(b, 0, 0, 0);
      for (long c = 1; c < classes; ++c) zmax = std::max(zmax, z.at(b, c, 0, 0));
      double denom = 0.0;
      for (long c = 0; c < classes; ++c) denom += std::exp(z.at(b, c, 0, 0) - zmax);
      for (long c = 0; c < classes; ++c)
        node.aux.at(b, c, 0, 0) = std::exp(z.at(b, c, 0, 0) - zmax) / denom;
      loss -= std::log(node.aux.at(b, labels[std::size_t(b)], 0, 0));
    }
    node.value = Tensor({1, 1, 1, 1}, {loss / double(n)});
    return push(std::move(node));
  }

  void zero_grads() {
    for (Node& n : nodes) n.grad = Tensor();
  }

  // Seeds d(root) = 1 and sweeps the arena in reverse creation order.
  void backward(long root) {
    ensure_grad(root);
    for (double& v : nodes[std::size_t(root)].grad.data) v = 1.0;
    run_backward(root);
  }

  // Seeds d(root) with an arbitrary cotangent, i.e. differentiates the
  // scalar sum(seed * root).  Useful for probing non-scalar outputs.
  void backward_seeded(long root, const Tensor& seed) {
    if (seed.shape != nodes[std::size_t(root)].value.shape)
      throw std::invalid_argument("backward_seeded: seed shape mismatch");
    ensure_grad(root);
    Tensor& g = nodes[std::size_t(root)].grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += seed.data[i];
    run_backward(root);
  }

private:
  void run_backward(long root) {
    for (long id = root; id >= 0; --id) {
      Node& n = nodes[std::size_t(id)];
      if (n.grad.data.empty() || n.op == Op::leaf) continue;
      step_backward(n);
    }
  }

  long push(Node n) {
    if (checked_mode())
      for (double v : n.value.data)
        if (!std::isfinite(v))
          throw std::runtime_error("graph: non-finite activation in checked mode");
    nodes.push_back(std::move(n));
    return long(nodes.size()) - 1;
  }

  void ensure_grad(long id) {
    Node& n = nodes[std::size_t(id)];
    if (n.grad.data.empty()) {
      const Shape4& s = n.value.shape;
      n.grad = Tensor(s.n, s.c, s.h, s.w);
    }
  }

  void step_backward(Node& n) {
    switch (n.op) {
      case Op::leaf: break;
      case Op::conv2d: backward_conv(n); break;
      case Op::concat: backward_concat(n); break;
      case Op::slice: backward_slice(n); break;
      case Op::shuffle: backward_shuffle(n); break;
      case Op::subsample: backward_subsample(n); break;
      case Op::relu: backward_relu(n); break;
      case Op::maxpool: backward_maxpool(n); break;
      case Op::gap: backward_gap(n); break;
      case Op::dense: backward_dense(n); break;
      case Op::softmax_ce: backward_softmax_ce(n); break;
    }
  }

  void backward_conv(Node& n) {
    const Tensor& x = value(n.inputs[0]);
    const Tensor& w = value(n.inputs[1]);
    ensure_grad(n.inputs[0]);
    ensure_grad(n.inputs[1]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    Tensor& dw = nodes[std::size_t(n.inputs[1])].grad;
    const Tensor& dy = n.grad;
    const ConvSpec& s = n.conv;
    long cpg = s.c_in / s.groups, opg = s.c_out / s.groups;
    long oh = n.value.shape.h, ow = n.value.shape.w;
    long h = x.shape.h, w_in = x.shape.w, k = s.k;
    for (long b = 0; b < x.shape.n; ++b)
      for (long g = 0; g < s.groups; ++g)
        for (long of = 0; of < opg; ++of) {
          long oc = g * opg + of;
          for (long y = 0; y < oh; ++y)
            for (long xx = 0; xx < ow; ++xx) {
              double gout = dy.at(b, oc, y, xx);
              if (gout == 0.0) continue;
              long base_h = y * s.stride - s.padding;
              long base_w = xx * s.stride - s.padding;
              for (long ic = 0; ic < cpg; ++ic) {
                long in_c = g * cpg + ic;
                for (long kh = 0; kh < k; ++kh) {
                  long ih = base_h + kh;
                  if (ih < 0 || ih >= h) continue;
                  for (long kw = 0; kw < k; ++kw) {
                    long iw = base_w + kw;
                    if (iw < 0 || iw >= w_in) continue;
                    dx.at(b, in_c, ih, iw) += gout * w.at(oc, ic, kh, kw);
                    dw.at(oc, ic, kh, kw) += gout * x.at(b, in_c, ih, iw);
                  }
                }
              }
            }
        }
  }

  void backward_concat(Node& n) {
    long c_off = 0;
    for (long input : n.inputs) {
      ensure_grad(input);
      Tensor& dx = nodes[std::size_t(input)].grad;
      const Shape4& s = dx.shape;
      for (long b = 0; b < s.n; ++b)
        for (long c = 0; c < s.c; ++c)
          for (long y = 0; y < s.h; ++y)
            for (long x = 0; x < s.w; ++x) dx.at(b, c, y, x) += n.grad.at(b, c_off + c, y, x);
      c_off += s.c;
    }
  }

  void backward_slice(Node& n) {
    ensure_grad(n.inputs[0]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    long c_src = dx.shape.c;
    for (long b = 0; b < n.grad.shape.n; ++b)
      for (long c = 0; c < n.slice_len; ++c) {
        long src = n.slice_wrap ? (n.slice_start + c) % c_src : n.slice_start + c;
        for (long y = 0; y < n.grad.shape.h; ++y)
          for (long x = 0; x < n.grad.shape.w; ++x) dx.at(b, src, y, x) += n.grad.at(b, c, y, x);
      }
  }

  void backward_shuffle(Node& n) {
    ensure_grad(n.inputs[0]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    long c = dx.shape.c, g = n.shuffle_g;
    for (long b = 0; b < dx.shape.n; ++b)
      for (long i = 0; i < c; ++i) {
        long dst = shuffle_destination(i, c, g);
        for (long y = 0; y < dx.shape.h; ++y)
          for (long x = 0; x < dx.shape.w; ++x) dx.at(b, i, y, x) += n.grad.at(b, dst, y, x);
      }
  }

  void backward_subsample(Node& n) {
    ensure_grad(n.inputs[0]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    long s = n.sub_s;
    for (long b = 0; b < n.grad.shape.n; ++b)
      for (long c = 0; c < n.grad.shape.c; ++c)
        for (long y = 0; y < n.grad.shape.h; ++y)
          for (long x = 0; x < n.grad.shape.w; ++x)
            dx.at(b, c, y * s, x * s) += n.grad.at(b, c, y, x);
  }

  void backward_relu(Node& n) {
    const Tensor& x = value(n.inputs[0]);
    ensure_grad(n.inputs[0]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (x.data[i] > 0.0) dx.data[i] += n.grad.data[i];
  }

  void backward_maxpool(Node& n) {
    const Tensor& x = value(n.inputs[0]);
    ensure_grad(n.inputs[0]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    for (long b = 0; b < n.grad.shape.n; ++b)
      for (long c = 0; c < n.grad.shape.c; ++c)
        for (long y = 0; y < n.grad.shape.h; ++y)
          for (long xx = 0; xx < n.grad.shape.w; ++xx) {
            // route to the first window element attaining the maximum,
            // matching the forward scan order
            long best_h = 2 * y, best_w = 2 * xx;
            double best = x.at(b, c, best_h, best_w);
            const long offs[3][2] = {{0, 1}, {1, 0}, {1, 1}};
            for (const auto& o : offs) {
              double v = x.at(b, c, 2 * y + o[0], 2 * xx + o[1]);
              if (v > best) {
                best = v;
                best_h = 2 * y + o[0];
                best_w = 2 * xx + o[1];
              }
            }
            dx.at(b, c, best_h, best_w) += n.grad.at(b, c, y, xx);
          }
  }

  void backward_gap(Node& n) {
    ensure_grad(n.inputs[0]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    double scale = 1.0 / double(dx.shape.h * dx.shape.w);
    for (long b = 0; b < dx.shape.n; ++b)
      for (long c = 0; c < dx.shape.c; ++c) {
        double g = n.grad.at(b, c, 0, 0) * scale;
        for (long y = 0; y < dx.shape.h; ++y)
          for (long x = 0; x < dx.shape.w; ++x) dx.at(b, c, y, x) += g;
      }
  }

  void backward_dense(Node& n) {
    const Tensor& x = value(n.inputs[0]);
    const Tensor& w = value(n.inputs[1]);
    ensure_grad(n.inputs[0]);
    ensure_grad(n.inputs[1]);
    ensure_grad(n.inputs[2]);
    Tensor& dx = nodes[std::size_t(n.inputs[0])].grad;
    Tensor& dw = nodes[std::size_t(n.inputs[1])].grad;
    Tensor& db = nodes[std::size_t(n.inputs[2])].grad;
    long classes = w.shape.n, c = w.shape.c;
    for (long b = 0; b < x.shape.n; ++b)
      for (long o = 0; o < classes; ++o) {
        double g = n.grad.at(b, o, 0, 0);
        if (g == 0.0) continue;
        db.at(0, o, 0, 0) += g;
        for (long i = 0; i < c; ++i) {
          dx.at(b, i, 0, 0) += g * w.at(o, i, 0, 0);
          dw.at(o, i, 0, 0) += g * x.at(b, i, 0, 0);
        }
      }
  }

  void backward_softmax_ce(Node& n) {
    ensure_grad(n.inputs[0]);
    Tensor& dz = nodes[std::size_t(n.inputs[0])].grad;
    double g = n.grad.at(0, 0, 0, 0);
    long nb = dz.shape.n, classes = dz.shape.c;
    double inv_n = 1.0 / double(nb);
    for (long b = 0; b < nb; ++b)
      for (long c = 0; c < classes; ++c) {
        double p = n.aux.at(b, c, 0, 0);
        double onehot = n.labels[std::size_t(b)] == c ? 1.0 : 0.0;
        dz.at(b, c, 0, 0) += g * (p - onehot) * inv_n;
      }
  }
};

// Differentiable mirror of the layer forward: same block recursion built as
// graph ops.  Returns the output node and the parameter leaves in export
// order (inner, squares ascending, tail).
struct GraphLayer {
  long out = -1;
  std::vector<long> params;
};

inline GraphLayer graph_compconv(Graph& g, const CompConvLayer& layer, long x) {
  const CompPlan& p = layer.plan;
  const HostSpec& host = layer.host;
  GraphLayer res;

  long w_inner = g.leaf(layer.inner_weights, true);
  res.params.push_back(w_inner);
  std::vector<long> w_sq;
  for (const Tensor& t : layer.square_weights) {
    w_sq.push_back(g.leaf(t, true));
    res.params.push_back(w_sq.back());
  }
  long w_tail = -1;
  if (p.tail_channels > 0) {
    w_tail = g.leaf(layer.tail_weights, true);
    res.params.push_back(w_tail);
  }

  ConvSpec inner_spec;
  inner_spec.k = host.k;
  inner_spec.stride = host.stride;
  inner_spec.padding = host.padding;
  inner_spec.c_in = p.c_in;
  inner_spec.c_out = p.d == 0 ? p.c_out : p.c_prim;
  long g1 = g.conv2d(x, w_inner, inner_spec);
  if (p.d == 0) {
    res.out = g1;
    return res;
  }

  std::vector<long> blocks(std::size_t(p.d) + 1, -1);
  blocks[1] = g1;
  for (long m = 2; m <= p.d; ++m) {
    const CopySpec& cs = p.copy_specs[std::size_t(m - 2)];
    long copy = g.slice(x, cs.start, cs.len, cs.wrap);
    if (host.stride > 1) copy = g.subsample(copy, host.stride);
    long computed;
    if (m == 2) {
      computed = blocks[1];
    } else {
      long b = p.block_sizes[std::size_t(m - 2)];
      ConvSpec sq;
      sq.k = host.k;
      sq.stride = 1;
      sq.padding = host.padding;
      sq.c_in = b;
      sq.c_out = b;
      computed = g.conv2d(blocks[std::size_t(m - 1)], w_sq[std::size_t(m - 3)], sq);
    }
    blocks[std::size_t(m)] = g.concat({copy, computed});
  }

  long top = -1;
  if (p.d >= 2) {
    long top_in = p.block_sizes.back();
    ConvSpec ts;
    ts.k = host.k;
    ts.stride = 1;
    ts.padding = host.padding;
    ts.c_in = top_in;
    ts.c_out = top_in - p.extra_drop;
    top = g.conv2d(blocks[std::size_t(p.d)], w_sq.back(), ts);
  }

  long tail = -1;
  if (p.tail_channels > 0) {
    long tail_in = g.slice(blocks[std::size_t(p.d)], 0, p.tail_channels, false);
    ConvSpec dw;
    dw.k = host.k;
    dw.stride = 1;
    dw.padding = host.padding;
    dw.groups = p.tail_channels;
    dw.c_in = p.tail_channels;
    dw.c_out = p.tail_channels;
    tail = g.conv2d(tail_in, w_tail, dw);
  }

  std::vector<long> parts;
  for (const Segment& seg : p.output_order) {
    if (seg.channels == 0) continue;
    switch (seg.kind) {
      case SegmentKind::block: parts.push_back(blocks[std::size_t(seg.m)]); break;
      case SegmentKind::top: parts.push_back(top); break;
      case SegmentKind::tail: parts.push_back(tail); break;
    }
  }
  long out = parts.size() == 1 ? parts[0] : g.concat(parts);
  if (p.shuffle_groups > 1) out = g.shuffle(out, p.shuffle_groups);
  res.out = out;
  return res;
}

// Central finite differences against an analytic gradient.
//   err(a, f) = |a - f| / max(1, |a|, |f|)
// Returns the largest error over every entry of every checked tensor.
inline double finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& loss,
                                std::vector<Tensor> params,
                                const std::vector<Tensor>& analytic, double eps = 1e-5) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("finite_diff_check: one gradient per parameter tensor");
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].shape != analytic[t].shape)
      throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
    for (std::size_t i = 0; i < params[t].data.size(); ++i) {
      double saved = params[t].data[i];
      params[t].data[i] = saved + eps;
      double up = loss(params);
      params[t].data[i] = saved - eps;
      double down = loss(params);
      params[t].data[i] = saved;
      double fd = (up - down) / (2.0 * eps);
      double an = analytic[t].data[i];
      double denom = std::max(1.0, std::max(std::fabs(an), std::fabs(fd)));
      double err = std::fabs(an - fd) / denom;
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace compconv
