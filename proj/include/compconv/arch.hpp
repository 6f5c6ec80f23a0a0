#pragma once
// Network descriptions used by the cost analyzer: a flat layer list with
// optional residual blocks, plus builders for the benchmark topologies and
// the compression pass that assigns a plan to every eligible convolution.
#include <string>
#include <vector>

#include "plan.hpp"
#include "tensor.hpp"

namespace compconv {

// Convolution geometry shared by a plan's host layer and the cost model.
struct HostSpec {
  long k = 3;
  long stride = 1;
  long padding = 1;
};

struct LayerDescriptor {
  enum class Kind { conv, maxpool, global_avg_pool, dense, relu, residual_block };
  Kind kind = Kind::conv;
  std::string name;
  long stage = 0;  // conv run index; bumped after each top-level maxpool

  // kind == conv
  ConvSpec conv;
  CompPlan plan;            // meaningful only when compressed is true
  bool compressed = false;  // set by compress(); skip-listed convs stay false

  // kind == dense (bias always counted)
  long dense_in = 0;
  long dense_out = 0;

  // kind == residual_block
  std::vector<LayerDescriptor> inner;  // main path, run sequentially
  bool projection = false;             // 1x1 conv on the identity branch
  CompPlan proj_plan;
  bool proj_compressed = false;

  bool operator==(const LayerDescriptor& o) const {
    return kind == o.kind && name == o.name && stage == o.stage &&
           conv.k == o.conv.k && conv.stride == o.conv.stride &&
           conv.padding == o.conv.padding && conv.groups == o.conv.groups &&
           conv.c_in == o.conv.c_in && conv.c_out == o.conv.c_out && plan == o.plan &&
           compressed == o.compressed && dense_in == o.dense_in && dense_out == o.dense_out &&
           inner == o.inner && projection == o.projection && proj_plan == o.proj_plan &&
           proj_compressed == o.proj_compressed;
  }
};

struct ArchSpec {
  std::string name;
  Shape4 input_shape{1, 0, 0, 0};
  std::vector<LayerDescriptor> layers;
  std::vector<std::string> skip_list;  // conv names exempt from compression

  bool operator==(const ArchSpec& o) const {
    return name == o.name && input_shape == o.input_shape && layers == o.layers &&
           skip_list == o.skip_list;
  }
};

namespace detail {

inline LayerDescriptor make_conv(const std::string& name, long c_in, long c_out, long k,
                                 long stride, long padding) {
  LayerDescriptor l;
  l.kind = LayerDescriptor::Kind::conv;
  l.name = name;
  l.conv.c_in = c_in;
  l.conv.c_out = c_out;
  l.conv.k = k;
  l.conv.stride = stride;
  l.conv.padding = padding;
  l.conv.groups = 1;
  return l;
}

inline LayerDescriptor make_simple(LayerDescriptor::Kind kind, const std::string& name) {
  LayerDescriptor l;
  l.kind = kind;
  l.name = name;
  return l;
}

inline LayerDescriptor make_dense(const std::string& name, long in, long out) {
  LayerDescriptor l;
  l.kind = LayerDescriptor::Kind::dense;
  l.name = name;
  l.dense_in = in;
  l.dense_out = out;
  return l;
}

}  // namespace detail

// Conv-run numbering: the counter starts at 1 and advances after every
// top-level maxpool; members of a residual block share the block's stage.
inline void assign_stages(ArchSpec& arch) {
  long stage = 1;
  for (LayerDescriptor& l : arch.layers) {
    l.stage = stage;
    for (LayerDescriptor& il : l.inner) il.stage = stage;
    if (l.kind == LayerDescriptor::Kind::maxpool) ++stage;
  }
}

// Derives the identity-branch projection of a residual block: a 1x1
// convolution carrying the block's overall stride and channel change.
inline ConvSpec projection_spec(const LayerDescriptor& block) {
  if (block.kind != LayerDescriptor::Kind::residual_block || block.inner.empty())
    throw std::invalid_argument("projection_spec: not a residual block");
  ConvSpec first, last;
  bool seen = false;
  long stride = 1;
  for (const LayerDescriptor& il : block.inner)
    if (il.kind == LayerDescriptor::Kind::conv) {
      if (!seen) first = il.conv;
      last = il.conv;
      seen = true;
      stride *= il.conv.stride;
    }
  if (!seen) throw std::invalid_argument("projection_spec: block has no convolutions");
  ConvSpec p;
  p.k = 1;
  p.stride = stride;
  p.padding = 0;
  p.groups = 1;
  p.c_in = first.c_in;
  p.c_out = last.c_out;
  return p;
}

inline bool in_skip_list(const ArchSpec& arch, const std::string& name) {
  for (const std::string& s : arch.skip_list)
    if (s == name) return true;
  return false;
}

// Assigns a plan to every convolution the policy covers.  Replanning always
// starts from the stored ConvSpec, so repeated calls converge to the same
// result and an already-compressed layer is never wrapped a second time.
inline void compress(ArchSpec& arch, const DepthPolicy& policy) {
  bool enable = policy.kind != DepthPolicy::Kind::vanilla;
  for (LayerDescriptor& l : arch.layers) {
    auto handle_conv = [&](LayerDescriptor& c) {
      if (enable && !in_skip_list(arch, c.name)) {
        c.plan = build_plan(c.conv.c_in, c.conv.c_out, policy);
        c.compressed = true;
      } else {
        c.plan = CompPlan{};
        c.compressed = false;
      }
    };
    if (l.kind == LayerDescriptor::Kind::conv) handle_conv(l);
    if (l.kind == LayerDescriptor::Kind::residual_block) {
      for (LayerDescriptor& il : l.inner)
        if (il.kind == LayerDescriptor::Kind::conv) handle_conv(il);
      if (l.projection) {
        ConvSpec ps = projection_spec(l);
        if (enable && !in_skip_list(arch, l.name + ".proj")) {
          l.proj_plan = build_plan(ps.c_in, ps.c_out, policy);
          l.proj_compressed = true;
        } else {
          l.proj_plan = CompPlan{};
          l.proj_compressed = false;
        }
      }
    }
  }
}

// 13 convolutions in five runs, 3x3 same-padded, pooling between runs,
// then global average pooling and a single dense classifier head.
inline ArchSpec vgg16_cifar(long num_classes = 10) {
  if (num_classes < 2) throw std::invalid_argument("vgg16_cifar: need at least 2 classes");
  ArchSpec a;
  a.name = "vgg16-cifar";
  a.input_shape = {1, 3, 32, 32};
  const std::vector<std::vector<long>> runs = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  long c_in = 3;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    for (std::size_t i = 0; i < runs[s].size(); ++i) {
      std::string tag = std::to_string(s + 1) + "_" + std::to_string(i + 1);
      a.layers.push_back(detail::make_conv("conv" + tag, c_in, runs[s][i], 3, 1, 1));
      a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::relu, "relu" + tag));
      c_in = runs[s][i];
    }
    a.layers.push_back(
        detail::make_simple(LayerDescriptor::Kind::maxpool, "pool" + std::to_string(s + 1)));
  }
  a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::global_avg_pool, "gap"));
  a.layers.push_back(detail::make_dense("fc", 512, num_classes));
  assign_stages(a);
  return a;
}

// Small residual network with two 3x3 convolutions per block, a 3x3 stem,
// and width doubling with stride 2 at each stage boundary.
inline ArchSpec resnet_toy(const std::vector<long>& blocks_per_stage, long num_classes = 10) {
  if (blocks_per_stage.empty())
    throw std::invalid_argument("resnet_toy: need at least one stage");
  ArchSpec a;
  a.name = "resnet-toy";
  a.input_shape = {1, 3, 32, 32};
  long width = 16;
  a.layers.push_back(detail::make_conv("stem", 3, width, 3, 1, 1));
  a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::relu, "stem_relu"));
  long c_in = width;
  for (std::size_t s = 0; s < blocks_per_stage.size(); ++s) {
    long c_out = width << s;
    for (long b = 0; b < blocks_per_stage[s]; ++b) {
      long stride = (s > 0 && b == 0) ? 2 : 1;
      std::string bn = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
      LayerDescriptor block = detail::make_simple(LayerDescriptor::Kind::residual_block, bn);
      block.inner.push_back(detail::make_conv(bn + ".conv1", c_in, c_out, 3, stride, 1));
      block.inner.push_back(detail::make_simple(LayerDescriptor::Kind::relu, bn + ".relu1"));
      block.inner.push_back(detail::make_conv(bn + ".conv2", c_out, c_out, 3, 1, 1));
      block.projection = stride != 1 || c_in != c_out;
      a.layers.push_back(block);
      c_in = c_out;
    }
  }
  a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::global_avg_pool, "gap"));
  a.layers.push_back(detail::make_dense("fc", c_in, num_classes));
  assign_stages(a);
  return a;
}

// Bottleneck layout (1x1 reduce, 3x3, 1x1 expand), block counts 3-4-6-3,
// 7x7 stride-2 stem (held out of compression) and a pooling stem stage.
inline ArchSpec resnet50_imagenet() {
  ArchSpec a;
  a.name = "resnet50-imagenet";
  a.input_shape = {1, 3, 224, 224};
  a.layers.push_back(detail::make_conv("conv1", 3, 64, 7, 2, 3));
  a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::relu, "conv1_relu"));
  a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::maxpool, "pool1"));
  const long mids[4] = {64, 128, 256, 512};
  const long outs[4] = {256, 512, 1024, 2048};
  const long counts[4] = {3, 4, 6, 3};
  long c_in = 64;
  for (int s = 0; s < 4; ++s) {
    for (long b = 0; b < counts[s]; ++b) {
      long stride = (s > 0 && b == 0) ? 2 : 1;
      std::string bn = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
      LayerDescriptor block = detail::make_simple(LayerDescriptor::Kind::residual_block, bn);
      block.inner.push_back(detail::make_conv(bn + ".conv1", c_in, mids[s], 1, 1, 0));
      block.inner.push_back(detail::make_simple(LayerDescriptor::Kind::relu, bn + ".relu1"));
      block.inner.push_back(detail::make_conv(bn + ".conv2", mids[s], mids[s], 3, stride, 1));
      block.inner.push_back(detail::make_simple(LayerDescriptor::Kind::relu, bn + ".relu2"));
      block.inner.push_back(detail::make_conv(bn + ".conv3", mids[s], outs[s], 1, 1, 0));
      block.projection = b == 0;
      a.layers.push_back(block);
      c_in = outs[s];
    }
  }
  a.layers.push_back(detail::make_simple(LayerDescriptor::Kind::global_avg_pool, "gap"));
  a.layers.push_back(detail::make_dense("fc", 2048, 1000));
  a.skip_list.push_back("conv1");
  assign_stages(a);
  return a;
}

}  // namespace compconv
