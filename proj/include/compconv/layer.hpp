#pragma once
// The executable compressed convolution layer: weight storage, weight
// initialization, the reference forward pass, and weight-file round-trips.
//
// Forward at depth d >= 2 (depth 1 drops the copies and the top transform):
//   G_1   = host conv of the input                      (c_prim channels)
//   G_m   = identity copy of input channels  ++  computed half
//           where the computed half is G_1 for m = 2 and a square conv of
//           G_{m-1} for m >= 3
//   out   = shuffle( G_2 ++ .. ++ G_d ++ top_conv(G_d) ++ tail(G_d) )
// The tail is a depthwise conv over the first tail_channels of G_d; the top
// conv allocates only the filters that survive the channel budget.
#include <cmath>
#include <string>
#include <vector>

#include "arch.hpp"
#include "plan.hpp"
#include "prng.hpp"
#include "tensor.hpp"

namespace compconv {

struct InitConfig {
  enum class Kind { he_normal, constant, fixed_fixture };
  Kind kind = Kind::he_normal;
  double value = 0.0;  // constant fill

  static InitConfig he_normal() { return InitConfig{}; }
  static InitConfig constant(double v) {
    InitConfig c;
    c.kind = Kind::constant;
    c.value = v;
    return c;
  }
  static InitConfig fixed_fixture() {
    InitConfig c;
    c.kind = Kind::fixed_fixture;
    return c;
  }
};

struct CompConvLayer {
  CompPlan plan;
  HostSpec host;
  Tensor inner_weights;                // (c_prim, c_in, k, k); (c_out, c_in, k, k) at d == 0
  std::vector<Tensor> square_weights;  // squares of G_2..G_{d-1}, then the top square of G_d
  Tensor tail_weights;                 // (tail_channels, 1, k, k)
  unsigned long long seed = 0;
};

namespace detail {

// Deterministic non-random pattern in [-0.5, 0.5), distinct per tensor.
inline double fixture_value(unsigned long long tensor_idx, unsigned long long flat_idx) {
  unsigned long long h = (flat_idx * 2654435761ULL + tensor_idx * 40503ULL) % 1024ULL;
  return double(h) / 1024.0 - 0.5;
}

inline void fill_weights(Tensor& t, const InitConfig& init, long k, long fan_in,
                         unsigned long long seed, unsigned long long tensor_idx) {
  switch (init.kind) {
    case InitConfig::Kind::he_normal: {
      SplitMix64 gen(derive_substream(seed, Stream::weight_init, tensor_idx));
      double std_dev = std::sqrt(2.0 / (double(k) * double(k) * double(fan_in)));
      for (double& v : t.data) v = std_dev * gen.next_normal();
      break;
    }
    case InitConfig::Kind::constant:
      for (double& v : t.data) v = init.value;
      break;
    case InitConfig::Kind::fixed_fixture:
      for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = fixture_value(tensor_idx, i);
      break;
  }
}

inline void require_host_fits(const CompPlan& plan, const HostSpec& host) {
  if (host.k < 1 || host.stride < 1 || host.padding < 0)
    throw std::invalid_argument("host: non-positive kernel or stride, or negative padding");
  if (plan.d >= 1 && (host.k % 2 == 0 || host.padding != host.k / 2))
    throw infeasible_error(
        "compressed layers need an odd kernel with same padding (padding == k/2) so the "
        "identity copies and the tail align with the convolved blocks; got k=" +
        std::to_string(host.k) + " padding=" + std::to_string(host.padding));
}

}  // namespace detail

inline CompConvLayer init_layer(const CompPlan& plan, const HostSpec& host,
                                const InitConfig& init, unsigned long long seed) {
  std::vector<std::string> violations = validate_plan(plan);
  if (!violations.empty())
    throw std::invalid_argument("init_layer: invalid plan: " + violations.front());
  detail::require_host_fits(plan, host);

  CompConvLayer layer;
  layer.plan = plan;
  layer.host = host;
  layer.seed = seed;
  long k = host.k;
  unsigned long long tensor_idx = 0;

  long inner_out = plan.d == 0 ? plan.c_out : plan.c_prim;
  layer.inner_weights = Tensor(inner_out, plan.c_in, k, k);
  detail::fill_weights(layer.inner_weights, init, k, plan.c_in, seed, tensor_idx++);

  if (plan.d >= 2) {
    for (long m = 3; m <= plan.d; ++m) {
      long b = plan.block_sizes[std::size_t(m - 2)];
      Tensor wq(b, b, k, k);
      detail::fill_weights(wq, init, k, b, seed, tensor_idx++);
      layer.square_weights.push_back(std::move(wq));
    }
    long top_in = plan.block_sizes.back();
    Tensor wt(top_in - plan.extra_drop, top_in, k, k);
    detail::fill_weights(wt, init, k, top_in, seed, tensor_idx++);
    layer.square_weights.push_back(std::move(wt));
  }

  layer.tail_weights = Tensor(plan.tail_channels, 1, k, k);
  detail::fill_weights(layer.tail_weights, init, k, 1, seed, tensor_idx++);
  return layer;
}

// Plain convolution with the layer's host geometry; only meaningful for
// uncompressed (d == 0) layers, where it is the entire forward pass.
inline Tensor forward_vanilla(const CompConvLayer& layer, const Tensor& input,
                              MacCounter* counter = nullptr) {
  if (layer.plan.d != 0)
    throw std::invalid_argument("forward_vanilla: layer is compressed (d=" +
                                std::to_string(layer.plan.d) + ")");
  ConvSpec spec;
  spec.k = layer.host.k;
  spec.stride = layer.host.stride;
  spec.padding = layer.host.padding;
  spec.c_in = layer.plan.c_in;
  spec.c_out = layer.plan.c_out;
  return conv2d(input, layer.inner_weights, spec, counter);
}

inline Tensor forward(const CompConvLayer& layer, const Tensor& input,
                      MacCounter* counter = nullptr) {
  const CompPlan& p = layer.plan;
  const HostSpec& host = layer.host;
  if (p.d == 0) return forward_vanilla(layer, input, counter);
  detail::require_host_fits(p, host);

  ConvSpec inner_spec;
  inner_spec.k = host.k;
  inner_spec.stride = host.stride;
  inner_spec.padding = host.padding;
  inner_spec.c_in = p.c_in;
  inner_spec.c_out = p.c_prim;
  // blocks[m] = G_m; all later work runs at the host output resolution
  std::vector<Tensor> blocks(std::size_t(p.d) + 1);
  blocks[1] = conv2d(input, layer.inner_weights, inner_spec, counter);

  for (long m = 2; m <= p.d; ++m) {
    const CopySpec& cs = p.copy_specs[std::size_t(m - 2)];
    Tensor copy = slice_channels(input, cs.start, cs.len, cs.wrap);
    if (host.stride > 1) copy = spatial_subsample(copy, host.stride);
    Tensor computed;
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
      computed = conv2d(blocks[std::size_t(m - 1)], layer.square_weights[std::size_t(m - 3)],
                        sq, counter);
    }
    blocks[std::size_t(m)] = concat_channels({copy, computed});
  }

  Tensor top;
  if (p.d >= 2) {
    long top_in = p.block_sizes.back();
    ConvSpec ts;
    ts.k = host.k;
    ts.stride = 1;
    ts.padding = host.padding;
    ts.c_in = top_in;
    ts.c_out = top_in - p.extra_drop;
    top = conv2d(blocks[std::size_t(p.d)], layer.square_weights.back(), ts, counter);
  }

  Tensor tail;
  if (p.tail_channels > 0) {
    Tensor tail_in = slice_channels(blocks[std::size_t(p.d)], 0, p.tail_channels, false);
    ConvSpec dw;
    dw.k = host.k;
    dw.stride = 1;
    dw.padding = host.padding;
    dw.groups = p.tail_channels;
    dw.c_in = p.tail_channels;
    dw.c_out = p.tail_channels;
    tail = conv2d(tail_in, layer.tail_weights, dw, counter);
  }

  std::vector<Tensor> parts;
  for (const Segment& seg : p.output_order) {
    if (seg.channels == 0) continue;
    switch (seg.kind) {
      case SegmentKind::block: parts.push_back(blocks[std::size_t(seg.m)]); break;
      case SegmentKind::top: parts.push_back(top); break;
      case SegmentKind::tail: parts.push_back(tail); break;
    }
  }
  Tensor out = concat_channels(parts);
  if (p.shuffle_groups > 1) out = channel_shuffle(out, p.shuffle_groups);
  return out;
}

// ---- weight file ("CCW1") ------------------------------------------------
// magic "CCW1", u16 version (little-endian), u32 record length, a text
// record (the plan plus host geometry and seed), then the weight tensors in
// forward order: inner, squares in ascending block order, tail.

inline std::string layer_record(const CompConvLayer& layer) {
  std::string rec = plan_record(layer.plan);
  rec += "host_k: " + std::to_string(layer.host.k) + "\n";
  rec += "host_stride: " + std::to_string(layer.host.stride) + "\n";
  rec += "host_padding: " + std::to_string(layer.host.padding) + "\n";
  rec += "seed: " + std::to_string(layer.seed) + "\n";
  return rec;
}

inline void export_weights(const CompConvLayer& layer, const std::string& path) {
  std::vector<std::uint8_t> bytes;
  bytes.push_back('C');
  bytes.push_back('C');
  bytes.push_back('W');
  bytes.push_back('1');
  bytes.push_back(1);  // version, little-endian u16
  bytes.push_back(0);
  std::string rec = layer_record(layer);
  detail::put_u32(bytes, std::uint32_t(rec.size()));
  bytes.insert(bytes.end(), rec.begin(), rec.end());
  serialize_tensor(layer.inner_weights, bytes);
  for (const Tensor& t : layer.square_weights) serialize_tensor(t, bytes);
  serialize_tensor(layer.tail_weights, bytes);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("export_weights: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
  if (!f) throw io_error("export_weights: write failed for " + path);
}

inline CompConvLayer import_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("import_weights: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 10 || std::memcmp(bytes.data(), "CCW1", 4) != 0)
    throw io_error("import_weights: not a weight file: " + path);
  unsigned version = unsigned(bytes[4]) | unsigned(bytes[5]) << 8;
  if (version != 1)
    throw io_error("import_weights: unsupported version " + std::to_string(version));
  std::uint32_t rec_len = detail::get_u32(bytes.data() + 6);
  if (bytes.size() < 10 + std::size_t(rec_len))
    throw io_error("import_weights: truncated record in " + path);
  std::string rec(bytes.begin() + 10, bytes.begin() + 10 + rec_len);

  CompConvLayer layer;
  std::string plan_part, host_part;
  for (std::size_t pos = 0; pos < rec.size();) {
    std::size_t eol = rec.find('\n', pos);
    if (eol == std::string::npos) eol = rec.size();
    std::string line = rec.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.rfind("host_", 0) == 0 || line.rfind("seed:", 0) == 0)
      host_part += line + "\n";
    else if (!line.empty())
      plan_part += line + "\n";
  }
  try {
    layer.plan = parse_plan_record(plan_part);
  } catch (const std::exception& e) {
    throw io_error("import_weights: " + std::string(e.what()));
  }
  for (std::size_t pos = 0; pos < host_part.size();) {
    std::size_t eol = host_part.find('\n', pos);
    std::string line = host_part.substr(pos, eol - pos);
    pos = eol + 1;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw io_error("import_weights: malformed line '" + line + "'");
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    try {
      if (key == "host_k")
        layer.host.k = std::stol(value);
      else if (key == "host_stride")
        layer.host.stride = std::stol(value);
      else if (key == "host_padding")
        layer.host.padding = std::stol(value);
      else if (key == "seed")
        layer.seed = std::stoull(value);
      else
        throw io_error("import_weights: unknown key '" + key + "'");
    } catch (const io_error&) {
      throw;
    } catch (const std::exception&) {
      throw io_error("import_weights: bad value in '" + line + "'");
    }
  }

  std::size_t offset = 10 + rec_len;
  try {
    layer.inner_weights = deserialize_tensor(bytes, offset);
    long squares = layer.plan.d >= 2 ? layer.plan.d - 1 : 0;
    for (long i = 0; i < squares; ++i)
      layer.square_weights.push_back(deserialize_tensor(bytes, offset));
    layer.tail_weights = deserialize_tensor(bytes, offset);
  } catch (const io_error&) {
    throw;
  } catch (const std::exception& e) {
    throw io_error("import_weights: " + std::string(e.what()));
  }
  if (offset != bytes.size())
    throw io_error("import_weights: trailing bytes in " + path);

  // cross-check the tensors against the declared plan
  std::vector<std::string> violations = validate_plan(layer.plan);
  if (!violations.empty())
    throw io_error("import_weights: invalid plan in file: " + violations.front());
  CompConvLayer probe;
  try {
    probe = init_layer(layer.plan, layer.host, InitConfig::constant(0.0), 0);
  } catch (const std::exception& e) {
    throw io_error("import_weights: " + std::string(e.what()));
  }
  auto check = [&path](const Tensor& got, const Tensor& want, const std::string& name) {
    if (got.shape != want.shape)
      throw io_error("import_weights: " + name + " tensor is " + to_string(got.shape) +
                     ", plan requires " + to_string(want.shape) + " in " + path);
  };
  check(layer.inner_weights, probe.inner_weights, "inner");
  for (std::size_t i = 0; i < layer.square_weights.size(); ++i)
    check(layer.square_weights[i], probe.square_weights[i], "square " + std::to_string(i));
  check(layer.tail_weights, probe.tail_weights, "tail");
  return layer;
}

}  // namespace compconv
