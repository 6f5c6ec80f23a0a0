#pragma once
// Exact parameter and multiply-accumulate counts.  The compressed-layer
// formula mirrors the executor term for term, so the instrumented executor
// and this model must agree to the integer.
#include <string>
#include <vector>

#include "arch.hpp"
#include "plan.hpp"
#include "tensor.hpp"

namespace compconv {

struct LayerCost {
  unsigned long long params = 0;
  unsigned long long macs = 0;  // one sample
  Shape4 out_shape{1, 0, 0, 0};

  bool operator==(const LayerCost& o) const {
    return params == o.params && macs == o.macs && out_shape == o.out_shape;
  }
};

inline LayerCost conv_cost(const ConvSpec& spec, long h, long w) {
  validate_spec(spec);
  auto [oh, ow] = conv_out_dims(spec, h, w);
  unsigned long long weight_count =
      (unsigned long long)(spec.k) * spec.k * (spec.c_in / spec.groups) * spec.c_out;
  LayerCost c;
  c.params = weight_count + (spec.bias ? (unsigned long long)(spec.c_out) : 0ULL);
  c.macs = weight_count * oh * ow;
  c.out_shape = {1, spec.c_out, oh, ow};
  return c;
}

// Weight "units" of a compressed layer: kernel-position count per k*k
// stencil.  params = k^2 * units and macs = out_h * out_w * k^2 * units,
// because every sub-convolution runs at the host's output resolution.
inline unsigned long long compconv_units(const CompPlan& p) {
  if (p.d == 0) return (unsigned long long)(p.c_in) * p.c_out;
  unsigned long long units = (unsigned long long)(p.c_in) * p.c_prim;
  for (long m = 3; m <= p.d; ++m) {
    unsigned long long b = (unsigned long long)(p.block_sizes[std::size_t(m - 2)]);
    units += b * b;
  }
  if (p.d >= 2) {
    unsigned long long top_in = (unsigned long long)(p.block_sizes.back());
    unsigned long long top_out = top_in - (unsigned long long)(p.extra_drop);
    units += top_out * top_in;
  }
  units += (unsigned long long)(p.tail_channels);
  return units;
}

// The same count before any channel dropping: every block at its raw size
// and the full-width tail.  Reported alongside the exact value for context.
inline unsigned long long compconv_units_literal(const CompPlan& p) {
  if (p.d == 0) return (unsigned long long)(p.c_in) * p.c_out;
  unsigned long long units = (unsigned long long)(p.c_in) * p.c_prim;
  for (long m = 3; m <= p.d; ++m) {
    unsigned long long b = (unsigned long long)(p.block_sizes[std::size_t(m - 2)]);
    units += b * b;
  }
  if (p.d >= 2) {
    unsigned long long top = (unsigned long long)(p.block_sizes.back());
    units += top * top + top;  // full top transform + full-width tail
  } else {
    units += (unsigned long long)(p.c_prim);
  }
  return units;
}

inline LayerCost compconv_cost(const CompPlan& p, const HostSpec& host, long h, long w) {
  ConvSpec dims;
  dims.k = host.k;
  dims.stride = host.stride;
  dims.padding = host.padding;
  dims.c_in = p.c_in;
  dims.c_out = p.c_out;
  auto [oh, ow] = conv_out_dims(dims, h, w);
  unsigned long long units = compconv_units(p);
  unsigned long long k2 = (unsigned long long)(host.k) * host.k;
  LayerCost c;
  c.params = k2 * units;
  c.macs = k2 * units * oh * ow;
  c.out_shape = {1, p.c_out, oh, ow};
  return c;
}

// Compressed share of the plain convolution's cost; spatial dims and the
// kernel area cancel, so this is dimensionless and resolution-free.
inline double compression_ratio(const CompPlan& p) {
  return double(compconv_units(p)) / (double(p.c_in) * double(p.c_out));
}

struct CostRow {
  std::string name;
  long stage = 0;
  long chosen_d = -1;  // -1: kept vanilla (skip list or vanilla policy)
  LayerCost vanilla;
  LayerCost compressed;

  bool operator==(const CostRow& o) const {
    return name == o.name && stage == o.stage && chosen_d == o.chosen_d &&
           vanilla == o.vanilla && compressed == o.compressed;
  }
};

struct CostTotals {
  unsigned long long params = 0;
  unsigned long long macs = 0;

  bool operator==(const CostTotals& o) const { return params == o.params && macs == o.macs; }
};

struct CostReport {
  std::string arch;
  std::string policy;
  std::vector<CostRow> rows;
  CostTotals vanilla_total;
  CostTotals compressed_total;
  double params_ratio = 0.0;
  double macs_ratio = 0.0;

  bool operator==(const CostReport& o) const {
    return arch == o.arch && policy == o.policy && rows == o.rows &&
           vanilla_total == o.vanilla_total && compressed_total == o.compressed_total &&
           params_ratio == o.params_ratio && macs_ratio == o.macs_ratio;
  }
};

inline std::string describe(const DepthPolicy& policy) {
  switch (policy.kind) {
    case DepthPolicy::Kind::vanilla: return "vanilla";
    case DepthPolicy::Kind::global_depth: return "global-d=" + std::to_string(policy.d);
    case DepthPolicy::Kind::adaptive: return "adaptive-c0=" + std::to_string(policy.c0);
  }
  return "";
}

namespace detail {

inline void cost_conv_row(const ArchSpec& arch, const DepthPolicy& policy,
                          const std::string& name, long stage, const ConvSpec& spec,
                          Shape4& cur, CostReport& report) {
  LayerCost vanilla = conv_cost(spec, cur.h, cur.w);
  CostRow row;
  row.name = name;
  row.stage = stage;
  row.vanilla = vanilla;
  bool enable = policy.kind != DepthPolicy::Kind::vanilla && !in_skip_list(arch, name);
  if (enable) {
    CompPlan plan = build_plan(spec.c_in, spec.c_out, policy);
    HostSpec host{spec.k, spec.stride, spec.padding};
    row.compressed = compconv_cost(plan, host, cur.h, cur.w);
    row.chosen_d = plan.d;
  } else {
    row.compressed = vanilla;
    row.chosen_d = -1;
  }
  report.rows.push_back(row);
  cur = vanilla.out_shape;
}

}  // namespace detail

// Walks the network once, pricing every convolution both ways.  Dense layers
// appear as rows too (identical on both sides); activation and pooling
// layers only move the running shape.
inline CostReport network_cost(const ArchSpec& arch, const DepthPolicy& policy) {
  CostReport report;
  report.arch = arch.name;
  report.policy = describe(policy);
  Shape4 cur = arch.input_shape;
  if (cur.c < 1 || cur.h < 1 || cur.w < 1)
    throw infeasible_error("network_cost: architecture has no input shape");

  for (const LayerDescriptor& l : arch.layers) {
    switch (l.kind) {
      case LayerDescriptor::Kind::conv:
        detail::cost_conv_row(arch, policy, l.name, l.stage, l.conv, cur, report);
        break;
      case LayerDescriptor::Kind::relu:
        break;
      case LayerDescriptor::Kind::maxpool:
        if (cur.h % 2 != 0 || cur.w % 2 != 0)
          throw infeasible_error("network_cost: maxpool '" + l.name + "' on odd dims " +
                                 to_string(cur));
        cur.h /= 2;
        cur.w /= 2;
        break;
      case LayerDescriptor::Kind::global_avg_pool:
        cur.h = 1;
        cur.w = 1;
        break;
      case LayerDescriptor::Kind::dense: {
        if (cur.h != 1 || cur.w != 1 || cur.c != l.dense_in)
          throw infeasible_error("network_cost: dense '" + l.name + "' expects (" +
                                 std::to_string(l.dense_in) + ",1,1), got " + to_string(cur));
        CostRow row;
        row.name = l.name;
        row.stage = l.stage;
        row.chosen_d = -1;
        row.vanilla.params = (unsigned long long)(l.dense_in) * l.dense_out + l.dense_out;
        row.vanilla.macs = (unsigned long long)(l.dense_in) * l.dense_out;
        row.vanilla.out_shape = {1, l.dense_out, 1, 1};
        row.compressed = row.vanilla;
        report.rows.push_back(row);
        cur.c = l.dense_out;
        break;
      }
      case LayerDescriptor::Kind::residual_block: {
        Shape4 entry = cur;
        for (const LayerDescriptor& il : l.inner) {
          if (il.kind == LayerDescriptor::Kind::conv)
            detail::cost_conv_row(arch, policy, il.name, l.stage, il.conv, cur, report);
          else if (il.kind != LayerDescriptor::Kind::relu)
            throw infeasible_error("network_cost: unsupported layer inside block '" + l.name +
                                   "'");
        }
        if (l.projection) {
          ConvSpec ps = projection_spec(l);
          Shape4 branch = entry;
          detail::cost_conv_row(arch, policy, l.name + ".proj", l.stage, ps, branch, report);
          if (branch != cur)
            throw infeasible_error("network_cost: projection of '" + l.name +
                                   "' lands on " + to_string(branch) + ", main path on " +
                                   to_string(cur));
        } else if (entry != cur) {
          throw infeasible_error("network_cost: block '" + l.name +
                                 "' changes shape without a projection");
        }
        break;
      }
    }
  }

  for (const CostRow& r : report.rows) {
    report.vanilla_total.params += r.vanilla.params;
    report.vanilla_total.macs += r.vanilla.macs;
    report.compressed_total.params += r.compressed.params;
    report.compressed_total.macs += r.compressed.macs;
  }
  report.params_ratio = report.vanilla_total.params
                            ? double(report.compressed_total.params) /
                                  double(report.vanilla_total.params)
                            : 0.0;
  report.macs_ratio = report.vanilla_total.macs
                          ? double(report.compressed_total.macs) / double(report.vanilla_total.macs)
                          : 0.0;
  return report;
}

}  // namespace compconv
