#pragma once
// JSON bindings: architecture files the analyzer can load, and machine-
// readable cost reports that survive an exact round trip.
#include <fstream>
#include <string>

#include <json.hpp>

#include "arch.hpp"
#include "cost.hpp"
#include "plan.hpp"

namespace compconv {

using nlohmann::json;

// ---- plans (emitted by the plan command) ---------------------------------

inline json plan_to_json(const CompPlan& p) {
  json j;
  j["d"] = p.d;
  j["c_prim"] = p.c_prim;
  j["c_in"] = p.c_in;
  j["c_out"] = p.c_out;
  j["block_sizes"] = p.block_sizes;
  json copies = json::array();
  for (const CopySpec& c : p.copy_specs)
    copies.push_back({{"start", c.start}, {"len", c.len}, {"wrap", c.wrap}});
  j["copy_specs"] = copies;
  j["tail_channels"] = p.tail_channels;
  j["extra_drop"] = p.extra_drop;
  json order = json::array();
  for (const Segment& s : p.output_order) order.push_back(segment_token(s));
  j["output_order"] = order;
  j["shuffle_groups"] = p.shuffle_groups;
  return j;
}

// ---- architectures -------------------------------------------------------

inline const char* kind_name(LayerDescriptor::Kind k) {
  switch (k) {
    case LayerDescriptor::Kind::conv: return "conv";
    case LayerDescriptor::Kind::maxpool: return "maxpool";
    case LayerDescriptor::Kind::global_avg_pool: return "global_avg_pool";
    case LayerDescriptor::Kind::dense: return "dense";
    case LayerDescriptor::Kind::relu: return "relu";
    case LayerDescriptor::Kind::residual_block: return "residual_block";
  }
  return "";
}

inline json layer_to_json(const LayerDescriptor& l) {
  json j;
  j["kind"] = kind_name(l.kind);
  j["name"] = l.name;
  switch (l.kind) {
    case LayerDescriptor::Kind::conv:
      j["c_in"] = l.conv.c_in;
      j["c_out"] = l.conv.c_out;
      j["k"] = l.conv.k;
      j["stride"] = l.conv.stride;
      j["padding"] = l.conv.padding;
      j["groups"] = l.conv.groups;
      break;
    case LayerDescriptor::Kind::dense:
      j["in"] = l.dense_in;
      j["out"] = l.dense_out;
      break;
    case LayerDescriptor::Kind::residual_block: {
      j["projection"] = l.projection;
      json inner = json::array();
      for (const LayerDescriptor& il : l.inner) inner.push_back(layer_to_json(il));
      j["inner"] = inner;
      break;
    }
    default: break;
  }
  return j;
}

inline json arch_to_json(const ArchSpec& a) {
  json j;
  j["name"] = a.name;
  j["input_shape"] = {a.input_shape.n, a.input_shape.c, a.input_shape.h, a.input_shape.w};
  json layers = json::array();
  for (const LayerDescriptor& l : a.layers) layers.push_back(layer_to_json(l));
  j["layers"] = layers;
  j["skip_list"] = a.skip_list;
  return j;
}

inline LayerDescriptor layer_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("name"))
    throw io_error("arch json: every layer needs a kind and a name");
  LayerDescriptor l;
  std::string kind = j.at("kind").get<std::string>();
  l.name = j.at("name").get<std::string>();
  if (kind == "conv") {
    l.kind = LayerDescriptor::Kind::conv;
    l.conv.c_in = j.at("c_in").get<long>();
    l.conv.c_out = j.at("c_out").get<long>();
    l.conv.k = j.value("k", 3L);
    l.conv.stride = j.value("stride", 1L);
    l.conv.padding = j.value("padding", l.conv.k / 2);
    l.conv.groups = j.value("groups", 1L);
  } else if (kind == "maxpool") {
    l.kind = LayerDescriptor::Kind::maxpool;
  } else if (kind == "global_avg_pool") {
    l.kind = LayerDescriptor::Kind::global_avg_pool;
  } else if (kind == "relu") {
    l.kind = LayerDescriptor::Kind::relu;
  } else if (kind == "dense") {
    l.kind = LayerDescriptor::Kind::dense;
    l.dense_in = j.at("in").get<long>();
    l.dense_out = j.at("out").get<long>();
  } else if (kind == "residual_block") {
    l.kind = LayerDescriptor::Kind::residual_block;
    l.projection = j.value("projection", false);
    if (!j.contains("inner") || !j.at("inner").is_array())
      throw io_error("arch json: residual block '" + l.name + "' needs an inner array");
    for (const json& ij : j.at("inner")) l.inner.push_back(layer_from_json(ij));
  } else {
    throw io_error("arch json: unknown layer kind '" + kind + "'");
  }
  return l;
}

inline ArchSpec arch_from_json(const json& j) {
  try {
    if (!j.is_object()) throw io_error("arch json: top level must be an object");
    ArchSpec a;
    a.name = j.value("name", std::string("unnamed"));
    if (!j.contains("input_shape") || !j.at("input_shape").is_array() ||
        j.at("input_shape").size() != 4)
      throw io_error("arch json: input_shape must be [n, c, h, w]");
    const json& s = j.at("input_shape");
    a.input_shape = {s[0].get<long>(), s[1].get<long>(), s[2].get<long>(), s[3].get<long>()};
    if (!j.contains("layers") || !j.at("layers").is_array())
      throw io_error("arch json: layers must be an array");
    for (const json& lj : j.at("layers")) a.layers.push_back(layer_from_json(lj));
    if (j.contains("skip_list"))
      for (const json& sj : j.at("skip_list")) a.skip_list.push_back(sj.get<std::string>());
    assign_stages(a);
    return a;
  } catch (const io_error&) {
    throw;
  } catch (const std::exception& e) {
    throw io_error("arch json: " + std::string(e.what()));
  }
}

inline void save_arch(const ArchSpec& a, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw io_error("save_arch: cannot open " + path);
  f << arch_to_json(a).dump(2) << "\n";
  if (!f) throw io_error("save_arch: write failed for " + path);
}

inline ArchSpec load_arch(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("load_arch: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw io_error("load_arch: " + path + ": " + e.what());
  }
  return arch_from_json(j);
}

// ---- cost reports --------------------------------------------------------

inline json cost_to_json(const LayerCost& c) {
  return json{{"params", c.params},
              {"macs", c.macs},
              {"out_shape", {c.out_shape.n, c.out_shape.c, c.out_shape.h, c.out_shape.w}}};
}

inline LayerCost cost_from_json(const json& j) {
  LayerCost c;
  c.params = j.at("params").get<unsigned long long>();
  c.macs = j.at("macs").get<unsigned long long>();
  const json& s = j.at("out_shape");
  c.out_shape = {s[0].get<long>(), s[1].get<long>(), s[2].get<long>(), s[3].get<long>()};
  return c;
}

inline json report_to_json(const CostReport& r) {
  json rows = json::array();
  for (const CostRow& row : r.rows)
    rows.push_back({{"name", row.name},
                    {"stage", row.stage},
                    {"chosen_d", row.chosen_d},
                    {"vanilla", cost_to_json(row.vanilla)},
                    {"compressed", cost_to_json(row.compressed)}});
  return json{{"arch", r.arch},
              {"policy", r.policy},
              {"rows", rows},
              {"vanilla_total", {{"params", r.vanilla_total.params}, {"macs", r.vanilla_total.macs}}},
              {"compressed_total",
               {{"params", r.compressed_total.params}, {"macs", r.compressed_total.macs}}},
              {"params_ratio", r.params_ratio},
              {"macs_ratio", r.macs_ratio}};
}

inline CostReport report_from_json(const json& j) {
  try {
    CostReport r;
    r.arch = j.at("arch").get<std::string>();
    r.policy = j.at("policy").get<std::string>();
    for (const json& rj : j.at("rows")) {
      CostRow row;
      row.name = rj.at("name").get<std::string>();
      row.stage = rj.at("stage").get<long>();
      row.chosen_d = rj.at("chosen_d").get<long>();
      row.vanilla = cost_from_json(rj.at("vanilla"));
      row.compressed = cost_from_json(rj.at("compressed"));
      r.rows.push_back(row);
    }
    r.vanilla_total.params = j.at("vanilla_total").at("params").get<unsigned long long>();
    r.vanilla_total.macs = j.at("vanilla_total").at("macs").get<unsigned long long>();
    r.compressed_total.params = j.at("compressed_total").at("params").get<unsigned long long>();
    r.compressed_total.macs = j.at("compressed_total").at("macs").get<unsigned long long>();
    r.params_ratio = j.at("params_ratio").get<double>();
    r.macs_ratio = j.at("macs_ratio").get<double>();
    return r;
  } catch (const std::exception& e) {
    throw io_error("report json: " + std::string(e.what()));
  }
}

}  // namespace compconv
