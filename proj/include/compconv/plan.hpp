#pragma once
// Compression planning: how an output budget of c_out channels is split into
// doubling blocks, an identity tail, and a top transform, and how the
// recursion depth is chosen per layer.
//
// Block layout at depth d >= 2:
//   G_1 = k x k conv of the input, c_prim channels
//   G_2 = copy(|G_1|) ++ G_1
//   G_m = copy(|G_{m-1}|) ++ square_conv(G_{m-1})        m = 3..d
//   output = G_2 ++ ... ++ G_d ++ square_conv(G_d) ++ depthwise_tail(G_d)
// so |G_m| = 2^(m-1) * c_prim and the raw output is 2*(2^d - 1) * c_prim
// channels.  The surplus over c_out is dropped from the end: the tail first,
// then (layout_plan only) the top transform.  Identity copies read the layer
// input from channel 0, cyclically when the input is narrower than the copy.
#include <stdexcept>
#include <string>
#include <vector>

namespace compconv {

// Requested configuration cannot be realized (CLI maps this to exit code 3).
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DepthPolicy {
  enum class Kind { adaptive, global_depth, vanilla };
  Kind kind = Kind::vanilla;
  long c0 = 0;  // adaptive: width budget steering per-layer depth
  long d = 0;   // global_depth: one depth for every layer

  static DepthPolicy adaptive(long c0) {
    if (c0 < 1) throw std::invalid_argument("DepthPolicy::adaptive: c0 must be positive");
    DepthPolicy p;
    p.kind = Kind::adaptive;
    p.c0 = c0;
    return p;
  }
  static DepthPolicy global(long d) {
    if (d < 0) throw std::invalid_argument("DepthPolicy::global: depth must be >= 0");
    DepthPolicy p;
    p.kind = Kind::global_depth;
    p.d = d;
    return p;
  }
  static DepthPolicy vanilla() { return DepthPolicy{}; }
};

// Smallest primary width whose doubled pyramid covers c_out.
inline long compute_cprim(long c_out, long d) {
  if (c_out < 1) throw std::invalid_argument("compute_cprim: c_out must be positive");
  if (d < 1) throw std::invalid_argument("compute_cprim: depth must be >= 1");
  long raw_per_unit = 2 * ((1L << d) - 1);
  return (c_out + raw_per_unit - 1) / raw_per_unit;
}

// Depth grows with how many times c0 fits into the input width, capped at 3.
inline long choose_depth(long c_in, long c0) {
  if (c_in < 1 || c0 < 1) throw std::invalid_argument("choose_depth: arguments must be positive");
  long q = c_in / c0;
  long lg = 0;
  while (q > 1) {
    q >>= 1;
    ++lg;
  }
  long d = lg + 1;
  return d < 3 ? d : 3;
}

struct CopySpec {
  long start = 0;
  long len = 0;
  bool wrap = false;  // true when the read is cyclic (len exceeds c_in)

  bool operator==(const CopySpec& o) const {
    return start == o.start && len == o.len && wrap == o.wrap;
  }
};

enum class SegmentKind { block, top, tail };

struct Segment {
  SegmentKind kind = SegmentKind::block;
  long m = 0;         // block index for kind == block, unused otherwise
  long channels = 0;  // channels this segment contributes after dropping

  bool operator==(const Segment& o) const {
    return kind == o.kind && m == o.m && channels == o.channels;
  }
};

struct CompPlan {
  long d = 0;       // recursion depth; 0 means plain convolution
  long c_prim = 0;  // primary width (equals c_out when d == 0)
  long c_in = 0;
  long c_out = 0;
  std::vector<long> block_sizes;      // |G_1| .. |G_d|
  std::vector<CopySpec> copy_specs;   // identity reads feeding G_2 .. G_d
  long tail_channels = 0;             // surviving depthwise tail width
  long extra_drop = 0;                // channels trimmed off the top transform
  std::vector<Segment> output_order;  // concatenation layout, sums to c_out
  long shuffle_groups = 1;

  bool operator==(const CompPlan& o) const {
    return d == o.d && c_prim == o.c_prim && c_in == o.c_in && c_out == o.c_out &&
           block_sizes == o.block_sizes && copy_specs == o.copy_specs &&
           tail_channels == o.tail_channels && extra_drop == o.extra_drop &&
           output_order == o.output_order && shuffle_groups == o.shuffle_groups;
  }
};

inline long raw_total(long d, long c_prim) { return 2 * ((1L << d) - 1) * c_prim; }

inline long shuffle_groups_for(long c_out) {
  if (c_out % 4 == 0) return 4;
  if (c_out % 2 == 0) return 2;
  return 1;
}

inline CompPlan vanilla_plan(long c_in, long c_out) {
  if (c_in < 1 || c_out < 1)
    throw std::invalid_argument("vanilla_plan: channel counts must be positive");
  CompPlan p;
  p.d = 0;
  p.c_prim = c_out;
  p.c_in = c_in;
  p.c_out = c_out;
  p.shuffle_groups = 1;
  return p;
}

// Builds the layout at exactly depth d, trimming the top transform when the
// drop exceeds the whole tail.  Throws infeasible_error when even the top
// would be consumed (possible only for c_out <= 2^d - 2).
inline CompPlan layout_plan(long c_in, long c_out, long d) {
  if (c_in < 1 || c_out < 1)
    throw std::invalid_argument("layout_plan: channel counts must be positive");
  if (d < 0) throw std::invalid_argument("layout_plan: depth must be >= 0");
  if (d == 0) return vanilla_plan(c_in, c_out);

  CompPlan p;
  p.d = d;
  p.c_in = c_in;
  p.c_out = c_out;
  p.c_prim = compute_cprim(c_out, d);
  for (long m = 1; m <= d; ++m) p.block_sizes.push_back((1L << (m - 1)) * p.c_prim);
  long drop = raw_total(d, p.c_prim) - c_out;
  long tail_raw = p.block_sizes.back();

  if (d == 1) {
    // output = G_1 ++ tail(G_1); drop is 0 or 1, always absorbed by the tail
    p.tail_channels = tail_raw - drop;
    p.extra_drop = 0;
    p.output_order.push_back({SegmentKind::block, 1, p.c_prim});
    p.output_order.push_back({SegmentKind::tail, 0, p.tail_channels});
  } else {
    long top_raw = p.block_sizes.back();
    if (drop <= tail_raw) {
      p.tail_channels = tail_raw - drop;
      p.extra_drop = 0;
    } else {
      p.tail_channels = 0;
      p.extra_drop = drop - tail_raw;
      if (p.extra_drop >= top_raw)
        throw infeasible_error("layout_plan: depth " + std::to_string(d) +
                               " cannot produce c_out=" + std::to_string(c_out) +
                               " (needs c_out > " + std::to_string((1L << d) - 2) + ")");
    }
    for (long m = 2; m <= d; ++m) {
      long len = p.block_sizes[std::size_t(m - 2)];
      p.copy_specs.push_back({0, len, len > c_in});
      p.output_order.push_back({SegmentKind::block, m, p.block_sizes[std::size_t(m - 1)]});
    }
    p.output_order.push_back({SegmentKind::top, 0, top_raw - p.extra_drop});
    p.output_order.push_back({SegmentKind::tail, 0, p.tail_channels});
  }
  p.shuffle_groups = shuffle_groups_for(c_out);
  return p;
}

// Resolves the policy depth downward until the layout is comfortable: the
// budget must cover one full pyramid (c_out >= 2*(2^d - 1)) and the drop must
// not spill past the tail into the top transform.  Depth 1 always qualifies,
// so plans built here never carry extra_drop.
inline CompPlan build_plan(long c_in, long c_out, const DepthPolicy& policy) {
  if (c_in < 1 || c_out < 1)
    throw std::invalid_argument("build_plan: channel counts must be positive");
  long d = 0;
  switch (policy.kind) {
    case DepthPolicy::Kind::vanilla: return vanilla_plan(c_in, c_out);
    case DepthPolicy::Kind::adaptive: d = choose_depth(c_in, policy.c0); break;
    case DepthPolicy::Kind::global_depth: d = policy.d; break;
  }
  if (d == 0) return vanilla_plan(c_in, c_out);
  while (d > 1) {
    long c_prim = compute_cprim(c_out, d);
    long drop = raw_total(d, c_prim) - c_out;
    long tail_raw = (1L << (d - 1)) * c_prim;
    if (c_out < 2 * ((1L << d) - 1) || drop > tail_raw)
      --d;
    else
      break;
  }
  return layout_plan(c_in, c_out, d);
}

// Structural audit.  Returns human-readable violations; empty means valid.
inline std::vector<std::string> validate_plan(const CompPlan& p) {
  std::vector<std::string> out;
  auto bad = [&out](const std::string& msg) { out.push_back(msg); };

  if (p.c_in < 1) bad("c_in must be positive, got " + std::to_string(p.c_in));
  if (p.c_out < 1) bad("c_out must be positive, got " + std::to_string(p.c_out));
  if (p.d < 0) bad("depth must be >= 0, got " + std::to_string(p.d));
  if (!out.empty()) return out;

  if (p.d == 0) {
    if (p.c_prim != p.c_out)
      bad("vanilla plan must have c_prim == c_out, got c_prim=" + std::to_string(p.c_prim));
    if (!p.block_sizes.empty()) bad("vanilla plan must have no blocks");
    if (!p.copy_specs.empty()) bad("vanilla plan must have no identity copies");
    if (p.tail_channels != 0) bad("vanilla plan must have no tail");
    if (p.extra_drop != 0) bad("vanilla plan must have no extra drop");
    if (!p.output_order.empty()) bad("vanilla plan must have an empty output order");
    if (p.shuffle_groups != 1) bad("vanilla plan must not shuffle");
    return out;
  }

  long want_cprim = compute_cprim(p.c_out, p.d);
  if (p.c_prim != want_cprim)
    bad("c_prim=" + std::to_string(p.c_prim) + " is not minimal for c_out=" +
        std::to_string(p.c_out) + " at depth " + std::to_string(p.d) + " (want " +
        std::to_string(want_cprim) + ")");

  if (long(p.block_sizes.size()) != p.d) {
    bad("expected " + std::to_string(p.d) + " block sizes, got " +
        std::to_string(p.block_sizes.size()));
  } else {
    for (long m = 1; m <= p.d; ++m) {
      long want = (1L << (m - 1)) * p.c_prim;
      if (p.block_sizes[std::size_t(m - 1)] != want)
        bad("block " + std::to_string(m) + " must have " + std::to_string(want) +
            " channels, got " + std::to_string(p.block_sizes[std::size_t(m - 1)]));
    }
  }
  if (!out.empty()) return out;

  long drop = raw_total(p.d, p.c_prim) - p.c_out;
  long tail_raw = p.block_sizes.back();
  long want_tail = drop <= tail_raw ? tail_raw - drop : 0;
  long want_extra = drop <= tail_raw ? 0 : drop - tail_raw;
  if (p.tail_channels != want_tail)
    bad("tail_channels=" + std::to_string(p.tail_channels) + ", expected " +
        std::to_string(want_tail));
  if (p.extra_drop != want_extra)
    bad("extra_drop=" + std::to_string(p.extra_drop) + ", expected " +
        std::to_string(want_extra));
  if (p.d == 1 && p.extra_drop != 0)
    bad("depth-1 plans cannot trim the top transform");
  if (p.d >= 2 && p.extra_drop >= p.block_sizes.back())
    bad("extra_drop=" + std::to_string(p.extra_drop) +
        " consumes the whole top transform of " + std::to_string(p.block_sizes.back()));

  if (long(p.copy_specs.size()) != p.d - 1) {
    bad("expected " + std::to_string(p.d - 1) + " identity copies, got " +
        std::to_string(p.copy_specs.size()));
  } else {
    for (long m = 2; m <= p.d; ++m) {
      const CopySpec& cs = p.copy_specs[std::size_t(m - 2)];
      long want_len = p.block_sizes[std::size_t(m - 2)];
      if (cs.start != 0)
        bad("copy for block " + std::to_string(m) + " must start at channel 0");
      if (cs.len != want_len)
        bad("copy for block " + std::to_string(m) + " must read " + std::to_string(want_len) +
            " channels, got " + std::to_string(cs.len));
      if (cs.wrap != (cs.len > p.c_in))
        bad("copy for block " + std::to_string(m) + " has wrap=" +
            std::string(cs.wrap ? "true" : "false") + ", expected " +
            std::string(want_len > p.c_in ? "true" : "false"));
    }
  }

  // output layout: blocks 2..d (or block 1 when d == 1), top, tail
  std::vector<Segment> want_order;
  if (p.d == 1) {
    want_order.push_back({SegmentKind::block, 1, p.c_prim});
  } else {
    for (long m = 2; m <= p.d; ++m)
      want_order.push_back({SegmentKind::block, m, p.block_sizes[std::size_t(m - 1)]});
    want_order.push_back({SegmentKind::top, 0, p.block_sizes.back() - p.extra_drop});
  }
  want_order.push_back({SegmentKind::tail, 0, p.tail_channels});
  if (p.output_order != want_order) bad("output order does not match the block layout");

  long sum = 0;
  for (const Segment& s : p.output_order) sum += s.channels;
  if (sum != p.c_out)
    bad("output segments sum to " + std::to_string(sum) + ", expected c_out=" +
        std::to_string(p.c_out));

  long want_g = shuffle_groups_for(p.c_out);
  if (p.shuffle_groups != want_g)
    bad("shuffle_groups=" + std::to_string(p.shuffle_groups) + ", expected " +
        std::to_string(want_g));
  return out;
}

// ---- plan text record ----------------------------------------------------
// "key: value" lines, one plan per record, used inside weight files and by
// the CLI.  Lists are comma-separated; copies are start/len/wrap triples;
// output segments are G<m>:<channels>, top:<channels>, tail:<channels>.

inline std::string segment_token(const Segment& s) {
  switch (s.kind) {
    case SegmentKind::block: return "G" + std::to_string(s.m) + ":" + std::to_string(s.channels);
    case SegmentKind::top: return "top:" + std::to_string(s.channels);
    case SegmentKind::tail: return "tail:" + std::to_string(s.channels);
  }
  return "";
}

inline std::string plan_record(const CompPlan& p) {
  std::string out;
  out += "format: compplan/v1\n";
  out += "d: " + std::to_string(p.d) + "\n";
  out += "c_prim: " + std::to_string(p.c_prim) + "\n";
  out += "c_in: " + std::to_string(p.c_in) + "\n";
  out += "c_out: " + std::to_string(p.c_out) + "\n";
  out += "block_sizes:";
  for (std::size_t i = 0; i < p.block_sizes.size(); ++i)
    out += (i ? "," : " ") + std::to_string(p.block_sizes[i]);
  out += "\n";
  out += "copy_specs:";
  for (std::size_t i = 0; i < p.copy_specs.size(); ++i)
    out += (i ? "," : " ") + std::to_string(p.copy_specs[i].start) + "/" +
           std::to_string(p.copy_specs[i].len) + "/" + (p.copy_specs[i].wrap ? "1" : "0");
  out += "\n";
  out += "tail_channels: " + std::to_string(p.tail_channels) + "\n";
  out += "extra_drop: " + std::to_string(p.extra_drop) + "\n";
  out += "output_order:";
  for (std::size_t i = 0; i < p.output_order.size(); ++i)
    out += (i ? "," : " ") + segment_token(p.output_order[i]);
  out += "\n";
  out += "shuffle_groups: " + std::to_string(p.shuffle_groups) + "\n";
  return out;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) next = s.size();
    if (next > pos) out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

inline long parse_long(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("plan record: bad integer for " + what + ": '" + s + "'");
  }
}

}  // namespace detail

inline CompPlan parse_plan_record(const std::string& text) {
  CompPlan p;
  bool seen_format = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) throw std::runtime_error("plan record: malformed line '" + line + "'");
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());

    if (key == "format") {
      if (value != "compplan/v1")
        throw std::runtime_error("plan record: unsupported format '" + value + "'");
      seen_format = true;
    } else if (key == "d") {
      p.d = detail::parse_long(value, key);
    } else if (key == "c_prim") {
      p.c_prim = detail::parse_long(value, key);
    } else if (key == "c_in") {
      p.c_in = detail::parse_long(value, key);
    } else if (key == "c_out") {
      p.c_out = detail::parse_long(value, key);
    } else if (key == "block_sizes") {
      for (const std::string& tok : detail::split_list(value, ','))
        p.block_sizes.push_back(detail::parse_long(tok, key));
    } else if (key == "copy_specs") {
      for (const std::string& tok : detail::split_list(value, ',')) {
        std::vector<std::string> parts = detail::split_list(tok, '/');
        if (parts.size() != 3) throw std::runtime_error("plan record: bad copy spec '" + tok + "'");
        CopySpec cs;
        cs.start = detail::parse_long(parts[0], "copy start");
        cs.len = detail::parse_long(parts[1], "copy len");
        cs.wrap = detail::parse_long(parts[2], "copy wrap") != 0;
        p.copy_specs.push_back(cs);
      }
    } else if (key == "tail_channels") {
      p.tail_channels = detail::parse_long(value, key);
    } else if (key == "extra_drop") {
      p.extra_drop = detail::parse_long(value, key);
    } else if (key == "output_order") {
      for (const std::string& tok : detail::split_list(value, ',')) {
        std::size_t c = tok.find(':');
        if (c == std::string::npos || c == 0)
          throw std::runtime_error("plan record: bad segment '" + tok + "'");
        std::string name = tok.substr(0, c);
        long channels = detail::parse_long(tok.substr(c + 1), "segment channels");
        Segment seg;
        seg.channels = channels;
        if (name == "top") {
          seg.kind = SegmentKind::top;
        } else if (name == "tail") {
          seg.kind = SegmentKind::tail;
        } else if (name.size() > 1 && name[0] == 'G') {
          seg.kind = SegmentKind::block;
          seg.m = detail::parse_long(name.substr(1), "segment index");
        } else {
          throw std::runtime_error("plan record: unknown segment '" + name + "'");
        }
        p.output_order.push_back(seg);
      }
    } else if (key == "shuffle_groups") {
      p.shuffle_groups = detail::parse_long(value, key);
    } else {
      throw std::runtime_error("plan record: unknown key '" + key + "'");
    }
  }
  if (!seen_format) throw std::runtime_error("plan record: missing format line");
  return p;
}

}  // namespace compconv
