#pragma once
// Self-contained verification suites shared by the command-line tool and the
// demos: plan invariants, executable-layer invariants, gradient checks, and
// analytic-vs-instrumented cost agreement.  Heavy sweeps are chunked across
// worker threads (capped by COMPCONV_THREADS) and merged deterministically.
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "autograd.hpp"
#include "cost.hpp"
#include "layer.hpp"
#include "plan.hpp"
#include "prng.hpp"
#include "tensor.hpp"

namespace compconv {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<CheckResult> checks;

  long passed() const {
    long p = 0;
    for (const CheckResult& c : checks) p += c.pass ? 1 : 0;
    return p;
  }
  bool all_pass() const { return passed() == long(checks.size()); }
};

inline long verify_thread_count(long cases) {
  long limit = 0;
  if (const char* env = std::getenv("COMPCONV_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) limit = v;
  }
  if (limit == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    limit = hw == 0 ? 1 : long(hw);
  }
  return std::max(1L, std::min(limit, cases));
}

namespace detail {

// Runs one closure per case index on a pool of worker threads; failures are
// collected per chunk and merged in chunk order, so the output is identical
// for every thread count.
inline std::vector<std::string> run_chunked(long cases,
                                            const std::function<std::string(long)>& one_case) {
  long threads = verify_thread_count(cases);
  std::vector<std::vector<std::string>> failures(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  long per = (cases + threads - 1) / threads;
  for (long t = 0; t < threads; ++t) {
    long begin = t * per, end = std::min(cases, (t + 1) * per);
    pool.emplace_back([&, t, begin, end]() {
      for (long i = begin; i < end; ++i) {
        std::string msg = one_case(i);
        if (!msg.empty()) failures[std::size_t(t)].push_back(std::move(msg));
      }
    });
  }
  for (std::thread& th : pool) th.join();
  std::vector<std::string> merged;
  for (const auto& part : failures) merged.insert(merged.end(), part.begin(), part.end());
  return merged;
}

inline CheckResult summarize(const std::string& name, long cases,
                             const std::vector<std::string>& failures) {
  CheckResult r;
  r.name = name;
  r.pass = failures.empty();
  std::ostringstream os;
  if (failures.empty()) {
    os << cases << " cases";
  } else {
    os << failures.size() << " of " << cases << " cases failed; first: " << failures.front();
  }
  r.detail = os.str();
  return r;
}

inline double layer_fd_error(const CompPlan& plan, const HostSpec& host, std::uint64_t seed,
                             long h, long w) {
  CompConvLayer layer = init_layer(plan, host, InitConfig::he_normal(), seed);
  SplitMix64 rng = derive_substream(seed, Stream::misc, 77);
  Tensor input(1, plan.c_in, h, w);
  for (double& v : input.data) v = 2.0 * rng.next_double() - 1.0;

  std::vector<Tensor> params;
  params.push_back(input);
  params.push_back(layer.inner_weights);
  for (const Tensor& t : layer.square_weights) params.push_back(t);
  bool has_tail = plan.tail_channels > 0;
  if (has_tail) params.push_back(layer.tail_weights);

  auto rebuild = [&](const std::vector<Tensor>& ps) {
    CompConvLayer l = layer;
    std::size_t idx = 1;
    l.inner_weights = ps[idx++];
    for (Tensor& t : l.square_weights) t = ps[idx++];
    if (has_tail) l.tail_weights = ps[idx++];
    return forward(l, ps[0]);
  };

  Tensor probe = rebuild(params);
  Tensor readout(probe.shape.n, probe.shape.c, probe.shape.h, probe.shape.w);
  for (double& v : readout.data) v = 2.0 * rng.next_double() - 1.0;

  Graph g;
  long x = g.leaf(input, true);
  GraphLayer gl = graph_compconv(g, layer, x);
  g.backward_seeded(gl.out, readout);
  std::vector<Tensor> analytic;
  analytic.push_back(g.grad(x));
  for (long id : gl.params) analytic.push_back(g.grad(id));

  auto loss = [&](const std::vector<Tensor>& ps) {
    Tensor out = rebuild(ps);
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * readout.data[i];
    return s;
  };
  return finite_diff_check(loss, params, analytic, 1e-5);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// plans: structural invariants of the planner over exhaustive sweeps
inline VerifyReport verify_plans() {
  VerifyReport rep;
  rep.suite = "plans";

  {
    struct Case {
      long c_in, c_out, d;
    };
    std::vector<Case> cases;
    for (long d = 1; d <= 3; ++d)
      for (long c_in : {3L, 8L})
        for (long c_out = 1; c_out <= 600; ++c_out) cases.push_back({c_in, c_out, d});
    auto failures = detail::run_chunked(long(cases.size()), [&](long i) -> std::string {
      const Case& c = cases[std::size_t(i)];
      CompPlan p = build_plan(c.c_in, c.c_out, DepthPolicy::global(c.d));
      std::vector<std::string> problems = validate_plan(p);
      if (!problems.empty())
        return "c_in=" + std::to_string(c.c_in) + " c_out=" + std::to_string(c.c_out) +
               " d=" + std::to_string(c.d) + ": " + problems.front();
      if (p.extra_drop != 0)
        return "c_in=" + std::to_string(c.c_in) + " c_out=" + std::to_string(c.c_out) +
               " d=" + std::to_string(c.d) + ": planner left a trimmed top";
      return "";
    });
    rep.checks.push_back(detail::summarize("resolved plans are valid", long(cases.size()), failures));
  }

  {
    struct Case {
      long c_out, d;
    };
    std::vector<Case> cases;
    for (long d = 2; d <= 4; ++d)
      for (long c_out = 1; c_out <= 200; ++c_out) cases.push_back({c_out, d});
    auto failures = detail::run_chunked(long(cases.size()), [&](long i) -> std::string {
      const Case& c = cases[std::size_t(i)];
      long threshold = (1L << c.d) - 2;  // feasible only above this
      bool feasible = c.c_out > threshold;
      try {
        CompPlan p = layout_plan(6, c.c_out, c.d);
        if (!feasible) return "c_out=" + std::to_string(c.c_out) + " d=" + std::to_string(c.d) +
                              ": expected infeasible";
        std::vector<std::string> problems = validate_plan(p);
        if (!problems.empty())
          return "c_out=" + std::to_string(c.c_out) + " d=" + std::to_string(c.d) + ": " +
                 problems.front();
      } catch (const infeasible_error&) {
        if (feasible)
          return "c_out=" + std::to_string(c.c_out) + " d=" + std::to_string(c.d) +
                 ": unexpectedly infeasible";
      }
      return "";
    });
    rep.checks.push_back(
        detail::summarize("exact-depth layouts respect the feasibility bound", long(cases.size()),
                          failures));
  }

  {
    std::vector<std::string> failures;
    struct Expect {
      long c_in, c0, d;
    };
    const Expect table[] = {{3, 64, 1},    {64, 64, 1},  {128, 64, 2},  {255, 64, 2},
                            {256, 64, 3},  {512, 64, 3}, {1024, 64, 3}, {4096, 64, 3},
                            {512, 128, 3}, {512, 256, 2}, {512, 512, 1}, {64, 512, 1}};
    for (const Expect& e : table)
      if (choose_depth(e.c_in, e.c0) != e.d)
        failures.push_back("c_in=" + std::to_string(e.c_in) + " c0=" + std::to_string(e.c0));
    rep.checks.push_back(
        detail::summarize("adaptive depth choice matches the width rule", 12, failures));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// forward: executable-layer invariants
inline VerifyReport verify_forward() {
  VerifyReport rep;
  rep.suite = "forward";

  {
    // plain layers must match the direct convolution bit for bit
    std::vector<std::string> failures;
    SplitMix64 rng(20240601);
    for (long rep_i = 0; rep_i < 25; ++rep_i) {
      long c_in = 1 + long(rng.next_below(6));
      long c_out = 1 + long(rng.next_below(8));
      HostSpec host;
      host.k = rng.next_below(2) == 0 ? 1 : 3;
      host.stride = 1 + long(rng.next_below(2));
      host.padding = long(rng.next_below(2));
      CompConvLayer layer =
          init_layer(vanilla_plan(c_in, c_out), host, InitConfig::he_normal(), 50 + rep_i);
      Tensor x(1, c_in, 6, 6);
      for (double& v : x.data) v = 2.0 * rng.next_double() - 1.0;
      ConvSpec spec;
      spec.k = host.k;
      spec.stride = host.stride;
      spec.padding = host.padding;
      spec.c_in = c_in;
      spec.c_out = c_out;
      Tensor direct = conv2d(x, layer.inner_weights, spec);
      if (!same_values(forward(layer, x), direct))
        failures.push_back("case " + std::to_string(rep_i));
    }
    rep.checks.push_back(detail::summarize("plain layers equal direct convolution", 25, failures));
  }

  {
    // identity copies must reappear verbatim in the shuffled output
    std::vector<std::string> failures;
    struct Case {
      long c_in, c_out, d, stride;
    };
    const Case cases[] = {{8, 20, 2, 1}, {2, 14, 2, 1}, {5, 30, 3, 1}, {6, 24, 2, 2}, {3, 60, 3, 1}};
    long case_id = 0;
    for (const Case& c : cases) {
      ++case_id;
      CompPlan plan = build_plan(c.c_in, c.c_out, DepthPolicy::global(c.d));
      HostSpec host;
      host.stride = c.stride;
      CompConvLayer layer = init_layer(plan, host, InitConfig::he_normal(), 90 + case_id);
      SplitMix64 rng(900 + case_id);
      Tensor x(2, c.c_in, 8, 8);
      for (double& v : x.data) v = 2.0 * rng.next_double() - 1.0;
      Tensor y = forward(layer, x);

      // undo the shuffle, then walk the declared segment layout
      Tensor pre(y.shape.n, y.shape.c, y.shape.h, y.shape.w);
      for (long i = 0; i < y.shape.c; ++i) {
        long dst = shuffle_destination(i, y.shape.c, plan.shuffle_groups);
        for (long b = 0; b < y.shape.n; ++b)
          for (long yy = 0; yy < y.shape.h; ++yy)
            for (long xx = 0; xx < y.shape.w; ++xx)
              pre.at(b, i, yy, xx) = y.at(b, dst, yy, xx);
      }
      long offset = 0;
      bool ok = true;
      for (const Segment& seg : plan.output_order) {
        if (seg.kind == SegmentKind::block && seg.m >= 2) {
          const CopySpec& cs = plan.copy_specs[std::size_t(seg.m - 2)];
          Tensor expected = slice_channels(x, cs.start, cs.len, cs.wrap);
          if (host.stride > 1) expected = spatial_subsample(expected, host.stride);
          Tensor got = slice_channels(pre, offset, cs.len, false);
          if (!same_values(got, expected)) ok = false;
        }
        offset += seg.channels;
      }
      if (!ok) failures.push_back("case " + std::to_string(case_id));
    }
    rep.checks.push_back(detail::summarize("identity copies survive to the output", 5, failures));
  }

  {
    // output shape and determinism across a sweep of budgets
    std::vector<std::string> failures;
    long cases = 0;
    for (long d = 1; d <= 3; ++d)
      for (long c_out : {1L, 3L, 7L, 16L, 25L, 48L}) {
        ++cases;
        CompPlan plan = build_plan(4, c_out, DepthPolicy::global(d));
        CompConvLayer layer = init_layer(plan, HostSpec{}, InitConfig::fixed_fixture(), 0);
        SplitMix64 rng(7000 + d * 100 + c_out);
        Tensor x(1, 4, 5, 5);
        for (double& v : x.data) v = 2.0 * rng.next_double() - 1.0;
        Tensor y1 = forward(layer, x);
        Tensor y2 = forward(layer, x);
        if (y1.shape.c != c_out || y1.shape.h != 5 || y1.shape.w != 5)
          failures.push_back("shape d=" + std::to_string(d) + " c_out=" + std::to_string(c_out));
        else if (!same_values(y1, y2))
          failures.push_back("determinism d=" + std::to_string(d) +
                             " c_out=" + std::to_string(c_out));
      }
    rep.checks.push_back(
        detail::summarize("shapes follow the plan and runs are deterministic", cases, failures));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// grads: finite-difference confirmation of the backward pass
inline VerifyReport verify_grads() {
  VerifyReport rep;
  rep.suite = "grads";
  struct Case {
    std::string label;
    CompPlan plan;
    HostSpec host;
    long h, w;
  };
  std::vector<Case> cases;
  HostSpec plain;
  HostSpec strided;
  strided.stride = 2;
  cases.push_back({"depth 1", build_plan(8, 7, DepthPolicy::global(1)), plain, 5, 5});
  cases.push_back({"depth 2 cyclic", build_plan(2, 14, DepthPolicy::global(2)), plain, 5, 5});
  cases.push_back({"depth 2 trimmed tail", build_plan(8, 15, DepthPolicy::global(2)), plain, 5, 5});
  cases.push_back({"depth 3", build_plan(5, 14, DepthPolicy::global(3)), plain, 5, 5});
  cases.push_back({"exact depth trimmed top", layout_plan(8, 16, 3), plain, 5, 5});
  cases.push_back({"strided host", build_plan(6, 12, DepthPolicy::global(2)), strided, 7, 7});

  auto failures = detail::run_chunked(long(cases.size()), [&](long i) -> std::string {
    const Case& c = cases[std::size_t(i)];
    double err = detail::layer_fd_error(c.plan, c.host, 400 + std::uint64_t(i), c.h, c.w);
    if (err >= 1e-4) {
      std::ostringstream os;
      os << c.label << ": max rel err " << err;
      return os.str();
    }
    return "";
  });
  rep.checks.push_back(
      detail::summarize("layer gradients match central differences", long(cases.size()), failures));
  return rep;
}

// ---------------------------------------------------------------------------
// costs: the analytic model against the instrumented executor
inline VerifyReport verify_costs() {
  VerifyReport rep;
  rep.suite = "costs";

  {
    struct Case {
      long c_in, c_out, d;
    };
    std::vector<Case> cases;
    for (long d = 1; d <= 3; ++d)
      for (long c_in : {3L, 8L, 64L})
        for (long c_out = 1; c_out <= 128; ++c_out) cases.push_back({c_in, c_out, d});
    auto failures = detail::run_chunked(long(cases.size()), [&](long i) -> std::string {
      const Case& c = cases[std::size_t(i)];
      CompPlan plan = build_plan(c.c_in, c.c_out, DepthPolicy::global(c.d));
      HostSpec host;
      CompConvLayer layer = init_layer(plan, host, InitConfig::fixed_fixture(), 0);
      Tensor x = Tensor::full(1, c.c_in, 6, 6, 0.25);
      MacCounter counter;
      forward(layer, x, &counter);
      LayerCost predicted = compconv_cost(plan, host, 6, 6);
      unsigned long long weight_elems = layer.inner_weights.data.size();
      for (const Tensor& t : layer.square_weights) weight_elems += t.data.size();
      if (plan.tail_channels > 0) weight_elems += layer.tail_weights.data.size();
      if (counter.macs != predicted.macs)
        return "macs c_in=" + std::to_string(c.c_in) + " c_out=" + std::to_string(c.c_out) +
               " d=" + std::to_string(c.d) + ": " + std::to_string(counter.macs) + " vs " +
               std::to_string(predicted.macs);
      if (weight_elems != predicted.params)
        return "params c_in=" + std::to_string(c.c_in) + " c_out=" + std::to_string(c.c_out) +
               " d=" + std::to_string(c.d);
      return "";
    });
    rep.checks.push_back(detail::summarize("analytic cost equals instrumented execution",
                                           long(cases.size()), failures));
  }

  {
    // exact-depth layouts with a trimmed top, same agreement
    struct Case {
      long c_in, c_out, d;
    };
    const Case cases_arr[] = {{6, 16, 3}, {8, 16, 3}, {4, 18, 3}, {3, 5, 2}, {8, 40, 4}};
    std::vector<std::string> failures;
    for (const Case& c : cases_arr) {
      CompPlan plan = layout_plan(c.c_in, c.c_out, c.d);
      HostSpec host;
      CompConvLayer layer = init_layer(plan, host, InitConfig::fixed_fixture(), 0);
      Tensor x = Tensor::full(1, c.c_in, 6, 6, 0.25);
      MacCounter counter;
      forward(layer, x, &counter);
      LayerCost predicted = compconv_cost(plan, host, 6, 6);
      if (counter.macs != predicted.macs)
        failures.push_back("c_out=" + std::to_string(c.c_out) + " d=" + std::to_string(c.d));
    }
    rep.checks.push_back(detail::summarize("trimmed layouts agree as well", 5, failures));
  }

  {
    // network totals are the sum of their rows
    std::vector<std::string> failures;
    for (long d : {1L, 2L, 3L}) {
      CostReport report = network_cost(vgg16_cifar(10), DepthPolicy::global(d));
      CostTotals v{}, c{};
      for (const CostRow& row : report.rows) {
        v.params += row.vanilla.params;
        v.macs += row.vanilla.macs;
        c.params += row.compressed.params;
        c.macs += row.compressed.macs;
      }
      if (v.params != report.vanilla_total.params || v.macs != report.vanilla_total.macs ||
          c.params != report.compressed_total.params || c.macs != report.compressed_total.macs)
        failures.push_back("d=" + std::to_string(d));
    }
    rep.checks.push_back(detail::summarize("report totals equal the sum of rows", 3, failures));
  }
  return rep;
}

inline std::vector<VerifyReport> run_verify(const std::string& suite) {
  std::vector<VerifyReport> reports;
  bool all = suite == "all";
  if (all || suite == "plans") reports.push_back(verify_plans());
  if (all || suite == "forward") reports.push_back(verify_forward());
  if (all || suite == "grads") reports.push_back(verify_grads());
  if (all || suite == "costs") reports.push_back(verify_costs());
  if (reports.empty()) throw std::invalid_argument("unknown verify suite: " + suite);
  return reports;
}

}  // namespace compconv
