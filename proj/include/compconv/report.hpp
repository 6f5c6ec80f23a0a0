#pragma once
// Renderers for the command-line tool: aligned text tables with SI-suffixed
// counts, machine-readable CSV with exact integers, and JSON passthrough.
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cost.hpp"
#include "plan.hpp"
#include "train.hpp"
#include "verify.hpp"

namespace compconv {

// Three significant digits with K/M/G/... suffixes: 999 -> "999",
// 14715594 -> "14.7M", 313201664 -> "313M".
inline std::string si_format(unsigned long long value) {
  if (value < 1000) return std::to_string(value);
  static const char* suffixes = "KMGTPE";
  double v = double(value);
  int idx = -1;
  while (v >= 1000.0 && idx < 5) {
    v /= 1000.0;
    ++idx;
  }
  char buf[32];
  int decimals = v < 10.0 ? 2 : v < 100.0 ? 1 : 0;
  std::snprintf(buf, sizeof buf, "%.*f%c", decimals, v, suffixes[idx]);
  return buf;
}

namespace detail {

inline std::string pad(const std::string& s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

// Renders rows as an aligned table; columns marked numeric are
// right-aligned.
inline std::string render_table(const std::vector<std::vector<std::string>>& rows,
                                const std::vector<bool>& numeric) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      os << pad(row[c], widths[c], c < numeric.size() && numeric[c]);
    }
    os << "\n";
  }
  return os.str();
}

inline std::string ratio_str(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", r);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// plan summaries
inline std::string format_plan_text(const CompPlan& p, const HostSpec& host) {
  std::ostringstream os;
  os << "plan: " << p.c_in << " -> " << p.c_out << " channels, depth " << p.d << ", primary width "
     << p.c_prim << "\n";
  os << "host: " << host.k << "x" << host.k << " kernel, stride " << host.stride << ", padding "
     << host.padding << "\n";
  if (p.d == 0) {
    os << "layout: plain convolution (no decomposition)\n";
  } else {
    os << "blocks:";
    for (std::size_t i = 0; i < p.block_sizes.size(); ++i)
      os << " |G" << (i + 1) << "|=" << p.block_sizes[i];
    os << "\n";
    if (!p.copy_specs.empty()) {
      os << "copies:";
      for (const CopySpec& c : p.copy_specs)
        os << " [" << c.start << "," << c.start + c.len << ")" << (c.wrap ? " cyclic" : "");
      os << "\n";
    }
    os << "output:";
    for (const Segment& s : p.output_order) os << " " << segment_token(s);
    os << " (shuffle groups " << p.shuffle_groups << ")\n";
    if (p.extra_drop > 0) os << "trimmed top filters: " << p.extra_drop << "\n";
  }
  unsigned long long units = compconv_units(p);
  unsigned long long dense_units =
      (unsigned long long)(p.c_in) * (unsigned long long)(p.c_out);
  os << "cost units: " << units << " (plain " << dense_units << ", ratio "
     << detail::ratio_str(compression_ratio(p)) << ")\n";
  LayerCost cost = compconv_cost(p, host, 32, 32);
  os << "at 32x32: params " << si_format(cost.params) << ", macs " << si_format(cost.macs) << "\n";
  return os.str();
}

inline std::string format_plan_csv(const CompPlan& p, const HostSpec& host) {
  std::ostringstream os;
  os << "field,value\n";
  os << "c_in," << p.c_in << "\n";
  os << "c_out," << p.c_out << "\n";
  os << "depth," << p.d << "\n";
  os << "c_prim," << p.c_prim << "\n";
  os << "tail_channels," << p.tail_channels << "\n";
  os << "extra_drop," << p.extra_drop << "\n";
  os << "shuffle_groups," << p.shuffle_groups << "\n";
  os << "units," << compconv_units(p) << "\n";
  LayerCost cost = compconv_cost(p, host, 32, 32);
  os << "params," << cost.params << "\n";
  os << "macs_32x32," << cost.macs << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// cost reports
inline std::string format_report_text(const CostReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"layer", "stage", "d", "params", "macs", "params'", "macs'", "ratio"});
  for (const CostRow& r : report.rows) {
    double ratio = r.vanilla.macs == 0 ? 1.0 : double(r.compressed.macs) / double(r.vanilla.macs);
    rows.push_back({r.name, std::to_string(r.stage),
                    r.chosen_d < 0 ? std::string("-") : std::to_string(r.chosen_d),
                    si_format(r.vanilla.params), si_format(r.vanilla.macs),
                    si_format(r.compressed.params), si_format(r.compressed.macs),
                    detail::ratio_str(ratio)});
  }
  rows.push_back({"total", "", "", si_format(report.vanilla_total.params),
                  si_format(report.vanilla_total.macs), si_format(report.compressed_total.params),
                  si_format(report.compressed_total.macs), ""});
  std::ostringstream os;
  os << report.arch << " under " << report.policy << "\n";
  os << detail::render_table(rows, {false, true, true, true, true, true, true, true});
  os << "params ratio " << detail::ratio_str(report.params_ratio) << ", macs ratio "
     << detail::ratio_str(report.macs_ratio) << "\n";
  return os.str();
}

inline std::string format_report_csv(const CostReport& report) {
  std::ostringstream os;
  os << "layer,stage,chosen_d,vanilla_params,vanilla_macs,compressed_params,compressed_macs\n";
  for (const CostRow& r : report.rows)
    os << r.name << "," << r.stage << "," << r.chosen_d << "," << r.vanilla.params << ","
       << r.vanilla.macs << "," << r.compressed.params << "," << r.compressed.macs << "\n";
  os << "total,,," << report.vanilla_total.params << "," << report.vanilla_total.macs << ","
     << report.compressed_total.params << "," << report.compressed_total.macs << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// verification reports
inline std::string format_verify_text(const std::vector<VerifyReport>& reports) {
  std::ostringstream os;
  long total = 0, passed = 0;
  for (const VerifyReport& rep : reports) {
    for (const CheckResult& c : rep.checks) {
      os << (c.pass ? "[pass]" : "[FAIL]") << " " << rep.suite << ": " << c.name;
      if (!c.detail.empty()) os << " (" << c.detail << ")";
      os << "\n";
      ++total;
      passed += c.pass ? 1 : 0;
    }
  }
  os << passed << "/" << total << " checks passed\n";
  return os.str();
}

inline std::string format_verify_csv(const std::vector<VerifyReport>& reports) {
  std::ostringstream os;
  os << "suite,check,pass,detail\n";
  for (const VerifyReport& rep : reports)
    for (const CheckResult& c : rep.checks) {
      std::string detail = c.detail;
      for (char& ch : detail)
        if (ch == ',') ch = ';';
      os << rep.suite << "," << c.name << "," << (c.pass ? 1 : 0) << "," << detail << "\n";
    }
  return os.str();
}

// ---------------------------------------------------------------------------
// training histories
inline std::string format_history_text(const std::vector<EpochStats>& history,
                                       const EvalResult& final_eval) {
  std::ostringstream os;
  for (const EpochStats& row : history) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "epoch %3ld  loss %.4f  accuracy %.3f", row.epoch, row.loss,
                  row.accuracy);
    os << buf << "\n";
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "final     loss %.4f  accuracy %.3f", final_eval.loss,
                final_eval.accuracy);
  os << buf << "\n";
  return os.str();
}

inline std::string format_history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream os;
  os << "epoch,loss,accuracy\n";
  os << std::setprecision(17);
  for (const EpochStats& row : history)
    os << row.epoch << "," << row.loss << "," << row.accuracy << "\n";
  return os.str();
}

}  // namespace compconv
