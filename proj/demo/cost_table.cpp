// Prints the compression tables for the built-in 16-layer CIFAR network:
// one global-depth table per d, then the adaptive per-layer policy, using
// the same cost model the CLI exposes.
#include <cstdio>
#include <string>

#include <compconv/arch.hpp>
#include <compconv/cost.hpp>
#include <compconv/report.hpp>

using namespace compconv;

int main() {
  ArchSpec net = vgg16_cifar(10);

  std::printf("== totals under each policy ==\n");
  std::printf("%-16s %10s %10s %8s\n", "policy", "params", "macs", "macs'");
  CostReport base = network_cost(net, DepthPolicy::vanilla());
  std::printf("%-16s %10s %10s %8s\n", "vanilla",
              si_format(double(base.vanilla_total.params)).c_str(),
              si_format(double(base.vanilla_total.macs)).c_str(), "1.000");
  for (long d = 1; d <= 4; ++d) {
    CostReport r = network_cost(net, DepthPolicy::global(d));
    std::string name = "global d=" + std::to_string(d);
    std::printf("%-16s %10s %10s %8.3f\n", name.c_str(),
                si_format(double(r.compressed_total.params)).c_str(),
                si_format(double(r.compressed_total.macs)).c_str(),
                double(r.compressed_total.macs) / double(r.vanilla_total.macs));
  }
  for (long c0 : {64L, 128L, 256L}) {
    CostReport r = network_cost(net, DepthPolicy::adaptive(c0));
    std::string name = "adaptive c0=" + std::to_string(c0);
    std::printf("%-16s %10s %10s %8.3f\n", name.c_str(),
                si_format(double(r.compressed_total.params)).c_str(),
                si_format(double(r.compressed_total.macs)).c_str(),
                double(r.compressed_total.macs) / double(r.vanilla_total.macs));
  }

  std::printf("\n== per-layer breakdown, adaptive c0=128 ==\n");
  CostReport detail = network_cost(net, DepthPolicy::adaptive(128));
  std::printf("%s", format_report_text(detail).c_str());
  return 0;
}
