// Command-line front end: plan a single compact layer, analyze a whole
// architecture, run the built-in verification suites, or train the toy CNN.
//
// Exit codes: 0 success, 1 verification failure, 2 usage error,
//             3 infeasible configuration, 4 input/output error.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <compconv/arch.hpp>
#include <compconv/cost.hpp>
#include <compconv/data.hpp>
#include <compconv/io_json.hpp>
#include <compconv/layer.hpp>
#include <compconv/plan.hpp>
#include <compconv/report.hpp>
#include <compconv/train.hpp>
#include <compconv/verify.hpp>

using namespace compconv;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string format = "text";
  std::uint64_t seed = 0;
};

// Walks an architecture and collects the stage of every cost-bearing block
// so --stages can translate into skip-list entries.
void collect_staged_names(const std::vector<LayerDescriptor>& layers,
                          std::vector<std::pair<std::string, long>>* out) {
  for (const LayerDescriptor& l : layers) {
    if (l.kind == LayerDescriptor::Kind::conv) out->push_back({l.name, l.stage});
    if (l.kind == LayerDescriptor::Kind::residual_block) out->push_back({l.name, l.stage});
  }
}

int run_plan(const GlobalOpts& g, long c_in, long c_out, long c0, long depth, long k, long stride) {
  DepthPolicy policy = depth >= 0
                           ? (depth == 0 ? DepthPolicy::vanilla() : DepthPolicy::global(depth))
                           : DepthPolicy::adaptive(c0);
  CompPlan plan = build_plan(c_in, c_out, policy);
  HostSpec host;
  host.k = k;
  host.stride = stride;
  host.padding = k / 2;
  detail::require_host_fits(plan, host);  // surfaces unusable kernels as infeasible

  if (g.format == "json") {
    LayerCost cost = compconv_cost(plan, host, 32, 32);
    json out;
    out["plan"] = plan_to_json(plan);
    out["host"] = {{"k", host.k}, {"stride", host.stride}, {"padding", host.padding}};
    out["units"] = compconv_units(plan);
    out["literal_units"] = compconv_units_literal(plan);
    out["ratio"] = compression_ratio(plan);
    out["cost_32x32"] = {{"params", cost.params}, {"macs", cost.macs}};
    std::cout << out.dump(2) << "\n";
  } else if (g.format == "csv") {
    std::cout << format_plan_csv(plan, host);
  } else {
    std::cout << format_plan_text(plan, host);
  }
  return 0;
}

int run_analyze(const GlobalOpts& g, const std::string& arch_name, const std::string& arch_file,
                long c0, long global_d, long input_res, const std::string& stages) {
  ArchSpec arch;
  if (!arch_file.empty()) {
    arch = load_arch(arch_file);
  } else if (arch_name == "vgg16-cifar") {
    arch = vgg16_cifar(10);
  } else if (arch_name == "resnet50-imagenet") {
    arch = resnet50_imagenet();
  } else if (arch_name == "resnet-toy") {
    arch = resnet_toy({2, 2, 2}, 10);
  } else {
    std::cerr << "unknown architecture: " << arch_name << "\n";
    return 2;
  }
  if (input_res > 0) {
    arch.input_shape.h = input_res;
    arch.input_shape.w = input_res;
  }
  if (!stages.empty()) {
    std::set<long> keep;
    for (const std::string& tok : detail::split_list(stages, ','))
      keep.insert(detail::parse_long(tok, "stage list"));
    std::vector<std::pair<std::string, long>> staged;
    collect_staged_names(arch.layers, &staged);
    for (const auto& [name, stage] : staged)
      if (keep.find(stage) == keep.end()) arch.skip_list.push_back(name);
  }

  DepthPolicy policy = DepthPolicy::vanilla();
  if (global_d > 0) policy = DepthPolicy::global(global_d);
  if (c0 > 0) policy = DepthPolicy::adaptive(c0);
  CostReport report = network_cost(arch, policy);

  if (g.format == "json") {
    std::cout << report_to_json(report).dump(2) << "\n";
  } else if (g.format == "csv") {
    std::cout << format_report_csv(report);
  } else {
    std::cout << format_report_text(report);
  }
  return 0;
}

int run_verify(const GlobalOpts& g, const std::string& suite) {
  std::vector<VerifyReport> reports = compconv::run_verify(suite);
  bool ok = true;
  for (const VerifyReport& r : reports) ok = ok && r.all_pass();

  if (g.format == "json") {
    json out;
    out["suites"] = json::array();
    long total = 0, passed = 0;
    for (const VerifyReport& r : reports) {
      json js;
      js["suite"] = r.suite;
      js["checks"] = json::array();
      for (const CheckResult& c : r.checks) {
        js["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        ++total;
        passed += c.pass ? 1 : 0;
      }
      out["suites"].push_back(js);
    }
    out["passed"] = passed;
    out["total"] = total;
    std::cout << out.dump(2) << "\n";
  } else if (g.format == "csv") {
    std::cout << format_verify_csv(reports);
  } else {
    std::cout << format_verify_text(reports);
  }
  return ok ? 0 : 1;
}

int run_train(const GlobalOpts& g, const std::string& task, const std::string& arch, long epochs,
              double lr, double momentum, long batch_size, long samples, long size, double noise,
              const std::string& out_prefix, const std::string& idx_images,
              const std::string& idx_labels, long limit) {
  Dataset ds;
  long classes = 2;
  if (task == "stripes") {
    ds = synth_stripes(samples, size, noise, g.seed);
  } else {
    if (idx_images.empty() || idx_labels.empty()) {
      std::cerr << "train: --task idx requires --idx-images and --idx-labels\n";
      return 2;
    }
    ds = load_idx(idx_images, idx_labels, limit);
    long max_label = 1;
    for (long l : ds.labels) max_label = std::max(max_label, l);
    classes = max_label + 1;
  }

  bool compressed = arch == "toy-comp";
  ToyNet net = make_toy_net(compressed, g.seed, classes);
  TrainConfig cfg;
  cfg.lr = lr;
  cfg.momentum = momentum;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.seed = g.seed;
  std::vector<EpochStats> history = train(net, ds, cfg);
  EvalResult final_eval = evaluate(net, ds);
  if (!out_prefix.empty()) {
    save_toy_net(net, out_prefix);
    std::ofstream hist(out_prefix + ".history.csv");
    if (!hist) throw io_error("train: cannot write " + out_prefix + ".history.csv");
    hist << format_history_csv(history);
  }

  if (g.format == "json") {
    json out;
    out["task"] = task;
    out["arch"] = arch;
    out["seed"] = g.seed;
    out["history"] = json::array();
    for (const EpochStats& row : history)
      out["history"].push_back(
          {{"epoch", row.epoch}, {"loss", row.loss}, {"accuracy", row.accuracy}});
    out["final"] = {{"loss", final_eval.loss}, {"accuracy", final_eval.accuracy}};
    std::cout << out.dump(2) << "\n";
  } else if (g.format == "csv") {
    std::cout << format_history_csv(history);
  } else {
    std::cout << format_history_text(history, final_eval);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compact divide-and-conquer convolutions: planning, costing, "
               "verification, and toy training"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--seed", g.seed, "seed for data generation and training");

  auto* plan_cmd = app.add_subcommand("plan", "lay out one compact layer and report its cost");
  long p_cin = 0, p_cout = 0, p_c0 = 0, p_depth = -1, p_k = 3, p_stride = 1;
  plan_cmd->add_option("--cin", p_cin, "input channels")->required();
  plan_cmd->add_option("--cout", p_cout, "output channels")->required();
  auto* opt_c0 =
      plan_cmd->add_option("--c0", p_c0, "width threshold for adaptive depth")
          ->check(CLI::IsMember({32, 64, 128, 256, 512}));
  auto* opt_depth = plan_cmd->add_option("--depth", p_depth, "fixed decomposition depth (0 = plain)")
                        ->check(CLI::Range(0, 8));
  opt_c0->excludes(opt_depth);
  opt_depth->excludes(opt_c0);
  plan_cmd->add_option("--k", p_k, "host kernel size")->check(CLI::Range(1, 15));
  plan_cmd->add_option("--stride", p_stride, "host stride")->check(CLI::Range(1, 4));

  auto* analyze_cmd = app.add_subcommand("analyze", "cost an architecture under a depth policy");
  std::string a_arch, a_arch_file, a_stages;
  long a_c0 = 0, a_global_d = 0, a_input_res = 0;
  auto* opt_arch = analyze_cmd->add_option(
      "--arch", a_arch, "built-in architecture: vgg16-cifar, resnet50-imagenet, resnet-toy");
  auto* opt_arch_file =
      analyze_cmd->add_option("--arch-file", a_arch_file, "architecture description file");
  opt_arch->excludes(opt_arch_file);
  opt_arch_file->excludes(opt_arch);
  auto* opt_a_c0 = analyze_cmd->add_option("--c0", a_c0, "adaptive width threshold")
                       ->check(CLI::IsMember({32, 64, 128, 256, 512}));
  auto* opt_a_gd =
      analyze_cmd->add_option("--global-d", a_global_d, "uniform depth for every layer")
          ->check(CLI::Range(0, 8));
  opt_a_c0->excludes(opt_a_gd);
  opt_a_gd->excludes(opt_a_c0);
  analyze_cmd->add_option("--input-res", a_input_res, "override the input resolution")
      ->check(CLI::Range(1, 4096));
  analyze_cmd->add_option("--stages", a_stages,
                          "comma-separated stages to compress; others stay plain");

  auto* verify_cmd = app.add_subcommand("verify", "run the built-in verification suites");
  std::string v_suite = "all";
  verify_cmd->add_option("--suite", v_suite, "plans, forward, grads, costs, or all")
      ->check(CLI::IsMember({"plans", "forward", "grads", "costs", "all"}));

  auto* train_cmd = app.add_subcommand("train", "train the toy CNN");
  std::string t_task = "stripes", t_arch = "toy-comp", t_out, t_idx_images, t_idx_labels;
  long t_epochs = 20, t_batch = 32, t_samples = 256, t_size = 8, t_limit = 0;
  double t_lr = 0.01, t_momentum = 0.9, t_noise = 0.1;
  train_cmd->add_option("--task", t_task, "stripes or idx")
      ->check(CLI::IsMember({"stripes", "idx"}));
  train_cmd->add_option("--arch", t_arch, "toy-comp or toy-vanilla")
      ->check(CLI::IsMember({"toy-comp", "toy-vanilla"}));
  train_cmd->add_option("--epochs", t_epochs)->check(CLI::Range(0, 10000));
  train_cmd->add_option("--lr", t_lr, "learning rate");
  train_cmd->add_option("--momentum", t_momentum)->check(CLI::Range(0.0, 0.999));
  train_cmd->add_option("--batch-size", t_batch)->check(CLI::Range(1, 4096));
  train_cmd->add_option("--samples", t_samples, "stripe dataset size")->check(CLI::Range(2, 100000));
  train_cmd->add_option("--size", t_size, "stripe image side")->check(CLI::Range(4, 256));
  train_cmd->add_option("--noise", t_noise, "stripe noise level");
  train_cmd->add_option("--out", t_out, "path prefix for exported weights");
  train_cmd->add_option("--idx-images", t_idx_images, "image file for --task idx");
  train_cmd->add_option("--idx-labels", t_idx_labels, "label file for --task idx");
  train_cmd->add_option("--limit", t_limit, "cap on loaded idx samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (plan_cmd->parsed()) {
      if (p_c0 == 0 && p_depth < 0) {
        std::cerr << "plan: pass either --c0 or --depth\n";
        return 2;
      }
      return run_plan(g, p_cin, p_cout, p_c0, p_depth, p_k, p_stride);
    }
    if (analyze_cmd->parsed()) {
      if (a_arch.empty() && a_arch_file.empty()) {
        std::cerr << "analyze: pass either --arch or --arch-file\n";
        return 2;
      }
      return run_analyze(g, a_arch, a_arch_file, a_c0, a_global_d, a_input_res, a_stages);
    }
    if (verify_cmd->parsed()) return run_verify(g, v_suite);
    if (train_cmd->parsed())
      return run_train(g, t_task, t_arch, t_epochs, t_lr, t_momentum, t_batch, t_samples, t_size,
                       t_noise, t_out, t_idx_images, t_idx_labels, t_limit);
  } catch (const infeasible_error& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
