#include <catch2/catch_amalgamated.hpp>

#include "compconv/cost.hpp"
#include "compconv/layer.hpp"
#include "oracles.hpp"

using namespace compconv;

TEST_CASE("plain convolution costs", "[cost]") {
  SECTION("3x3 over 3 -> 64 at 32x32") {
    ConvSpec s;
    s.c_in = 3;
    s.c_out = 64;
    LayerCost c = conv_cost(s, 32, 32);
    REQUIRE(c.params == 1728);
    REQUIRE(c.macs == 1769472);
    REQUIRE(c.out_shape == Shape4{1, 64, 32, 32});
  }
  SECTION("3x3 over 512 -> 512 at 2x2") {
    ConvSpec s;
    s.c_in = 512;
    s.c_out = 512;
    LayerCost c = conv_cost(s, 2, 2);
    REQUIRE(c.params == 2359296);
    REQUIRE(c.macs == 9437184);
  }
  SECTION("depthwise 148 channels at 4x4") {
    ConvSpec s;
    s.c_in = 148;
    s.c_out = 148;
    s.groups = 148;
    LayerCost c = conv_cost(s, 4, 4);
    REQUIRE(c.params == 1332);
    REQUIRE(c.macs == 1332 * 16);
  }
  SECTION("bias adds c_out parameters and no macs") {
    ConvSpec s;
    s.c_in = 3;
    s.c_out = 8;
    s.bias = true;
    LayerCost c = conv_cost(s, 8, 8);
    REQUIRE(c.params == 9 * 3 * 8 + 8);
    REQUIRE(c.macs == 64ULL * 9 * 3 * 8);
  }
  SECTION("strided output shape") {
    ConvSpec s;
    s.c_in = 3;
    s.c_out = 4;
    s.stride = 2;
    LayerCost c = conv_cost(s, 32, 32);
    REQUIRE(c.out_shape == Shape4{1, 4, 16, 16});
    REQUIRE(c.macs == 16ULL * 16 * 9 * 3 * 4);
  }
}

TEST_CASE("compressed layer unit counts", "[cost]") {
  auto units_for = [](long c_in, long c_out, long d) {
    return compconv_units(build_plan(c_in, c_out, DepthPolicy::global(d)));
  };
  // depth 1: c_in * c_prim + tail
  REQUIRE(units_for(64, 64, 1) == 64 * 32 + 32);
  REQUIRE(units_for(3, 64, 1) == 3 * 32 + 32);
  // depth 2: c_in * c_prim + top^2 + tail
  REQUIRE(units_for(64, 64, 2) == 64 * 11 + 22 * 22 + 20);
  REQUIRE(units_for(128, 128, 2) == 128 * 22 + 44 * 44 + 40);
  // depth 3 adds the interior square of G_2
  REQUIRE(units_for(64, 64, 3) == 64 * 5 + 10 * 10 + 20 * 20 + 14);
  REQUIRE(units_for(512, 512, 3) == 512 * 37 + 74 * 74 + 148 * 148 + 142);
  // trimmed top at exact depth: only surviving filters count
  CompPlan trimmed = layout_plan(64, 64, 4);  // c_prim 3, drop 26, tail 0, extra 2
  REQUIRE(trimmed.extra_drop == 2);
  REQUIRE(compconv_units(trimmed) == 64 * 3 + 6 * 6 + 12 * 12 + 22 * 24 + 0);
  // vanilla plan degenerates to the plain product
  REQUIRE(compconv_units(vanilla_plan(7, 9)) == 63);

  SECTION("literal counts ignore the channel drop") {
    CompPlan p = build_plan(64, 64, DepthPolicy::global(2));
    REQUIRE(compconv_units_literal(p) == 64 * 11 + 22 * 22 + 22);
    CompPlan d1 = build_plan(8, 7, DepthPolicy::global(1));
    REQUIRE(compconv_units_literal(d1) == 8 * 4 + 4);
    REQUIRE(compconv_units_literal(trimmed) == 64 * 3 + 6 * 6 + 12 * 12 + 24 * 24 + 24);
  }
}

TEST_CASE("compressed layer cost scales with output resolution", "[cost]") {
  CompPlan p = build_plan(512, 512, DepthPolicy::global(3));
  HostSpec host;
  LayerCost c = compconv_cost(p, host, 1, 1);
  REQUIRE(c.params == 418194);
  REQUIRE(c.macs == 418194);
  LayerCost c4 = compconv_cost(p, host, 4, 4);
  REQUIRE(c4.params == 418194);
  REQUIRE(c4.macs == 418194 * 16);
  REQUIRE(c4.out_shape == Shape4{1, 512, 4, 4});

  SECTION("strided host halves the output grid") {
    HostSpec strided{3, 2, 1};
    LayerCost cs = compconv_cost(p, strided, 8, 8);
    REQUIRE(cs.out_shape == Shape4{1, 512, 4, 4});
    REQUIRE(cs.macs == c.params * 16);
  }
}

TEST_CASE("compression ratios sit in the expected band", "[cost]") {
  struct Case {
    long c;
    double want;
  };
  const Case cases[] = {{128, 0.20190}, {256, 0.18542}, {512, 0.17725}, {1024, 0.17699}};
  for (const Case& cs : cases) {
    CompPlan p = build_plan(cs.c, cs.c, DepthPolicy::global(3));
    double r = compression_ratio(p);
    INFO("C=" << cs.c << " ratio=" << r);
    REQUIRE(r == Catch::Approx(cs.want).margin(5e-4));
    REQUIRE(r >= 0.15);
    REQUIRE(r <= 0.22);
  }
  REQUIRE(compression_ratio(vanilla_plan(64, 64)) == 1.0);
}

TEST_CASE("whole-network cost walk", "[cost]") {
  ArchSpec vgg = vgg16_cifar(10);

  SECTION("uncompressed totals") {
    CostReport r = network_cost(vgg, DepthPolicy::vanilla());
    REQUIRE(r.vanilla_total.params == 14715594);
    REQUIRE(r.vanilla_total.macs == 313201664);
    REQUIRE(r.compressed_total == r.vanilla_total);
    REQUIRE(r.rows.size() == 14);  // 13 convolutions and the classifier head
    REQUIRE(r.rows.back().name == "fc");
    REQUIRE(r.rows.back().vanilla.params == 5130);
    REQUIRE(r.rows.back().vanilla.macs == 5120);
    REQUIRE(r.macs_ratio == 1.0);
  }
  SECTION("global depth sweep totals") {
    struct Row {
      long d;
      unsigned long long params, macs;
    };
    const Row rows[] = {
        {1, 7379370, 157847552},
        {2, 4330251, 100374560},
        {3, 2801259, 69657272},
        {4, 2233395, 58785776},
    };
    for (const Row& row : rows) {
      CostReport r = network_cost(vgg, DepthPolicy::global(row.d));
      INFO("d=" << row.d);
      REQUIRE(r.compressed_total.params == row.params);
      REQUIRE(r.compressed_total.macs == row.macs);
      REQUIRE(r.vanilla_total.params == 14715594);
      REQUIRE(r.vanilla_total.macs == 313201664);
    }
  }
  SECTION("depth four backs off to depth three on 64-channel layers") {
    CostReport r = network_cost(vgg, DepthPolicy::global(4));
    REQUIRE(r.rows[0].chosen_d == 3);
    REQUIRE(r.rows[1].chosen_d == 3);
    REQUIRE(r.rows[2].chosen_d == 4);  // conv2_1: 128 outputs hold depth 4
    REQUIRE(r.rows.back().chosen_d == -1);
  }
  SECTION("adaptive budget of 128") {
    CostReport r = network_cost(vgg, DepthPolicy::adaptive(128));
    REQUIRE(r.compressed_total.params == 3175020);
    REQUIRE(r.compressed_total.macs == 105624728);
    const long want_d[] = {1, 1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 3, 3};
    for (int i = 0; i < 13; ++i) {
      INFO("conv row " << i);
      REQUIRE(r.rows[std::size_t(i)].chosen_d == want_d[i]);
    }
  }
  SECTION("stage-restricted compression via the skip list") {
    ArchSpec partial = vgg16_cifar(10);
    for (const LayerDescriptor& l : partial.layers)
      if (l.kind == LayerDescriptor::Kind::conv && l.stage != 1)
        partial.skip_list.push_back(l.name);
    const unsigned long long want[] = {294032384, 289765376, 286244864};
    for (long d = 1; d <= 3; ++d) {
      CostReport r = network_cost(partial, DepthPolicy::global(d));
      INFO("d=" << d);
      REQUIRE(r.compressed_total.macs == want[d - 1]);
      REQUIRE(r.rows[2].chosen_d == -1);  // conv2_1 held vanilla
      REQUIRE(r.rows[0].chosen_d == d);
    }
  }
}

TEST_CASE("residual architectures cost out correctly", "[cost]") {
  SECTION("bottleneck network, uncompressed") {
    ArchSpec net = resnet50_imagenet();
    CostReport r = network_cost(net, DepthPolicy::vanilla());
    REQUIRE(r.vanilla_total.params == 25503912);
    REQUIRE(r.vanilla_total.macs == 4089184256ULL);
    // 49 main-path convolutions + 4 projections + the classifier head
    REQUIRE(r.rows.size() == 54);
  }
  SECTION("stem is held vanilla under compression") {
    ArchSpec net = resnet50_imagenet();
    CostReport r = network_cost(net, DepthPolicy::adaptive(128));
    REQUIRE(r.rows[0].name == "conv1");
    REQUIRE(r.rows[0].chosen_d == -1);
    REQUIRE(r.rows[1].chosen_d != -1);
    REQUIRE(r.compressed_total.macs < r.vanilla_total.macs);
  }
  SECTION("small residual net walks cleanly") {
    ArchSpec toy = resnet_toy({1, 1, 1});
    CostReport r = network_cost(toy, DepthPolicy::global(2));
    // stem + 3 blocks * 2 convs + 2 projections + head
    REQUIRE(r.rows.size() == 10);
    REQUIRE(r.compressed_total.params < r.vanilla_total.params);
    REQUIRE(r.rows.back().vanilla.out_shape == Shape4{1, 10, 1, 1});
  }
}

TEST_CASE("instrumented executor agrees with the analytical count", "[cost]") {
  struct Case {
    long c_in, c_out, d;
  };
  const Case cases[] = {{3, 20, 1}, {8, 30, 2}, {8, 64, 3}, {5, 14, 3}};
  for (const Case& cs : cases) {
    CompPlan p = build_plan(cs.c_in, cs.c_out, DepthPolicy::global(cs.d));
    HostSpec host;
    CompConvLayer layer = init_layer(p, host, InitConfig::fixed_fixture(), 5);
    Tensor x = oracle::random_tensor(1, cs.c_in, 6, 6, 900 + cs.c_out);
    MacCounter counter;
    forward(layer, x, &counter);
    LayerCost analytic = compconv_cost(p, host, 6, 6);
    INFO("c_in=" << cs.c_in << " c_out=" << cs.c_out << " d=" << cs.d);
    REQUIRE(counter.macs == analytic.macs);
  }
  SECTION("trimmed-top layout agrees too") {
    CompPlan p = layout_plan(6, 16, 3);
    HostSpec host;
    CompConvLayer layer = init_layer(p, host, InitConfig::fixed_fixture(), 6);
    Tensor x = oracle::random_tensor(1, 6, 5, 5, 950);
    MacCounter counter;
    forward(layer, x, &counter);
    REQUIRE(counter.macs == compconv_cost(p, host, 5, 5).macs);
  }
}
