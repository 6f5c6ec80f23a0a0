#include <catch2/catch_amalgamated.hpp>

#include "compconv/plan.hpp"

using namespace compconv;

TEST_CASE("primary width is the minimal cover of the output budget", "[planner]") {
  struct Case {
    long c_out, d, want;
  };
  const Case cases[] = {
      {64, 1, 32},  {64, 2, 11},   {64, 3, 5},    {64, 4, 3},    {128, 2, 22}, {128, 3, 10},
      {128, 4, 5},  {256, 2, 43},  {256, 3, 19},  {256, 4, 9},   {512, 2, 86}, {512, 3, 37},
      {512, 4, 18}, {1024, 2, 171}, {1024, 3, 74}, {2048, 3, 147},
  };
  for (const Case& c : cases) {
    INFO("c_out=" << c.c_out << " d=" << c.d);
    REQUIRE(compute_cprim(c.c_out, c.d) == c.want);
  }
  REQUIRE_THROWS_AS(compute_cprim(0, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(compute_cprim(64, 0), std::invalid_argument);
}

TEST_CASE("depth scales with input width and saturates at three", "[planner]") {
  // width/budget pairs seen along a 13-conv stack with a budget of 128
  REQUIRE(choose_depth(3, 128) == 1);
  REQUIRE(choose_depth(64, 128) == 1);
  REQUIRE(choose_depth(128, 128) == 1);
  REQUIRE(choose_depth(256, 128) == 2);
  REQUIRE(choose_depth(512, 128) == 3);
  REQUIRE(choose_depth(1024, 128) == 3);
  REQUIRE(choose_depth(4096, 32) == 3);
  REQUIRE(choose_depth(64, 64) == 1);
  REQUIRE(choose_depth(129, 64) == 2);
  REQUIRE(choose_depth(256, 64) == 3);
  REQUIRE_THROWS_AS(choose_depth(0, 64), std::invalid_argument);
  REQUIRE_THROWS_AS(choose_depth(64, 0), std::invalid_argument);
}

TEST_CASE("plans lay out doubling blocks with a trimmed tail", "[planner]") {
  SECTION("64 -> 64 at depth 2") {
    CompPlan p = build_plan(64, 64, DepthPolicy::global(2));
    REQUIRE(p.d == 2);
    REQUIRE(p.c_prim == 11);
    REQUIRE(p.block_sizes == std::vector<long>{11, 22});
    REQUIRE(p.copy_specs.size() == 1);
    REQUIRE(p.copy_specs[0] == CopySpec{0, 11, false});
    REQUIRE(p.tail_channels == 20);
    REQUIRE(p.extra_drop == 0);
    REQUIRE(p.output_order.size() == 3);
    REQUIRE(p.output_order[0] == Segment{SegmentKind::block, 2, 22});
    REQUIRE(p.output_order[1] == Segment{SegmentKind::top, 0, 22});
    REQUIRE(p.output_order[2] == Segment{SegmentKind::tail, 0, 20});
    REQUIRE(p.shuffle_groups == 4);
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("narrow input wraps its identity copies") {
    CompPlan p = build_plan(3, 64, DepthPolicy::global(3));
    REQUIRE(p.d == 3);
    REQUIRE(p.c_prim == 5);
    REQUIRE(p.copy_specs.size() == 2);
    REQUIRE(p.copy_specs[0] == CopySpec{0, 5, true});
    REQUIRE(p.copy_specs[1] == CopySpec{0, 10, true});
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("depth 1 keeps only the primary block and its tail") {
    CompPlan p = build_plan(8, 7, DepthPolicy::global(1));
    REQUIRE(p.d == 1);
    REQUIRE(p.c_prim == 4);
    REQUIRE(p.tail_channels == 3);
    REQUIRE(p.output_order.size() == 2);
    REQUIRE(p.output_order[0] == Segment{SegmentKind::block, 1, 4});
    REQUIRE(p.output_order[1] == Segment{SegmentKind::tail, 0, 3});
    REQUIRE(p.shuffle_groups == 1);
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("vanilla policy emits a plain plan") {
    CompPlan p = build_plan(16, 24, DepthPolicy::vanilla());
    REQUIRE(p.d == 0);
    REQUIRE(p.c_prim == 24);
    REQUIRE(p.block_sizes.empty());
    REQUIRE(p.output_order.empty());
    REQUIRE(p.shuffle_groups == 1);
    REQUIRE(validate_plan(p).empty());
  }
}

TEST_CASE("depth resolution backs off to a comfortable layout", "[planner]") {
  SECTION("budget below one pyramid") {
    CompPlan p = build_plan(32, 4, DepthPolicy::global(2));  // needs c_out >= 6
    REQUIRE(p.d == 1);
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("drop exceeding the tail backs off too") {
    // at depth 3, c_out=15 gives c_prim=2, drop=13 > tail 8
    CompPlan p = build_plan(32, 15, DepthPolicy::global(3));
    REQUIRE(p.d == 2);
    REQUIRE(p.c_prim == 3);
    REQUIRE(p.tail_channels == 3);
    REQUIRE(p.extra_drop == 0);
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("single output channel") {
    CompPlan p = build_plan(4, 1, DepthPolicy::global(3));
    REQUIRE(p.d == 1);
    REQUIRE(p.c_prim == 1);
    REQUIRE(p.tail_channels == 0);
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("adaptive policy routes through the depth rule") {
    CompPlan p = build_plan(512, 512, DepthPolicy::adaptive(128));
    REQUIRE(p.d == 3);
    CompPlan q = build_plan(64, 128, DepthPolicy::adaptive(128));
    REQUIRE(q.d == 1);
    REQUIRE(validate_plan(p).empty());
    REQUIRE(validate_plan(q).empty());
  }
  SECTION("resolved plans never carry extra drop") {
    for (long c_out = 1; c_out <= 200; ++c_out)
      for (long d = 1; d <= 4; ++d) {
        CompPlan p = build_plan(16, c_out, DepthPolicy::global(d));
        INFO("c_out=" << c_out << " d=" << d << " resolved=" << p.d);
        REQUIRE(p.extra_drop == 0);
        REQUIRE(validate_plan(p).empty());
      }
  }
}

TEST_CASE("exact-depth layouts can trim the top transform", "[planner]") {
  SECTION("depth 3 with a consumed tail") {
    CompPlan p = layout_plan(8, 16, 3);
    REQUIRE(p.c_prim == 2);
    REQUIRE(p.block_sizes == std::vector<long>{2, 4, 8});
    REQUIRE(p.tail_channels == 0);
    REQUIRE(p.extra_drop == 4);
    REQUIRE(p.output_order[0] == Segment{SegmentKind::block, 2, 4});
    REQUIRE(p.output_order[1] == Segment{SegmentKind::block, 3, 8});
    REQUIRE(p.output_order[2] == Segment{SegmentKind::top, 0, 4});
    REQUIRE(p.output_order[3] == Segment{SegmentKind::tail, 0, 0});
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("boundary: one surviving top channel") {
    CompPlan p = layout_plan(4, 7, 3);  // raw 14, drop 7, tail 4 -> extra 3 of top 4
    REQUIRE(p.tail_channels == 0);
    REQUIRE(p.extra_drop == 3);
    REQUIRE(p.output_order[2] == Segment{SegmentKind::top, 0, 1});
    REQUIRE(validate_plan(p).empty());
  }
  SECTION("budgets that would consume the top are infeasible") {
    REQUIRE_THROWS_AS(layout_plan(4, 2, 2), infeasible_error);
    REQUIRE_THROWS_AS(layout_plan(4, 6, 3), infeasible_error);
    REQUIRE_THROWS_AS(layout_plan(4, 14, 4), infeasible_error);
    REQUIRE_NOTHROW(layout_plan(4, 3, 2));
    REQUIRE_NOTHROW(layout_plan(4, 7, 3));
    REQUIRE_NOTHROW(layout_plan(4, 15, 4));
  }
}

TEST_CASE("channel budgets are covered minimally and exactly", "[planner]") {
  for (long d = 1; d <= 3; ++d)
    for (long c_out = 1; c_out <= 600; ++c_out) {
      CompPlan resolved = build_plan(12, c_out, DepthPolicy::global(d));
      INFO("c_out=" << c_out << " d=" << d);
      REQUIRE(validate_plan(resolved).empty());
      long sum = 0;
      for (const Segment& s : resolved.output_order) sum += s.channels;
      REQUIRE(sum == c_out);
      // minimal: one fewer primary channel cannot cover the budget
      REQUIRE(raw_total(resolved.d, resolved.c_prim) >= c_out);
      if (resolved.c_prim > 1) REQUIRE(raw_total(resolved.d, resolved.c_prim - 1) < c_out);

      if (c_out > (1L << d) - 2) {
        CompPlan exact = layout_plan(12, c_out, d);
        REQUIRE(validate_plan(exact).empty());
        long esum = 0;
        for (const Segment& s : exact.output_order) esum += s.channels;
        REQUIRE(esum == c_out);
        REQUIRE(raw_total(d, exact.c_prim) >= c_out);
        if (exact.c_prim > 1) REQUIRE(raw_total(d, exact.c_prim - 1) < c_out);
      } else {
        REQUIRE_THROWS_AS(layout_plan(12, c_out, d), infeasible_error);
      }
    }
}

TEST_CASE("the validator names structural violations", "[planner]") {
  CompPlan good = build_plan(16, 24, DepthPolicy::global(2));
  REQUIRE(validate_plan(good).empty());

  SECTION("non-minimal primary width") {
    CompPlan p = good;
    p.c_prim += 1;
    auto v = validate_plan(p);
    REQUIRE_FALSE(v.empty());
    REQUIRE(v.front().find("minimal") != std::string::npos);
  }
  SECTION("wrong block sizes") {
    CompPlan p = good;
    p.block_sizes[1] = 99;
    REQUIRE_FALSE(validate_plan(p).empty());
  }
  SECTION("broken channel sum") {
    CompPlan p = good;
    p.output_order[0].channels -= 1;
    REQUIRE_FALSE(validate_plan(p).empty());
  }
  SECTION("wrong shuffle") {
    CompPlan p = good;
    p.shuffle_groups = 2;
    auto v = validate_plan(p);
    REQUIRE_FALSE(v.empty());
    REQUIRE(v.front().find("shuffle") != std::string::npos);
  }
  SECTION("wrong copy reads") {
    CompPlan p = good;
    p.copy_specs[0].start = 1;
    REQUIRE_FALSE(validate_plan(p).empty());
  }
  SECTION("vanilla plan constraints") {
    CompPlan p = vanilla_plan(8, 8);
    REQUIRE(validate_plan(p).empty());
    p.shuffle_groups = 4;
    REQUIRE_FALSE(validate_plan(p).empty());
  }
}

TEST_CASE("plan records round-trip through text", "[planner]") {
  std::vector<CompPlan> plans = {
      vanilla_plan(3, 10),
      build_plan(8, 7, DepthPolicy::global(1)),
      build_plan(64, 64, DepthPolicy::global(2)),
      build_plan(3, 64, DepthPolicy::global(3)),
      layout_plan(8, 16, 3),  // carries extra_drop and an empty tail
  };
  for (const CompPlan& p : plans) {
    std::string rec = plan_record(p);
    INFO(rec);
    CompPlan back = parse_plan_record(rec);
    REQUIRE(back == p);
  }
  SECTION("malformed records are rejected") {
    REQUIRE_THROWS_AS(parse_plan_record("d: 2\n"), std::runtime_error);  // no format line
    REQUIRE_THROWS_AS(parse_plan_record("format: compplan/v9\n"), std::runtime_error);
    REQUIRE_THROWS_AS(parse_plan_record("format: compplan/v1\nd: x\n"), std::runtime_error);
    REQUIRE_THROWS_AS(parse_plan_record("format: compplan/v1\nwat: 1\n"), std::runtime_error);
  }
}
