#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "icep/pruning.hpp"

using namespace icep;
using namespace icep::testutil;

namespace {

const float kInf = std::numeric_limits<float>::infinity();

Network dense_stack_232() {
  Network net;
  net.input_shape = {2};
  net.layers.push_back(dense_layer({3, 2}, {1, -2, -0.5f, 0.5f, 2, 0}, {0, 0, 0}));
  net.layers.push_back(dense_layer({2, 3}, {1, 1, 1, 1, 1, 1}, {0, 0}));
  net.finalize();
  return net;
}

std::string write_temp(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / "icep_pruning_tests";
  std::filesystem::create_directories(dir);
  std::string path = (dir / name).string();
  std::ofstream f(path, std::ios::trunc);
  f << text;
  return path;
}

}  // namespace

TEST_CASE("l1 criterion sums absolute weights per structure") {
  Network net = dense_stack_232();
  Criterion c;
  std::vector<float> s = score_structures(net, 0, c, nullptr);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == doctest::Approx(3.0f));
  CHECK(s[1] == doctest::Approx(1.0f));
  CHECK(s[2] == doctest::Approx(2.0f));

  Network cnet;
  cnet.input_shape = {1, 2, 2};
  cnet.layers.push_back(conv_layer({2, 1, 2, 2}, {1, -1, 2, -2, 0.5f, 0, 0, 0}, {9, 9}));
  cnet.finalize();
  std::vector<float> cs = score_structures(cnet, 0, c, nullptr);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0] == doctest::Approx(6.0f));  // bias excluded
  CHECK(cs[1] == doctest::Approx(0.5f));
}

TEST_CASE("apply_prune masks the lowest scores, cumulatively, never unmasking") {
  Network net = dense_stack_232();
  std::vector<float> scores = {3, 1, 2};

  apply_prune(net, {0, 1.0f / 3.0f}, scores);
  CHECK(net.layers[0].mask == std::vector<uint8_t>({1, 0, 1}));

  apply_prune(net, {0, 2.0f / 3.0f}, scores);
  CHECK(net.layers[0].mask == std::vector<uint8_t>({1, 0, 0}));

  // a weaker target never restores structures
  apply_prune(net, {0, 0.0f}, scores);
  CHECK(net.layers[0].mask == std::vector<uint8_t>({1, 0, 0}));

  SUBCASE("ties break toward the lower index") {
    Network t = dense_stack_232();
    apply_prune(t, {0, 0.34f}, {1, 1, 2});
    CHECK(t.layers[0].mask == std::vector<uint8_t>({0, 1, 1}));
  }
  SUBCASE("bad arguments throw") {
    Network t = dense_stack_232();
    CHECK_THROWS_AS(apply_prune(t, {0, 1.0f}, scores), std::invalid_argument);
    CHECK_THROWS_AS(apply_prune(t, {0, -0.1f}, scores), std::invalid_argument);
    CHECK_THROWS_AS(apply_prune(t, {0, 0.5f}, {1, 2}), std::invalid_argument);
  }
}

TEST_CASE("param_count: dense stack loses rows and downstream columns") {
  Network net = dense_stack_232();
  CHECK(param_count(net) == 17);
  net.layers[0].mask = {1, 0, 1};
  CHECK(param_count(net) == 12);
  CHECK(alpha(net, 17) == 12.0 / 17.0);
  CHECK_THROWS_AS((void)alpha(net, 0), std::invalid_argument);
}

TEST_CASE("param_count: conv feeding flatten+dense kills whole column groups") {
  Network net;
  net.input_shape = {1, 3, 3};
  net.layers.push_back(conv_layer({2, 1, 2, 2}, std::vector<float>(8, 1.0f), {0, 0}));
  net.layers.push_back(plain_layer(LayerKind::flatten));
  net.layers.push_back(dense_layer({3, 8}, std::vector<float>(24, 1.0f), {0, 0, 0}));
  net.finalize();
  REQUIRE(net.layers[2].input_src == 0);
  REQUIRE(net.layers[2].input_group == 4);
  CHECK(param_count(net) == 37);
  net.layers[0].mask = {0, 1};
  CHECK(param_count(net) == 20);
}

TEST_CASE("param_count: conv feeding conv loses input channels") {
  Network net;
  net.input_shape = {1, 3, 3};
  net.layers.push_back(conv_layer({2, 1, 2, 2}, std::vector<float>(8, 1.0f), {0, 0}));
  net.layers.push_back(conv_layer({3, 2, 2, 2}, std::vector<float>(24, 1.0f), {0, 0, 0}));
  net.finalize();
  REQUIRE(net.layers[1].input_src == 0);
  CHECK(param_count(net) == 37);
  net.layers[0].mask = {0, 1};
  CHECK(param_count(net) == 20);
}

TEST_CASE("param_count matches a hand enumeration over random masks") {
  // input (2,4,4) -> conv3 k3 -> relu -> flatten(12) -> dense4 -> relu -> dense3
  auto make = [] {
    Network net;
    net.input_shape = {2, 4, 4};
    net.layers.push_back(conv_layer({3, 2, 3, 3}, std::vector<float>(54, 0.1f), {0, 0, 0}));
    net.layers.push_back(plain_layer(LayerKind::relu));
    net.layers.push_back(plain_layer(LayerKind::flatten));
    net.layers.push_back(dense_layer({4, 12}, std::vector<float>(48, 0.1f), {0, 0, 0, 0}));
    net.layers.push_back(plain_layer(LayerKind::relu));
    net.layers.push_back(dense_layer({3, 4}, std::vector<float>(12, 0.1f), {0, 0, 0}));
    net.finalize();
    return net;
  };
  auto count_hand = [](const std::vector<uint8_t>& m0, const std::vector<uint8_t>& m3,
                       const std::vector<uint8_t>& m5) {
    auto live = [](const std::vector<uint8_t>& m) {
      int64_t n = 0;
      for (uint8_t b : m) n += b;
      return n;
    };
    const int64_t c0 = live(m0), c3 = live(m3), c5 = live(m5);
    return c0 * 18 + c0        // conv rows over the raw input
           + c3 * (c0 * 4) + c3  // each surviving filter owns 4 flattened inputs
           + c5 * c3 + c5;
  };

  const int64_t original = count_hand({1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1});
  Network probe = make();
  REQUIRE(param_count(probe) == original);

  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    Network net = make();
    auto flip = [&](std::vector<uint8_t>& m) {
      for (auto& b : m) b = (rng() >> 16) & 1;
    };
    flip(net.layers[0].mask);
    flip(net.layers[3].mask);
    flip(net.layers[5].mask);
    const int64_t expect =
        count_hand(net.layers[0].mask, net.layers[3].mask, net.layers[5].mask);
    CAPTURE(trial);
    CHECK(param_count(net) == expect);
    CHECK(alpha(net, original) ==
          static_cast<double>(expect) / static_cast<double>(original));
  }
}

TEST_CASE("entropy criterion: histogram of pooled outputs, constant maps score zero") {
  // unit 0 emits the sample value, unit 1 a constant
  Network net;
  net.input_shape = {1};
  net.layers.push_back(dense_layer({2, 1}, {1, 0}, {0, 5}));
  net.finalize();
  Dataset calib = toy_dataset({1}, 2, {{{0}, 0}, {{1}, 0}, {{2}, 1}, {{3}, 1}});

  Criterion c;
  c.kind = CriterionKind::entropy;
  c.histogram_bins = 2;
  std::vector<float> s = score_structures(net, 0, c, &calib);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(std::log(2.0f)));
  CHECK(s[1] == 0.0f);

  // the constant (lowest-entropy) unit goes first
  apply_prune(net, {0, 0.5f}, s);
  CHECK(net.layers[0].mask == std::vector<uint8_t>({1, 0}));

  CHECK_THROWS_AS((void)score_structures(net, 0, c, nullptr), std::invalid_argument);
}

TEST_CASE("mean_activation criterion averages post-relu outputs") {
  Network net;
  net.input_shape = {1};
  net.layers.push_back(dense_layer({2, 1}, {1, -2}, {0, -3}));
  net.finalize();
  Dataset calib = toy_dataset({1}, 2, {{{1}, 0}, {{3}, 1}});

  Criterion c;
  c.kind = CriterionKind::mean_activation;
  std::vector<float> s = score_structures(net, 0, c, &calib);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(2.0f));  // (1+3)/2
  CHECK(s[1] == 0.0f);                   // -5,-9 clamp to zero

  CHECK_THROWS_AS((void)score_structures(net, 0, c, nullptr), std::invalid_argument);
}

TEST_CASE("random criterion is a pure function of seed and layer") {
  Network net = dense_stack_232();
  Criterion c;
  c.kind = CriterionKind::random;
  c.rng_seed = 99;
  std::vector<float> a = score_structures(net, 0, c, nullptr);
  std::vector<float> b = score_structures(net, 0, c, nullptr);
  CHECK(a == b);
  for (float v : a) {
    CHECK(v >= 0.0f);
    CHECK(v < 1.0f);
  }
  CHECK(score_structures(net, 1, c, nullptr) != a);
  c.rng_seed = 100;
  CHECK(score_structures(net, 0, c, nullptr) != a);
}

TEST_CASE("masked structures score -inf under every criterion") {
  Dataset calib = toy_dataset({2}, 2, {{{1, 2}, 0}, {{3, 1}, 1}});
  for (auto kind : {CriterionKind::l1_norm, CriterionKind::random, CriterionKind::entropy,
                    CriterionKind::mean_activation}) {
    Network net = dense_stack_232();
    net.layers[0].mask = {1, 0, 1};
    Criterion c;
    c.kind = kind;
    c.histogram_bins = 2;
    std::vector<float> s = score_structures(net, 0, c, &calib);
    REQUIRE(s.size() == 3);
    CHECK(s[1] == -kInf);
    CHECK(s[0] > -kInf);
    CHECK(s[2] > -kInf);
  }
}

TEST_CASE("pruning selection agrees with a rank-counting oracle on every criterion") {
  // conv -> relu -> pool -> flatten -> dense, up to 16 structures per layer
  Network base;
  base.input_shape = {1, 4, 4};
  {
    std::mt19937_64 rng(7);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    std::vector<float> w(16 * 1 * 2 * 2);
    for (auto& v : w) v = nd(rng);
    base.layers.push_back(conv_layer({16, 1, 2, 2}, std::move(w), std::vector<float>(16, 0.0f)));
    base.layers.push_back(plain_layer(LayerKind::relu));
    base.layers.push_back(plain_layer(LayerKind::maxpool2d, 3));
    base.layers.push_back(plain_layer(LayerKind::flatten));
    std::vector<float> w2(5 * 16);
    for (auto& v : w2) v = nd(rng);
    base.layers.push_back(dense_layer({5, 16}, std::move(w2), std::vector<float>(5, 0.0f)));
    base.finalize();
  }
  Dataset calib;
  {
    std::mt19937_64 rng(8);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    calib.shape = {1, 4, 4};
    calib.class_count = 5;
    for (int i = 0; i < 12; ++i) {
      Sample s;
      s.x.resize(16);
      for (auto& v : s.x) v = nd(rng);
      s.label = i % 5;
      calib.samples.push_back(s);
    }
  }

  for (auto kind : {CriterionKind::l1_norm, CriterionKind::random, CriterionKind::entropy,
                    CriterionKind::mean_activation}) {
    for (int layer : {0, 4}) {
      Network net = base;
      Criterion c;
      c.kind = kind;
      c.rng_seed = 3;
      std::vector<float> s = score_structures(net, layer, c, &calib);
      const int s_count = static_cast<int>(s.size());
      const float ratio = 0.5f;
      apply_prune(net, {layer, ratio}, s);

      // oracle: index survives iff fewer than k structures rank strictly below it
      const int k = static_cast<int>(std::floor(ratio * s_count));
      for (int i = 0; i < s_count; ++i) {
        int rank = 0;
        for (int j = 0; j < s_count; ++j)
          if (s[j] < s[i] || (s[j] == s[i] && j < i)) ++rank;
        CAPTURE(criterion_name(kind));
        CAPTURE(layer);
        CAPTURE(i);
        CHECK(net.layers[static_cast<size_t>(layer)].mask[static_cast<size_t>(i)] ==
              (rank >= k ? 1 : 0));
      }
    }
  }
}

TEST_CASE("default_schedule targets every prunable layer") {
  Network net;
  net.input_shape = {1, 3, 3};
  net.layers.push_back(conv_layer({2, 1, 2, 2}, std::vector<float>(8, 1.0f), {0, 0}));
  net.layers.push_back(plain_layer(LayerKind::relu));
  net.layers.push_back(plain_layer(LayerKind::flatten));
  net.layers.push_back(dense_layer({3, 8}, std::vector<float>(24, 1.0f), {0, 0, 0}));
  net.finalize();
  PruneSchedule s = default_schedule(net, 0.25f);
  REQUIRE(s.actions.size() == 2);
  CHECK(s.actions[0].layer_index == 0);
  CHECK(s.actions[1].layer_index == 3);
  for (const auto& a : s.actions) CHECK(a.target_ratio == 0.25f);

  Network bare;
  bare.input_shape = {4};
  bare.layers.push_back(plain_layer(LayerKind::flatten));
  bare.finalize();
  CHECK_THROWS_AS((void)default_schedule(bare, 0.5f), std::invalid_argument);
}

TEST_CASE("load_schedule parses comments and reports bad lines by number") {
  std::string good = write_temp("good.sched",
                                "# leading comment\n"
                                "0,0.25\n"
                                "\n"
                                "3,0.5 # trailing comment\n");
  PruneSchedule s = load_schedule(good);
  REQUIRE(s.actions.size() == 2);
  CHECK(s.actions[0].layer_index == 0);
  CHECK(s.actions[0].target_ratio == 0.25f);
  CHECK(s.actions[1].layer_index == 3);
  CHECK(s.actions[1].target_ratio == 0.5f);

  std::string bad = write_temp("bad.sched", "0,0.25\nnot a pair\n");
  try {
    (void)load_schedule(bad);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  std::string empty = write_temp("empty.sched", "# nothing here\n");
  CHECK_THROWS_AS((void)load_schedule(empty), std::invalid_argument);
  CHECK_THROWS_AS((void)load_schedule("/nonexistent/none.sched"), std::invalid_argument);
}

TEST_CASE("validate_schedule rejects bad targets") {
  Network net = dense_stack_232();
  net.layers.push_back(plain_layer(LayerKind::relu));
  net.finalize();

  validate_schedule(net, {{{0, 0.5f}}});  // fine
  PruneSchedule empty;
  CHECK_THROWS_AS(validate_schedule(net, empty), std::invalid_argument);
  CHECK_THROWS_AS(validate_schedule(net, {{{7, 0.5f}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_schedule(net, {{{2, 0.5f}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_schedule(net, {{{0, 1.0f}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_schedule(net, {{{0, -0.5f}}}), std::invalid_argument);
}

TEST_CASE("criterion names round-trip") {
  CHECK(parse_criterion("l1") == CriterionKind::l1_norm);
  CHECK(parse_criterion("random") == CriterionKind::random);
  CHECK(parse_criterion("entropy") == CriterionKind::entropy);
  CHECK(parse_criterion("mean_act") == CriterionKind::mean_activation);
  for (auto k : {CriterionKind::l1_norm, CriterionKind::random, CriterionKind::entropy,
                 CriterionKind::mean_activation})
    CHECK(parse_criterion(criterion_name(k)) == k);
  CHECK_THROWS_AS((void)parse_criterion("l2"), std::invalid_argument);
}
