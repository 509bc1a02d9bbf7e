#include <doctest.h>

#include "gradcheck_ref.hpp"
#include "icep/network.hpp"

using namespace icep;
using namespace icep::testutil;

namespace {

void expect_clean(const GradStats& st, int min_seeds) {
  CAPTURE(st.first_failure);
  CHECK(st.seeds_checked >= min_seeds);
  CHECK(st.failures == 0);
  CHECK(st.max_rel <= 1e-3);
}

}  // namespace

TEST_CASE("gradcheck: dense stack") {
  auto make = [](uint64_t seed) {
    Network net = build_network({4}, {{LayerKind::dense, 5, 0, 0},
                                      {LayerKind::relu, 0, 0, 0},
                                      {LayerKind::dense, 3, 0, 0}},
                                seed);
    jitter_biases(net, seed);
    return net;
  };
  expect_clean(run_gradcheck(make, 24, 3), 12);
}

TEST_CASE("gradcheck: conv, pool, flatten, dense") {
  auto make = [](uint64_t seed) {
    Network net = build_network({2, 5, 5}, {{LayerKind::conv2d, 3, 2, 0},
                                            {LayerKind::relu, 0, 0, 0},
                                            {LayerKind::maxpool2d, 0, 0, 2},
                                            {LayerKind::flatten, 0, 0, 0},
                                            {LayerKind::dense, 3, 0, 0}},
                                seed);
    jitter_biases(net, seed);
    return net;
  };
  expect_clean(run_gradcheck(make, 24, 2), 12);
}

TEST_CASE("gradcheck: masked structures in the middle of the stack") {
  auto make = [](uint64_t seed) {
    Network net = build_network({2, 5, 5}, {{LayerKind::conv2d, 4, 2, 0},
                                            {LayerKind::relu, 0, 0, 0},
                                            {LayerKind::flatten, 0, 0, 0},
                                            {LayerKind::dense, 4, 0, 0},
                                            {LayerKind::relu, 0, 0, 0},
                                            {LayerKind::dense, 3, 0, 0}},
                                seed);
    net.layers[0].mask = {1, 0, 1, 1};
    net.layers[3].mask = {1, 1, 0, 1};
    jitter_biases(net, seed);
    return net;
  };
  expect_clean(run_gradcheck(make, 24, 2), 12);
}

TEST_CASE("gradcheck: frozen layer excluded, rest still correct") {
  auto make = [](uint64_t seed) {
    Network net = build_network({4}, {{LayerKind::dense, 5, 0, 0},
                                      {LayerKind::relu, 0, 0, 0},
                                      {LayerKind::dense, 4, 0, 0},
                                      {LayerKind::relu, 0, 0, 0},
                                      {LayerKind::dense, 3, 0, 0}},
                                seed);
    net.layers[0].frozen = true;
    jitter_biases(net, seed);
    return net;
  };
  // live_params skips the frozen layer; backward's grads for the rest must
  // still match even though the backward pass cuts off early
  expect_clean(run_gradcheck(make, 24, 3), 12);
}
