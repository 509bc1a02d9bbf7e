#include "icep/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "icep/util.hpp"

namespace icep {

using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void fine_tune_epoch(Network& net, const Dataset& train, double lr_max,
                     const TrainOptions& opt, std::mt19937_64& rng) {
  if (train.samples.empty()) throw std::invalid_argument("fine-tune: empty dataset");
  if (opt.batch_size < 1) throw std::invalid_argument("fine-tune: batch_size must be >= 1");
  std::vector<int> order(train.samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);

  const int steps = static_cast<int>((order.size() + static_cast<size_t>(opt.batch_size) - 1) /
                                     static_cast<size_t>(opt.batch_size));
  const InnerSchedule sched{opt.inner, steps};
  OptimizerState state = OptimizerState::for_network(net, opt.momentum, opt.weight_decay);

  Tensor batch;
  std::vector<int> labels, idx;
  ForwardTape tape;
  for (int step = 0; step < steps; ++step) {
    const size_t a = static_cast<size_t>(step) * static_cast<size_t>(opt.batch_size);
    const size_t b = std::min(order.size(), a + static_cast<size_t>(opt.batch_size));
    idx.assign(order.begin() + static_cast<std::ptrdiff_t>(a),
               order.begin() + static_cast<std::ptrdiff_t>(b));
    make_batch(train, idx, batch, labels);
    forward(net, batch, &tape);
    Gradients grads = backward(net, tape, labels);
    sgd_step(net, grads, state, static_cast<float>(epoch_lr(step, lr_max, sched)));
  }
}

std::pair<Network, RunReport> pft(const Network& input, const PruneSchedule& schedule,
                                  const HyperParams& h, const Dataset& train,
                                  const Dataset& test, const Criterion& crit,
                                  const PipelineToggles& toggles, const TrainOptions& opt,
                                  uint64_t master_seed) {
  validate_schedule(input, schedule);
  h.validate();
  Network net = input;
  RunReport rep;
  rep.params = h;
  rep.toggles = toggles;
  rep.master_seed = master_seed;

  const auto t0 = Clock::now();
  rep.acc_orig = test_accuracy(net, test);
  const int64_t pc_orig = param_count(net);
  std::mt19937_64 run_rng(mix_seed(master_seed, "ft"));

  const bool probing = toggles.use_freezing &&
                       static_cast<int>(std::floor(h.eta * net.parameterized_count())) >= 1;
  auto gate = [&](double acc) {
    return toggles.use_threshold ? (rep.acc_orig - acc >= h.theta) : true;
  };
  auto cap = [&](double al) {
    return toggles.use_scheduler ? max_lr(al, h.lr) : h.lr.lr_base;
  };

  for (size_t si = 0; si < schedule.actions.size(); ++si) {
    const PruneAction& act = schedule.actions[si];
    const auto ts = Clock::now();
    StepRecord rec;
    rec.step = static_cast<int>(si) + 1;
    rec.layer_index = act.layer_index;
    rec.lr_max_used = std::numeric_limits<double>::quiet_NaN();
    try {
      if (si == 0 && probing) {
        FreezeSet fs = probe_and_freeze(net, schedule, h.eta, crit, train, [&](Network& m) {
          rec.acc_before_ft = test_accuracy(m, test);
          rec.triggered = gate(rec.acc_before_ft);
          rec.alpha = alpha(m, pc_orig);
          const double lr = cap(rec.alpha);
          fine_tune_epoch(m, train, lr, opt, run_rng);
          rep.ft_epochs += 1;
          rec.lr_max_used = lr;
          rec.acc_after = test_accuracy(m, test);
        });
        rep.freeze_deltas = fs.deltas;
      } else {
        std::vector<float> scores = score_structures(net, act.layer_index, crit, &train);
        apply_prune(net, act, scores);
        rec.acc_before_ft = test_accuracy(net, test);
        rec.triggered = gate(rec.acc_before_ft);
        rec.alpha = alpha(net, pc_orig);
        if (rec.triggered) {
          const double lr = cap(rec.alpha);
          fine_tune_epoch(net, train, lr, opt, run_rng);
          rep.ft_epochs += 1;
          rec.lr_max_used = lr;
          rec.acc_after = test_accuracy(net, test);
        } else {
          rec.acc_after = rec.acc_before_ft;
        }
      }
    } catch (const NumericalError& e) {
      rec.step_seconds = seconds_since(ts);
      rec.acc_after = rec.acc_before_ft;
      rep.records.push_back(rec);
      rep.aborted = true;
      rep.abort_reason = e.what();
      break;
    }
    rec.step_seconds = seconds_since(ts);
    rep.records.push_back(rec);
  }

  if (!rep.aborted) {
    for (int e = 0; e < opt.final_extra_epochs; ++e) {
      try {
        fine_tune_epoch(net, train, cap(alpha(net, pc_orig)), opt, run_rng);
        rep.ft_epochs += 1;
      } catch (const NumericalError& err) {
        rep.aborted = true;
        rep.abort_reason = err.what();
        break;
      }
    }
  }

  rep.final_accuracy = test_accuracy(net, test);
  rep.alpha_final = alpha(net, pc_orig);
  rep.total_seconds = seconds_since(t0);
  return {std::move(net), std::move(rep)};
}

TuneResult tune_stage1(const Network& input, const PruneSchedule& schedule,
                       const SearchSpace& space, const Dataset& train, const Dataset& test,
                       const SubsampleSpec& sub, const Criterion& crit,
                       const PipelineToggles& toggles, const TrainOptions& opt,
                       uint64_t master_seed) {
  space.validate();
  const Dataset sub_train = subsample(train, sub);
  const Dataset sub_test = subsample(test, sub);
  return grid_search(space, [&](const HyperParams& hp, size_t index) {
    auto [net, rep] = pft(input, schedule, hp, sub_train, sub_test, crit, toggles, opt,
                          mix_seed(master_seed, index));
    (void)net;
    if (rep.aborted) throw std::runtime_error("trial aborted: " + rep.abort_reason);
    return std::make_pair(rep.total_seconds, rep.acc_orig - rep.final_accuracy);
  });
}

IceResult ice_pipeline(const Network& input, const PruneSchedule& schedule,
                       const SearchSpace& space, const Dataset& train, const Dataset& test,
                       const SubsampleSpec& sub, const Criterion& crit,
                       const PipelineToggles& toggles, const TrainOptions& opt,
                       uint64_t master_seed) {
  TuneResult tune = tune_stage1(input, schedule, space, train, test, sub, crit, toggles, opt,
                                master_seed);
  if (std::isinf(tune.best_error))
    throw std::runtime_error("auto-tune: every grid point failed");

  IceResult r;
  auto [model, rep] = pft(input, schedule, tune.best, train, test, crit, toggles, opt,
                          master_seed);
  rep.pipeline_name = "ice";
  r.model = std::move(model);
  r.report = std::move(rep);
  r.tune = std::move(tune);
  return r;
}

std::pair<Network, RunReport> baseline_pipeline(const Network& input,
                                                const PruneSchedule& schedule,
                                                const Dataset& train, const Dataset& test,
                                                const Criterion& crit, double lr_base,
                                                const TrainOptions& opt, uint64_t master_seed) {
  validate_schedule(input, schedule);
  if (!(lr_base > 0.0)) throw std::invalid_argument("baseline: lr_base must be > 0");
  Network net = input;
  RunReport rep;
  rep.pipeline_name = "baseline";
  rep.params.theta = -std::numeric_limits<double>::infinity();
  rep.params.eta = 0.0;
  rep.params.lr.lr_base = lr_base;
  rep.toggles = PipelineToggles{false, false, false};
  rep.master_seed = master_seed;

  const auto t0 = Clock::now();
  rep.acc_orig = test_accuracy(net, test);
  const int64_t pc_orig = param_count(net);
  std::mt19937_64 run_rng(mix_seed(master_seed, "ft"));

  for (size_t si = 0; si < schedule.actions.size(); ++si) {
    const PruneAction& act = schedule.actions[si];
    const auto ts = Clock::now();
    StepRecord rec;
    rec.step = static_cast<int>(si) + 1;
    rec.layer_index = act.layer_index;
    try {
      std::vector<float> scores = score_structures(net, act.layer_index, crit, &train);
      apply_prune(net, act, scores);
      rec.acc_before_ft = test_accuracy(net, test);
      rec.triggered = true;
      rec.alpha = alpha(net, pc_orig);
      fine_tune_epoch(net, train, lr_base, opt, run_rng);
      rep.ft_epochs += 1;
      rec.lr_max_used = lr_base;
      rec.acc_after = test_accuracy(net, test);
    } catch (const NumericalError& e) {
      rec.step_seconds = seconds_since(ts);
      rec.acc_after = rec.acc_before_ft;
      rep.records.push_back(rec);
      rep.aborted = true;
      rep.abort_reason = e.what();
      break;
    }
    rec.step_seconds = seconds_since(ts);
    rep.records.push_back(rec);
  }

  rep.final_accuracy = test_accuracy(net, test);
  rep.alpha_final = alpha(net, pc_orig);
  rep.total_seconds = seconds_since(t0);
  return {std::move(net), std::move(rep)};
}

}  // namespace icep
