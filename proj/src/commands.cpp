#include "icep/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "icep/checkpoint.hpp"
#include "icep/report.hpp"
#include "icep/util.hpp"

namespace icep {

namespace fs = std::filesystem;

static std::pair<Dataset, Dataset> load_splits(const ExperimentConfig& cfg) {
  for (const auto& paths : {cfg.train_paths, cfg.test_paths})
    for (const std::string& p : paths)
      if (!fs::exists(p)) throw ConfigError("config: dataset file not found: " + p);
  Dataset train, test;
  if (cfg.synthesize) {
    BlobSpec b = cfg.blob;
    b.count = cfg.train_count;
    train = make_blobs(b, "train");
    b.count = cfg.test_count;
    test = make_blobs(b, "test");
  } else {
    train = load_dataset_files(cfg.train_paths, cfg.format, "train");
    test = load_dataset_files(cfg.test_paths, cfg.format, "test");
  }
  if (train.shape != cfg.input_shape)
    throw std::runtime_error("dataset shape does not match model input shape");
  return {std::move(train), std::move(test)};
}

static Network build_model(const ExperimentConfig& cfg) {
  const uint64_t init_seed = mix_seed(cfg.seed, "init");
  if (cfg.layers.empty()) return build_default_cnn(cfg.input_shape, cfg.classes, init_seed);
  return build_network(cfg.input_shape, cfg.layers, init_seed);
}

static PruneSchedule make_schedule(const ExperimentConfig& cfg, const Network& net) {
  PruneSchedule s = cfg.schedule_path.empty() ? default_schedule(net, static_cast<float>(cfg.uniform_ratio))
                                              : load_schedule(cfg.schedule_path);
  validate_schedule(net, s);
  return s;
}

static std::string out_path(const ExperimentConfig& cfg, const std::string& stem) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / stem).string();
}

static void emit_run(const ExperimentConfig& cfg, const Network& model, RunReport& rep,
                     const std::string& tag) {
  rep.config_hash = cfg.config_hash;
  const std::string suffix = tag + "_" + cfg.config_hash;
  save_checkpoint(model, out_path(cfg, "pruned_" + suffix + ".icep"));
  write_report_csv(rep, out_path(cfg, "report_" + suffix + ".csv"));
  write_summary_json(rep, out_path(cfg, "summary_" + suffix + ".json"));
  if (!rep.freeze_deltas.empty())
    write_freeze_csv(rep.freeze_deltas, out_path(cfg, "freeze_" + suffix + ".csv"));
  std::printf("%s", render_summary(summarize(rep)).c_str());
}

int cmd_pretrain(const ExperimentConfig& cfg) {
  auto [train, test] = load_splits(cfg);
  Network net = build_model(cfg);
  std::mt19937_64 rng(mix_seed(cfg.seed, "pretrain"));
  for (int e = 0; e < cfg.pretrain_epochs; ++e) {
    try {
      fine_tune_epoch(net, train, cfg.hyper.lr.lr_base, cfg.train_opt, rng);
    } catch (const NumericalError& err) {
      throw std::runtime_error(std::string("pretrain diverged at epoch ") +
                               std::to_string(e + 1) + ": " + err.what());
    }
    std::printf("epoch %d/%d  train %.4f  test %.4f\n", e + 1, cfg.pretrain_epochs,
                test_accuracy(net, train), test_accuracy(net, test));
  }
  const fs::path parent = fs::path(cfg.checkpoint_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  save_checkpoint(net, cfg.checkpoint_path);
  std::printf("checkpoint written to %s (config %s)\n", cfg.checkpoint_path.c_str(),
              cfg.config_hash.c_str());
  return 0;
}

int cmd_prune(const ExperimentConfig& cfg, const std::string& mode) {
  if (mode != "ice" && mode != "baseline")
    throw ConfigError("prune: mode must be ice or baseline");
  Network net = load_checkpoint(cfg.checkpoint_path);
  auto [train, test] = load_splits(cfg);
  PruneSchedule sched = make_schedule(cfg, net);

  if (mode == "baseline") {
    auto [model, rep] = baseline_pipeline(net, sched, train, test, cfg.criterion,
                                          cfg.hyper.lr.lr_base, cfg.train_opt, cfg.seed);
    emit_run(cfg, model, rep, "baseline");
    return rep.aborted ? 3 : 0;
  }
  if (cfg.has_space) {
    IceResult r = ice_pipeline(net, sched, cfg.space, train, test, cfg.sub, cfg.criterion,
                               cfg.toggles, cfg.train_opt, cfg.seed);
    write_trials_csv(r.tune, out_path(cfg, "trials_" + cfg.config_hash + ".csv"));
    emit_run(cfg, r.model, r.report, "ice");
    return r.report.aborted ? 3 : 0;
  }
  auto [model, rep] = pft(net, sched, cfg.hyper, train, test, cfg.criterion, cfg.toggles,
                          cfg.train_opt, cfg.seed);
  rep.pipeline_name = "ice";
  emit_run(cfg, model, rep, "ice");
  return rep.aborted ? 3 : 0;
}

int cmd_autotune(const ExperimentConfig& cfg) {
  Network net = load_checkpoint(cfg.checkpoint_path);
  auto [train, test] = load_splits(cfg);
  PruneSchedule sched = make_schedule(cfg, net);
  const SearchSpace& space = cfg.space;  // defaults when no space section given

  TuneResult tune = tune_stage1(net, sched, space, train, test, cfg.sub, cfg.criterion,
                                cfg.toggles, cfg.train_opt, cfg.seed);
  write_trials_csv(tune, out_path(cfg, "trials_" + cfg.config_hash + ".csv"));

  nlohmann::json best;
  best["theta"] = std::isinf(tune.best.theta) ? nlohmann::json("never")
                                              : nlohmann::json(tune.best.theta);
  best["eta"] = tune.best.eta;
  best["lr_base"] = tune.best.lr.lr_base;
  best["delta"] = tune.best.lr.delta;
  best["p"] = tune.best.lr.p;
  best["beta"] = tune.best.lr.beta;
  best["e"] = tune.best_error;
  best["trial"] = tune.best_index;
  best["config_hash"] = cfg.config_hash;
  best["master_seed"] = cfg.seed;
  std::ofstream f(out_path(cfg, "best_" + cfg.config_hash + ".json"), std::ios::trunc);
  f << best.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write tuning result");
  std::printf("%zu trials, best e=%s at trial %zu (theta=%s eta=%s delta=%s p=%s beta=%s)\n",
              tune.trials.size(), format_g9(tune.best_error).c_str(), tune.best_index,
              format_g9(tune.best.theta).c_str(), format_g9(tune.best.eta).c_str(),
              format_g9(tune.best.lr.delta).c_str(), format_g9(tune.best.lr.p).c_str(),
              format_g9(tune.best.lr.beta).c_str());
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
  Network net = load_checkpoint(cfg.checkpoint_path);
  auto [train, test] = load_splits(cfg);
  PruneSchedule sched = make_schedule(cfg, net);

  struct Variant {
    const char* name;
    PipelineToggles t;
  };
  const Variant variants[] = {
      {"full", {true, true, true}},
      {"no_threshold", {false, true, true}},
      {"no_freezing", {true, false, true}},
      {"no_scheduler", {true, true, false}},
  };

  std::ofstream table(out_path(cfg, "ablation_" + cfg.config_hash + ".csv"), std::ios::trunc);
  table << "variant,use_threshold,use_freezing,use_scheduler,final_accuracy,total_seconds,"
           "ft_epochs\n";
  int rc = 0;
  for (const Variant& v : variants) {
    auto [model, rep] = pft(net, sched, cfg.hyper, train, test, cfg.criterion, v.t,
                            cfg.train_opt, cfg.seed);
    rep.pipeline_name = v.name;
    emit_run(cfg, model, rep, v.name);
    table << v.name << ',' << (v.t.use_threshold ? 1 : 0) << ',' << (v.t.use_freezing ? 1 : 0)
          << ',' << (v.t.use_scheduler ? 1 : 0) << ',' << format_g9(rep.final_accuracy) << ','
          << format_g9(rep.total_seconds) << ',' << rep.ft_epochs << '\n';
    if (rep.aborted) rc = 3;
  }
  if (!table) throw std::runtime_error("cannot write ablation table");
  return rc;
}

int cmd_compare(const std::vector<std::string>& summary_paths, const std::string& out_table,
                const std::string& out_plot) {
  if (summary_paths.size() < 2)
    throw ConfigError("compare: need at least two report summaries");
  std::vector<RunSummary> rows;
  for (const std::string& p : summary_paths) rows.push_back(read_summary_json(p));
  for (size_t i = 1; i < rows.size(); ++i)
    if (rows[i].config_hash != rows[0].config_hash) {
      std::fprintf(stderr, "warning: mixed config hashes (%s vs %s)\n",
                   rows[i].config_hash.c_str(), rows[0].config_hash.c_str());
      break;
    }
  write_comparison(rows, out_table, out_plot);
  for (const RunSummary& s : rows) std::printf("%s", render_summary(s).c_str());
  return 0;
}

int cmd_report(const std::string& summary_path) {
  std::printf("%s", render_summary(read_summary_json(summary_path)).c_str());
  return 0;
}

}  // namespace icep
