#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icep/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string criterion, data_format, inner;
  double lr_base = 0, lr_delta = 0, lr_p = 0, lr_beta = 0;
  CLI::App* sub = nullptr;

  void attach(CLI::App* s) {
    sub = s;
    s->add_option("--config", config_path, "experiment config JSON")->required();
    s->add_option("--criterion", criterion, "pruning criterion: l1|random|entropy|mean_act");
    s->add_option("--data-format", data_format, "dataset format: cifar10|synthetic");
    s->add_option("--lr-base", lr_base, "override hyper.lr_base");
    s->add_option("--lr-delta", lr_delta, "override hyper.delta");
    s->add_option("--lr-p", lr_p, "override hyper.p");
    s->add_option("--lr-beta", lr_beta, "override hyper.beta");
    s->add_option("--inner-schedule", inner, "per-epoch LR shape: constant|cosine");
  }

  icep::ExperimentConfig load() const {
    icep::ConfigOverrides ov;
    if (sub->count("--criterion")) ov.criterion = criterion;
    if (sub->count("--data-format")) ov.data_format = data_format;
    if (sub->count("--inner-schedule")) ov.inner = inner;
    if (sub->count("--lr-base")) ov.lr_base = lr_base;
    if (sub->count("--lr-delta")) ov.lr_delta = lr_delta;
    if (sub->count("--lr-p")) ov.lr_p = lr_p;
    if (sub->count("--lr-beta")) ov.lr_beta = lr_beta;
    return icep::load_config(config_path, ov);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterative structured pruning with gated fine-tuning, layer freezing, "
               "and auto-tuned hyperparameters"};
  app.require_subcommand(1);

  CommonArgs pretrain_args, prune_args, autotune_args, ablate_args;
  std::string mode = "ice";
  std::vector<std::string> compare_paths;
  std::string out_table = "compare.csv", out_plot = "compare_plot.csv";
  std::string summary_path;

  pretrain_args.attach(app.add_subcommand("pretrain", "train the reference model"));
  CLI::App* prune = app.add_subcommand("prune", "run a pruning pipeline on a checkpoint");
  prune_args.attach(prune);
  prune->add_option("--mode", mode, "ice|baseline")->check(CLI::IsMember({"ice", "baseline"}));
  autotune_args.attach(app.add_subcommand("autotune", "Stage-1 hyperparameter sweep only"));
  ablate_args.attach(app.add_subcommand("ablate", "full pipeline plus leave-one-out variants"));

  CLI::App* compare = app.add_subcommand("compare", "merge run summaries into one table");
  compare->add_option("summaries", compare_paths, "summary JSON files")->expected(-1);
  compare->add_option("--out-table", out_table, "merged CSV path");
  compare->add_option("--out-plot", out_plot, "seconds-vs-accuracy CSV path");

  CLI::App* report = app.add_subcommand("report", "render one run summary");
  report->add_option("summary", summary_path, "summary JSON file")->required();

  try {
    app.parse(argc, argv);
    if (pretrain_args.sub->parsed()) return icep::cmd_pretrain(pretrain_args.load());
    if (prune->parsed()) return icep::cmd_prune(prune_args.load(), mode);
    if (autotune_args.sub->parsed()) return icep::cmd_autotune(autotune_args.load());
    if (ablate_args.sub->parsed()) return icep::cmd_ablate(ablate_args.load());
    if (compare->parsed()) return icep::cmd_compare(compare_paths, out_table, out_plot);
    if (report->parsed()) return icep::cmd_report(summary_path);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const icep::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
