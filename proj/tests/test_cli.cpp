#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

using std::filesystem::path;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr merged
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(ICEP_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

path fresh_dir(const std::string& name) {
  path d = std::filesystem::temp_directory_path() / "icep_cli_tests" / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string write_file(const path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
  return p.string();
}

// conv 4 -> pool -> dense 8 -> dense 3 on easy blobs; fast end to end
std::string small_config(const path& dir, const std::string& extra = "") {
  std::string text = R"({
    "model": {"input_shape": [1, 8, 8], "classes": 3,
              "layers": [{"kind": "conv2d", "units": 4, "kernel": 3},
                         {"kind": "relu"},
                         {"kind": "maxpool2d", "window": 2},
                         {"kind": "flatten"},
                         {"kind": "dense", "units": 8},
                         {"kind": "relu"},
                         {"kind": "dense", "units": 3}]},
    "data": {"synthesize": {"classes": 3, "train_count": 120, "test_count": 45,
                             "shape": [1, 8, 8], "seed": 5, "noise": 0.8}},
    "schedule": {"uniform_ratio": 0.5},
    "hyper": {"theta": 0.02, "eta": 0.5},
    "train": {"batch_size": 16, "pretrain_epochs": 2},
    "seed": 9,
    "out_dir": ")" + (dir / "runs").string() + R"(",
    "checkpoint": ")" + (dir / "model.icep").string() + "\"" + extra + "}";
  return write_file(dir / "exp.json", text);
}

std::string slurp(const path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<path> find_outputs(const path& dir, const std::string& prefix) {
  std::vector<path> hits;
  if (!std::filesystem::exists(dir)) return hits;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().filename().string().rfind(prefix, 0) == 0) hits.push_back(e.path());
  return hits;
}

// row-by-row equality with the trailing step_seconds column ignored
void check_csv_equal_modulo_timing(const std::string& a, const std::string& b) {
  std::istringstream sa(a), sb(b);
  std::string la, lb;
  int line = 0;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(sa, la));
    const bool gb = static_cast<bool>(std::getline(sb, lb));
    CHECK(ga == gb);
    if (!ga || !gb) break;
    ++line;
    const size_t ca = la.rfind(','), cb = lb.rfind(',');
    REQUIRE(ca != std::string::npos);
    REQUIRE(cb != std::string::npos);
    CAPTURE(line);
    CHECK(la.substr(0, ca) == lb.substr(0, cb));
  }
}

}  // namespace

TEST_CASE("cli pretrain trains, reports progress, and is deterministic") {
  path dir = fresh_dir("pretrain");
  std::string cfg = small_config(dir);

  RunResult r1 = run_cli("pretrain --config " + cfg);
  CAPTURE(r1.output);
  CHECK(r1.exit_code == 0);
  CHECK(r1.output.find("epoch 2/2") != std::string::npos);
  CHECK(r1.output.find("checkpoint written to") != std::string::npos);
  REQUIRE(std::filesystem::exists(dir / "model.icep"));

  const std::string bytes1 = slurp(dir / "model.icep");
  RunResult r2 = run_cli("pretrain --config " + cfg);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(dir / "model.icep") == bytes1);
}

TEST_CASE("cli pretrain learns well-separated classes") {
  path dir = fresh_dir("learn");
  std::string text = R"({
    "model": {"input_shape": [1, 4, 4], "classes": 2,
              "layers": [{"kind": "flatten"},
                         {"kind": "dense", "units": 16},
                         {"kind": "relu"},
                         {"kind": "dense", "units": 2}]},
    "data": {"synthesize": {"classes": 2, "train_count": 120, "test_count": 40,
                             "shape": [1, 4, 4], "seed": 3, "noise": 0.3}},
    "hyper": {"lr_base": 0.01, "delta": 0.005},
    "train": {"batch_size": 16, "pretrain_epochs": 5},
    "seed": 3,
    "out_dir": ")" + (dir / "runs").string() + R"(",
    "checkpoint": ")" + (dir / "model.icep").string() + R"("
  })";
  std::string cfg = write_file(dir / "exp.json", text);

  RunResult r = run_cli("pretrain --config " + cfg);
  CAPTURE(r.output);
  REQUIRE(r.exit_code == 0);
  // last "train X.XXXX" figure is the final-epoch training accuracy
  const size_t pos = r.output.rfind("train ");
  REQUIRE(pos != std::string::npos);
  const double final_train = std::stod(r.output.substr(pos + 6));
  CHECK(final_train >= 0.9);
}

TEST_CASE("cli prune produces checkpoints, reports, and summaries for both modes") {
  path dir = fresh_dir("prune");
  std::string cfg = small_config(dir);
  REQUIRE(run_cli("pretrain --config " + cfg).exit_code == 0);

  RunResult base = run_cli("prune --config " + cfg + " --mode baseline");
  CAPTURE(base.output);
  CHECK(base.exit_code == 0);
  CHECK(base.output.find("run baseline") != std::string::npos);

  RunResult ice = run_cli("prune --config " + cfg + " --mode ice");
  CAPTURE(ice.output);
  CHECK(ice.exit_code == 0);
  CHECK(ice.output.find("run ice") != std::string::npos);

  path runs = dir / "runs";
  CHECK(find_outputs(runs, "pruned_baseline_").size() == 1);
  CHECK(find_outputs(runs, "report_baseline_").size() == 1);
  CHECK(find_outputs(runs, "summary_baseline_").size() == 1);
  CHECK(find_outputs(runs, "pruned_ice_").size() == 1);
  CHECK(find_outputs(runs, "report_ice_").size() == 1);
  CHECK(find_outputs(runs, "summary_ice_").size() == 1);
  // eta 0.5 freezes one of three layers, so the probe emitted deltas
  CHECK(find_outputs(runs, "freeze_ice_").size() == 1);
  CHECK(find_outputs(runs, "freeze_baseline_").empty());

  const std::string report = slurp(find_outputs(runs, "report_ice_")[0]);
  CHECK(report.rfind("step,layer_index,alpha,acc_before_ft,triggered,lr_max_used,acc_after,"
                     "step_seconds\n",
                     0) == 0);
}

TEST_CASE("cli prune reruns bit-identically except wall time") {
  path dir1 = fresh_dir("rerun1");
  path dir2 = fresh_dir("rerun2");
  std::string cfg1 = small_config(dir1);
  std::string cfg2 = small_config(dir2);
  REQUIRE(run_cli("pretrain --config " + cfg1).exit_code == 0);
  REQUIRE(run_cli("pretrain --config " + cfg2).exit_code == 0);
  CHECK(slurp(dir1 / "model.icep") == slurp(dir2 / "model.icep"));

  REQUIRE(run_cli("prune --config " + cfg1 + " --mode ice").exit_code == 0);
  REQUIRE(run_cli("prune --config " + cfg2 + " --mode ice").exit_code == 0);

  auto pruned1 = find_outputs(dir1 / "runs", "pruned_ice_");
  auto pruned2 = find_outputs(dir2 / "runs", "pruned_ice_");
  REQUIRE(pruned1.size() == 1);
  REQUIRE(pruned2.size() == 1);
  CHECK(slurp(pruned1[0]) == slurp(pruned2[0]));

  check_csv_equal_modulo_timing(slurp(find_outputs(dir1 / "runs", "report_ice_")[0]),
                                slurp(find_outputs(dir2 / "runs", "report_ice_")[0]));
}

TEST_CASE("cli overrides change the effective config hash") {
  path dir = fresh_dir("override");
  std::string cfg = small_config(dir);
  RunResult plain = run_cli("pretrain --config " + cfg);
  RunResult tuned = run_cli("pretrain --config " + cfg + " --lr-base 0.002");
  REQUIRE(plain.exit_code == 0);
  REQUIRE(tuned.exit_code == 0);
  auto hash_of = [](const std::string& out) {
    const size_t p = out.find("(config ");
    REQUIRE(p != std::string::npos);
    return out.substr(p + 8, 16);
  };
  CHECK(hash_of(plain.output) != hash_of(tuned.output));
}

TEST_CASE("cli autotune writes the trial table and winner") {
  path dir = fresh_dir("autotune");
  std::string cfg = small_config(dir,
                                 ",\"space\":{\"theta\":[0.02],\"eta\":[0.0],"
                                 "\"delta\":[0.0005],\"p\":[0.35],\"beta\":[1.0,2.0]}");
  REQUIRE(run_cli("pretrain --config " + cfg).exit_code == 0);

  RunResult r = run_cli("autotune --config " + cfg);
  CAPTURE(r.output);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("2 trials, best e=") != std::string::npos);

  auto trials = find_outputs(dir / "runs", "trials_");
  REQUIRE(trials.size() == 1);
  std::istringstream ss(slurp(trials[0]));
  std::string line;
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 3);  // header + 2 grid points

  auto best = find_outputs(dir / "runs", "best_");
  REQUIRE(best.size() == 1);
  const std::string bj = slurp(best[0]);
  CHECK(bj.find("\"theta\"") != std::string::npos);
  CHECK(bj.find("\"e\"") != std::string::npos);
}

TEST_CASE("cli ablate emits one merged table across the four runs") {
  path dir = fresh_dir("ablate");
  std::string cfg = small_config(dir);
  REQUIRE(run_cli("pretrain --config " + cfg).exit_code == 0);

  RunResult r = run_cli("ablate --config " + cfg);
  CAPTURE(r.output);
  CHECK(r.exit_code == 0);

  auto tables = find_outputs(dir / "runs", "ablation_");
  REQUIRE(tables.size() == 1);
  const std::string table = slurp(tables[0]);
  std::istringstream ss(table);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(ss, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] ==
        "variant,use_threshold,use_freezing,use_scheduler,final_accuracy,total_seconds,ft_epochs");
  CHECK(lines[1].rfind("full,1,1,1,", 0) == 0);
  CHECK(lines[2].rfind("no_threshold,0,1,1,", 0) == 0);
  CHECK(lines[3].rfind("no_freezing,1,0,1,", 0) == 0);
  CHECK(lines[4].rfind("no_scheduler,1,1,0,", 0) == 0);
  for (const char* v : {"full", "no_threshold", "no_freezing", "no_scheduler"})
    CHECK(find_outputs(dir / "runs", std::string("summary_") + v + "_").size() == 1);
}

TEST_CASE("cli compare merges summaries and computes speedups") {
  path dir = fresh_dir("compare");
  std::string cfg = small_config(dir);
  REQUIRE(run_cli("pretrain --config " + cfg).exit_code == 0);
  REQUIRE(run_cli("prune --config " + cfg + " --mode baseline").exit_code == 0);
  REQUIRE(run_cli("prune --config " + cfg + " --mode ice").exit_code == 0);

  path runs = dir / "runs";
  std::string sb = find_outputs(runs, "summary_baseline_")[0].string();
  std::string si = find_outputs(runs, "summary_ice_")[0].string();
  std::string table = (dir / "cmp.csv").string();
  std::string plot = (dir / "cmp_plot.csv").string();

  RunResult r = run_cli("compare " + sb + " " + si + " --out-table " + table +
                        " --out-plot " + plot);
  CAPTURE(r.output);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("run baseline") != std::string::npos);
  CHECK(r.output.find("run ice") != std::string::npos);

  const std::string tb = slurp(table);
  CHECK(tb.rfind("pipeline,pruned_ratio,final_accuracy,total_seconds,speedup\n", 0) == 0);
  CHECK(tb.find("\nbaseline,") != std::string::npos);
  CHECK(tb.find("\nice,") != std::string::npos);
  CHECK(slurp(plot).rfind("pipeline,seconds,accuracy\n", 0) == 0);

  SUBCASE("missing summary fails with the path named") {
    RunResult bad = run_cli("compare " + sb + " /nonexistent/sum.json --out-table " + table +
                            " --out-plot " + plot);
    CHECK(bad.exit_code == 3);
    CHECK(bad.output.find("/nonexistent/sum.json") != std::string::npos);
  }
  SUBCASE("one summary is not enough") {
    RunResult one = run_cli("compare " + sb + " --out-table " + table + " --out-plot " + plot);
    CHECK(one.exit_code == 2);
  }
}

TEST_CASE("cli report renders one summary") {
  path dir = fresh_dir("report");
  std::string cfg = small_config(dir);
  REQUIRE(run_cli("pretrain --config " + cfg).exit_code == 0);
  REQUIRE(run_cli("prune --config " + cfg + " --mode baseline").exit_code == 0);
  std::string sum = find_outputs(dir / "runs", "summary_baseline_")[0].string();

  RunResult r = run_cli("report " + sum);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("run baseline") != std::string::npos);
  CHECK(r.output.find("accuracy") != std::string::npos);

  CHECK(run_cli("report /nonexistent/sum.json").exit_code == 3);
}

TEST_CASE("cli surfaces config mistakes as exit 2 and runtime failures as 3") {
  path dir = fresh_dir("errors");

  // flag-level errors
  CHECK(run_cli("prune").exit_code == 2);                             // missing --config
  CHECK(run_cli("definitely-not-a-command").exit_code == 2);
  std::string cfg = small_config(dir);
  CHECK(run_cli("prune --config " + cfg + " --mode turbo").exit_code == 2);

  // config-level: dataset files that do not exist are caught before compute
  std::string missing_data = write_file(dir / "missing_data.json", R"({
    "data": {"format": "cifar10", "train": "/nonexistent/a.bin", "test": "/nonexistent/b.bin"},
    "model": {"input_shape": [3, 32, 32], "classes": 10},
    "seed": 1,
    "checkpoint": ")" + (dir / "m.icep").string() + R"("
  })");
  RunResult md = run_cli("pretrain --config " + missing_data);
  CHECK(md.exit_code == 2);
  CHECK(md.output.find("dataset file not found") != std::string::npos);

  CHECK(run_cli("pretrain --config /nonexistent/exp.json").exit_code == 2);

  std::string unknown_key = write_file(dir / "unknown.json",
                                       "{\"data\":{\"synthesize\":{}},\"seed\":1,"
                                       "\"checkpoint\":\"x\",\"bogus\":1}");
  RunResult uk = run_cli("pretrain --config " + unknown_key);
  CHECK(uk.exit_code == 2);
  CHECK(uk.output.find("unknown key") != std::string::npos);

  // runtime-level: a corrupt checkpoint only surfaces once the run starts
  write_file(dir / "model.icep", "this is not a checkpoint");
  RunResult corrupt = run_cli("prune --config " + cfg + " --mode ice");
  CHECK(corrupt.exit_code == 3);

  RunResult gone = run_cli("prune --config " + small_config(fresh_dir("errors2")) +
                           " --mode ice");
  CHECK(gone.exit_code == 3);  // checkpoint never written
}
