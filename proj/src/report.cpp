#include "icep/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "icep/util.hpp"

namespace icep {

using nlohmann::json;

static std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for write");
  return f;
}

void write_report_csv(const RunReport& r, const std::string& path) {
  std::ofstream f = open_out(path);
  f << "step,layer_index,alpha,acc_before_ft,triggered,lr_max_used,acc_after,step_seconds\n";
  for (const StepRecord& s : r.records) {
    f << s.step << ',' << s.layer_index << ',' << format_g9(s.alpha) << ','
      << format_g9(s.acc_before_ft) << ',' << (s.triggered ? 1 : 0) << ','
      << (std::isnan(s.lr_max_used) ? std::string("none") : format_g9(s.lr_max_used)) << ','
      << format_g9(s.acc_after) << ',' << format_g9(s.step_seconds) << '\n';
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

static json theta_json(double theta) {
  if (std::isinf(theta)) return theta > 0 ? json("never") : json("always");
  return json(theta);
}

void write_summary_json(const RunReport& r, const std::string& path) {
  json j;
  j["pipeline"] = r.pipeline_name;
  j["config_hash"] = r.config_hash;
  j["master_seed"] = r.master_seed;
  j["acc_orig"] = r.acc_orig;
  j["final_accuracy"] = r.final_accuracy;
  j["total_seconds"] = r.total_seconds;
  j["alpha_final"] = r.alpha_final;
  j["ft_epochs"] = r.ft_epochs;
  j["steps"] = r.records.size();
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  j["params"] = {{"theta", theta_json(r.params.theta)}, {"eta", r.params.eta},
                 {"lr_base", r.params.lr.lr_base},      {"delta", r.params.lr.delta},
                 {"p", r.params.lr.p},                  {"beta", r.params.lr.beta}};
  j["toggles"] = {{"use_threshold", r.toggles.use_threshold},
                  {"use_freezing", r.toggles.use_freezing},
                  {"use_scheduler", r.toggles.use_scheduler}};
  std::ofstream f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error(path + ": write failed");
}

RunSummary read_summary_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open");
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  RunSummary s;
  s.source_path = path;
  try {
    s.pipeline = j.at("pipeline").get<std::string>();
    s.config_hash = j.at("config_hash").get<std::string>();
    s.master_seed = j.at("master_seed").get<uint64_t>();
    s.acc_orig = j.at("acc_orig").get<double>();
    s.final_accuracy = j.at("final_accuracy").get<double>();
    s.total_seconds = j.at("total_seconds").get<double>();
    s.alpha_final = j.at("alpha_final").get<double>();
    s.ft_epochs = j.at("ft_epochs").get<int>();
    s.aborted = j.at("aborted").get<bool>();
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": not a run summary: " + e.what());
  }
  return s;
}

RunSummary summarize(const RunReport& r) {
  RunSummary s;
  s.pipeline = r.pipeline_name;
  s.config_hash = r.config_hash;
  s.master_seed = r.master_seed;
  s.acc_orig = r.acc_orig;
  s.final_accuracy = r.final_accuracy;
  s.total_seconds = r.total_seconds;
  s.alpha_final = r.alpha_final;
  s.ft_epochs = r.ft_epochs;
  s.aborted = r.aborted;
  return s;
}

void write_freeze_csv(const std::vector<LayerDelta>& deltas, const std::string& path) {
  std::ofstream f = open_out(path);
  f << "layer_index,l1_change,init_l2,score,frozen\n";
  for (const LayerDelta& d : deltas) {
    f << d.layer_index << ',' << format_g9(d.l1_change) << ',' << format_g9(d.init_l2) << ','
      << format_g9(d.score) << ',' << (d.frozen ? 1 : 0) << '\n';
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

void write_trials_csv(const TuneResult& t, const std::string& path) {
  std::ofstream f = open_out(path);
  f << "trial,theta,eta,lr_base,delta,p,beta,pt_seconds,delta_a,e,failed\n";
  for (size_t i = 0; i < t.trials.size(); ++i) {
    const Trial& tr = t.trials[i];
    f << i << ',' << format_g9(tr.params.theta) << ',' << format_g9(tr.params.eta) << ','
      << format_g9(tr.params.lr.lr_base) << ',' << format_g9(tr.params.lr.delta) << ','
      << format_g9(tr.params.lr.p) << ',' << format_g9(tr.params.lr.beta) << ','
      << format_g9(tr.pt_seconds) << ',' << format_g9(tr.delta_a) << ','
      << format_g9(tr.error) << ',' << (tr.failed ? 1 : 0) << '\n';
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

void write_comparison(const std::vector<RunSummary>& rows, const std::string& table_path,
                      const std::string& plot_path) {
  double baseline_seconds = std::numeric_limits<double>::quiet_NaN();
  for (const RunSummary& s : rows)
    if (s.pipeline == "baseline") {
      baseline_seconds = s.total_seconds;
      break;
    }
  {
    std::ofstream f = open_out(table_path);
    f << "pipeline,pruned_ratio,final_accuracy,total_seconds,speedup\n";
    for (const RunSummary& s : rows) {
      f << s.pipeline << ',' << format_g9(1.0 - s.alpha_final) << ','
        << format_g9(s.final_accuracy) << ',' << format_g9(s.total_seconds) << ',';
      if (std::isnan(baseline_seconds))
        f << "none";
      else
        f << format_g9(baseline_seconds / s.total_seconds);
      f << '\n';
    }
    if (!f) throw std::runtime_error(table_path + ": write failed");
  }
  {
    std::ofstream f = open_out(plot_path);
    f << "pipeline,seconds,accuracy\n";
    for (const RunSummary& s : rows)
      f << s.pipeline << ',' << format_g9(s.total_seconds) << ','
        << format_g9(s.final_accuracy) << '\n';
    if (!f) throw std::runtime_error(plot_path + ": write failed");
  }
}

std::string render_summary(const RunSummary& s) {
  std::ostringstream o;
  o << "run " << s.pipeline << " (config " << s.config_hash << ", seed " << s.master_seed
    << ")\n"
    << "  accuracy " << format_g9(s.acc_orig) << " -> " << format_g9(s.final_accuracy)
    << "  (drop " << format_g9(s.acc_orig - s.final_accuracy) << ")\n"
    << "  params kept " << format_g9(s.alpha_final) << "  pruned "
    << format_g9(1.0 - s.alpha_final) << '\n'
    << "  fine-tune epochs " << s.ft_epochs << "  wall " << format_g9(s.total_seconds)
    << " s" << (s.aborted ? "  [ABORTED]" : "") << '\n';
  return o.str();
}

}  // namespace icep
