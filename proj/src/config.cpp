#include "icep/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "icep/util.hpp"

namespace icep {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("config: unknown key " + where + "." + it.key());
}

const json* opt_section(const json& j, const std::string& key, bool want_object = true) {
  auto it = j.find(key);
  if (it == j.end()) return nullptr;
  if (want_object && !it->is_object())
    throw ConfigError("config: " + key + " must be an object");
  return &*it;
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError("config: " + where + " must be a number");
  return j.get<double>();
}

double opt_num(const json& j, const std::string& key, const std::string& where, double dflt) {
  auto it = j.find(key);
  return it == j.end() ? dflt : num(*it, where + "." + key);
}

int opt_int(const json& j, const std::string& key, const std::string& where, int dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number_integer())
    throw ConfigError("config: " + where + "." + key + " must be an integer");
  return it->get<int>();
}

bool opt_bool(const json& j, const std::string& key, const std::string& where, bool dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_boolean()) throw ConfigError("config: " + where + "." + key + " must be a bool");
  return it->get<bool>();
}

std::string opt_str(const json& j, const std::string& key, const std::string& where,
                    const std::string& dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_string()) throw ConfigError("config: " + where + "." + key + " must be a string");
  return it->get<std::string>();
}

std::vector<int> int_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError("config: " + where + " must be an array");
  std::vector<int> v;
  for (const auto& e : j) {
    if (!e.is_number_integer())
      throw ConfigError("config: " + where + " must hold integers");
    v.push_back(e.get<int>());
  }
  return v;
}

std::vector<std::string> str_list(const json& j, const std::string& where) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ConfigError("config: " + where + " must be a path or path list");
  std::vector<std::string> v;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError("config: " + where + " must hold strings");
    v.push_back(e.get<std::string>());
  }
  return v;
}

std::vector<double> num_list(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError("config: " + where + " must be a non-empty array");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(num(e, where));
  std::sort(v.begin(), v.end());
  return v;
}

double theta_value(const json& j, const std::string& where) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "never") return std::numeric_limits<double>::infinity();
    if (s == "always") return -std::numeric_limits<double>::infinity();
    throw ConfigError("config: " + where + " must be a number, \"never\", or \"always\"");
  }
  return num(j, where);
}

}  // namespace

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& ov) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  if (ov.criterion) j["criterion"]["kind"] = *ov.criterion;
  if (ov.data_format) j["data"]["format"] = *ov.data_format;
  if (ov.inner) j["train"]["inner"] = *ov.inner;
  if (ov.lr_base) j["hyper"]["lr_base"] = *ov.lr_base;
  if (ov.lr_delta) j["hyper"]["delta"] = *ov.lr_delta;
  if (ov.lr_p) j["hyper"]["p"] = *ov.lr_p;
  if (ov.lr_beta) j["hyper"]["beta"] = *ov.lr_beta;

  reject_unknown(j, "",
                 {"model", "data", "schedule", "criterion", "toggles", "hyper", "space",
                  "train", "subsample", "seed", "out_dir", "checkpoint"});

  ExperimentConfig cfg;
  try {
    cfg.config_hash = to_hex(fnv1a64(j.dump()));

    if (const json* m = opt_section(j, "model")) {
      reject_unknown(*m, "model", {"input_shape", "classes", "layers"});
      if (m->contains("input_shape")) cfg.input_shape = int_list((*m)["input_shape"], "model.input_shape");
      cfg.classes = opt_int(*m, "classes", "model", cfg.classes);
      if (cfg.classes < 2) throw ConfigError("config: model.classes must be >= 2");
      if (m->contains("layers")) {
        const json& ls = (*m)["layers"];
        if (!ls.is_array() || ls.empty())
          throw ConfigError("config: model.layers must be a non-empty array");
        for (const auto& e : ls) {
          if (!e.is_object()) throw ConfigError("config: model.layers entries must be objects");
          reject_unknown(e, "model.layers[]", {"kind", "units", "kernel", "window"});
          LayerSpec sp;
          try {
            sp.kind = parse_layer_kind(opt_str(e, "kind", "model.layers[]", ""));
          } catch (const std::invalid_argument& err) {
            throw ConfigError(std::string("config: ") + err.what());
          }
          sp.units = opt_int(e, "units", "model.layers[]", 0);
          sp.kernel = opt_int(e, "kernel", "model.layers[]", 0);
          sp.window = opt_int(e, "window", "model.layers[]", 0);
          cfg.layers.push_back(sp);
        }
      }
    }

    const json* d = opt_section(j, "data");
    if (!d) throw ConfigError("config: data section is required");
    reject_unknown(*d, "data", {"format", "train", "test", "synthesize"});
    try {
      cfg.format = parse_data_format(opt_str(*d, "format", "data", "synthetic"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: data.format: ") + e.what());
    }
    if (d->contains("train")) cfg.train_paths = str_list((*d)["train"], "data.train");
    if (d->contains("test")) cfg.test_paths = str_list((*d)["test"], "data.test");
    if (const json* s = opt_section(*d, "synthesize")) {
      reject_unknown(*s, "data.synthesize",
                     {"classes", "train_count", "test_count", "shape", "seed", "noise"});
      cfg.synthesize = true;
      cfg.blob.class_count = opt_int(*s, "classes", "data.synthesize", 10);
      cfg.train_count = opt_int(*s, "train_count", "data.synthesize", 1000);
      cfg.test_count = opt_int(*s, "test_count", "data.synthesize", 200);
      if (s->contains("shape")) cfg.blob.shape = int_list((*s)["shape"], "data.synthesize.shape");
      cfg.blob.seed = static_cast<uint64_t>(opt_num(*s, "seed", "data.synthesize", 0));
      cfg.blob.noise = static_cast<float>(opt_num(*s, "noise", "data.synthesize", 1.0));
      if (cfg.train_count < cfg.blob.class_count || cfg.test_count < cfg.blob.class_count)
        throw ConfigError("config: data.synthesize counts must cover every class");
      if (cfg.format != DataFormat::synthetic)
        throw ConfigError("config: data.synthesize requires format synthetic");
      if (!cfg.train_paths.empty() || !cfg.test_paths.empty())
        throw ConfigError("config: give either data paths or data.synthesize, not both");
    }
    if (!cfg.synthesize && (cfg.train_paths.empty() || cfg.test_paths.empty()))
      throw ConfigError("config: data.train and data.test paths are required "
                        "(or use data.synthesize)");

    if (const json* s = opt_section(j, "schedule")) {
      reject_unknown(*s, "schedule", {"uniform_ratio", "path"});
      if (s->contains("path") && s->contains("uniform_ratio"))
        throw ConfigError("config: schedule.path and schedule.uniform_ratio are exclusive");
      cfg.schedule_path = opt_str(*s, "path", "schedule", "");
      cfg.uniform_ratio = opt_num(*s, "uniform_ratio", "schedule", cfg.uniform_ratio);
      if (!(cfg.uniform_ratio >= 0.0) || cfg.uniform_ratio >= 1.0)
        throw ConfigError("config: schedule.uniform_ratio must be in [0,1)");
    }

    if (const json* c = opt_section(j, "criterion")) {
      reject_unknown(*c, "criterion", {"kind", "rng_seed", "calib_batch_size", "histogram_bins"});
      try {
        cfg.criterion.kind = parse_criterion(opt_str(*c, "kind", "criterion", "l1"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: criterion.kind: ") + e.what());
      }
      cfg.criterion.rng_seed = static_cast<uint64_t>(opt_num(*c, "rng_seed", "criterion", 0));
      cfg.criterion.calib_batch_size = opt_int(*c, "calib_batch_size", "criterion", 256);
      cfg.criterion.histogram_bins = opt_int(*c, "histogram_bins", "criterion", 32);
      if (cfg.criterion.calib_batch_size < 1)
        throw ConfigError("config: criterion.calib_batch_size must be >= 1");
      if (cfg.criterion.histogram_bins < 2)
        throw ConfigError("config: criterion.histogram_bins must be >= 2");
    }

    if (const json* t = opt_section(j, "toggles")) {
      reject_unknown(*t, "toggles", {"use_threshold", "use_freezing", "use_scheduler"});
      cfg.toggles.use_threshold = opt_bool(*t, "use_threshold", "toggles", true);
      cfg.toggles.use_freezing = opt_bool(*t, "use_freezing", "toggles", true);
      cfg.toggles.use_scheduler = opt_bool(*t, "use_scheduler", "toggles", true);
    }

    if (const json* h = opt_section(j, "hyper")) {
      reject_unknown(*h, "hyper", {"theta", "eta", "lr_base", "delta", "p", "beta"});
      if (h->contains("theta")) cfg.hyper.theta = theta_value((*h)["theta"], "hyper.theta");
      cfg.hyper.eta = opt_num(*h, "eta", "hyper", cfg.hyper.eta);
      cfg.hyper.lr.lr_base = opt_num(*h, "lr_base", "hyper", cfg.hyper.lr.lr_base);
      cfg.hyper.lr.delta = opt_num(*h, "delta", "hyper", cfg.hyper.lr.delta);
      cfg.hyper.lr.p = opt_num(*h, "p", "hyper", cfg.hyper.lr.p);
      cfg.hyper.lr.beta = opt_num(*h, "beta", "hyper", cfg.hyper.lr.beta);
    }
    try {
      cfg.hyper.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }

    if (const json* s = opt_section(j, "space", false)) {
      cfg.has_space = true;
      if (s->is_object() && s->contains("path")) {
        reject_unknown(*s, "space", {"path"});
        try {
          cfg.space = load_search_space((*s)["path"].get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("config: space: ") + e.what());
        }
      } else if (s->is_object()) {
        reject_unknown(*s, "space", {"theta", "eta", "lr_base", "delta", "p", "beta"});
        if (s->contains("theta")) cfg.space.theta = num_list((*s)["theta"], "space.theta");
        if (s->contains("eta")) cfg.space.eta = num_list((*s)["eta"], "space.eta");
        if (s->contains("lr_base")) cfg.space.lr_base = num_list((*s)["lr_base"], "space.lr_base");
        if (s->contains("delta")) cfg.space.delta = num_list((*s)["delta"], "space.delta");
        if (s->contains("p")) cfg.space.p = num_list((*s)["p"], "space.p");
        if (s->contains("beta")) cfg.space.beta = num_list((*s)["beta"], "space.beta");
        try {
          cfg.space.validate();
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("config: space: ") + e.what());
        }
      } else {
        throw ConfigError("config: space must be an object");
      }
    }

    if (const json* t = opt_section(j, "train")) {
      reject_unknown(*t, "train",
                     {"batch_size", "pretrain_epochs", "momentum", "weight_decay", "inner",
                      "final_extra_epochs"});
      cfg.train_opt.batch_size = opt_int(*t, "batch_size", "train", 64);
      cfg.pretrain_epochs = opt_int(*t, "pretrain_epochs", "train", 5);
      cfg.train_opt.momentum = static_cast<float>(opt_num(*t, "momentum", "train", 0.9));
      cfg.train_opt.weight_decay = static_cast<float>(opt_num(*t, "weight_decay", "train", 1e-4));
      try {
        cfg.train_opt.inner = parse_inner_kind(opt_str(*t, "inner", "train", "constant"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: train.inner: ") + e.what());
      }
      cfg.train_opt.final_extra_epochs = opt_int(*t, "final_extra_epochs", "train", 0);
      if (cfg.train_opt.batch_size < 1)
        throw ConfigError("config: train.batch_size must be >= 1");
      if (cfg.pretrain_epochs < 1) throw ConfigError("config: train.pretrain_epochs must be >= 1");
      if (cfg.train_opt.final_extra_epochs < 0)
        throw ConfigError("config: train.final_extra_epochs must be >= 0");
    }

    if (const json* s = opt_section(j, "subsample")) {
      reject_unknown(*s, "subsample", {"fraction", "stratified"});
      cfg.sub.fraction = opt_num(*s, "fraction", "subsample", 0.1);
      cfg.sub.stratified = opt_bool(*s, "stratified", "subsample", true);
      if (!(cfg.sub.fraction > 0.0) || cfg.sub.fraction > 1.0)
        throw ConfigError("config: subsample.fraction must be in (0,1]");
    }
    cfg.sub.seed = 0;  // fixed below once seed is known

    if (!j.contains("seed")) throw ConfigError("config: seed is required");
    if (!j["seed"].is_number_integer() || j["seed"].get<int64_t>() < 0)
      throw ConfigError("config: seed must be a non-negative integer");
    cfg.seed = j["seed"].get<uint64_t>();
    cfg.sub.seed = mix_seed(cfg.seed, "subsample");

    cfg.out_dir = opt_str(j, "out_dir", "", cfg.out_dir);
    cfg.checkpoint_path = opt_str(j, "checkpoint", "", "");
    if (cfg.checkpoint_path.empty())
      throw ConfigError("config: checkpoint path is required");
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return cfg;
}

}  // namespace icep
