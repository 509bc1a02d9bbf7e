#include "icep/autotune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace icep {

void HyperParams::validate() const {
  if (std::isnan(theta) || (theta < 0.0 && !std::isinf(theta)))
    throw std::invalid_argument("hyper: theta must be >= 0 (or an infinity sentinel)");
  if (!(eta >= 0.0) || eta >= 1.0) throw std::invalid_argument("hyper: eta must be in [0,1)");
  lr.validate();
}

size_t SearchSpace::size() const {
  return theta.size() * eta.size() * lr_base.size() * delta.size() * p.size() * beta.size();
}

void SearchSpace::validate() const {
  auto nonempty = [](const std::vector<double>& v, const char* name) {
    if (v.empty()) throw std::invalid_argument(std::string("space: axis ") + name + " is empty");
  };
  nonempty(theta, "theta");
  nonempty(eta, "eta");
  nonempty(lr_base, "lr_base");
  nonempty(delta, "delta");
  nonempty(p, "p");
  nonempty(beta, "beta");
  for (double v : theta)
    if (!(v >= 0.0)) throw std::invalid_argument("space: theta values must be >= 0");
  for (double v : eta)
    if (!(v >= 0.0) || v >= 1.0) throw std::invalid_argument("space: eta values must be in [0,1)");
  for (double v : lr_base)
    if (!(v > 0.0)) throw std::invalid_argument("space: lr_base values must be > 0");
  for (double v : delta)
    if (!(v > 0.0)) throw std::invalid_argument("space: delta values must be > 0");
  if (*std::max_element(delta.begin(), delta.end()) >=
      *std::min_element(lr_base.begin(), lr_base.end()))
    throw std::invalid_argument("space: every delta must be < every lr_base");
  for (double v : p)
    if (!(v > 0.0) || !(v <= 0.5)) throw std::invalid_argument("space: p values must be in (0,0.5]");
  for (double v : beta)
    if (!(v > 0.0)) throw std::invalid_argument("space: beta values must be > 0");
}

SearchSpace load_search_space(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("space: cannot open " + path);
  SearchSpace s;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=values");
    std::string key = line.substr(0, eq);
    key.erase(std::remove_if(key.begin(), key.end(), [](char c) { return c == ' ' || c == '\t'; }),
              key.end());
    std::vector<double> vals;
    std::stringstream ss(line.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad number " + tok);
      }
    }
    if (vals.empty())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": no values");
    std::sort(vals.begin(), vals.end());
    if (key == "theta") s.theta = vals;
    else if (key == "eta") s.eta = vals;
    else if (key == "lr_base") s.lr_base = vals;
    else if (key == "delta") s.delta = vals;
    else if (key == "p") s.p = vals;
    else if (key == "beta") s.beta = vals;
    else throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": unknown axis " + key);
  }
  s.validate();
  return s;
}

double objective(double pt_seconds, double delta_a) {
  if (!std::isfinite(pt_seconds) || !std::isfinite(delta_a))
    throw std::invalid_argument("objective: non-finite input");
  if (!(pt_seconds > 0.0)) throw std::invalid_argument("objective: PT must be > 0");
  const double da = std::max(delta_a, 1e-6);
  return (pt_seconds + da) / std::max(pt_seconds, da);
}

TuneResult grid_search(const SearchSpace& space, const EvalFn& eval) {
  space.validate();
  TuneResult r;
  r.best_error = std::numeric_limits<double>::infinity();
  r.trials.reserve(space.size());
  bool have_best = false;
  size_t index = 0;
  for (double th : space.theta)
    for (double et : space.eta)
      for (double lb : space.lr_base)
        for (double de : space.delta)
          for (double pp : space.p)
            for (double be : space.beta) {
              Trial t;
              t.params.theta = th;
              t.params.eta = et;
              t.params.lr = LrHyper{lb, de, pp, be};
              try {
                auto [pt, da] = eval(t.params, index);
                t.pt_seconds = pt;
                t.delta_a = da;
                t.error = objective(pt, da);
              } catch (const std::exception&) {
                t.failed = true;
                t.error = std::numeric_limits<double>::infinity();
              }
              if (!have_best || t.error < r.best_error) {
                have_best = true;
                r.best_error = t.error;
                r.best = t.params;
                r.best_index = index;
              }
              r.trials.push_back(t);
              ++index;
            }
  return r;
}

}  // namespace icep
