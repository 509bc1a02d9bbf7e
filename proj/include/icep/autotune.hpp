#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "icep/lr_scheduler.hpp"

namespace icep {

struct HyperParams {
  double theta = 0.02;  // accuracy-drop gate in fractional accuracy units;
                        // +inf = never fine-tune, -inf = always fine-tune
  double eta = 0.25;    // frozen fraction of parameterized layers, [0,1)
  LrHyper lr;

  void validate() const;
};

/// Grid axes, iterated theta, eta, lr_base, delta, p, beta with beta
/// fastest. Values are kept sorted ascending.
struct SearchSpace {
  std::vector<double> theta{0.01, 0.02, 0.05};
  std::vector<double> eta{0.0, 0.25, 0.5};
  std::vector<double> lr_base{1e-3};
  std::vector<double> delta{0.25e-3, 0.5e-3, 0.75e-3};
  std::vector<double> p{0.2, 0.35, 0.5};
  std::vector<double> beta{1.0, 2.0, 4.0};

  size_t size() const;
  void validate() const;
};

/// Text file, one "key=v1,v2,..." line per axis; keys as in SearchSpace.
/// Axes absent from the file keep their defaults.
SearchSpace load_search_space(const std::string& path);

struct Trial {
  HyperParams params;
  double pt_seconds = 0.0;
  double delta_a = 0.0;
  double error = 0.0;
  bool failed = false;
};

struct TuneResult {
  HyperParams best;
  double best_error = 0.0;
  size_t best_index = 0;
  std::vector<Trial> trials;
};

/// (PT + max(delta_a, 1e-6)) / max(PT, max(delta_a, 1e-6)). Smaller is
/// better; equals 2 when the two terms tie. The clamp keeps accuracy gains
/// (delta_a <= 0) from rewarding slow runs.
double objective(double pt_seconds, double delta_a);

/// Evaluates one grid point: runs a pipeline and returns (PT seconds,
/// accuracy drop). The index identifies the point for seeding.
using EvalFn = std::function<std::pair<double, double>(const HyperParams&, size_t index)>;

/// Exhaustive sweep in axis order; a throwing eval records the point with
/// e = +inf and the sweep continues. Ties keep the earliest trial.
TuneResult grid_search(const SearchSpace& space, const EvalFn& eval);

}  // namespace icep
