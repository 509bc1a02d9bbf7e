#include "icep/lr_scheduler.hpp"

#include <cmath>
#include <stdexcept>

namespace icep {

void LrHyper::validate() const {
  if (!(lr_base > 0.0)) throw std::invalid_argument("lr hyper: lr_base must be > 0");
  if (!(delta > 0.0) || !(delta < lr_base))
    throw std::invalid_argument("lr hyper: delta must be in (0, lr_base)");
  if (!(p > 0.0) || !(p <= 0.5)) throw std::invalid_argument("lr hyper: p must be in (0, 0.5]");
  if (!(beta > 0.0)) throw std::invalid_argument("lr hyper: beta must be > 0");
}

InnerKind parse_inner_kind(const std::string& name) {
  if (name == "constant") return InnerKind::constant;
  if (name == "cosine" || name == "cosine_decay") return InnerKind::cosine_decay;
  throw std::invalid_argument("unknown inner schedule: " + name);
}

double max_lr(double alpha, const LrHyper& h) {
  h.validate();
  if (!(alpha >= 0.0) || !(alpha <= 1.0))
    throw std::invalid_argument("max_lr: alpha must be in [0,1]");
  const double denom = 2.0 * (1.0 - h.p) - alpha;
  if (denom <= 0.0) return h.lr_base;  // only reachable at p=0.5, alpha=1
  return h.lr_base - h.delta / (1.0 + std::pow(alpha / denom, h.beta));
}

double epoch_lr(int step, double lr_max, const InnerSchedule& s) {
  if (s.steps_per_epoch < 1)
    throw std::invalid_argument("inner schedule: steps_per_epoch must be >= 1");
  if (step < 0 || step >= s.steps_per_epoch)
    throw std::invalid_argument("inner schedule: step out of range");
  switch (s.kind) {
    case InnerKind::constant: return lr_max;
    case InnerKind::cosine_decay:
      return lr_max *
             (1.0 + std::cos(M_PI * static_cast<double>(step) /
                             static_cast<double>(s.steps_per_epoch))) /
             2.0;
  }
  throw std::logic_error("unreachable");
}

}  // namespace icep
