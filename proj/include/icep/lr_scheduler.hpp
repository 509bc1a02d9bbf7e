#pragma once

#include <string>

namespace icep {

struct LrHyper {
  double lr_base = 1e-3;  // > 0; max LR for the unpruned model
  double delta = 5e-4;    // in (0, lr_base); largest LR reduction
  double p = 0.35;        // in (0, 0.5]; pruning level getting delta/2
  double beta = 2.0;      // > 0; transition sharpness

  void validate() const;
};

enum class InnerKind { constant, cosine_decay };

InnerKind parse_inner_kind(const std::string& name);

struct InnerSchedule {
  InnerKind kind = InnerKind::constant;
  int steps_per_epoch = 1;
};

/// Pruning-aware LR cap:
///   lr_base - delta / (1 + (alpha / (2(1-p) - alpha))^beta).
/// alpha is the unmasked-parameter fraction. At alpha=0 this is
/// lr_base - delta; rising alpha never lowers it; alpha = 1-p gives
/// exactly lr_base - delta/2; the singular point (p=0.5, alpha=1) returns
/// lr_base by limit continuity.
double max_lr(double alpha, const LrHyper& h);

/// Per-step LR within one fine-tune epoch, capped by lr_max: constant holds
/// lr_max; cosine_decay gives lr_max*(1+cos(pi*step/steps))/2.
double epoch_lr(int step, double lr_max, const InnerSchedule& s);

}  // namespace icep
