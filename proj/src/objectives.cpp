#include "itvreg/objectives.hpp"

namespace itvreg {

std::string to_string(RegKind kind) {
  switch (kind) {
    case RegKind::None: return "none";
    case RegKind::OutReg: return "outreg";
    case RegKind::ItvReg: return "itvreg";
    case RegKind::ItvAug: return "itvaug";
    case RegKind::MaskReg: return "maskreg";
    case RegKind::SimCse: return "simcse";
  }
  return "unknown";
}

RegKind parse_reg_kind(std::string_view name) {
  for (auto k : {RegKind::None, RegKind::OutReg, RegKind::ItvReg, RegKind::ItvAug, RegKind::MaskReg, RegKind::SimCse})
    if (to_string(k) == name) return k;
  throw Error("unknown regularizer '" + std::string(name) + "' (none|outreg|itvreg|itvaug|maskreg|simcse)");
}

std::string to_string(LossKind kind) { return kind == LossKind::Contrastive ? "contrastive" : "mse"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "contrastive") return LossKind::Contrastive;
  if (name == "mse") return LossKind::Mse;
  throw Error("unknown loss '" + std::string(name) + "' (contrastive|mse)");
}

void RegularizerConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be a finite value >= 0");
  const double mf = effective_mask_fraction();
  if (!(mf > 0.0 && mf <= 1.0)) throw Error("mask fraction must lie in (0,1]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout rate must lie in [0,1)");
  if (!(itvaug_fraction >= 0.0 && itvaug_fraction <= 1.0)) throw Error("itvaug fraction must lie in [0,1]");
  if (interventions_per_example < 1) throw Error("interventions per example must be >= 1");
}

}  // namespace itvreg
