#pragma once

#include "thermoray/coefficients.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace thermoray {

/// Knobs shared by the built-in problems. Unused fields are ignored by a preset.
struct PresetParams {
  std::optional<Box> domain;
  int b_exponent = 2;          ///< b(s) = s^p, p even and >= 2
  int dim = 2;                 ///< elliptic_iso only
  double diffusivity = 1.0;    ///< elliptic_iso: B = kappa I
  std::optional<Vec> gamma;    ///< elliptic_iso: constant coupling vector (default 0)
  std::optional<Box> patch;    ///< zero_patch: sub-box where B vanishes
};

/// Built-in problems:
///  - example21:     B = diag(b(x1), 1), gamma = e2      (weakly degenerate)
///  - example22:     B = diag(b(x2), 1), gamma = e1      (Lambda invariant under distorted rays)
///  - elliptic_iso:  B = kappa I, gamma constant
///  - zero_patch:    B = beta(x) I with beta = 0 on a sub-box, non-constant gamma
///  - total_damping: B = diag(b(x1), 1), gamma = e1
CoefficientModel make_preset(std::string_view name, const PresetParams& params = {});

const std::vector<std::string>& preset_names();

}  // namespace thermoray
