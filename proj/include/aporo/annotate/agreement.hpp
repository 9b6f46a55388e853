#pragma once

#include <array>
#include <span>

#include <nlohmann/json.hpp>

#include "aporo/common/label.hpp"

namespace aporo::annotate {

using Confusion = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;

/// (p_o - p_e) / (1 - p_e); when p_e == 1 the result is 1 if p_o == 1, else 0.
double cohen_kappa(const Confusion& confusion);

struct AgreementStats {
  std::size_t n = 0;
  double percent_agreement = 0.0;
  double kappa = 0.0;
  /// Rows: first annotator, columns: second.
  Confusion confusion{};

  nlohmann::json to_json() const;
};

/// Throws ContractViolation on empty or mismatched input.
AgreementStats agreement_stats(std::span<const Label> first, std::span<const Label> second);
AgreementStats agreement_stats(const Confusion& confusion);

}  // namespace aporo::annotate
