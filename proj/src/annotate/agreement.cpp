#include "aporo/annotate/agreement.hpp"

#include "aporo/common/error.hpp"

namespace aporo::annotate {

// Integer form (n * diag - sum rows*cols) / (n^2 - sum rows*cols) keeps the
// result exact up to the final division.
double cohen_kappa(const Confusion& c) {
  unsigned long long n = 0, diag = 0;
  std::array<unsigned long long, kNumLabels> rows{}, cols{};
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      n += c[i][j];
      rows[i] += c[i][j];
      cols[j] += c[i][j];
      if (i == j) diag += c[i][j];
    }
  }
  if (n == 0) throw ContractViolation("kappa of an empty confusion matrix");
  unsigned long long chance = 0;
  for (std::size_t k = 0; k < kNumLabels; ++k) chance += rows[k] * cols[k];
  const auto nn = n * n;
  if (chance == nn) return diag == n ? 1.0 : 0.0;
  const auto num = static_cast<long double>(n * diag) - static_cast<long double>(chance);
  return static_cast<double>(num / static_cast<long double>(nn - chance));
}

AgreementStats agreement_stats(const Confusion& confusion) {
  AgreementStats s;
  s.confusion = confusion;
  std::size_t diag = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    for (std::size_t j = 0; j < kNumLabels; ++j) s.n += confusion[i][j];
    diag += confusion[i][i];
  }
  if (s.n == 0) throw ContractViolation("no overlapping labelled items");
  s.percent_agreement = static_cast<double>(diag) / static_cast<double>(s.n);
  s.kappa = cohen_kappa(confusion);
  return s;
}

AgreementStats agreement_stats(std::span<const Label> first, std::span<const Label> second) {
  if (first.size() != second.size()) throw ContractViolation("annotator label vectors differ in length");
  Confusion c{};
  for (std::size_t i = 0; i < first.size(); ++i) ++c[index_of(first[i])][index_of(second[i])];
  return agreement_stats(c);
}

nlohmann::json AgreementStats::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& row : confusion) m.push_back(row);
  nlohmann::json labels = nlohmann::json::array();
  for (Label l : kAllLabels) labels.push_back(std::string(to_string(l)));
  return {{"n", n}, {"percent_agreement", percent_agreement}, {"kappa", kappa}, {"labels", labels}, {"confusion", m}};
}

}  // namespace aporo::annotate
