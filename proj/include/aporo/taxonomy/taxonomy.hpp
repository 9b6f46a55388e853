#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace aporo::taxonomy {

enum class SpeechType { Direct, Reporting };

/// Severity-ordered degrees of prejudiced action.
enum class DegreeOfAction { Antilocution, AvoidanceFear, Discrimination, PhysicalAttack, Extermination };

enum class Aggravator { Racism, Xenophobia, Sexism, Other };

inline constexpr SpeechType kAllSpeechTypes[] = {SpeechType::Direct, SpeechType::Reporting};
inline constexpr DegreeOfAction kAllDegrees[] = {DegreeOfAction::Antilocution, DegreeOfAction::AvoidanceFear,
                                                 DegreeOfAction::Discrimination, DegreeOfAction::PhysicalAttack,
                                                 DegreeOfAction::Extermination};

std::string_view to_string(SpeechType v);
std::string_view to_string(DegreeOfAction v);
std::string_view to_string(Aggravator v);
std::optional<SpeechType> speech_type_from_string(std::string_view s);
std::optional<DegreeOfAction> degree_from_string(std::string_view s);
std::optional<Aggravator> aggravator_from_string(std::string_view s);

/// Direct speech is limited to the two mildest degrees.
bool degree_allowed(SpeechType speech, DegreeOfAction degree);

struct FineCategory {
  std::string id;
  DegreeOfAction degree = DegreeOfAction::Antilocution;
  std::string description;

  friend bool operator==(const FineCategory&, const FineCategory&) = default;
};

class Catalog {
 public:
  /// Reads "id<TAB>degree<TAB>description" rows after a header line.
  /// Duplicate ids are an error; an empty file gives an empty catalog and a
  /// warning.
  static Catalog load(const std::string& path, std::vector<std::string>* warnings = nullptr);
  /// Writes rows ordered by degree, then id.
  void save(const std::string& path) const;
  std::string serialize() const;

  void add(FineCategory category);
  const FineCategory* find(std::string_view id) const;
  const std::vector<FineCategory>& categories() const { return categories_; }
  std::size_t size() const { return categories_.size(); }

 private:
  std::vector<FineCategory> categories_;
};

struct TaxonomyAssignment {
  std::string item_id;
  SpeechType speech_type = SpeechType::Direct;
  DegreeOfAction degree = DegreeOfAction::Antilocution;
  std::set<std::string> categories;
  std::set<Aggravator> aggravators;
};

/// Every violated invariant, empty when the assignment is valid.
std::vector<std::string> validate_assignment(const TaxonomyAssignment& a, const Catalog& catalog);

}  // namespace aporo::taxonomy
