#include "aporo/taxonomy/taxonomy.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/text.hpp"

namespace aporo::taxonomy {

namespace {

constexpr std::array<std::string_view, 2> kSpeechNames{"Direct", "Reporting"};
constexpr std::array<std::string_view, 5> kDegreeNames{"Antilocution", "AvoidanceFear", "Discrimination",
                                                       "PhysicalAttack", "Extermination"};
constexpr std::array<std::string_view, 4> kAggravatorNames{"Racism", "Xenophobia", "Sexism", "Other"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  const std::string key = text::to_lower(text::trim(s));
  for (std::size_t i = 0; i < N; ++i) {
    if (text::to_lower(names[i]) == key) return static_cast<E>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(SpeechType v) { return kSpeechNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(DegreeOfAction v) { return kDegreeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(Aggravator v) { return kAggravatorNames[static_cast<std::size_t>(v)]; }
std::optional<SpeechType> speech_type_from_string(std::string_view s) { return lookup<SpeechType>(kSpeechNames, s); }
std::optional<DegreeOfAction> degree_from_string(std::string_view s) { return lookup<DegreeOfAction>(kDegreeNames, s); }
std::optional<Aggravator> aggravator_from_string(std::string_view s) { return lookup<Aggravator>(kAggravatorNames, s); }

bool degree_allowed(SpeechType speech, DegreeOfAction degree) {
  return speech == SpeechType::Reporting || degree == DegreeOfAction::Antilocution ||
         degree == DegreeOfAction::AvoidanceFear;
}

Catalog Catalog::load(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open catalog " + path);
  Catalog c;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (text::to_lower(line).starts_with("id\t")) continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 3) throw ParseError("expected id, degree and description", line_no);
    const auto degree = degree_from_string(fields[1]);
    if (!degree) throw ParseError("unknown degree '" + fields[1] + "'", line_no);
    if (c.find(fields[0])) throw ParseError("duplicate category id '" + fields[0] + "'", line_no);
    c.add({fields[0], *degree, fields[2]});
  }
  if (c.categories_.empty() && warnings) warnings->push_back("catalog " + path + " is empty");
  return c;
}

void Catalog::add(FineCategory category) {
  if (category.id.empty()) throw ContractViolation("category id is empty");
  if (find(category.id)) throw ContractViolation("duplicate category id '" + category.id + "'");
  categories_.push_back(std::move(category));
}

const FineCategory* Catalog::find(std::string_view id) const {
  for (const auto& c : categories_) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::string Catalog::serialize() const {
  std::vector<const FineCategory*> sorted;
  for (const auto& c : categories_) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](const FineCategory* a, const FineCategory* b) {
    return a->degree != b->degree ? a->degree < b->degree : a->id < b->id;
  });
  std::string out = "id\tdegree\tdescription\n";
  for (const auto* c : sorted) out += fmt::format("{}\t{}\t{}\n", c->id, to_string(c->degree), c->description);
  return out;
}

void Catalog::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize();
}

std::vector<std::string> validate_assignment(const TaxonomyAssignment& a, const Catalog& catalog) {
  std::vector<std::string> v;
  if (!degree_allowed(a.speech_type, a.degree)) {
    v.push_back(fmt::format("{} speech cannot carry degree {}", to_string(a.speech_type), to_string(a.degree)));
  }
  for (const auto& id : a.categories) {
    const FineCategory* c = catalog.find(id);
    if (!c) {
      v.push_back("unknown category '" + id + "'");
    } else if (c->degree != a.degree) {
      v.push_back(fmt::format("category '{}' belongs to {}, not {}", id, to_string(c->degree), to_string(a.degree)));
    }
  }
  return v;
}

}  // namespace aporo::taxonomy
