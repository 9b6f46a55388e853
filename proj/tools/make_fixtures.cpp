// Generates the synthetic data shipped under data/: a DRAX-shaped
// reconstruction with the published class, region and split counts, and the
// 500-post end-to-end fixture with its annotation decisions and config.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "aporo/common/csv.hpp"
#include "aporo/common/label.hpp"
#include "aporo/common/region.hpp"
#include "aporo/common/time.hpp"
#include "aporo/sample/sampler.hpp"
#include "aporo/topics/topic_model.hpp"

namespace fs = std::filesystem;
using namespace aporo;

namespace {

using Rng = std::mt19937_64;

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

const std::vector<std::string> kGroups = {"the poor",          "poor people",      "homeless people", "welfare recipients",
                                          "low-income families", "people on welfare", "the homeless",   "poor folks"};

const std::array<std::vector<std::string>, kNumLabels> kClauses = {{
    {"{g} are a plague on this city and should be moved out", "honestly {g} are lazy and just want handouts",
     "I avoid {g} at all costs, they scare me", "get {g} off our streets already", "{g} ruin everything they touch",
     "sick of paying for {g} who never work", "{g} are all addicts and thieves", "don't let {g} near the kids"},
    {"shameful how people treat {g} like criminals", "stop blaming {g} for every problem",
     "the council keeps punishing {g} instead of helping", "it is not true that {g} are lazy",
     "police harassed {g} again last night, disgraceful", "so many comments calling {g} worthless, it's sad",
     "the minister mocked {g} on live tv", "why do people assume {g} are dangerous"},
    {"local charity supports {g} with meals", "new figures show rents rising for {g}",
     "volunteers collected coats for {g}", "a clinic opened offering free care for {g}",
     "the city funded job training for {g}", "report on heating costs for {g} out today",
     "students raised money for {g} this week", "library hosts free classes for {g}"},
}};

// Each topic draws its opening words from its own vocabulary.
const std::vector<std::vector<std::string>> kTopicWords = {
    {"shelter", "housing", "rent", "eviction", "landlord", "tenants", "waitlist", "tents", "winter", "beds"},
    {"benefits", "welfare", "payments", "cheque", "budget", "sanctions", "credit", "allowance", "claimants", "cuts"},
    {"drugs", "addiction", "overdose", "needles", "rehab", "fentanyl", "crack", "treatment", "dealers", "clinic"},
    {"refugees", "immigrants", "asylum", "border", "migrants", "visas", "deportation", "hotels", "arrivals", "camps"},
    {"crime", "theft", "shoplifting", "robbery", "police", "stolen", "burglary", "arrests", "cctv", "looting"},
    {"subway", "station", "begging", "commuters", "panhandling", "platform", "train", "transit", "fares", "tracks"},
};

const std::vector<std::string> kTopicFrames = {"{0} {1} {2} and {3} again today.", "More {0}, {1} and {2} news: {3} {4}.",
                                               "Talking {0} {1} {2} {3} on the radio.", "{0} and {1}, then {2} {3} {4}."};

std::string topic_sentence(Rng& rng, std::size_t topic) {
  auto words = kTopicWords[topic];
  std::shuffle(words.begin(), words.end(), rng);
  std::string out = pick(rng, kTopicFrames);
  for (char slot = '0'; slot <= '4'; ++slot) {
    const std::string token = std::string("{") + slot + "}";
    const auto pos = out.find(token);
    if (pos != std::string::npos) out.replace(pos, token.size(), words[static_cast<std::size_t>(slot - '0')]);
  }
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

struct Country {
  std::string name;
  Region region;
  std::array<std::size_t, kNumLabels> counts;
  std::vector<std::string> locations;
};

// Per-country class counts of the released corpus.
const std::vector<Country> kCountries = {
    {"Ghana", Region::Africa, {4, 6, 2}, {"Accra, Ghana", "Accra", "Ghana"}},
    {"Kenya", Region::Africa, {7, 22, 11}, {"Nairobi", "Nairobi, Kenya", "Kenya"}},
    {"Nigeria", Region::Africa, {17, 26, 27}, {"Lagos, Nigeria", "Lagos", "Nigeria"}},
    {"South Africa", Region::Africa, {34, 50, 47}, {"Johannesburg", "Cape Town, South Africa", "South Africa"}},
    {"Uganda", Region::Africa, {4, 5, 6}, {"Kampala", "Kampala, Uganda"}},
    {"France", Region::Europe, {1, 1, 3}, {"Paris, France", "France"}},
    {"Germany", Region::Europe, {3, 3, 0}, {"Germany", "Deutschland"}},
    {"Ireland", Region::Europe, {9, 17, 6}, {"Dublin", "Ireland"}},
    {"United Kingdom", Region::Europe, {86, 138, 94}, {"London", "Manchester, England", "Glasgow", "UK"}},
    {"Canada", Region::NorthAmerica, {5, 16, 8}, {"Toronto", "Vancouver", "Canada"}},
    {"United States", Region::NorthAmerica, {124, 120, 104}, {"Chicago", "Austin, TX", "New York", "USA"}},
    {"Australia", Region::Oceania, {49, 68, 63}, {"Sydney", "Melbourne, Australia", "Australia"}},
    {"New Zealand", Region::Oceania, {9, 21, 19}, {"Auckland", "New Zealand"}},
    {"India", Region::SouthAsia, {28, 56, 50}, {"Mumbai", "Delhi, India", "India"}},
    {"Pakistan", Region::SouthAsia, {5, 28, 17}, {"Karachi", "Lahore", "Pakistan"}},
    {"Philippines", Region::SouthAsia, {3, 10, 5}, {"Manila", "Cebu", "Philippines"}},
    {"", Region::Other, {132, 136, 111}, {"", "somewhere on Earth", "Dubai, UAE", "the internet", "she/her"}},
};

// Train and test class counts of the chronological split.
constexpr std::array<std::size_t, kNumLabels> kTrainCounts = {347, 494, 389};

std::string fill(const std::string& clause, const std::string& group) {
  std::string out = clause;
  const auto pos = out.find("{g}");
  if (pos != std::string::npos) out.replace(pos, 3, group);
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

/// Topic sentence plus a clause whose wording follows `label` most of the time.
std::string make_text(Rng& rng, Label label, std::size_t topic, double clause_noise) {
  Label voiced = label;
  if (chance(rng, clause_noise)) voiced = kAllLabels[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
  const auto sentence = topic_sentence(rng, topic) + " " + topic_sentence(rng, topic);
  const auto clause = fill(pick(rng, kClauses[index_of(voiced)]), pick(rng, kGroups));
  return chance(rng, 0.5) ? sentence + " " + clause + "." : clause + ". " + sentence;
}

Timestamp uniform_time(Rng& rng, Timestamp lo, Timestamp hi) {
  const auto span = (hi - lo).count();
  return lo + std::chrono::seconds(std::uniform_int_distribution<long long>(0, span - 1)(rng));
}

constexpr Timestamp day(int y, unsigned m, unsigned d) {
  return Timestamp{std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}};
}

void write_drax(const fs::path& path, std::uint64_t seed) {
  Rng rng(seed);
  struct Row {
    Label label;
    Region region;
    std::string country;
    std::string location;
  };
  std::vector<Row> rows;
  for (const auto& c : kCountries) {
    for (Label l : kAllLabels) {
      for (std::size_t i = 0; i < c.counts[index_of(l)]; ++i) rows.push_back({l, c.region, c.name, pick(rng, c.locations)});
    }
  }
  std::shuffle(rows.begin(), rows.end(), rng);

  // The first kTrainCounts[c] rows of each class fall before the reference cut.
  std::array<std::size_t, kNumLabels> seen{};
  const Timestamp start = day(2022, 8, 25), cut = day(2022, 10, 24), last_train = day(2022, 10, 23),
                  end = day(2022, 11, 23);
  std::ofstream out(path, std::ios::binary);
  csv::write_row(out, {"id", "text", "label", "region", "country", "user_location", "created_at", "topic_id", "month"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const bool train = seen[index_of(r.label)]++ < kTrainCounts[index_of(r.label)];
    const auto ts = train ? uniform_time(rng, start, last_train) : uniform_time(rng, cut, end);
    const int topic_index = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, topics::kReferenceTopicIds.size() - 1)(rng));
    const int topic_id = topics::kReferenceTopicIds[static_cast<std::size_t>(topic_index)];
    const auto text = make_text(rng, r.label, static_cast<std::size_t>(topic_index) % kTopicWords.size(), 0.45);
    csv::write_row(out, {fmt::format("drax-{:05d}", i + 1), text, std::string(to_string(r.label)),
                         std::string(to_string(r.region)), r.country, r.location, format_timestamp(ts),
                         std::to_string(topic_id), std::to_string(*sample::collection_month(ts))});
  }
}

struct FixtureLocation {
  std::string place;
  std::string user_location;
};

const std::vector<FixtureLocation> kFixtureLocations = {
    {"", "Lagos, Nigeria"}, {"", "Nairobi"},        {"South Africa", ""}, {"", "Kampala"},    {"", "London"},
    {"Ireland", ""},        {"", "Paris, France"},  {"", "Chicago"},      {"", "Austin, TX"}, {"Canada", ""},
    {"", "Sydney"},         {"", "Auckland"},       {"Australia", ""},    {"", "Mumbai"},     {"", "Karachi"},
    {"", "Manila"},         {"", ""},               {"", "somewhere on Earth"}, {"", "Dubai, UAE"}, {"", ""},
};

void write_fixture(const fs::path& dir, std::uint64_t seed) {
  Rng rng(seed);
  fs::create_directories(dir);
  std::ofstream posts(dir / "posts.jsonl", std::ios::binary);
  std::ofstream decisions(dir / "annotations.jsonl", std::ios::binary);
  const Timestamp start = day(2022, 8, 25), end = day(2022, 11, 23), early = day(2022, 8, 18);

  std::vector<std::string> clean_texts;
  for (int i = 1; i <= 500; ++i) {
    const std::string id = fmt::format("p{:04d}", i);
    const Label gold = kAllLabels[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
    const std::size_t topic = std::uniform_int_distribution<std::size_t>(0, kTopicWords.size() - 1)(rng);
    std::string text = make_text(rng, gold, topic, 0.2);
    const auto& loc = pick(rng, kFixtureLocations);
    std::string user_name = fmt::format("User {}", i);
    bool retweet = false;
    Timestamp ts = i % 60 == 0 ? uniform_time(rng, early, start) : uniform_time(rng, start, end);

    // Noise the filters are expected to remove.
    if (i % 25 == 0) {
      retweet = true;
      text = "RT @someone: " + text;
    } else if (i % 33 == 0 && !clean_texts.empty()) {
      text = "  " + pick(rng, clean_texts) + "  ";
      for (auto& ch : text) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    } else if (i % 31 == 0) {
      text += " https://t.co/abc" + std::to_string(i);
    } else if (i % 47 == 0) {
      text += " #poverty #housing #welfare #cost #crisis #news";
    } else if (i % 53 == 0) {
      user_name = "Daily News Bot";
    } else {
      clean_texts.push_back(text);
    }

    nlohmann::json post = {{"id", id},
                           {"text", text},
                           {"created_at", format_timestamp(ts)},
                           {"user_name", user_name},
                           {"screen_name", fmt::format("user{}", i)},
                           {"is_retweet", retweet}};
    post["place_country"] = loc.place.empty() ? nlohmann::json(nullptr) : nlohmann::json(loc.place);
    post["user_location"] = loc.user_location.empty() ? nlohmann::json(nullptr) : nlohmann::json(loc.user_location);
    posts << post.dump() << '\n';

    auto label_event = [&](const std::string& annotator, std::optional<Label> label, bool flag) {
      nlohmann::json e = {{"type", "label"}, {"item_id", id}, {"annotator", annotator},
                          {"submission_id", annotator + "-" + id}};
      e["label"] = label ? nlohmann::json(std::string(to_string(*label))) : nlohmann::json(nullptr);
      if (flag) e["insufficient_context"] = true;
      decisions << e.dump() << '\n';
    };
    label_event("a1", gold, false);
    const bool flagged = chance(rng, 0.03);
    const bool disagree = !flagged && chance(rng, 0.25);
    if (flagged) {
      label_event("a2", std::nullopt, true);
    } else if (disagree) {
      label_event("a2", kAllLabels[(index_of(gold) + 1 + (chance(rng, 0.5) ? 1 : 0)) % kNumLabels], false);
    } else {
      label_event("a2", gold, false);
    }
    if (flagged || disagree) {
      const bool remove = flagged && chance(rng, 0.5);
      nlohmann::json e = {{"type", "adjudicate"},
                          {"item_id", id},
                          {"decision", remove ? std::string("remove") : std::string(to_string(gold))},
                          {"note", remove ? "needs the parent thread" : "resolved in discussion"}};
      decisions << e.dump() << '\n';
    }
  }

  std::ofstream(dir / "quotas.txt") << "# Posts drawn per topic; topic ids come from the clustering run.\ndefault 30\n";
  std::ofstream(dir / "selection.txt") << "# Keep every discovered topic.\n*\n";
  std::ofstream(dir / "bow-linear.ini") << "adapter_id = bow-linear\nkind = bow-linear\nbatch_size = 4\nepochs = 4\n"
                                           "optimizer = adam\nlearning_rate = 0.01\n";
  std::ofstream(dir / "lexicon.ini") << "adapter_id = lexicon\nkind = lexicon\n";
  std::ofstream(dir / "toxicity-lexicon.ini") << "adapter_id = toxicity-lexicon\nkind = lexicon\nlabel_space = binary\n";
  std::ofstream(dir / "pipeline.ini") << R"([ingest]
input = posts.jsonl
format = jsonl

[geo]
gazetteer = ../gazetteer.tsv

[topics]
min_cluster_size = 15
selection = selection.txt

[sample]
quotas = quotas.txt
seed = 17

[annotate]
mode = replay
annotations = annotations.jsonl
annotators = a1,a2
seed = 7
guidelines = ../guidelines.md
catalog = ../taxonomy_catalog.tsv

[bench]
cut = auto
adapter = bow-linear.ini
seeds = 42,62,82
prompt_specs = ../prompts/zeroshot.json, ../prompts/fewshot.json
generative = lexicon.ini
binary_adapters = toxicity-lexicon.ini
prompt_seed = 42

[eval]
min_support = 5
formats = markdown,csv
ablation_regions = NorthAmerica,Other
)";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate the synthetic data files"};
  std::string data_dir = "data";
  std::uint64_t seed = 20221124;
  app.add_option("--data-dir", data_dir, "data directory");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  write_drax(fs::path(data_dir) / "drax_reconstruction.csv", seed);
  write_fixture(fs::path(data_dir) / "fixture", seed + 1);
  std::cout << "wrote " << (fs::path(data_dir) / "drax_reconstruction.csv").string() << " and "
            << (fs::path(data_dir) / "fixture").string() << "/\n";
  return 0;
}
