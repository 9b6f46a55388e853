#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aporo/bench/adapters.hpp"
#include "aporo/bench/split.hpp"
#include "aporo/data/dataset.hpp"

namespace aporo::bench {

inline const std::vector<std::uint64_t> kDefaultSeeds = {42, 62, 82};

/// One scored item. Labels are class names of the run's label space.
struct Prediction {
  std::string id;
  std::string gold;
  std::string pred;
  std::uint64_t seed = 0;
  bool parse_failure = false;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Model input: user mentions and URLs removed.
std::string preprocess_for_model(std::string_view text);

struct TrainRunOptions {
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  /// Trained models are saved under <artifact_dir>/<adapter>-seed<S> when set.
  std::string artifact_dir;
  /// Restrict training rows to these regions (empty keeps all).
  std::vector<Region> train_regions;
};

/// One prediction vector per seed over split.test_ids, in that order.
std::vector<std::vector<Prediction>> train_and_predict(const FinetuneAdapter& adapter,
                                                       const std::vector<data::DatasetRow>& rows,
                                                       const DatasetSplit& split, const TrainRunOptions& options = {});

/// Ternary runs score parse failures as None; binary runs compare against
/// the collapsed gold and score failures as NonToxic.
std::vector<Prediction> prompt_eval(const GenerativeAdapter& adapter, const PromptSpec& spec,
                                    const std::vector<data::DatasetRow>& rows, const std::vector<std::string>& ids,
                                    std::uint64_t seed, bool binary = false);

/// Columns: id, gold, pred, seed, parse_flag.
void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::string& path);

}  // namespace aporo::bench
