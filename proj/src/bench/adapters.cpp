#include "aporo/bench/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "aporo/common/csv.hpp"
#include "aporo/common/error.hpp"
#include "aporo/common/hash.hpp"
#include "aporo/common/text.hpp"

namespace aporo::bench {

nlohmann::json AdapterConfig::to_json() const {
  return {{"adapter_id", adapter_id},   {"kind", kind},
          {"backbone", backbone},       {"batch_size", batch_size},
          {"epochs", epochs},           {"optimizer", optimizer},
          {"learning_rate", learning_rate}, {"feature_dim", feature_dim},
          {"command", command},         {"endpoint", endpoint},
          {"model", model},             {"api_key_env", api_key_env},
          {"max_parallel", max_parallel}, {"max_retries", max_retries},
          {"timeout_seconds", timeout_seconds}, {"label_space", label_space}};
}

AdapterConfig load_adapter_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw MissingInput("cannot open adapter config " + path);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  AdapterConfig c;
  for (const auto& [key, node] : tree) {
    const std::string v = node.data();
    try {
      if (key == "adapter_id") c.adapter_id = v;
      else if (key == "kind") c.kind = v;
      else if (key == "backbone") c.backbone = v;
      else if (key == "batch_size") c.batch_size = std::stoul(v);
      else if (key == "epochs") c.epochs = std::stoul(v);
      else if (key == "optimizer") c.optimizer = v;
      else if (key == "learning_rate") c.learning_rate = std::stod(v);
      else if (key == "feature_dim") c.feature_dim = std::stoul(v);
      else if (key == "command") c.command = v;
      else if (key == "endpoint") c.endpoint = v;
      else if (key == "model") c.model = v;
      else if (key == "api_key_env") c.api_key_env = v;
      else if (key == "max_parallel") c.max_parallel = std::stoul(v);
      else if (key == "max_retries") c.max_retries = std::stoul(v);
      else if (key == "timeout_seconds") c.timeout_seconds = std::stod(v);
      else if (key == "label_space") c.label_space = v;
      else throw ParseError("unknown adapter key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ParseError("bad value for '" + key + "': " + v);
    }
  }
  if (c.label_space != "ternary" && c.label_space != "binary") throw ParseError("label_space must be ternary or binary");
  return c;
}

bool is_finetune_kind(const std::string& kind) { return kind == "bow-linear" || kind == "external"; }

// ---------------------------------------------------------------------------
// bow-linear

namespace {

using SparseVec = std::vector<std::pair<std::uint32_t, float>>;

SparseVec featurize(std::string_view text, std::size_t dim) {
  const auto tokens = text::word_tokens(text, 1);
  std::unordered_map<std::uint32_t, float> acc;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    acc[static_cast<std::uint32_t>(fnv1a64("u:" + tokens[i]) % dim)] += 1.0f;
    if (i + 1 < tokens.size()) {
      acc[static_cast<std::uint32_t>(fnv1a64("b:" + tokens[i] + " " + tokens[i + 1]) % dim)] += 1.0f;
    }
  }
  SparseVec v(acc.begin(), acc.end());
  std::sort(v.begin(), v.end());
  double norm = 0.0;
  for (const auto& [i, x] : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (auto& [i, x] : v) x = static_cast<float>(x / norm);
  }
  return v;
}

class BowLinearModel final : public TrainedModel {
 public:
  BowLinearModel(std::size_t dim, std::vector<double> w, std::vector<double> b)
      : dim_(dim), w_(std::move(w)), b_(std::move(b)) {}

  std::array<double, kNumLabels> logits(const SparseVec& x) const {
    std::array<double, kNumLabels> z{};
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      z[c] = b_[c];
      for (const auto& [i, v] : x) z[c] += w_[c * dim_ + i] * v;
    }
    return z;
  }

  std::vector<Label> predict(std::span<const std::string> texts) const override {
    std::vector<Label> out;
    for (const auto& t : texts) {
      const auto z = logits(featurize(t, dim_));
      out.push_back(kAllLabels[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())]);
    }
    return out;
  }

  void save(const std::string& dir) const override {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / "bow_linear.json");
    if (!out) throw Error("cannot write model to " + dir);
    out << nlohmann::json{{"dim", dim_}, {"bias", b_}, {"weights", w_}}.dump() << '\n';
  }

 private:
  std::size_t dim_;
  std::vector<double> w_;
  std::vector<double> b_;
};

}  // namespace

std::unique_ptr<TrainedModel> BowLinearAdapter::train(std::span<const TrainExample> examples, std::uint64_t seed) const {
  if (examples.empty()) throw ContractViolation("no training examples");
  if (config_.optimizer != "adam") throw ContractViolation("bow-linear supports only the adam optimizer");
  const std::size_t dim = config_.feature_dim;
  const std::size_t n_params = kNumLabels * dim + kNumLabels;
  std::vector<SparseVec> xs;
  xs.reserve(examples.size());
  for (const auto& e : examples) xs.push_back(featurize(e.text, dim));

  std::vector<double> theta(n_params, 0.0), m(n_params, 0.0), v(n_params, 0.0), grad(n_params, 0.0);
  const double lr = config_.learning_rate, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::size_t> order(examples.size());
  const std::size_t batch = std::max<std::size_t>(1, config_.batch_size);
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::uint64_t epoch_seed = hash_combine(seed, epoch);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto ka = keyed_hash(epoch_seed, examples[a].id), kb = keyed_hash(epoch_seed, examples[b].id);
      return ka != kb ? ka < kb : a < b;
    });
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = xs[order[k]];
        std::array<double, kNumLabels> z{};
        for (std::size_t c = 0; c < kNumLabels; ++c) {
          z[c] = theta[kNumLabels * dim + c];
          for (const auto& [i, val] : x) z[c] += theta[c * dim + i] * val;
        }
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& zc : z) sum += (zc = std::exp(zc - mx));
        const std::size_t y = index_of(examples[order[k]].label);
        const double scale = 1.0 / static_cast<double>(end - start);
        for (std::size_t c = 0; c < kNumLabels; ++c) {
          const double g = (z[c] / sum - (c == y ? 1.0 : 0.0)) * scale;
          grad[kNumLabels * dim + c] += g;
          for (const auto& [i, val] : x) grad[c * dim + i] += g * val;
        }
      }
      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < n_params; ++p) {
        m[p] = beta1 * m[p] + (1 - beta1) * grad[p];
        v[p] = beta2 * v[p] + (1 - beta2) * grad[p] * grad[p];
        theta[p] -= lr * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + eps);
      }
    }
  }
  std::vector<double> b(kNumLabels);
  for (std::size_t c = 0; c < kNumLabels; ++c) b[c] = theta[kNumLabels * dim + c];
  theta.resize(kNumLabels * dim);
  return std::make_unique<BowLinearModel>(dim, std::move(theta), std::move(b));
}

// ---------------------------------------------------------------------------
// external

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void run_command(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw Error(fmt::format("external adapter command failed ({}): {}", rc, cmd));
}

std::string resolve_command(const AdapterConfig& c) {
  if (!c.command.empty()) return c.command;
  if (const char* env = std::getenv("APORO_FINETUNE_CMD"); env && *env) return env;
  throw Error("external adapter has no command (set 'command' or APORO_FINETUNE_CMD)");
}

class ExternalModel final : public TrainedModel {
 public:
  ExternalModel(std::string command, std::filesystem::path model_dir)
      : command_(std::move(command)), model_dir_(std::move(model_dir)) {}

  std::vector<Label> predict(std::span<const std::string> texts) const override {
    const auto input = model_dir_ / "predict_input.csv";
    const auto output = model_dir_ / "predict_output.txt";
    {
      std::ofstream out(input, std::ios::binary);
      csv::write_row(out, {"id", "text"});
      for (std::size_t i = 0; i < texts.size(); ++i) csv::write_row(out, {std::to_string(i), texts[i]});
    }
    run_command(fmt::format("{} predict --model-dir {} --input {} --output {}", command_, shell_quote(model_dir_.string()),
                            shell_quote(input.string()), shell_quote(output.string())));
    std::ifstream in(output);
    std::vector<Label> labels;
    for (std::string line; std::getline(in, line);) {
      if (text::trim(line).empty()) continue;
      const auto l = label_from_string(text::trim(line));
      if (!l) throw Error("external adapter returned unknown label '" + line + "'");
      labels.push_back(*l);
    }
    if (labels.size() != texts.size()) {
      throw Error(fmt::format("external adapter returned {} labels for {} texts", labels.size(), texts.size()));
    }
    return labels;
  }

  void save(const std::string& dir) const override {
    if (std::filesystem::path(dir) == model_dir_) return;
    std::filesystem::copy(model_dir_, dir,
                          std::filesystem::copy_options::recursive | std::filesystem::copy_options::overwrite_existing);
  }

 private:
  std::string command_;
  std::filesystem::path model_dir_;
};

}  // namespace

ExternalAdapter::ExternalAdapter(AdapterConfig config, std::string work_dir)
    : config_(std::move(config)), work_dir_(std::move(work_dir)) {}

std::unique_ptr<TrainedModel> ExternalAdapter::train(std::span<const TrainExample> examples, std::uint64_t seed) const {
  const std::string command = resolve_command(config_);
  const auto dir = std::filesystem::path(work_dir_) / fmt::format("{}-seed{}", config_.adapter_id, seed);
  std::filesystem::create_directories(dir);
  const auto train_csv = dir / "train.csv";
  {
    std::ofstream out(train_csv, std::ios::binary);
    csv::write_row(out, {"id", "text", "label"});
    for (const auto& e : examples) csv::write_row(out, {e.id, e.text, std::string(to_string(e.label))});
  }
  std::string cmd = fmt::format("{} train --train {} --model-dir {} --seed {} --batch-size {} --epochs {}", command,
                                shell_quote(train_csv.string()), shell_quote(dir.string()), seed, config_.batch_size,
                                config_.epochs);
  if (!config_.backbone.empty()) cmd += " --backbone " + shell_quote(config_.backbone);
  if (config_.learning_rate > 0) cmd += fmt::format(" --learning-rate {}", config_.learning_rate);
  run_command(cmd);
  return std::make_unique<ExternalModel>(command, dir);
}

std::unique_ptr<FinetuneAdapter> make_finetune_adapter(const AdapterConfig& config, const std::string& work_dir) {
  if (config.kind == "bow-linear") return std::make_unique<BowLinearAdapter>(config);
  if (config.kind == "external") return std::make_unique<ExternalAdapter>(config, work_dir);
  throw ContractViolation("'" + config.kind + "' is not a fine-tuning adapter kind");
}

// ---------------------------------------------------------------------------
// lexicon

std::vector<std::string> LexiconAdapter::generate(const std::vector<PromptRequest>& prompts, const Decoding&,
                                                  std::uint64_t) const {
  static const std::vector<std::string> direct_cues = {
      "lazy", "junkie", "addicts", "scum", "disgusting", "get rid", "dirty", "filthy", "parasite", "leech",
      "invasion", "work camps", "stink", "smell", "dangerous", "scary", "keep them out", "deserve to be"};
  static const std::vector<std::string> reporting_cues = {
      "blame", "criminaliz", "unfair", "discriminat", "stereotyp", "prison is for", "target", "punish",
      "stigma", "wrong to", "racist", "they treat", "law is meant", "oppress"};
  std::vector<std::string> out;
  for (const auto& p : prompts) {
    const std::string t = text::to_lower(p.tweet);
    auto hits = [&](const std::vector<std::string>& cues) {
      return std::count_if(cues.begin(), cues.end(), [&](const std::string& c) { return t.find(c) != std::string::npos; });
    };
    const auto d = hits(direct_cues), r = hits(reporting_cues);
    if (config_.label_space == "binary") {
      out.emplace_back(d > 0 && d >= r ? "Toxic" : "Non-toxic");
    } else if (d == 0 && r == 0) {
      out.emplace_back("None");
    } else {
      out.emplace_back(d >= r ? "Direct." : "Reporting");
    }
  }
  return out;
}

std::unique_ptr<GenerativeAdapter> make_generative_adapter(const AdapterConfig& config) {
  if (config.kind == "openai") return std::make_unique<OpenAiAdapter>(config);
  if (config.kind == "lexicon") return std::make_unique<LexiconAdapter>(config);
  throw ContractViolation("'" + config.kind + "' is not a generative adapter kind");
}

}  // namespace aporo::bench
