#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <fmt/format.h>

#include "aporo/bench/adapters.hpp"
#include "aporo/common/error.hpp"

namespace aporo::bench {

namespace {

struct Endpoint {
  std::string base;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  Endpoint e{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  if (!e.path.ends_with("/chat/completions")) e.path += e.path.ends_with("/v1") ? "/chat/completions" : "/v1/chat/completions";
  return e;
}

}  // namespace

OpenAiAdapter::OpenAiAdapter(AdapterConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ContractViolation("openai adapter needs an endpoint");
  if (config_.model.empty()) throw ContractViolation("openai adapter needs a model name");
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::vector<std::string> OpenAiAdapter::generate(const std::vector<PromptRequest>& prompts, const Decoding& decoding,
                                                 std::uint64_t seed) const {
  const Endpoint ep = split_endpoint(config_.endpoint);
  std::vector<std::string> out(prompts.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    httplib::Client client(ep.base);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      nlohmann::json messages = nlohmann::json::array();
      for (const auto& m : prompts[i].messages) messages.push_back({{"role", m.role}, {"content", m.content}});
      const nlohmann::json body = {{"model", config_.model},     {"messages", messages},
                                   {"temperature", decoding.temperature}, {"max_tokens", decoding.max_tokens},
                                   {"n", decoding.n},            {"seed", seed}};
      std::string last_error;
      bool done = false;
      for (std::size_t attempt = 0; attempt <= config_.max_retries && !done; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200) * (1 << std::min<std::size_t>(attempt - 1, 6)));
        auto res = client.Post(ep.path, headers, body.dump(), "application/json");
        if (!res) {
          last_error = "transport error: " + httplib::to_string(res.error());
          continue;
        }
        if (res->status == 429 || res->status >= 500) {
          last_error = fmt::format("HTTP {}", res->status);
          continue;
        }
        try {
          if (res->status != 200) throw Error(fmt::format("HTTP {}: {}", res->status, res->body));
          const auto j = nlohmann::json::parse(res->body);
          out[i] = j.at("choices").at(0).at("message").at("content").get<std::string>();
          done = true;
        } catch (const std::exception& e) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::make_exception_ptr(Error(fmt::format("prompt {}: {}", i, e.what())));
          return;
        }
      }
      if (!done) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::make_exception_ptr(Error(fmt::format("prompt {}: gave up after retries ({})", i, last_error)));
        return;
      }
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(config_.max_parallel, prompts.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace aporo::bench
