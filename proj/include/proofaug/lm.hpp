#pragma once

// Prompt construction and completion sampling.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace proofaug {

// Template JSON: {"user": "...{xi}...", "assistant": "{yf}\n```\n\n", "stop": [...]}.
struct PromptTemplate {
  std::string user;
  std::string assistant;
  std::vector<std::string> stop;

  // Throws ConfigError on unknown placeholders or an empty stop list.
  void validate() const;

  static PromptTemplate from_json(const nlohmann::json& j);
  static PromptTemplate load(const std::string& path);
};

struct DemoExample {
  std::string xi;  // informal statement
  std::string yi;  // informal proof
  std::string xf;  // formal statement
  std::string yf;  // formal proof

  bool complete() const { return !xi.empty() && !yi.empty() && !xf.empty() && !yf.empty(); }
  static DemoExample from_json(const nlohmann::json& j);
};

std::vector<DemoExample> load_demos(const std::string& jsonl_path);

// Verified prefix and proof-state text for recursive completion prompts.
struct PartialProof {
  std::string prefix;
  std::string proof_state;
};

// Substitutes {name} placeholders. Throws MissingPlaceholderValue for a
// placeholder without a value.
std::string fill_placeholders(std::string_view text,
                              const std::map<std::string, std::string>& values);

// Demo pairs (user + assistant) joined by three newlines, then the problem's
// user message. `problem.yf` is ignored.
std::string build_prompt(const PromptTemplate& tmpl, std::span<const DemoExample> demos,
                         const DemoExample& problem,
                         const std::optional<PartialProof>& partial = std::nullopt);

// Uniform sample of `n` demos without replacement, skipping any whose formal
// statement equals `target_xf`. Throws PoolTooSmall.
std::vector<DemoExample> select_demos(std::span<const DemoExample> pool, std::size_t n,
                                      std::mt19937_64& rng, std::string_view target_xf = {});

struct SamplingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

// Counts whitespace-separated words.
class WhitespaceTokenizer : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
};

inline constexpr long kDefaultMaxTokens = 2048;
inline constexpr long kContextWindow = 4096;

// 2048 by default; 4096 - prompt_tokens once the prompt is longer than 2048.
long max_tokens_for(std::size_t prompt_tokens);

// Cuts `text` before the earliest occurrence of any stop string.
std::string truncate_at_stop(std::string_view text, std::span<const std::string> stop);

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.6;
  double top_p = 0.95;
  long max_tokens = kDefaultMaxTokens;
  std::vector<std::string> stop;
  std::optional<std::uint64_t> seed;

  nlohmann::json to_json() const;
};

class LmBackend {
 public:
  virtual ~LmBackend() = default;
  // Throws BackendTimeout or BackendError.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string describe() const = 0;
};

// Scripted backend. Rules are JSONL lines {"match": substring, "respond": text}
// checked in order; the first rule whose substring occurs in the prompt wins.
// "respond" may also be an array, consumed one entry per repeated identical
// prompt (the last entry repeats). {"fail": "timeout"|"error"} makes the rule
// raise instead. An unmatched prompt yields an empty completion.
class MockLm : public LmBackend {
 public:
  struct Rule {
    std::string match;
    std::vector<std::string> responses;
    std::string fail;
  };

  MockLm() = default;
  explicit MockLm(std::vector<Rule> rules) : rules_(std::move(rules)) {}
  static MockLm load(const std::string& jsonl_path);
  static Rule rule_from_json(const nlohmann::json& j);

  void add_rule(Rule rule);
  std::string complete(const CompletionRequest& request) override;
  std::string describe() const override { return "mock"; }

  std::uint64_t calls() const { return calls_.load(); }
  const std::vector<CompletionRequest>& requests() const { return requests_; }

 private:
  std::vector<Rule> rules_;
  std::map<std::pair<std::size_t, std::string>, std::size_t> seen_;
  std::vector<CompletionRequest> requests_;
  std::atomic<std::uint64_t> calls_{0};
  mutable std::mutex mutex_;
};

// POSTs {prompt, temperature, top_p, max_tokens, stop} and reads {text}.
class HttpLm : public LmBackend {
 public:
  explicit HttpLm(std::string url, std::chrono::seconds timeout = std::chrono::seconds(120));
  std::string complete(const CompletionRequest& request) override;
  std::string describe() const override { return "http:" + url_; }

 private:
  std::string url_;
  std::string origin_;
  std::string path_;
  std::chrono::seconds timeout_;
};

struct SampleResult {
  std::string text;
  bool consumed = false;  // a query was charged
  bool failed = false;    // backend error or timeout
  bool skipped = false;   // no room left for a response
  long max_tokens = 0;
  std::string error;
};

// Front door for all LM traffic: applies the token-budget rule, stop
// truncation and query accounting.
class Sampler {
 public:
  Sampler(LmBackend& backend, std::shared_ptr<const Tokenizer> tokenizer = nullptr,
          SamplingParams params = {});

  SampleResult sample(const std::string& prompt, std::span<const std::string> stop,
                      std::optional<std::uint64_t> seed = std::nullopt);

  std::uint64_t queries() const { return queries_.load(); }
  const SamplingParams& params() const { return params_; }
  LmBackend& backend() { return backend_; }

 private:
  LmBackend& backend_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  SamplingParams params_;
  std::atomic<std::uint64_t> queries_{0};
};

}  // namespace proofaug
