#include "proofaug/lm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>

#include "httplib.h"
#include "proofaug/error.hpp"

namespace proofaug {

namespace {

bool ident_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
         c == '_';
}

// Calls `on_name` for every {name} placeholder in `text`, `on_text` for the
// literal text between them. Braces not enclosing an identifier are literal.
template <typename OnText, typename OnName>
void scan_placeholders(std::string_view text, OnText on_text, OnName on_name) {
  std::size_t pos = 0;
  std::size_t literal_from = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    std::size_t end = pos + 1;
    while (end < text.size() && ident_char(text[end])) ++end;
    if (end == pos + 1 || end >= text.size() || text[end] != '}') {
      ++pos;
      continue;
    }
    on_text(text.substr(literal_from, pos - literal_from));
    on_name(std::string(text.substr(pos + 1, end - pos - 1)));
    pos = literal_from = end + 1;
  }
  on_text(text.substr(literal_from));
}

std::set<std::string> placeholders(std::string_view text) {
  std::set<std::string> names;
  scan_placeholders(text, [](std::string_view) {}, [&](std::string n) { names.insert(n); });
  return names;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename F>
void for_each_jsonl(const std::string& path, F f) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

// ------------------------------------------------------------ templates

void PromptTemplate::validate() const {
  static const std::set<std::string> user_ok{"xi", "yi", "xf", "yf_p", "ps"};
  static const std::set<std::string> assistant_ok{"yf", "yf_c"};
  for (const auto& n : placeholders(user))
    if (!user_ok.count(n)) throw ConfigError("unknown placeholder {" + n + "} in user template");
  for (const auto& n : placeholders(assistant))
    if (!assistant_ok.count(n))
      throw ConfigError("unknown placeholder {" + n + "} in assistant template");
  if (stop.empty()) throw ConfigError("prompt template has no stop strings");
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
  PromptTemplate t;
  try {
    t.user = j.at("user").get<std::string>();
    t.assistant = j.at("assistant").get<std::string>();
    t.stop = j.at("stop").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed prompt template: ") + e.what());
  }
  t.validate();
  return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

DemoExample DemoExample::from_json(const nlohmann::json& j) {
  DemoExample d;
  d.xi = j.value("xi", std::string{});
  d.yi = j.value("yi", std::string{});
  d.xf = j.value("xf", std::string{});
  d.yf = j.value("yf", std::string{});
  return d;
}

std::vector<DemoExample> load_demos(const std::string& jsonl_path) {
  std::vector<DemoExample> demos;
  for_each_jsonl(jsonl_path, [&](const nlohmann::json& j) {
    DemoExample d = DemoExample::from_json(j);
    if (!d.complete()) throw ConfigError(jsonl_path + ": demo example needs xi, yi, xf and yf");
    demos.push_back(std::move(d));
  });
  return demos;
}

std::string fill_placeholders(std::string_view text,
                              const std::map<std::string, std::string>& values) {
  std::string out;
  scan_placeholders(
      text, [&](std::string_view lit) { out.append(lit); },
      [&](const std::string& name) {
        auto it = values.find(name);
        if (it == values.end()) throw MissingPlaceholderValue("no value for {" + name + "}");
        out += it->second;
      });
  return out;
}

std::string build_prompt(const PromptTemplate& tmpl, std::span<const DemoExample> demos,
                         const DemoExample& problem, const std::optional<PartialProof>& partial) {
  std::string prompt;
  for (const DemoExample& d : demos) {
    const std::map<std::string, std::string> v{{"xi", d.xi}, {"yi", d.yi},   {"xf", d.xf},
                                               {"yf", d.yf}, {"yf_c", d.yf}, {"yf_p", ""},
                                               {"ps", ""}};
    prompt += fill_placeholders(tmpl.user, v);
    prompt += fill_placeholders(tmpl.assistant, v);
    prompt += "\n\n\n";
  }
  std::map<std::string, std::string> v{
      {"xi", problem.xi}, {"yi", problem.yi}, {"xf", problem.xf}, {"yf_p", ""}, {"ps", ""}};
  if (partial) {
    v["yf_p"] = partial->prefix;
    v["ps"] = partial->proof_state;
  }
  prompt += fill_placeholders(tmpl.user, v);
  return prompt;
}

std::vector<DemoExample> select_demos(std::span<const DemoExample> pool, std::size_t n,
                                      std::mt19937_64& rng, std::string_view target_xf) {
  std::vector<std::size_t> eligible;
  for (std::size_t k = 0; k < pool.size(); ++k)
    if (target_xf.empty() || pool[k].xf != target_xf) eligible.push_back(k);
  if (n > eligible.size())
    throw PoolTooSmall("asked for " + std::to_string(n) + " demos, pool has " +
                       std::to_string(eligible.size()));
  // Partial Fisher-Yates: the first n entries are a uniform ordered sample.
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, eligible.size() - 1);
    std::swap(eligible[k], eligible[pick(rng)]);
  }
  std::vector<DemoExample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(pool[eligible[k]]);
  return out;
}

// ------------------------------------------------------------ sampling rules

void SamplingParams::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

long max_tokens_for(std::size_t prompt_tokens) {
  if (prompt_tokens > static_cast<std::size_t>(kDefaultMaxTokens))
    return kContextWindow - static_cast<long>(prompt_tokens);
  return kDefaultMaxTokens;
}

std::string truncate_at_stop(std::string_view text, std::span<const std::string> stop) {
  std::size_t cut = text.size();
  for (const std::string& s : stop) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  return std::string(text.substr(0, cut));
}

nlohmann::json CompletionRequest::to_json() const {
  nlohmann::json j{{"prompt", prompt},
                   {"temperature", temperature},
                   {"top_p", top_p},
                   {"max_tokens", max_tokens},
                   {"stop", stop}};
  if (seed) j["seed"] = *seed;
  return j;
}

// ------------------------------------------------------------ mock backend

MockLm::Rule MockLm::rule_from_json(const nlohmann::json& j) {
  Rule r;
  try {
    r.match = j.value("match", std::string{});
    r.fail = j.value("fail", std::string{});
    if (j.contains("respond")) {
      const auto& resp = j.at("respond");
      if (resp.is_array()) {
        r.responses = resp.get<std::vector<std::string>>();
      } else {
        r.responses.push_back(resp.get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed mock rule: ") + e.what());
  }
  if (r.fail.empty() && r.responses.empty())
    throw ConfigError("mock rule needs \"respond\" or \"fail\"");
  if (!r.fail.empty() && r.fail != "timeout" && r.fail != "error")
    throw ConfigError("mock rule \"fail\" must be \"timeout\" or \"error\"");
  return r;
}

MockLm MockLm::load(const std::string& jsonl_path) {
  std::vector<Rule> rules;
  for_each_jsonl(jsonl_path, [&](const nlohmann::json& j) { rules.push_back(rule_from_json(j)); });
  return MockLm(std::move(rules));
}

void MockLm::add_rule(Rule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
}

std::string MockLm::complete(const CompletionRequest& request) {
  ++calls_;
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  for (std::size_t k = 0; k < rules_.size(); ++k) {
    const Rule& rule = rules_[k];
    if (request.prompt.find(rule.match) == std::string::npos) continue;
    if (rule.fail == "timeout") throw BackendTimeout("mock rule " + std::to_string(k) + " timed out");
    if (rule.fail == "error") throw BackendError("mock rule " + std::to_string(k) + " failed");
    std::size_t& seen = seen_[{k, request.prompt}];
    const std::string& out = rule.responses[std::min(seen, rule.responses.size() - 1)];
    ++seen;
    return out;
  }
  return {};
}

// ------------------------------------------------------------ http backend

HttpLm::HttpLm(std::string url, std::chrono::seconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  const auto scheme = url_.find("://");
  if (scheme == std::string::npos || url_.substr(0, scheme) != "http")
    throw ConfigError("LM endpoint must be an http:// URL, got '" + url_ + "'");
  const auto slash = url_.find('/', scheme + 3);
  origin_ = url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
}

std::string HttpLm::complete(const CompletionRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  auto res = client.Post(path_, request.to_json().dump(), "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout)
      throw BackendTimeout("LM request to " + url_ + " timed out");
    throw BackendError("LM request to " + url_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200)
    throw BackendError("LM endpoint returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed LM reply: ") + e.what());
  }
}

// ------------------------------------------------------------ sampler

Sampler::Sampler(LmBackend& backend, std::shared_ptr<const Tokenizer> tokenizer,
                 SamplingParams params)
    : backend_(backend),
      tokenizer_(tokenizer ? std::move(tokenizer) : std::make_shared<WhitespaceTokenizer>()),
      params_(params) {
  params_.validate();
}

SampleResult Sampler::sample(const std::string& prompt, std::span<const std::string> stop,
                             std::optional<std::uint64_t> seed) {
  SampleResult result;
  result.max_tokens = max_tokens_for(tokenizer_->count(prompt));
  if (result.max_tokens <= 0) {
    result.skipped = true;
    result.error = "prompt leaves no room for a response";
    return result;
  }
  CompletionRequest req;
  req.prompt = prompt;
  req.temperature = params_.temperature;
  req.top_p = params_.top_p;
  req.max_tokens = result.max_tokens;
  req.stop.assign(stop.begin(), stop.end());
  req.seed = seed ? seed : params_.seed;

  ++queries_;
  result.consumed = true;
  try {
    result.text = truncate_at_stop(backend_.complete(req), stop);
  } catch (const BackendTimeout& e) {
    result.failed = true;
    result.error = std::string("timeout: ") + e.what();
  } catch (const BackendError& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

}  // namespace proofaug
