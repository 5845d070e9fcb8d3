#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "proofaug/error.hpp"
#include "proofaug/lm.hpp"
#include "support/scenario.hpp"

using namespace proofaug;
using proofaug::testing::data_path;

namespace {

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t k = 0; k < n; ++k) s += k ? " w" : "w";
  return s;
}

std::vector<DemoExample> letters(std::size_t n) {
  std::vector<DemoExample> pool;
  for (std::size_t k = 0; k < n; ++k) {
    const std::string id(1, static_cast<char>('a' + k));
    pool.push_back({"xi " + id, "yi " + id, "theorem " + id + ": \"P\"", "by " + id});
  }
  return pool;
}

// Pearson statistic against equal expected counts.
double chi_square(const std::vector<std::size_t>& observed) {
  double total = 0;
  for (auto o : observed) total += double(o);
  const double expected = total / double(observed.size());
  double x2 = 0;
  for (auto o : observed) x2 += (double(o) - expected) * (double(o) - expected) / expected;
  return x2;
}

}  // namespace

TEST_CASE("response budget follows the prompt length") {
  CHECK(max_tokens_for(100) == 2048);
  CHECK(max_tokens_for(2048) == 2048);
  CHECK(max_tokens_for(2049) == 2047);
  CHECK(max_tokens_for(3000) == 1096);
  CHECK(max_tokens_for(4096) == 0);
  CHECK(max_tokens_for(5000) < 0);
  WhitespaceTokenizer tok;
  CHECK(tok.count("") == 0);
  CHECK(tok.count("  a  b\n\tc ") == 3);
  CHECK(tok.count(words(3000)) == 3000);
}

TEST_CASE("placeholders and templates") {
  CHECK(fill_placeholders("{xf} and {yf}{x}", {{"xf", "A"}, {"yf", "B"}, {"x", ""}}) == "A and B");
  // braces around something that is not a lowercase identifier stay literal
  CHECK(fill_placeholders("{X} { xf} {}", {}) == "{X} { xf} {}");
  CHECK_THROWS_AS(fill_placeholders("{xi}", {}), MissingPlaceholderValue);

  CHECK_THROWS_AS(PromptTemplate::from_json({{"user", "{bogus}"}, {"assistant", "{yf}"}, {"stop", {"x"}}}),
                  ConfigError);
  CHECK_THROWS_AS(PromptTemplate::from_json({{"user", "{xf}"}, {"assistant", "{xi}"}, {"stop", {"x"}}}),
                  ConfigError);
  CHECK_THROWS_AS(PromptTemplate::from_json({{"user", "{xf}"}, {"assistant", "{yf}"}, {"stop", nlohmann::json::array()}}),
                  ConfigError);
  CHECK_THROWS_AS(PromptTemplate::from_json({{"user", "{xf}"}}), ConfigError);
  CHECK_THROWS_AS(PromptTemplate::load(data_path("nope.json")), ConfigError);
  const PromptTemplate fs = PromptTemplate::load(data_path("templates/few_shot.json"));
  CHECK(fs.stop.size() == 3);
  const PromptTemplate erp = PromptTemplate::load(data_path("templates/zero_shot_erp.json"));
  CHECK(erp.user.find("{ps}") != std::string::npos);

  const auto pool = load_demos(data_path("demos/pool.jsonl"));
  CHECK(pool.size() == 3);
  for (const auto& d : pool) CHECK(d.complete());
}

TEST_CASE("prompt assembly: demos, separators, then the problem") {
  const PromptTemplate t{"U[{xi}|{yi}|{xf}|{yf_p}{ps}]", "A[{yf}]", {"]"}};
  const auto pool = letters(2);
  const DemoExample problem{"XI", "YI", "XF", "ignored"};
  const std::string got = build_prompt(t, pool, problem);
  const std::string want = std::string("U[xi a|yi a|theorem a: \"P\"|]A[by a]\n\n\n") +
                           "U[xi b|yi b|theorem b: \"P\"|]A[by b]\n\n\n" + "U[XI|YI|XF|]";
  CHECK(got == want);
  CHECK(build_prompt(t, {}, problem, PartialProof{"proof -\n", "goal:g"}) ==
        "U[XI|YI|XF|proof -\ngoal:g]");

  const PromptTemplate fs = PromptTemplate::load(data_path("templates/few_shot.json"));
  const std::string p = build_prompt(fs, pool, problem);
  CHECK(p.find("by a\n```\n\n\n\n\n") != std::string::npos);
  CHECK(p.rfind("XF\n") == p.size() - 3);
}

TEST_CASE("demo selection: without replacement, excludes the target, uniform") {
  const auto pool = letters(6);
  std::mt19937_64 rng(123);
  CHECK_THROWS_AS(select_demos(pool, 7, rng), PoolTooSmall);
  CHECK_THROWS_AS(select_demos(pool, 6, rng, pool[0].xf), PoolTooSmall);
  CHECK(select_demos(pool, 0, rng).empty());
  for (int k = 0; k < 200; ++k) {
    auto pick = select_demos(pool, 5, rng, pool[2].xf);
    std::set<std::string> seen;
    for (const auto& d : pick) {
      CHECK(d.xf != pool[2].xf);
      seen.insert(d.xf);
    }
    CHECK(seen.size() == 5);
  }

  // ordered pairs from 6 items: 30 equally likely outcomes
  std::map<std::pair<char, char>, std::size_t> counts;
  const int draws = 60000;
  for (int k = 0; k < draws; ++k) {
    auto pick = select_demos(pool, 2, rng);
    counts[{pick[0].yf.back(), pick[1].yf.back()}]++;
  }
  REQUIRE(counts.size() == 30);
  std::vector<std::size_t> obs;
  for (auto& [_, c] : counts) obs.push_back(c);
  // chi-square, 29 degrees of freedom, critical value at p = 0.001
  CHECK(chi_square(obs) < 58.3);

  // same seed, same draw
  std::mt19937_64 r1(9), r2(9);
  CHECK(select_demos(pool, 3, r1)[0].xf == select_demos(pool, 3, r2)[0].xf);
}

TEST_CASE("stop strings and sampling parameters") {
  const std::vector<std::string> stop{"```", "\ntheorem"};
  CHECK(truncate_at_stop("by simp\n```\nrest", stop) == "by simp\n");
  CHECK(truncate_at_stop("a\ntheorem b ```", stop) == "a");
  CHECK(truncate_at_stop("plain", stop) == "plain");
  SamplingParams p;
  CHECK(p.temperature == doctest::Approx(0.6));
  CHECK(p.top_p == doctest::Approx(0.95));
  p.top_p = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.temperature = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("mock backend: first match wins, arrays advance per identical prompt") {
  MockLm lm({{"alpha", {"one", "two"}, ""}, {"a", {"generic"}, ""}, {"boom", {}, "error"},
             {"slow", {}, "timeout"}});
  CompletionRequest r;
  r.prompt = "alpha x";
  CHECK(lm.complete(r) == "one");
  CHECK(lm.complete(r) == "two");
  CHECK(lm.complete(r) == "two");
  r.prompt = "alpha y";
  CHECK(lm.complete(r) == "one");
  r.prompt = "banana";
  CHECK(lm.complete(r) == "generic");
  r.prompt = "xyz";
  CHECK(lm.complete(r).empty());
  r.prompt = "boom";
  CHECK_THROWS_AS(lm.complete(r), BackendError);
  r.prompt = "slow";
  CHECK_THROWS_AS(lm.complete(r), BackendTimeout);
  CHECK(lm.calls() == 8);
  CHECK(lm.requests().size() == 8);

  const std::string path = "mock_rules_test.jsonl";
  {
    std::ofstream out(path);
    out << R"({"match": "q", "respond": ["x", "y"]})" << "\n\n"
        << R"({"match": "", "respond": "z"})" << "\n";
  }
  MockLm loaded = MockLm::load(path);
  r.prompt = "q";
  CHECK(loaded.complete(r) == "x");
  r.prompt = "other";
  CHECK(loaded.complete(r) == "z");
  std::remove(path.c_str());
  CHECK_THROWS_AS(MockLm::rule_from_json({{"match", "x"}}), ConfigError);
  CHECK_THROWS_AS(MockLm::rule_from_json({{"match", "x"}, {"fail", "sometimes"}}), ConfigError);
}

TEST_CASE("sampler: accounting for skipped, failed and normal queries") {
  MockLm lm({{"fail-now", {}, "timeout"}, {"err-now", {}, "error"}, {"", {"by simp\n```\njunk"}, ""}});
  Sampler sampler(lm, nullptr, SamplingParams{0.6, 0.95, 77});
  const std::vector<std::string> stop{"```"};

  SampleResult ok = sampler.sample("short prompt", stop);
  CHECK(ok.consumed);
  CHECK(!ok.failed);
  CHECK(ok.text == "by simp\n");
  CHECK(ok.max_tokens == 2048);
  CHECK(lm.requests().back().seed == 77u);
  CHECK(lm.requests().back().stop == stop);
  sampler.sample("short prompt", stop, 5);
  CHECK(lm.requests().back().seed == 5u);

  SampleResult longer = sampler.sample(words(3000), stop);
  CHECK(longer.max_tokens == 1096);
  CHECK(lm.requests().back().max_tokens == 1096);

  SampleResult skipped = sampler.sample(words(4096), stop);
  CHECK(skipped.skipped);
  CHECK(!skipped.consumed);
  CHECK(lm.calls() == 3);

  SampleResult t = sampler.sample("fail-now", stop);
  CHECK(t.failed);
  CHECK(t.consumed);
  CHECK(t.error.find("timeout") == 0);
  SampleResult e = sampler.sample("err-now", stop);
  CHECK(e.failed);
  CHECK(e.consumed);
  CHECK(sampler.queries() == 5);
}

TEST_CASE("http backend against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  nlohmann::json last;
  std::mutex m;
  server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    auto body = nlohmann::json::parse(req.body);
    {
      std::lock_guard lock(m);
      last = body;
    }
    const std::string prompt = body["prompt"];
    if (prompt == "sleep") std::this_thread::sleep_for(std::chrono::milliseconds(2500));
    if (prompt == "500") {
      res.status = 500;
      return;
    }
    if (prompt == "garbage") {
      res.set_content("not json", "text/plain");
      return;
    }
    res.set_content(nlohmann::json{{"text", "echo:" + prompt}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string url = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
  HttpLm lm(url, std::chrono::seconds(1));
  CHECK(lm.describe() == "http:" + url);
  CompletionRequest r;
  r.prompt = "hello";
  r.max_tokens = 99;
  r.stop = {"```"};
  r.seed = 3;
  CHECK(lm.complete(r) == "echo:hello");
  {
    std::lock_guard lock(m);
    CHECK(last["max_tokens"] == 99);
    CHECK(last["temperature"] == doctest::Approx(0.6));
    CHECK(last["top_p"] == doctest::Approx(0.95));
    CHECK(last["stop"] == nlohmann::json::array({"```"}));
    CHECK(last["seed"] == 3);
  }
  r.prompt = "500";
  CHECK_THROWS_AS(lm.complete(r), BackendError);
  r.prompt = "garbage";
  CHECK_THROWS_AS(lm.complete(r), BackendError);
  r.prompt = "sleep";
  CHECK_THROWS_AS(lm.complete(r), BackendTimeout);

  Sampler sampler(lm);
  SampleResult s = sampler.sample("via sampler", std::vector<std::string>{":"});
  CHECK(s.text == "echo");

  server.stop();
  th.join();
  CHECK_THROWS_AS(HttpLm("https://example.org"), ConfigError);
  CHECK_THROWS_AS(HttpLm("localhost:1"), ConfigError);
  HttpLm dead("http://127.0.0.1:" + std::to_string(port), std::chrono::seconds(1));
  r.prompt = "x";
  CHECK_THROWS_AS(dead.complete(r), Error);
}
