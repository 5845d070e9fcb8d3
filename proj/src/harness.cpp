#include "proofaug/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "proofaug/error.hpp"

namespace proofaug {

namespace fs = std::filesystem;

// ------------------------------------------------------------ inputs

Problem Problem::from_json(const nlohmann::json& j) {
  Problem p;
  try {
    p.name = j.at("name").get<std::string>();
    p.xi = j.value("xi", std::string{});
    p.yi = j.value("yi", std::string{});
    p.xf = j.at("xf").get<std::string>();
    if (j.contains("mini_itp")) p.mini_itp = j.at("mini_itp");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed problem: ") + e.what());
  }
  if (p.name.empty()) throw ConfigError("problem without a name");
  if (normalize_whitespace(p.xf).empty())
    throw ConfigError("problem '" + p.name + "' has an empty formal statement");
  return p;
}

std::vector<Problem> load_problems(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problems file " + path);
  std::vector<Problem> problems;
  std::set<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Problem p = Problem::from_json(j);
    if (!names.insert(p.name).second)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate problem '" + p.name + "'");
    problems.push_back(std::move(p));
  }
  return problems;
}

void StrategyConfig::validate() const {
  if (id.empty()) throw ConfigError("strategy without an id");
  if (attempts < 1) throw ConfigError("strategy '" + id + "' needs at least one attempt");
  if (shots > demos.size())
    throw ConfigError("strategy '" + id + "' asks for " + std::to_string(shots) +
                      " demos but only " + std::to_string(demos.size()) + " are loaded");
  if (erp && erp_attempts < 1) throw ConfigError("strategy '" + id + "': erp_attempts must be >= 1");
  prompt.validate();
  if (erp) erp_prompt.validate();
  portfolio.validate();
}

StrategyConfig StrategyConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  auto resolve = [&](const std::string& rel) {
    fs::path p(rel);
    return (p.is_absolute() ? p : fs::path(base_dir) / p).string();
  };
  StrategyConfig s;
  try {
    s.id = j.at("id").get<std::string>();
    s.prompt = PromptTemplate::load(resolve(j.at("prompt").get<std::string>()));
    if (j.contains("demos")) s.demos = load_demos(resolve(j.at("demos").get<std::string>()));
    s.shots = j.value("shots", std::size_t{1});
    s.include_draft = j.value("include_draft", true);
    s.erp = j.value("erp", false);
    if (j.contains("erp_prompt")) {
      s.erp_prompt = PromptTemplate::load(resolve(j.at("erp_prompt").get<std::string>()));
    } else if (s.erp) {
      throw ConfigError("strategy '" + s.id + "' enables ERP without an erp_prompt");
    }
    s.erp_attempts = j.value("erp_attempts", std::size_t{1});
    s.attempts = j.value("attempts", std::size_t{1});
    if (j.contains("portfolio")) s.portfolio = ATPPortfolio::from_json(j.at("portfolio"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed strategy: ") + e.what());
  }
  s.validate();
  return s;
}

StrategyConfig StrategyConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open strategy " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

// ------------------------------------------------------------ records

nlohmann::json AttemptRecord::to_json() const {
  return {{"problem", problem},
          {"strategy", strategy},
          {"attempt", attempt},
          {"outcome", outcome},
          {"proof", proof},
          {"reason", reason},
          {"cache_key", cache_key},
          {"proposal_queries", proposal_queries},
          {"erp_queries", erp_queries},
          {"atp_calls", atp_calls},
          {"fallbacks", fallbacks},
          {"wall_ms", wall_ms},
          {"trace", trace_path}};
}

AttemptRecord AttemptRecord::from_json(const nlohmann::json& j) {
  AttemptRecord r;
  try {
    r.problem = j.at("problem").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.attempt = j.at("attempt").get<std::size_t>();
    r.outcome = j.at("outcome").get<std::string>();
    r.proof = j.value("proof", std::string{});
    r.reason = j.value("reason", std::string{});
    r.cache_key = j.value("cache_key", std::string{});
    r.proposal_queries = j.value("proposal_queries", std::uint64_t{0});
    r.erp_queries = j.value("erp_queries", std::uint64_t{0});
    r.atp_calls = j.value("atp_calls", std::uint64_t{0});
    r.fallbacks = j.value("fallbacks", std::size_t{0});
    r.wall_ms = j.value("wall_ms", 0.0);
    r.trace_path = j.value("trace", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed attempt record: ") + e.what());
  }
  return r;
}

std::vector<AttemptRecord> load_attempts(const std::string& path) {
  std::vector<AttemptRecord> out;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open attempt log " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(AttemptRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  return out;
}

// ------------------------------------------------------------ ledger

std::string cache_key(const SemiProof& semi) { return normalize_whitespace(semi.text()); }

std::string augment_signature(const StrategyConfig& strategy) {
  const std::string text = (strategy.erp ? "erp:" + std::to_string(strategy.erp_attempts) : "noerp") +
                           "|" + strategy.portfolio.to_json().dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CampaignLedger::CampaignLedger(std::string log_path) : log_path_(std::move(log_path)) {}

void CampaignLedger::apply(const AttemptRecord& rec) {
  ProblemLedger& p = problems_[rec.problem];
  p.queries_used += rec.queries();
  p.atp_calls += rec.atp_calls;
  ++p.attempts_run;
  ++p.attempts_by_strategy[rec.strategy];
  if (!rec.cache_key.empty() && rec.outcome != "unavailable") p.semiproof_cache.insert(rec.cache_key);
  if (rec.outcome == "unavailable") p.unavailable = true;
  if (rec.outcome == "proved" && !p.proved)
    p.proved = ProvedBy{rec.proof, rec.strategy, rec.attempt, p.queries_used};
  records_.push_back(rec);
}

void CampaignLedger::replay(const std::vector<AttemptRecord>& records) {
  std::lock_guard lock(mutex_);
  for (const AttemptRecord& r : records) apply(r);
}

void CampaignLedger::record(const AttemptRecord& rec) {
  std::lock_guard lock(mutex_);
  apply(rec);
  if (!log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::app);
    if (!out) throw ConfigError("cannot append to " + log_path_);
    out << rec.to_json().dump() << '\n';
  }
}

bool CampaignLedger::check_and_insert(const std::string& problem, const std::string& key) {
  std::lock_guard lock(mutex_);
  return problems_[problem].semiproof_cache.insert(key).second;
}

ProblemLedger CampaignLedger::snapshot(const std::string& problem) const {
  std::lock_guard lock(mutex_);
  auto it = problems_.find(problem);
  return it == problems_.end() ? ProblemLedger{} : it->second;
}

std::map<std::string, ProblemLedger> CampaignLedger::snapshot() const {
  std::lock_guard lock(mutex_);
  return problems_;
}

std::vector<AttemptRecord> CampaignLedger::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

void CampaignLedger::mark_unavailable(const std::string& problem) {
  std::lock_guard lock(mutex_);
  problems_[problem].unavailable = true;
}

// ------------------------------------------------------------ attempts

namespace {

std::uint64_t attempt_seed(const CampaignOptions& options, const Problem& problem,
                           const StrategyConfig& strategy, std::size_t attempt) {
  const std::uint64_t h1 = std::hash<std::string>{}(problem.name);
  const std::uint64_t h2 = std::hash<std::string>{}(strategy.id);
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(options.seed), hi(options.seed), lo(h1), hi(h1), lo(h2), hi(h2),
                    lo(attempt)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t{words[0]} << 32) | words[1];
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

}  // namespace

AttemptRecord run_attempt(const Problem& problem, const StrategyConfig& strategy,
                          std::size_t attempt, Backend& backend, Sampler& sampler,
                          CampaignLedger& ledger, const CampaignOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  AttemptRecord rec;
  rec.problem = problem.name;
  rec.strategy = strategy.id;
  rec.attempt = attempt;
  auto done = [&](std::string outcome, std::string reason = {}) {
    rec.outcome = std::move(outcome);
    rec.reason = std::move(reason);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ledger.record(rec);
    return rec;
  };

  const ProblemLedger before = ledger.snapshot(problem.name);
  if (before.queries_used >= options.budget)
    throw BudgetExhausted("problem '" + problem.name + "' has no queries left");

  const std::uint64_t seed = attempt_seed(options, problem, strategy, attempt);
  std::mt19937_64 rng(seed);
  const std::vector<DemoExample> demos = select_demos(strategy.demos, strategy.shots, rng, problem.xf);
  DemoExample text{strategy.include_draft ? problem.xi : "", strategy.include_draft ? problem.yi : "",
                   problem.xf, ""};
  const std::string prompt = build_prompt(strategy.prompt, demos, text);
  SampleResult proposal = sampler.sample(prompt, strategy.prompt.stop, seed);
  rec.proposal_queries = proposal.consumed ? 1 : 0;
  if (proposal.skipped) return done("no_proposal", proposal.error);
  if (proposal.failed) return done("no_proposal", proposal.error);
  if (normalize_whitespace(proposal.text).empty()) return done("no_proposal", "empty completion");

  std::unique_ptr<Session> session;
  try {
    session = backend.open(problem.xf);
  } catch (const ItpUnavailable& e) {
    return done("unavailable", e.what());
  }

  ERPConfig erp;
  erp.enabled = strategy.erp;
  erp.sampler = &sampler;
  erp.prompt = strategy.erp_prompt;
  erp.problem = text;
  erp.attempts = strategy.erp_attempts;
  std::uint64_t granted = 0;
  erp.may_sample = [&] {
    if (before.queries_used + rec.proposal_queries + granted >= options.budget) return false;
    ++granted;
    return true;
  };

  const std::string signature = augment_signature(strategy);
  AugmentHooks hooks;
  hooks.admit = [&](const SemiProof& semi) {
    rec.cache_key = cache_key(semi) + "\n#" + signature;
    return !options.cache || ledger.check_and_insert(problem.name, rec.cache_key);
  };

  AugmentResult result;
  try {
    result = augment(problem.xf, proposal.text, *session, strategy.portfolio, erp, hooks);
  } catch (const ItpUnavailable& e) {
    return done("unavailable", e.what());
  }
  rec.erp_queries = result.erp_queries;
  rec.atp_calls = result.atp_calls;
  rec.fallbacks = result.fallbacks;

  if (!options.trace_dir.empty()) {
    fs::create_directories(options.trace_dir);
    const fs::path path = fs::path(options.trace_dir) /
                          (file_safe(problem.name) + "__" + file_safe(strategy.id) + "__" +
                           std::to_string(attempt) + ".jsonl");
    std::ofstream out(path);
    out << trace_jsonl(result.trace);
    rec.trace_path = path.string();
  }

  if (result.skipped_by_cache) return done("cached", result.reason);
  if (result.budget_exhausted) return done("budget_exhausted", result.reason);
  if (!result.proved) return done("failed", result.reason);

  std::unique_ptr<Session> fresh;
  try {
    fresh = backend.open(problem.xf);
  } catch (const ItpUnavailable& e) {
    return done("unavailable", e.what());
  }
  if (verify_proof(result.final_proof, *fresh) != VerifyStatus::ok)
    return done("failed", "augmented proof did not re-verify");
  rec.proof = result.final_proof;
  return done("proved");
}

namespace {

void drive_problem(const Problem& problem, const std::vector<StrategyConfig>& strategies,
                   Backend& backend, Sampler& sampler, CampaignLedger& ledger,
                   const CampaignOptions& options) {
  for (const StrategyConfig& strategy : strategies) {
    for (;;) {
      ProblemLedger state = ledger.snapshot(problem.name);
      if (state.proved || state.unavailable) return;
      if (state.queries_used >= options.budget) return;
      const std::size_t next = state.attempts_by_strategy[strategy.id];
      if (next >= strategy.attempts) break;
      run_attempt(problem, strategy, next, backend, sampler, ledger, options);
    }
  }
}

void check_inputs(const std::vector<StrategyConfig>& strategies, const CampaignOptions& options) {
  std::set<std::string> ids;
  for (const StrategyConfig& s : strategies) {
    s.validate();
    if (!ids.insert(s.id).second) throw ConfigError("duplicate strategy id '" + s.id + "'");
  }
  if (options.workers < 1) throw ConfigError("need at least one worker");
}

}  // namespace

void run_campaign(const std::vector<Problem>& problems,
                  const std::vector<StrategyConfig>& strategies, Backend& backend,
                  Sampler& sampler, CampaignLedger& ledger, const CampaignOptions& options) {
  check_inputs(strategies, options);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const long n = static_cast<long>(problems.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(options.workers)
  for (long k = 0; k < n; ++k) {
    try {
      drive_problem(problems[static_cast<std::size_t>(k)], strategies, backend, sampler, ledger,
                    options);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void run_campaign_serial(const std::vector<Problem>& problems,
                         const std::vector<StrategyConfig>& strategies, Backend& backend,
                         Sampler& sampler, CampaignLedger& ledger,
                         const CampaignOptions& options) {
  check_inputs(strategies, options);
  for (const Problem& p : problems) drive_problem(p, strategies, backend, sampler, ledger, options);
}

// ------------------------------------------------------------ metrics

nlohmann::json Metrics::to_json() const {
  nlohmann::json j{{"problems", problems},
                   {"proved", proved},
                   {"pass_rate", pass_rate()},
                   {"total_queries", total_queries}};
  j["pass_at"] = nlohmann::json::array();
  for (const auto& [b, rate] : pass_at) j["pass_at"].push_back({{"budget", b}, {"pass_rate", rate}});
  j["strategies"] = nlohmann::json::array();
  for (const StrategyRow& r : strategies)
    j["strategies"].push_back({{"strategy", r.strategy},
                               {"attempts", r.attempts},
                               {"queries", r.queries},
                               {"atp_calls", r.atp_calls},
                               {"proved", r.proved},
                               {"cumulative_pass", r.cumulative_pass}});
  j["query_histogram"] = nlohmann::json::object();
  for (const auto& [q, count] : query_histogram) j["query_histogram"][std::to_string(q)] = count;
  return j;
}

std::string Metrics::to_csv() const {
  std::ostringstream out;
  out << "section,key,value\n";
  out << "summary,problems," << problems << "\n";
  out << "summary,proved," << proved << "\n";
  out << "summary,total_queries," << total_queries << "\n";
  for (const auto& [b, rate] : pass_at) out << "pass_at," << b << "," << rate << "\n";
  for (const StrategyRow& r : strategies) {
    out << "strategy_attempts," << r.strategy << "," << r.attempts << "\n";
    out << "strategy_queries," << r.strategy << "," << r.queries << "\n";
    out << "strategy_proved," << r.strategy << "," << r.proved << "\n";
    out << "cumulative_pass," << r.strategy << "," << r.cumulative_pass << "\n";
  }
  for (const auto& [q, count] : query_histogram) out << "query_histogram," << q << "," << count << "\n";
  return out.str();
}

Metrics report(const std::vector<AttemptRecord>& records, std::size_t problem_count,
               std::uint64_t max_budget) {
  Metrics m;
  std::map<std::string, std::uint64_t> used;
  std::map<std::string, std::uint64_t> proved_at;
  std::map<std::string, std::string> proved_by;
  std::vector<std::string> strategy_order;
  std::map<std::string, StrategyRow> rows;

  for (const AttemptRecord& r : records) {
    used[r.problem] += r.queries();
    m.total_queries += r.queries();
    if (!rows.count(r.strategy)) {
      strategy_order.push_back(r.strategy);
      rows[r.strategy].strategy = r.strategy;
    }
    StrategyRow& row = rows[r.strategy];
    ++row.attempts;
    row.queries += r.queries();
    row.atp_calls += r.atp_calls;
    if (r.outcome == "proved" && !proved_at.count(r.problem)) {
      proved_at[r.problem] = used[r.problem];
      proved_by[r.problem] = r.strategy;
      ++row.proved;
    }
  }

  m.problems = problem_count != 0 ? problem_count : used.size();
  m.proved = proved_at.size();
  const double denom = m.problems == 0 ? 1.0 : static_cast<double>(m.problems);

  std::uint64_t top = max_budget;
  if (top == 0)
    for (const auto& [name, q] : used) top = std::max(top, q);
  top = std::max<std::uint64_t>(top, 1);
  for (std::uint64_t b = 1; b <= top; b *= 10) m.pass_at.emplace_back(b, 0.0);
  if (m.pass_at.back().first != top) m.pass_at.emplace_back(top, 0.0);
  for (auto& [b, rate] : m.pass_at) {
    std::size_t hit = 0;
    for (const auto& [name, q] : proved_at) hit += q <= b ? 1 : 0;
    rate = m.problems == 0 ? 0.0 : static_cast<double>(hit) / denom;
  }

  std::size_t running = 0;
  for (const std::string& id : strategy_order) {
    StrategyRow row = rows[id];
    running += row.proved;
    row.cumulative_pass = m.problems == 0 ? 0.0 : static_cast<double>(running) / denom;
    m.strategies.push_back(row);
  }

  for (const auto& [name, q] : used) ++m.query_histogram[q];
  if (m.problems > used.size()) m.query_histogram[0] += m.problems - used.size();
  return m;
}

// ------------------------------------------------------------ verification

std::string_view to_string(VerifyStatus status) {
  switch (status) {
    case VerifyStatus::ok: return "ok";
    case VerifyStatus::timeout: return "timeout";
    case VerifyStatus::failure: return "failure";
    case VerifyStatus::unavailable: return "unavailable";
  }
  return "?";
}

VerifyStatus verify_proof(std::string_view proof, Session& session) {
  const StepSequence seq = parse(proof);
  if (seq.empty() || !seq.balanced()) return VerifyStatus::failure;
  ITPState s = session.initial();
  for (const ProofStep& step : seq.steps) {
    if (step.kind == StepKind::sorry) return VerifyStatus::failure;
    s = session.apply(s, step);
    if (s.error) return s.timed_out ? VerifyStatus::timeout : VerifyStatus::failure;
  }
  return s.finish ? VerifyStatus::ok : VerifyStatus::failure;
}

std::size_t VerifyReport::count(VerifyStatus status) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                [&](const VerifyEntry& e) { return e.status == status; }));
}

VerifyReport verify(const std::vector<AttemptRecord>& records,
                    const std::map<std::string, std::string>& theorems, Backend& backend) {
  VerifyReport report;
  for (const AttemptRecord& r : records) {
    if (r.outcome != "proved") continue;
    VerifyEntry e{r.problem, r.strategy, r.attempt, VerifyStatus::unavailable};
    auto it = theorems.find(r.problem);
    if (it != theorems.end()) {
      try {
        auto session = backend.open(it->second);
        e.status = verify_proof(r.proof, *session);
      } catch (const ItpUnavailable&) {
        e.status = VerifyStatus::unavailable;
      }
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace proofaug
