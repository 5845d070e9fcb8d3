#pragma once

// Campaign runner: problems x strategies under a per-problem query budget,
// with a shared ledger, semi-proof cache, append-only attempt log, metrics
// and re-verification.

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "proofaug/engine.hpp"
#include "proofaug/itp.hpp"
#include "proofaug/lm.hpp"

namespace proofaug {

struct Problem {
  std::string name;
  std::string xi;
  std::string yi;
  std::string xf;
  // Inline MiniITP script for the `mini` backend.
  std::optional<nlohmann::json> mini_itp;

  static Problem from_json(const nlohmann::json& j);
};

// JSONL, one problem per line. Throws ConfigError on duplicate names or an
// empty formal statement.
std::vector<Problem> load_problems(const std::string& path);

struct StrategyConfig {
  std::string id;
  PromptTemplate prompt;
  std::vector<DemoExample> demos;
  std::size_t shots = 1;
  bool include_draft = true;
  bool erp = false;
  PromptTemplate erp_prompt;
  std::size_t erp_attempts = 1;
  std::size_t attempts = 1;
  ATPPortfolio portfolio = ATPPortfolio::standard();

  // Throws ConfigError.
  void validate() const;

  // Relative paths ("prompt", "demos", "erp_prompt") resolve against `base_dir`.
  static StrategyConfig from_json(const nlohmann::json& j, const std::string& base_dir);
  static StrategyConfig load(const std::string& path);
};

struct AttemptRecord {
  std::string problem;
  std::string strategy;
  std::size_t attempt = 0;
  // proved, failed, no_proposal, cached, budget_exhausted, unavailable
  std::string outcome;
  std::string proof;
  std::string reason;
  std::string cache_key;
  std::uint64_t proposal_queries = 0;
  std::uint64_t erp_queries = 0;
  std::uint64_t atp_calls = 0;
  std::size_t fallbacks = 0;
  double wall_ms = 0.0;
  std::string trace_path;

  std::uint64_t queries() const { return proposal_queries + erp_queries; }
  nlohmann::json to_json() const;
  static AttemptRecord from_json(const nlohmann::json& j);
};

std::vector<AttemptRecord> load_attempts(const std::string& path);

struct ProvedBy {
  std::string proof;
  std::string strategy;
  std::size_t attempt = 0;
  std::uint64_t queries_at_proof = 0;  // cumulative, including the proving attempt
};

struct ProblemLedger {
  std::uint64_t queries_used = 0;
  std::uint64_t atp_calls = 0;
  std::size_t attempts_run = 0;
  std::map<std::string, std::size_t> attempts_by_strategy;
  std::optional<ProvedBy> proved;
  std::set<std::string> semiproof_cache;
  bool unavailable = false;
};

// Canonical cache key of a semi-proof: its normalized rendering.
std::string cache_key(const SemiProof& semi);

// Stable digest of the settings that decide what augmenting a semi-proof
// does (completion step on/off, its attempts, the portfolio). The campaign
// cache is keyed by semi-proof and this digest, so a strategy with different
// settings still gets to try a semi-proof another strategy gave up on.
std::string augment_signature(const StrategyConfig& strategy);

// Thread-safe ledger. Each problem is driven by one worker at a time, but
// workers for different problems share this object.
class CampaignLedger {
 public:
  CampaignLedger() = default;
  // Appends each recorded attempt to `log_path` as one JSON line.
  explicit CampaignLedger(std::string log_path);

  // Rebuilds state from earlier records (resume).
  void replay(const std::vector<AttemptRecord>& records);

  void record(const AttemptRecord& rec);
  // True iff `key` was not yet seen for `problem`; inserts it.
  bool check_and_insert(const std::string& problem, const std::string& key);

  ProblemLedger snapshot(const std::string& problem) const;
  std::map<std::string, ProblemLedger> snapshot() const;
  std::vector<AttemptRecord> records() const;
  void mark_unavailable(const std::string& problem);

 private:
  void apply(const AttemptRecord& rec);

  mutable std::mutex mutex_;
  std::map<std::string, ProblemLedger> problems_;
  std::vector<AttemptRecord> records_;
  std::string log_path_;
};

struct CampaignOptions {
  std::uint64_t budget = 1;  // LM queries per problem
  int workers = 12;
  bool cache = true;
  std::uint64_t seed = 0;
  std::string trace_dir;  // empty: traces are not written
};

// Runs one attempt of `strategy` on `problem` and records it. Returns the
// record (also appended to the ledger).
AttemptRecord run_attempt(const Problem& problem, const StrategyConfig& strategy,
                          std::size_t attempt, Backend& backend, Sampler& sampler,
                          CampaignLedger& ledger, const CampaignOptions& options);

// Strategies run in the declared order until the problem is proved or its
// budget is spent. Problems are processed by up to `options.workers` threads.
void run_campaign(const std::vector<Problem>& problems,
                  const std::vector<StrategyConfig>& strategies, Backend& backend,
                  Sampler& sampler, CampaignLedger& ledger, const CampaignOptions& options);

// Same schedule on the calling thread only.
void run_campaign_serial(const std::vector<Problem>& problems,
                         const std::vector<StrategyConfig>& strategies, Backend& backend,
                         Sampler& sampler, CampaignLedger& ledger,
                         const CampaignOptions& options);

struct StrategyRow {
  std::string strategy;
  std::size_t attempts = 0;
  std::uint64_t queries = 0;
  std::uint64_t atp_calls = 0;
  std::size_t proved = 0;           // problems first proved by this strategy
  double cumulative_pass = 0.0;     // after this strategy and all before it
};

struct Metrics {
  std::size_t problems = 0;
  std::size_t proved = 0;
  std::uint64_t total_queries = 0;
  std::vector<std::pair<std::uint64_t, double>> pass_at;  // budget -> pass rate
  std::vector<StrategyRow> strategies;
  std::map<std::uint64_t, std::size_t> query_histogram;   // queries used -> problems

  double pass_rate() const { return problems == 0 ? 0.0 : double(proved) / double(problems); }
  nlohmann::json to_json() const;
  // Plot-ready: "section,key,value" rows.
  std::string to_csv() const;
};

// Pure function of the records. `problem_count` is the campaign size; when 0
// the number of distinct problems in `records` is used. Checkpoints are
// 1, 10, 100, ... up to `max_budget`, plus `max_budget` itself.
Metrics report(const std::vector<AttemptRecord>& records, std::size_t problem_count = 0,
               std::uint64_t max_budget = 0);

enum class VerifyStatus { ok, timeout, failure, unavailable };
std::string_view to_string(VerifyStatus status);

// Replays `proof` on `session` from its initial state.
VerifyStatus verify_proof(std::string_view proof, Session& session);

struct VerifyEntry {
  std::string problem;
  std::string strategy;
  std::size_t attempt = 0;
  VerifyStatus status = VerifyStatus::ok;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  std::size_t count(VerifyStatus status) const;
};

// Re-checks every proved record on a fresh session. `theorems` maps problem
// names to formal statements.
VerifyReport verify(const std::vector<AttemptRecord>& records,
                    const std::map<std::string, std::string>& theorems, Backend& backend);

}  // namespace proofaug
