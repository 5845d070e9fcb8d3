#pragma once

// Proof augmentation: fill the sorries of a maximal compatible semi-proof
// with a portfolio of automatic methods, optionally ask the language model for
// a completion of a failed conjecture, and fall back to coarser blocks when
// both give up.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "proofaug/itp.hpp"
#include "proofaug/lm.hpp"
#include "proofaug/mcsp.hpp"

namespace proofaug {

struct ATPPortfolio {
  std::vector<std::string> methods;
  std::optional<std::string> hammer;
  std::chrono::milliseconds step_timeout{std::chrono::seconds(10)};
  std::chrono::milliseconds hammer_timeout{std::chrono::seconds(120)};

  // auto, simp, blast, fastforce, eval, sos, arith, simp:field_simps,
  // simp add:mod_simps; no hammer.
  static ATPPortfolio standard();

  // Throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  static ATPPortfolio from_json(const nlohmann::json& j);
};

struct TraceEvent {
  // step_ok, atp_try, erp_query, erp_result, fallback, outcome
  std::string t;
  std::size_t pos = 0;
  std::size_t level = 0;  // number of fallbacks taken so far
  std::optional<std::string> method;
  std::optional<bool> ok;
  std::optional<std::string> goal;
  std::optional<std::pair<std::size_t, std::size_t>> span;
  std::string note;

  TraceEvent() = default;
  TraceEvent(std::string type, std::size_t position, std::size_t lvl)
      : t(std::move(type)), pos(position), level(lvl) {}

  nlohmann::json to_json() const;
};

// One line per event.
std::string trace_jsonl(const std::vector<TraceEvent>& trace);

// Compact view used by scenario tests: "atp_ok@3:arith", "erp_query@5",
// "erp_reject@5", "fallback@1-9", "proved". Step and failed-try events are
// dropped.
std::vector<std::string> milestones(const std::vector<TraceEvent>& trace);

struct AugmentResult {
  bool proved = false;
  std::string final_proof;
  std::string reason;  // why it failed
  std::string semi_proof;
  std::uint64_t atp_calls = 0;
  std::uint64_t erp_queries = 0;
  std::size_t fallbacks = 0;
  bool skipped_by_cache = false;
  bool budget_exhausted = false;
  std::vector<TraceEvent> trace;
};

// A failed conjecture of the semi-proof waiting for a completion.
struct ERPNode {
  std::size_t position = 0;
  std::string prefix;  // verified steps a[1..position-1]
  ITPState state;      // pre-state of the sorry
  // Ids of the blocks containing the node, outermost first.
  std::vector<std::size_t> ancestry;
  // Block whose goal this node stands for, if the node sits at a block end.
  std::optional<std::size_t> scope;
  std::size_t order = 0;  // insertion order
};

// Priority: a descendant beats its ancestor; otherwise the earlier position;
// then insertion order.
bool erp_before(const ERPNode& a, const ERPNode& b);

// Requires a non-empty frontier.
const ERPNode& select_next_node(const std::vector<ERPNode>& frontier);

struct ERPConfig {
  bool enabled = false;
  Sampler* sampler = nullptr;
  PromptTemplate prompt;
  DemoExample problem;              // xi, yi, xf of the theorem (yf unused)
  std::vector<DemoExample> demos;   // usually empty: zero-shot
  std::size_t attempts = 1;         // completions per conjecture
  // Consulted before every sample; returning false raises BudgetExhausted.
  std::function<bool()> may_sample;

  // Throws ConfigError when enabled without a sampler.
  void validate() const;
};

struct AugmentHooks {
  // Called with the semi-proof before any ATP work; returning false skips the
  // attempt (the semi-proof was already checked).
  std::function<bool(const SemiProof&)> admit;
};

struct AtpOutcome {
  ITPState state;                      // error marker if nothing worked
  std::optional<std::string> method;   // winning method
  std::vector<std::pair<std::string, bool>> tries;
  bool solved() const { return method.has_value(); }
};

// Tries `by m` for each method in order, then the hammer.
AtpOutcome atp_try(const ITPState& s, Session& session, const ATPPortfolio& portfolio);

inline ITPState atp_solve(const ITPState& s, Session& session, const ATPPortfolio& portfolio) {
  return atp_try(s, session, portfolio).state;
}

// Replays `completion` from `s`, replacing each terminal method that fails in
// prove mode by a working portfolio method. Absent on any other error.
std::optional<std::string> failed_tactics_to_atp(std::string_view completion, const ITPState& s,
                                                 Session& session,
                                                 const ATPPortfolio& portfolio,
                                                 std::uint64_t* atp_calls = nullptr);

struct ErpOutcome {
  std::optional<std::string> replacement;
  ITPState state;  // state after the replacement when accepted
};

// Asks for completions of `node` and accepts the first one that reaches the
// same state as sorry would. Throws SamplerUnavailable or BudgetExhausted.
ErpOutcome erp_attempt(const ERPNode& node, Session& session, const ERPConfig& erp,
                       const ATPPortfolio& portfolio, AugmentResult& result);

// Runs the whole augmentation. A BudgetExhausted raised by the completion
// step ends the run as a failure with `budget_exhausted` set, so the queries
// already spent stay on record.
AugmentResult augment(std::string_view xf, std::string_view proposal, Session& session,
                      const ATPPortfolio& portfolio, const ERPConfig& erp = {},
                      const AugmentHooks& hooks = {});

}  // namespace proofaug
