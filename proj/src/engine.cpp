#include "proofaug/engine.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "proofaug/error.hpp"
#include "proofaug/mini_itp.hpp"

namespace proofaug {

// ------------------------------------------------------------ portfolio

ATPPortfolio ATPPortfolio::standard() {
  ATPPortfolio p;
  p.methods = {"auto", "simp",  "blast",            "fastforce",         "eval",
               "sos",  "arith", "simp:field_simps", "simp add:mod_simps"};
  return p;
}

void ATPPortfolio::validate() const {
  if (methods.empty()) throw ConfigError("ATP portfolio has no methods");
  if (step_timeout.count() <= 0 || hammer_timeout.count() <= 0)
    throw ConfigError("ATP timeouts must be positive");
}

nlohmann::json ATPPortfolio::to_json() const {
  nlohmann::json j{{"methods", methods},
                   {"step_timeout_s", step_timeout.count() / 1000.0},
                   {"hammer_timeout_s", hammer_timeout.count() / 1000.0}};
  j["hammer"] = hammer ? nlohmann::json(*hammer) : nlohmann::json(nullptr);
  return j;
}

ATPPortfolio ATPPortfolio::from_json(const nlohmann::json& j) {
  ATPPortfolio p = standard();
  try {
    if (j.contains("methods")) p.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("hammer") && !j.at("hammer").is_null())
      p.hammer = j.at("hammer").get<std::string>();
    auto ms = [](double s) {
      return std::chrono::milliseconds(static_cast<std::int64_t>(s * 1000.0));
    };
    if (j.contains("step_timeout_s")) p.step_timeout = ms(j.at("step_timeout_s").get<double>());
    if (j.contains("hammer_timeout_s"))
      p.hammer_timeout = ms(j.at("hammer_timeout_s").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed portfolio: ") + e.what());
  }
  p.validate();
  return p;
}

// ------------------------------------------------------------ trace

nlohmann::json TraceEvent::to_json() const {
  nlohmann::json j{{"t", t}, {"pos", pos}, {"level", level}};
  if (method) j["method"] = *method;
  if (ok) j["ok"] = *ok;
  if (goal) j["goal"] = *goal;
  if (span) j["span"] = {span->first, span->second};
  if (!note.empty()) j["note"] = note;
  return j;
}

std::string trace_jsonl(const std::vector<TraceEvent>& trace) {
  std::string out;
  for (const TraceEvent& e : trace) {
    out += e.to_json().dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> milestones(const std::vector<TraceEvent>& trace) {
  std::vector<std::string> out;
  for (const TraceEvent& e : trace) {
    const std::string at = "@" + std::to_string(e.pos);
    if (e.t == "atp_try" && e.ok.value_or(false)) {
      out.push_back("atp_ok" + at + ":" + e.method.value_or("?"));
    } else if (e.t == "erp_query") {
      out.push_back("erp_query" + at);
    } else if (e.t == "erp_result") {
      out.push_back((e.ok.value_or(false) ? "erp_accept" : "erp_reject") + at);
    } else if (e.t == "fallback") {
      out.push_back(e.span ? "fallback@" + std::to_string(e.span->first) + "-" +
                                 std::to_string(e.span->second)
                           : std::string("fallback@whole"));
    } else if (e.t == "outcome") {
      out.push_back(e.ok.value_or(false) ? "proved" : "failed");
    }
  }
  return out;
}

// ------------------------------------------------------------ node order

namespace {

bool is_ancestor(const ERPNode& a, const ERPNode& b) {
  if (!a.scope || (a.position == b.position && a.order == b.order)) return false;
  return std::find(b.ancestry.begin(), b.ancestry.end(), *a.scope) != b.ancestry.end();
}

}  // namespace

bool erp_before(const ERPNode& a, const ERPNode& b) {
  if (is_ancestor(b, a)) return true;
  if (is_ancestor(a, b)) return false;
  if (a.position != b.position) return a.position < b.position;
  return a.order < b.order;
}

const ERPNode& select_next_node(const std::vector<ERPNode>& frontier) {
  if (frontier.empty()) throw std::invalid_argument("select_next_node: empty frontier");
  const ERPNode* best = &frontier.front();
  for (const ERPNode& n : frontier)
    if (erp_before(n, *best)) best = &n;
  return *best;
}

void ERPConfig::validate() const {
  if (enabled && sampler == nullptr) throw ConfigError("ERP enabled without a sampler");
  if (enabled && attempts == 0) throw ConfigError("ERP needs at least one attempt");
}

// ------------------------------------------------------------ ATP

AtpOutcome atp_try(const ITPState& s, Session& session, const ATPPortfolio& portfolio) {
  AtpOutcome out;
  out.state = s;
  out.state.error = true;
  out.state.mode.reset();
  out.state.message = "no portfolio method closed the goal";
  if (!s.in_prove_mode()) {
    out.state.message = "automatic methods need a pending goal";
    return out;
  }

  auto attempt = [&](const std::string& method) {
    ITPState next = session.apply(s, ProofStep{method_step_text(method), StepKind::terminal_method});
    const bool ok = !next.error;
    out.tries.emplace_back(method, ok);
    if (ok) {
      out.state = std::move(next);
      out.method = method;
    } else {
      session.restore(s);
    }
    return ok;
  };

  session.set_step_timeout(portfolio.step_timeout);
  for (const std::string& m : portfolio.methods)
    if (attempt(m)) return out;
  if (portfolio.hammer) {
    session.set_step_timeout(portfolio.hammer_timeout);
    attempt(*portfolio.hammer);
    session.set_step_timeout(portfolio.step_timeout);
  }
  return out;
}

std::optional<std::string> failed_tactics_to_atp(std::string_view completion, const ITPState& s,
                                                 Session& session,
                                                 const ATPPortfolio& portfolio,
                                                 std::uint64_t* atp_calls) {
  StepSequence seq = parse(completion);
  if (!seq.balanced() || seq.empty()) return std::nullopt;
  StepSlots out = to_slots(seq);
  ITPState cur = s;
  bool changed = false;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const ProofStep& step = *out[k];
    if (step.kind == StepKind::sorry) return std::nullopt;
    ITPState next = session.apply(cur, step);
    if (!next.error) {
      cur = std::move(next);
      continue;
    }
    if (!(cur.in_prove_mode() && step.kind == StepKind::terminal_method)) return std::nullopt;
    session.restore(cur);
    AtpOutcome atp = atp_try(cur, session, portfolio);
    if (atp_calls) *atp_calls += atp.tries.size();
    if (!atp.solved()) return std::nullopt;
    out[k] = ProofStep{method_step_text(*atp.method), StepKind::terminal_method, step.index};
    cur = std::move(atp.state);
    changed = true;
  }
  if (!changed) return std::string(completion);
  return render(out);
}

// ------------------------------------------------------------ ERP

namespace {

// Kind a completion should carry inside the step array: single-step
// completions keep their own kind so rendering stays idiomatic.
ProofStep completion_step(const std::string& text) {
  StepSequence seq = parse(text);
  if (seq.size() == 1) return ProofStep{seq.steps.front().text, seq.steps.front().kind};
  return ProofStep{render(seq), StepKind::other};
}

}  // namespace

ErpOutcome erp_attempt(const ERPNode& node, Session& session, const ERPConfig& erp,
                       const ATPPortfolio& portfolio, AugmentResult& result) {
  if (erp.sampler == nullptr) throw SamplerUnavailable("ERP enabled without a sampler");
  ErpOutcome out;

  // s_next is computed once from a checkpoint and only used for comparison.
  const ITPState s_next = session.apply(node.state, ProofStep::make_sorry());
  session.restore(node.state);

  PartialProof partial{node.prefix.empty() ? std::string() : node.prefix + "\n",
                       node.state.state_text};
  const std::string prompt = build_prompt(erp.prompt, erp.demos, erp.problem, partial);

  const std::size_t level = result.fallbacks;
  for (std::size_t a = 0; a < erp.attempts; ++a) {
    if (erp.may_sample && !erp.may_sample()) throw BudgetExhausted("query budget exhausted");
    SampleResult sample = erp.sampler->sample(prompt, erp.prompt.stop);
    if (sample.consumed) ++result.erp_queries;
    TraceEvent query{"erp_query", node.position, level};
    query.goal = node.state.state_text;
    if (sample.skipped) query.note = "skipped: " + sample.error;
    if (sample.failed) query.note = "sampler failure: " + sample.error;
    result.trace.push_back(query);

    TraceEvent verdict{"erp_result", node.position, level};
    verdict.ok = false;
    if (sample.skipped || sample.failed || sample.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      verdict.note = "no completion";
      result.trace.push_back(verdict);
      continue;
    }

    const std::string completion = normalize_whitespace(sample.text);
    ITPState reached = apply_steps(node.state, completion, session);
    const StepSequence parsed = parse(completion);
    const bool has_sorry = std::any_of(parsed.steps.begin(), parsed.steps.end(),
                                       [](const ProofStep& s) { return s.kind == StepKind::sorry; });
    if (!has_sorry && states_equal(reached, s_next)) {
      verdict.ok = true;
      verdict.note = "accepted";
      result.trace.push_back(verdict);
      out.replacement = completion;
      out.state = reached;
      return out;
    }
    session.restore(node.state);
    if (!has_sorry) {
      if (auto repaired = failed_tactics_to_atp(completion, node.state, session, portfolio,
                                                &result.atp_calls)) {
        ITPState again = apply_steps(node.state, *repaired, session);
        if (states_equal(again, s_next)) {
          verdict.ok = true;
          verdict.note = "repaired";
          result.trace.push_back(verdict);
          out.replacement = *repaired;
          out.state = again;
          return out;
        }
        session.restore(node.state);
      }
    }
    verdict.note = "rejected";
    result.trace.push_back(verdict);
  }
  return out;
}

// ------------------------------------------------------------ augmentation

namespace {

struct Scan {
  Session& session;
  const ATPPortfolio& portfolio;
  AugmentResult& result;

  // Runs the portfolio and records one event per try.
  AtpOutcome atp(const ITPState& s, std::size_t pos) {
    AtpOutcome out = atp_try(s, session, portfolio);
    result.atp_calls += out.tries.size();
    for (const auto& [method, ok] : out.tries) {
      TraceEvent e{"atp_try", pos, result.fallbacks};
      e.method = method;
      e.ok = ok;
      e.goal = s.state_text;
      result.trace.push_back(std::move(e));
    }
    return out;
  }

  void finish(bool proved, std::string proof_or_reason) {
    TraceEvent e{"outcome", 0, result.fallbacks};
    e.ok = proved;
    result.proved = proved;
    if (proved) {
      result.final_proof = std::move(proof_or_reason);
    } else {
      result.reason = std::move(proof_or_reason);
      e.note = result.reason;
    }
    result.trace.push_back(std::move(e));
  }

  // The semi-proof has degraded into a single sorry for the whole theorem.
  void whole_theorem(const std::string& why) {
    TraceEvent e{"fallback", 0, result.fallbacks};
    e.note = why;
    result.trace.push_back(std::move(e));
    ++result.fallbacks;
    AtpOutcome atp_out = atp(session.initial(), 0);
    if (atp_out.solved() && atp_out.state.finish) {
      finish(true, method_step_text(*atp_out.method));
    } else {
      finish(false, why + "; no automatic method proves the theorem");
    }
  }
};

}  // namespace

AugmentResult augment(std::string_view xf, std::string_view proposal, Session& session,
                      const ATPPortfolio& portfolio, const ERPConfig& erp,
                      const AugmentHooks& hooks) {
  portfolio.validate();
  erp.validate();
  if (normalize_whitespace(xf) != normalize_whitespace(session.theorem()))
    throw std::invalid_argument("session was opened for a different theorem");

  AugmentResult result;
  Scan scan{session, portfolio, result};

  McspResult mcsp = find_mcsp_detailed(proposal, session);
  if (!mcsp.semi_proof) {
    // Nothing of the proposal survives: the semi-proof is a lone sorry.
    SemiProof lone;
    lone.steps.steps.push_back(ProofStep::make_sorry());
    lone.steps.steps.back().index = 1;
    lone.steps.source = "sorry";
    lone.source_proposal = std::string(proposal);
    result.semi_proof = lone.text();
    if (hooks.admit && !hooks.admit(lone)) {
      result.skipped_by_cache = true;
      scan.finish(false, "semi-proof already checked");
      return result;
    }
    scan.whole_theorem("no compatible semi-proof: " + mcsp.diagnostic);
    return result;
  }
  const SemiProof& semi = *mcsp.semi_proof;
  result.semi_proof = semi.text();
  if (hooks.admit && !hooks.admit(semi)) {
    result.skipped_by_cache = true;
    scan.finish(false, "semi-proof already checked");
    return result;
  }

  const BlockTree tree = block_tree(semi.steps);
  StepSlots a = to_slots(semi.steps);
  const std::size_t n = a.size();
  StateArray s(n + 1);
  std::vector<bool> collapsed(tree.spans.size(), false);
  // Sorries of the semi-proof itself; only these get completion requests.
  std::set<std::size_t> conjectures;
  for (const SorryOrigin& o : semi.origin) conjectures.insert(o.step);
  std::vector<ERPNode> frontier;
  std::size_t node_order = 0;

  auto mark = [&](auto&& self, std::size_t id) -> void {
    collapsed[id] = true;
    for (std::size_t c : tree.children[id]) self(self, c);
  };
  auto ancestry_of = [&](std::size_t i) {
    std::vector<std::size_t> chain;
    for (const BlockSpan& span : tree.spans)
      if (span.kind == SpanKind::block && span.contains(i)) chain.push_back(span.id);
    return chain;
  };

  std::size_t i = 1;
  ITPState cur = session.initial();
  while (i <= n) {
    if (!a[i - 1]) {
      ++i;
      continue;
    }
    s[i] = cur;
    const ProofStep step = *a[i - 1];
    if (step.kind != StepKind::sorry) {
      ITPState next = session.apply(cur, step);
      if (next.error) {
        // Cannot happen for steps the semi-proof already checked unless the
        // backend is not deterministic.
        scan.finish(false, "replay failed at step " + std::to_string(i) + ": " + next.message);
        return result;
      }
      result.trace.push_back(TraceEvent{"step_ok", i, result.fallbacks});
      cur = std::move(next);
      ++i;
      continue;
    }

    AtpOutcome atp = scan.atp(cur, i);
    if (atp.solved()) {
      a[i - 1] = ProofStep{method_step_text(*atp.method), StepKind::terminal_method, i};
      cur = std::move(atp.state);
      ++i;
      continue;
    }

    if (erp.enabled && conjectures.count(i)) {
      std::vector<ProofStep> prefix;
      for (std::size_t k = 1; k < i; ++k)
        if (a[k - 1]) prefix.push_back(*a[k - 1]);
      StepSequence prefix_seq{std::move(prefix), {}, std::nullopt};
      frontier.push_back(ERPNode{i, render(prefix_seq), cur, ancestry_of(i), std::nullopt,
                                 node_order++});
      const ERPNode node = select_next_node(frontier);
      frontier.erase(std::find_if(frontier.begin(), frontier.end(),
                                  [&](const ERPNode& x) { return x.order == node.order; }));
      ErpOutcome done;
      try {
        done = erp_attempt(node, session, erp, portfolio, result);
      } catch (const BudgetExhausted& e) {
        session.restore(cur);
        result.budget_exhausted = true;
        scan.finish(false, e.what());
        return result;
      }
      if (done.replacement) {
        ProofStep repl = completion_step(*done.replacement);
        repl.index = i;
        a[i - 1] = std::move(repl);
        cur = std::move(done.state);
        ++i;
        continue;
      }
      session.restore(cur);
    }

    std::optional<BlockSpan> block =
        innermost_block(i, tree, [&](const BlockSpan& b) { return !collapsed[b.id]; });
    if (!block) {
      bool prefix_empty = true;
      for (std::size_t k = 1; k < i; ++k) prefix_empty = prefix_empty && !a[k - 1];
      if (prefix_empty && states_equal(cur, session.initial())) {
        // The portfolio has just failed on the whole theorem.
        scan.finish(false, "no automatic method proves the theorem");
      } else {
        scan.whole_theorem("failure outside every block at step " + std::to_string(i));
      }
      return result;
    }

    TraceEvent fb{"fallback", i, result.fallbacks};
    fb.span = std::make_pair(block->start, block->end);
    result.trace.push_back(std::move(fb));
    ++result.fallbacks;
    for (std::size_t k = block->start; k < block->end; ++k) a[k - 1].reset();
    a[block->end - 1] = ProofStep::make_sorry();
    mark(mark, block->id);
    i = block->end;
    cur = *s[block->start];
    session.restore(cur);
  }

  if (!cur.finish) {
    scan.finish(false, "augmented proof does not finish the theorem");
    return result;
  }
  scan.finish(true, render(a));
  return result;
}

}  // namespace proofaug
