#include "proofaug/itp.hpp"

#include <algorithm>
#include <stdexcept>

namespace proofaug {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::prove: return "prove";
    case Mode::state: return "state";
    case Mode::chain: return "chain";
  }
  return "state";
}

std::optional<Mode> mode_from_string(std::string_view text) {
  if (text == "prove") return Mode::prove;
  if (text == "state") return Mode::state;
  if (text == "chain") return Mode::chain;
  return std::nullopt;
}

bool states_equal(const ITPState& a, const ITPState& b) {
  if (a.state_text != b.state_text || a.mode != b.mode || a.error != b.error ||
      a.finish != b.finish || a.facts.size() != b.facts.size())
    return false;
  std::vector<std::string> fa = a.facts;
  std::vector<std::string> fb = b.facts;
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  return fa == fb;
}

nlohmann::json to_json(const ITPState& s) {
  nlohmann::json j;
  j["state_text"] = s.state_text;
  j["mode"] = s.mode ? nlohmann::json(std::string(to_string(*s.mode))) : nlohmann::json();
  j["facts"] = s.facts;
  j["error"] = s.error;
  j["finish"] = s.finish;
  return j;
}

ITPState state_from_json(const nlohmann::json& j) {
  ITPState s;
  s.state_text = j.value("state_text", std::string{});
  if (j.contains("mode") && j["mode"].is_string())
    s.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("facts")) s.facts = j["facts"].get<std::vector<std::string>>();
  s.error = j.value("error", false);
  s.finish = j.value("finish", false);
  s.timed_out = j.value("timeout", false);
  s.message = j.value("message", std::string{});
  return s;
}

ITPState apply_step(const ITPState& s, const ProofStep& step, Session& session) {
  return session.apply(s, step);
}

ITPState apply_steps(const ITPState& s, std::span<const std::optional<ProofStep>> slots,
                     Session& session) {
  ITPState state = s;
  for (const auto& slot : slots) {
    if (!slot) continue;
    state = session.apply(state, *slot);
    if (state.error) break;
  }
  return state;
}

ITPState apply_steps(const ITPState& s, std::string_view text, Session& session) {
  StepSlots slots = to_slots(parse(text));
  return apply_steps(s, std::span<const std::optional<ProofStep>>(slots), session);
}

bool is_proof(std::string_view theorem, std::string_view proof, Session& session) {
  if (normalize_whitespace(theorem) != normalize_whitespace(session.theorem()))
    throw std::invalid_argument("session was opened for a different theorem");
  StepSequence seq = parse(proof);
  if (seq.empty()) return false;
  for (const ProofStep& step : seq.steps)
    if (step.kind == StepKind::sorry) return false;
  StepSlots slots = to_slots(seq);
  ITPState end =
      apply_steps(session.initial(), std::span<const std::optional<ProofStep>>(slots), session);
  return end.finish && !end.error;
}

}  // namespace proofaug
