#pragma once

// Abstract interactive-prover interface: states, sessions and the lifted
// transition function. Concrete backends live in mini_itp.hpp (scripted,
// deterministic) and remote_itp.hpp (line-delimited JSON client).

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "proofaug/frontend.hpp"

namespace proofaug {

enum class Mode { prove, state, chain };

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view text);

// The five observable attributes of a prover state, plus bookkeeping that
// does not take part in state equality.
struct ITPState {
  std::string state_text;
  std::optional<Mode> mode;  // engaged iff !error
  std::vector<std::string> facts;
  bool error = false;
  bool finish = false;

  bool timed_out = false;
  std::string message;
  std::uint64_t checkpoint = 0;

  bool in_prove_mode() const { return !error && mode == Mode::prove; }
};

// Equality over state_text, mode, facts (as a multiset), error and finish.
bool states_equal(const ITPState& a, const ITPState& b);

nlohmann::json to_json(const ITPState& s);
ITPState state_from_json(const nlohmann::json& j);

// One live prover session bound to a theorem statement. A session is used by
// one worker at a time; distinct sessions are independent.
class Session {
 public:
  virtual ~Session() = default;

  virtual const std::string& theorem() const = 0;
  // s0 advanced past the theorem statement.
  virtual ITPState initial() = 0;
  // T(from, step). `from` must be a state this session produced. A failed
  // step yields error=true and leaves the session at `from`.
  virtual ITPState apply(const ITPState& from, const ProofStep& step) = 0;
  virtual ITPState current() = 0;
  virtual void restore(const ITPState& state) = 0;
  virtual void close() = 0;
  virtual bool closed() const = 0;
  // Per-step time limit for subsequent applies. Backends without a notion of
  // wall time ignore it.
  virtual void set_step_timeout(std::chrono::milliseconds) {}

  // Number of transitions evaluated so far (successful or not).
  std::uint64_t transitions() const { return transitions_; }

 protected:
  std::uint64_t transitions_ = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::unique_ptr<Session> open(std::string_view theorem) = 0;
  virtual std::string describe() const = 0;
};

ITPState apply_step(const ITPState& s, const ProofStep& step, Session& session);

// Folds apply_step over parse(text); stops at the first error.
ITPState apply_steps(const ITPState& s, std::string_view text, Session& session);
ITPState apply_steps(const ITPState& s, std::span<const std::optional<ProofStep>> slots,
                     Session& session);

// True iff `proof` contains no sorry and drives the session from its initial
// state to finish=true.
bool is_proof(std::string_view theorem, std::string_view proof, Session& session);

inline ITPState checkpoint(Session& session) { return session.current(); }
inline void restore(Session& session, const ITPState& state) { session.restore(state); }

}  // namespace proofaug
