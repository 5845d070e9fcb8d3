#pragma once

// MiniITP: a deterministic, scriptable prover used as the test double for a
// real Isar backend. A script is a goal graph; proof steps are interpreted
// against it with a small prove/state/chain mode machine.
//
// Script JSON:
//   {"root": "g0", "universe": ["auto", ...],
//    "goals": [{"id": "g0", "solvable_by": [...], "children": [...],
//               "conjectures": {"\"x > 0\"": "g1", "?thesis": "g2"},
//               "needs": [...], "timeout_by": [...]}]}
// `needs` and `timeout_by` are optional. A method in `solvable_by` closes
// the goal only when every id in `needs` is an available fact; a method in
// `timeout_by` simulates a step that exceeds its time budget.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "proofaug/itp.hpp"

namespace proofaug {

struct MiniGoal {
  std::string id;
  std::vector<std::string> solvable_by;
  std::vector<std::string> children;
  std::map<std::string, std::string> conjectures;  // normalized text -> goal id
  std::vector<std::string> needs;
  std::vector<std::string> timeout_by;
};

struct MiniScript {
  std::string name;  // theorem name used to bind sessions; may be empty
  std::string root;
  std::vector<std::string> universe;
  std::vector<MiniGoal> goals;

  const MiniGoal& goal(std::string_view id) const;
  const MiniGoal* find(std::string_view id) const;

  // Throws ConfigError on duplicate ids, dangling references, cycles,
  // unreachable goals or methods outside the universe.
  void validate() const;

  nlohmann::json to_json() const;
  static MiniScript from_json(const nlohmann::json& j);
  static MiniScript load(const std::string& path);
};

// Canonical method spelling used for lookups: outer parentheses and all
// whitespace removed.
std::string normalize_method(std::string_view method);

// Step text for closing a goal with `method`: "by m", "by (m)", "." or "..".
std::string method_step_text(std::string_view method);

// "have c1: \"x\"" -> "\"x\"": drops a leading `name:` label.
std::string strip_label(std::string_view text);

// Name following `theorem`/`lemma` in a statement, or empty.
std::string theorem_name(std::string_view statement);

class MiniSession;

class MiniBackend : public Backend {
 public:
  MiniBackend() = default;
  explicit MiniBackend(MiniScript script);

  void add(MiniScript script);
  // Registers `script` under the name of `statement`.
  void add(std::string_view statement, MiniScript script);

  // Loads a JSON object {name: script} or a directory of <name>.json files.
  static MiniBackend from_path(const std::string& path);

  std::unique_ptr<Session> open(std::string_view theorem) override;
  std::unique_ptr<MiniSession> open_mini(std::string_view theorem);
  std::string describe() const override { return "mini"; }

  bool has(std::string_view name) const;

 private:
  std::unordered_map<std::string, std::shared_ptr<const MiniScript>> scripts_;
};

class MiniSession : public Session {
 public:
  MiniSession(std::string theorem, std::shared_ptr<const MiniScript> script);

  const std::string& theorem() const override { return theorem_; }
  ITPState initial() override;
  ITPState apply(const ITPState& from, const ProofStep& step) override;
  ITPState current() override;
  void restore(const ITPState& state) override;
  void close() override { closed_ = true; }
  bool closed() const override { return closed_; }

  const MiniScript& script() const { return *script_; }

  // Internal machine state behind a checkpoint.
  struct Frame {
    std::string goal;
    std::vector<std::string> facts;
  };
  struct Machine {
    std::vector<Frame> frames;
    std::optional<std::string> pending;
    Mode mode = Mode::prove;
    bool finished = false;
  };

  const Machine& machine(const ITPState& state) const;
  // Goal awaiting a proof method in `state`, if any.
  std::optional<std::string> pending_goal(const ITPState& state) const;

 private:
  void ensure_open() const;
  ITPState observe(const Machine& m, std::uint64_t id) const;
  ITPState fail(const ITPState& from, std::string message, bool timeout = false) const;
  std::vector<std::string> visible_facts(const Machine& m) const;

  std::string theorem_;
  std::shared_ptr<const MiniScript> script_;
  std::vector<Machine> checkpoints_;
  std::uint64_t current_ = 0;
  bool closed_ = false;
};

}  // namespace proofaug
