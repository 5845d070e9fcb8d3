#include "proofaug/mini_itp.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

#include "proofaug/error.hpp"

namespace proofaug {

namespace {

bool contains(const std::vector<std::string>& v, std::string_view x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

bool is_ident(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

}  // namespace

std::string normalize_method(std::string_view method) {
  std::string compact;
  for (char c : method)
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  // Strip parentheses only when they wrap the whole method.
  while (compact.size() >= 2 && compact.front() == '(' && compact.back() == ')') {
    int depth = 0;
    bool wraps = true;
    for (std::size_t i = 0; i < compact.size(); ++i) {
      if (compact[i] == '(') ++depth;
      if (compact[i] == ')') --depth;
      if (depth == 0 && i + 1 < compact.size()) {
        wraps = false;
        break;
      }
    }
    if (!wraps) break;
    compact = compact.substr(1, compact.size() - 2);
  }
  return compact;
}

std::string method_step_text(std::string_view method) {
  if (method == "." || method == "..") return std::string(method);
  const bool simple = !method.empty() && std::all_of(method.begin(), method.end(), is_ident);
  if (simple) return "by " + std::string(method);
  if (method.front() == '(' && method.back() == ')') return "by " + std::string(method);
  return "by (" + std::string(method) + ")";
}

std::string strip_label(std::string_view text) {
  std::size_t j = 0;
  while (j < text.size() && is_ident(text[j])) ++j;
  if (j == 0) return normalize_whitespace(text);
  std::size_t k = j;
  while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
  if (k < text.size() && text[k] == ':' && (k + 1 >= text.size() || text[k + 1] != ':'))
    return normalize_whitespace(text.substr(k + 1));
  return normalize_whitespace(text);
}

std::string theorem_name(std::string_view statement) {
  const std::string clean = strip_comments(statement);
  for (std::string_view kw : {"theorem", "lemma"}) {
    std::size_t pos = 0;
    while ((pos = clean.find(kw, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_ident(clean[pos - 1]);
      std::size_t j = pos + kw.size();
      const bool right_ok = j >= clean.size() || !is_ident(clean[j]);
      if (left_ok && right_ok) {
        while (j < clean.size() && std::isspace(static_cast<unsigned char>(clean[j]))) ++j;
        std::size_t k = j;
        while (k < clean.size() && is_ident(clean[k])) ++k;
        return clean.substr(j, k - j);
      }
      pos += kw.size();
    }
  }
  return {};
}

// ---------------------------------------------------------------- script

const MiniGoal* MiniScript::find(std::string_view id) const {
  for (const MiniGoal& g : goals)
    if (g.id == id) return &g;
  return nullptr;
}

const MiniGoal& MiniScript::goal(std::string_view id) const {
  if (const MiniGoal* g = find(id)) return *g;
  throw ConfigError("unknown goal id '" + std::string(id) + "'");
}

void MiniScript::validate() const {
  std::set<std::string> ids;
  for (const MiniGoal& g : goals)
    if (!ids.insert(g.id).second) throw ConfigError("duplicate goal id '" + g.id + "'");
  if (!ids.count(root)) throw ConfigError("root '" + root + "' is not a goal");

  std::set<std::string> methods;
  for (const std::string& m : universe) methods.insert(normalize_method(m));

  auto edges = [](const MiniGoal& g) {
    std::vector<std::string> out = g.children;
    for (const auto& [text, target] : g.conjectures) out.push_back(target);
    return out;
  };
  for (const MiniGoal& g : goals) {
    for (const std::string& target : edges(g))
      if (!ids.count(target))
        throw ConfigError("goal '" + g.id + "' references unknown goal '" + target + "'");
    for (const std::string& need : g.needs)
      if (!ids.count(need))
        throw ConfigError("goal '" + g.id + "' needs unknown goal '" + need + "'");
    for (const auto* list : {&g.solvable_by, &g.timeout_by})
      for (const std::string& m : *list)
        if (!methods.count(normalize_method(m)))
          throw ConfigError("method '" + m + "' of goal '" + g.id + "' is not in the universe");
  }

  // Cycle and reachability check by DFS from the root.
  enum class Mark { none, active, done };
  std::map<std::string, Mark> mark;
  std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
  mark[root] = Mark::active;
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    const std::vector<std::string> out = edges(goal(id));
    if (next == out.size()) {
      mark[id] = Mark::done;
      stack.pop_back();
      continue;
    }
    const std::string target = out[next++];
    if (mark[target] == Mark::active) throw ConfigError("goal graph has a cycle through '" + target + "'");
    if (mark[target] == Mark::none) {
      mark[target] = Mark::active;
      stack.emplace_back(target, 0);
    }
  }
  for (const MiniGoal& g : goals)
    if (mark[g.id] != Mark::done) throw ConfigError("goal '" + g.id + "' is unreachable from the root");
}

nlohmann::json MiniScript::to_json() const {
  nlohmann::json j;
  if (!name.empty()) j["name"] = name;
  j["root"] = root;
  j["universe"] = universe;
  j["goals"] = nlohmann::json::array();
  for (const MiniGoal& g : goals) {
    nlohmann::json jg;
    jg["id"] = g.id;
    jg["solvable_by"] = g.solvable_by;
    jg["children"] = g.children;
    jg["conjectures"] = g.conjectures;
    if (!g.needs.empty()) jg["needs"] = g.needs;
    if (!g.timeout_by.empty()) jg["timeout_by"] = g.timeout_by;
    j["goals"].push_back(std::move(jg));
  }
  return j;
}

MiniScript MiniScript::from_json(const nlohmann::json& j) {
  MiniScript s;
  try {
    s.name = j.value("name", std::string{});
    s.root = j.at("root").get<std::string>();
    s.universe = j.at("universe").get<std::vector<std::string>>();
    for (const auto& jg : j.at("goals")) {
      MiniGoal g;
      g.id = jg.at("id").get<std::string>();
      g.solvable_by = jg.value("solvable_by", std::vector<std::string>{});
      g.children = jg.value("children", std::vector<std::string>{});
      if (jg.contains("conjectures"))
        for (const auto& [text, target] : jg["conjectures"].items())
          g.conjectures[normalize_whitespace(text)] = target.get<std::string>();
      g.needs = jg.value("needs", std::vector<std::string>{});
      g.timeout_by = jg.value("timeout_by", std::vector<std::string>{});
      s.goals.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed MiniITP script: ") + e.what());
  }
  s.validate();
  return s;
}

MiniScript MiniScript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open MiniITP script '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  MiniScript s = from_json(j);
  if (s.name.empty()) s.name = std::filesystem::path(path).stem().string();
  return s;
}

// --------------------------------------------------------------- backend

MiniBackend::MiniBackend(MiniScript script) { add(std::move(script)); }

void MiniBackend::add(MiniScript script) {
  std::string key = script.name;
  scripts_[key] = std::make_shared<const MiniScript>(std::move(script));
}

void MiniBackend::add(std::string_view statement, MiniScript script) {
  std::string key = theorem_name(statement);
  if (key.empty()) key = normalize_whitespace(statement);
  scripts_[key] = std::make_shared<const MiniScript>(std::move(script));
}

bool MiniBackend::has(std::string_view name) const {
  return scripts_.count(std::string(name)) > 0;
}

MiniBackend MiniBackend::from_path(const std::string& path) {
  namespace fs = std::filesystem;
  MiniBackend backend;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.path().extension() == ".json") backend.add(MiniScript::load(entry.path().string()));
    return backend;
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open MiniITP library '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  if (j.contains("goals")) {
    MiniScript s = MiniScript::from_json(j);
    if (s.name.empty()) s.name = fs::path(path).stem().string();
    backend.add(std::move(s));
    return backend;
  }
  for (const auto& [name, body] : j.items()) {
    MiniScript s = MiniScript::from_json(body);
    s.name = name;
    backend.add(std::move(s));
  }
  return backend;
}

std::unique_ptr<MiniSession> MiniBackend::open_mini(std::string_view theorem) {
  std::string key = theorem_name(theorem);
  auto it = scripts_.find(key);
  if (it == scripts_.end()) it = scripts_.find(normalize_whitespace(theorem));
  if (it == scripts_.end() && scripts_.size() == 1 && scripts_.begin()->first.empty())
    it = scripts_.begin();
  if (it == scripts_.end())
    throw ItpUnavailable("no MiniITP script for theorem '" + (key.empty() ? std::string(theorem) : key) + "'");
  return std::make_unique<MiniSession>(std::string(theorem), it->second);
}

std::unique_ptr<Session> MiniBackend::open(std::string_view theorem) {
  return open_mini(theorem);
}

// --------------------------------------------------------------- session

MiniSession::MiniSession(std::string theorem, std::shared_ptr<const MiniScript> script)
    : theorem_(std::move(theorem)), script_(std::move(script)) {
  Machine start;
  start.pending = script_->root;
  start.mode = Mode::prove;
  checkpoints_.push_back(std::move(start));
}

void MiniSession::ensure_open() const {
  if (closed_) throw SessionClosed("MiniITP session for '" + theorem_ + "' is closed");
}

std::vector<std::string> MiniSession::visible_facts(const Machine& m) const {
  std::vector<std::string> facts;
  for (const Frame& f : m.frames) facts.insert(facts.end(), f.facts.begin(), f.facts.end());
  return facts;
}

ITPState MiniSession::observe(const Machine& m, std::uint64_t id) const {
  ITPState s;
  std::string focus = "none";
  std::size_t open_goals = 0;
  if (m.pending) {
    focus = *m.pending;
  } else if (!m.frames.empty()) {
    focus = m.frames.back().goal;
  }
  if (!m.frames.empty()) {
    const Frame& top = m.frames.back();
    for (const std::string& child : script_->goal(top.goal).children)
      if (!contains(top.facts, child)) ++open_goals;
  } else if (m.pending) {
    open_goals = 1;
  }
  s.state_text = "goal:" + focus + "|pending:" + std::to_string(open_goals);
  s.mode = m.mode;
  s.facts = visible_facts(m);
  s.finish = m.finished;
  s.checkpoint = id;
  return s;
}

ITPState MiniSession::fail(const ITPState& from, std::string message, bool timeout) const {
  ITPState s;
  s.error = true;
  s.timed_out = timeout;
  s.state_text = timeout ? "timeout: " + message : "error: " + message;
  s.message = std::move(message);
  s.checkpoint = from.checkpoint;
  return s;
}

const MiniSession::Machine& MiniSession::machine(const ITPState& state) const {
  if (state.checkpoint >= checkpoints_.size())
    throw UnknownCheckpoint("checkpoint " + std::to_string(state.checkpoint) + " does not exist");
  return checkpoints_[state.checkpoint];
}

std::optional<std::string> MiniSession::pending_goal(const ITPState& state) const {
  if (state.error) return std::nullopt;
  return machine(state).pending;
}

ITPState MiniSession::initial() {
  ensure_open();
  current_ = 0;
  return observe(checkpoints_[0], 0);
}

ITPState MiniSession::current() {
  ensure_open();
  return observe(checkpoints_[current_], current_);
}

void MiniSession::restore(const ITPState& state) {
  ensure_open();
  machine(state);
  current_ = state.checkpoint;
}

ITPState MiniSession::apply(const ITPState& from, const ProofStep& step) {
  ensure_open();
  ++transitions_;
  if (from.error) return from;
  Machine m = machine(from);
  current_ = from.checkpoint;

  const StepHead head = split_head(step.text);
  const std::string& kw = head.keyword;

  if (m.finished) return fail(from, "proof is already finished");

  auto discharge = [&](const std::string& goal) {
    m.pending.reset();
    m.mode = Mode::state;
    if (m.frames.empty()) {
      m.finished = true;
    } else {
      m.frames.back().facts.push_back(goal);
    }
  };
  auto declare = [&](const std::string& text) -> std::optional<std::string> {
    if (m.frames.empty()) return std::nullopt;
    const MiniGoal& owner = script_->goal(m.frames.back().goal);
    auto it = owner.conjectures.find(strip_label(text));
    if (it == owner.conjectures.end()) return std::nullopt;
    return it->second;
  };
  auto close_with = [&](const std::string& method) -> std::optional<ITPState> {
    const MiniGoal& g = script_->goal(*m.pending);
    const std::string wanted = normalize_method(method);
    for (const std::string& t : g.timeout_by)
      if (normalize_method(t) == wanted)
        return fail(from, "method '" + method + "' timed out on " + g.id, true);
    bool ok = false;
    for (const std::string& candidate : g.solvable_by)
      if (normalize_method(candidate) == wanted) ok = true;
    if (ok) {
      const std::vector<std::string> facts = visible_facts(m);
      for (const std::string& need : g.needs)
        if (!contains(facts, need)) ok = false;
    }
    if (!ok) return fail(from, "method '" + method + "' failed on " + g.id);
    discharge(*m.pending);
    return std::nullopt;
  };

  switch (m.mode) {
    case Mode::prove: {
      if (kw == "by") {
        if (head.rest.empty()) return fail(from, "missing proof method");
        if (auto err = close_with(head.rest)) return *err;
      } else if (kw == "." || kw == "..") {
        if (auto err = close_with(kw)) return *err;
      } else if (kw == "sorry" || kw == "oops") {
        discharge(*m.pending);
      } else if (kw == "proof") {
        m.frames.push_back(Frame{*m.pending, {}});
        m.pending.reset();
        m.mode = Mode::state;
      } else if (kw == "using" || kw == "unfolding") {
        // Refines the goal; stays in prove mode.
      } else {
        return fail(from, "proof method expected before '" + kw + "'");
      }
      break;
    }
    case Mode::state:
    case Mode::chain: {
      const bool chained = m.mode == Mode::chain;
      if (kw == "have" || kw == "show" || kw == "obtain" || kw == "hence" || kw == "thus") {
        std::optional<std::string> id = declare(head.rest);
        if (!id) return fail(from, "cannot state '" + head.rest + "' here");
        m.pending = *id;
        m.mode = Mode::prove;
      } else if (chained) {
        return fail(from, "'" + kw + "' cannot follow chained facts");
      } else if (kw == "then" || kw == "with" || kw == "from" || kw == "finally" ||
                 kw == "ultimately") {
        m.mode = Mode::chain;
      } else if (kw == "also" || kw == "moreover" || kw == "next" || kw == "note" ||
                 kw == "assume" || kw == "fix" || kw == "define" || kw == "let" ||
                 kw == "case") {
        // No effect on the goal structure.
      } else if (kw == "qed") {
        if (m.frames.empty()) return fail(from, "qed without an open block");
        const Frame& top = m.frames.back();
        for (const std::string& child : script_->goal(top.goal).children)
          if (!contains(top.facts, child))
            return fail(from, "block for " + top.goal + " leaves " + child + " unproven");
        const std::string closed = top.goal;
        m.frames.pop_back();
        m.pending = closed;
        discharge(closed);
      } else {
        return fail(from, "'" + (kw.empty() ? step.text : kw) + "' is not allowed without a pending goal");
      }
      break;
    }
  }

  checkpoints_.push_back(std::move(m));
  current_ = checkpoints_.size() - 1;
  return observe(checkpoints_.back(), current_);
}

}  // namespace proofaug
