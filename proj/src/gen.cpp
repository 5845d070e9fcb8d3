#include "proofaug/gen.hpp"

#include <algorithm>

#include "proofaug/engine.hpp"
#include "proofaug/error.hpp"
#include "proofaug/frontend.hpp"

namespace proofaug {

namespace {

struct Node {
  std::string id;
  bool thesis = false;
  std::string text;  // quoted conjecture, or ?thesis
  std::vector<Node> kids;  // haves then the thesis; empty for a leaf
  std::vector<std::string> solvable_by;
  std::vector<std::string> needs;
  std::string method;  // witness method for a leaf
  bool chained = false;
  bool with_using = false;

  // proposal-only edits
  std::string proposal_method;
  bool bogus_text = false;
  bool dropped = false;
  std::vector<std::string> stray_after;

  bool block() const { return !kids.empty(); }
};

class Builder {
 public:
  Builder(std::mt19937_64& rng, const GenOptions& opt, std::string prefix)
      : rng_(rng), opt_(opt), prefix_(std::move(prefix)) {
    portfolio_ = opt.portfolio.empty() ? ATPPortfolio::standard().methods : opt.portfolio;
    universe_ = portfolio_;
    for (const auto& m : opt.extra_methods)
      if (std::find(universe_.begin(), universe_.end(), m) == universe_.end())
        universe_.push_back(m);
  }

  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  int range(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::vector<std::string> methods(int lo, int hi) {
    std::vector<std::string> pool = universe_;
    std::shuffle(pool.begin(), pool.end(), rng_);
    pool.resize(static_cast<std::size_t>(range(lo, hi)));
    return pool;
  }

  std::string other_method(const std::vector<std::string>& avoid) {
    for (;;) {
      const std::string& m = universe_[pick(universe_.size())];
      if (std::find(avoid.begin(), avoid.end(), m) == avoid.end()) return m;
    }
  }

  Node goal(int depth, bool root, bool thesis, const std::vector<std::string>& siblings) {
    Node n;
    n.id = prefix_ + "_g" + std::to_string(next_id_++);
    n.thesis = thesis;
    n.text = thesis ? "?thesis" : "\"h" + std::to_string(next_id_ - 1) + " x\"";
    const double bp = thesis ? opt_.block_prob / 2 : opt_.block_prob;
    const bool block = root ? coin(0.85) : (depth < opt_.max_depth && coin(bp));
    if (block) {
      std::vector<std::string> done;
      const int haves = range(1, opt_.max_haves);
      for (int k = 0; k < haves; ++k) {
        n.kids.push_back(goal(depth + 1, false, false, done));
        done.push_back(n.kids.back().id);
      }
      n.kids.push_back(goal(depth + 1, false, true, done));
      if (coin(opt_.coarse_prob)) n.solvable_by = methods(1, 2);
    } else {
      n.solvable_by = methods(1, 2);
      n.method = n.solvable_by[pick(n.solvable_by.size())];
      n.with_using = coin(0.2);
    }
    if (!siblings.empty()) {
      if (thesis && coin(0.5)) {
        n.needs = siblings;
      } else if (coin(0.25)) {
        n.needs.push_back(siblings[pick(siblings.size())]);
      }
      n.chained = coin(0.3);
    }
    return n;
  }

  void collect(Node& n, std::vector<Node*>& out) {
    out.push_back(&n);
    for (Node& k : n.kids) collect(k, out);
  }

  void corrupt(Node& root, std::vector<std::string>& log) {
    std::vector<Node*> all;
    collect(root, all);
    std::vector<Node*> inner(all.begin() + 1, all.end());
    if (inner.empty()) {
      if (!root.block() && coin(0.5)) {
        root.proposal_method = other_method(root.solvable_by);
        log.push_back("wrong_method:" + root.id);
      }
      return;
    }
    const int count = range(0, opt_.max_corruptions);
    for (int c = 0; c < count; ++c) {
      Node& n = *inner[pick(inner.size())];
      switch (range(0, 4)) {
        case 0:
          if (n.block()) break;
          n.proposal_method = other_method(n.solvable_by);
          log.push_back("wrong_method:" + n.id);
          break;
        case 1:
          if (n.thesis) break;
          n.bogus_text = true;
          log.push_back("undeclared:" + n.id);
          break;
        case 2:
          if (!n.block()) break;
          n.kids.back().dropped = true;
          log.push_back("dropped_show:" + n.kids.back().id);
          break;
        case 3:
          n.stray_after.push_back("by auto");
          log.push_back("stray_by:" + n.id);
          break;
        case 4:
          n.stray_after.push_back("proof -");
          n.stray_after.push_back("qed");
          log.push_back("bare_proof:" + n.id);
          break;
      }
    }
  }

  void emit_script(const Node& n, MiniScript& s) const {
    MiniGoal g;
    g.id = n.id;
    g.solvable_by = n.solvable_by;
    g.needs = n.needs;
    for (const Node& k : n.kids) {
      g.children.push_back(k.id);
      g.conjectures[k.text] = k.id;
    }
    s.goals.push_back(std::move(g));
    for (const Node& k : n.kids) emit_script(k, s);
  }

  static std::string pad(int depth) { return std::string(static_cast<std::size_t>(depth) * 2, ' '); }

  // Proof text for `n` starting mid-line (after the goal statement).
  void proof_of(const Node& n, int depth, bool proposal, std::string& out) const {
    if (!n.block()) {
      const std::string& m = proposal && !n.proposal_method.empty() ? n.proposal_method : n.method;
      if (n.with_using && !n.needs.empty()) out += " using " + label(n.needs.front());
      out += " " + method_step_text(m) + "\n";
      return;
    }
    out += "\n" + pad(depth) + "proof -\n";
    for (const Node& k : n.kids) {
      if (proposal && k.dropped) continue;
      out += pad(depth + 1);
      if (k.chained) out += "then ";
      if (k.thesis) {
        out += "show ?thesis";
      } else {
        const std::string text =
            proposal && k.bogus_text ? "\"q" + k.id.substr(k.id.rfind('g') + 1) + " y\"" : k.text;
        out += "have " + label(k.id) + ": " + text;
      }
      proof_of(k, depth + 1, proposal, out);
      if (proposal)
        for (const std::string& extra : k.stray_after) out += pad(depth + 1) + extra + "\n";
    }
    out += pad(depth) + "qed\n";
  }

  static std::string label(const std::string& id) {
    return "c" + id.substr(id.rfind('g') + 1);
  }

  std::string render_root(const Node& root, bool proposal) const {
    std::string out;
    proof_of(root, 0, proposal, out);
    // drop the leading space or newline from the mid-line form
    std::size_t b = out.find_first_not_of(" \n");
    std::string text = out.substr(b);
    while (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
  }

  const std::vector<std::string>& portfolio() const { return portfolio_; }
  const std::vector<std::string>& universe() const { return universe_; }

 private:
  std::mt19937_64& rng_;
  const GenOptions& opt_;
  std::string prefix_;
  std::vector<std::string> portfolio_;
  std::vector<std::string> universe_;
  int next_id_ = 0;
};

std::size_t slot_count(const std::string& proof) {
  StepSequence seq = parse(proof);
  if (!seq.balanced()) return SIZE_MAX;
  return block_tree(seq).spans.size();
}

GeneratedInstance finish(Builder& b, const Node& root, const std::string& name) {
  GeneratedInstance inst;
  inst.name = name;
  inst.theorem = "theorem " + name + ": \"" + name + " holds\"";
  inst.script.name = name;
  inst.script.root = root.id;
  inst.script.universe = b.universe();
  b.emit_script(root, inst.script);
  inst.script.validate();
  inst.witness = b.render_root(root, false);
  inst.proposal = b.render_root(root, true);
  return inst;
}

bool is_portfolio(const Builder& b, const std::string& m) {
  return std::find(b.portfolio().begin(), b.portfolio().end(), m) != b.portfolio().end();
}

}  // namespace

Problem GeneratedInstance::problem() const {
  Problem p;
  p.name = name;
  p.xi = "Show that " + name + " holds.";
  p.yi = "By the facts established along the way.";
  p.xf = theorem;
  p.mini_itp = script.to_json();
  return p;
}

InstanceGenerator::InstanceGenerator(std::uint64_t seed, GenOptions options)
    : rng_(seed), options_(std::move(options)) {
  if (options_.max_slots == 0) throw ConfigError("max_slots must be positive");
}

GeneratedInstance InstanceGenerator::next(const std::string& name) {
  for (;;) {
    Builder b(rng_, options_, name);
    Node root = b.goal(0, true, false, {});
    std::vector<std::string> log;
    b.corrupt(root, log);
    GeneratedInstance inst = finish(b, root, name);
    if (slot_count(inst.proposal) > options_.max_slots) continue;
    if (slot_count(inst.witness) > options_.max_slots) continue;
    inst.corruptions = std::move(log);
    return inst;
  }
}

GeneratedInstance InstanceGenerator::next_erp(const std::string& name) {
  for (;;) {
    Builder b(rng_, options_, name);
    Node root = b.goal(0, true, false, {});
    if (!root.block()) continue;

    // Leaves with their ancestor chains.
    std::vector<std::vector<Node*>> paths;
    std::vector<Node*> stack;
    auto walk = [&](auto&& self, Node& n) -> void {
      stack.push_back(&n);
      if (!n.block()) paths.push_back(stack);
      for (Node& k : n.kids) self(self, k);
      stack.pop_back();
    };
    walk(walk, root);
    std::vector<std::string> extras;
    for (const auto& m : b.universe())
      if (!is_portfolio(b, m)) extras.push_back(m);
    if (extras.size() < 2) throw ConfigError("ERP instances need two methods outside the portfolio");

    const auto& path = paths[b.pick(paths.size())];
    Node& leaf = *path.back();
    const std::string good = extras[b.pick(extras.size())];
    leaf.solvable_by = {good};
    leaf.method = good;
    leaf.with_using = false;
    for (;;) {
      leaf.proposal_method = extras[b.pick(extras.size())];
      if (leaf.proposal_method != good) break;
    }
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      std::vector<std::string> keep;
      for (const auto& m : path[k]->solvable_by)
        if (!is_portfolio(b, m)) keep.push_back(m);
      path[k]->solvable_by = keep;
    }

    GeneratedInstance inst = finish(b, root, name);
    if (slot_count(inst.proposal) > options_.max_slots) continue;
    inst.corruptions = {"wrong_method:" + leaf.id};
    inst.erp = ErpPlant{leaf.id, method_step_text(good)};
    return inst;
  }
}

std::vector<MockLm::Rule> mock_rules(std::span<const GeneratedInstance> instances) {
  std::vector<MockLm::Rule> rules;
  for (const auto& inst : instances)
    if (inst.erp) rules.push_back({"goal:" + inst.erp->goal + "|", {inst.erp->completion}, ""});
  // any other completion request: the state text only occurs in those prompts
  rules.push_back({"|pending:", {""}, ""});
  for (const auto& inst : instances)
    rules.push_back({"theorem " + inst.name + ":", {inst.proposal}, ""});
  return rules;
}

}  // namespace proofaug
