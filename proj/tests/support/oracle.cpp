#include "support/oracle.hpp"

#include <algorithm>
#include <memory>

#include <omp.h>

namespace proofaug::testing {

namespace {

std::shared_ptr<MiniSession> open(const MiniScript& script, const std::string& theorem) {
  MiniBackend backend;
  backend.add(theorem, script);
  return std::shared_ptr<MiniSession>(backend.open_mini(theorem));
}

bool verifies(const SemiProof& semi, MiniSession& session) {
  ITPState s = session.initial();
  for (const ProofStep& step : semi.steps.steps) {
    s = session.apply(s, step);
    if (s.error) return false;
  }
  return s.finish;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

bool closable(const MiniGoal& g, const std::vector<std::string>& facts,
              const ATPPortfolio& portfolio) {
  for (const std::string& need : g.needs)
    if (!contains(facts, need)) return false;
  for (const std::string& m : portfolio.methods) {
    const std::string nm = normalize_method(m);
    bool times_out = false, solves = false;
    for (const auto& t : g.timeout_by) times_out |= normalize_method(t) == nm;
    for (const auto& t : g.solvable_by) solves |= normalize_method(t) == nm;
    if (solves && !times_out) return true;
  }
  return false;
}

McspOracle finish(const CompatibleSemiProofs& all, const std::vector<char>& ok) {
  McspOracle out;
  out.candidates = all.size();
  for (std::uint64_t k = 0; k < all.size(); ++k)
    if (ok[k]) out.verifying.push_back(all.choice(k));
  for (const auto& cand : out.verifying) {
    bool below_all = true;
    for (const auto& other : out.verifying)
      if (!finer_or_equal(cand, other, all.tree())) below_all = false;
    if (below_all) {
      out.finest = cand;
      break;
    }
  }
  return out;
}

}  // namespace

bool finer_or_equal(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                    const BlockTree& tree) {
  for (std::size_t x : a) {
    const BlockSpan& sx = tree.spans[x];
    bool inside = false;
    for (std::size_t y : b) {
      const BlockSpan& sy = tree.spans[y];
      if (sy.start <= sx.start && sx.end <= sy.end && sy.depth <= sx.depth) inside = true;
    }
    if (!inside) return false;
  }
  return true;
}

McspOracle mcsp_oracle(const std::string& proposal, const MiniScript& script,
                       const std::string& theorem) {
  CompatibleSemiProofs all(proposal);
  auto session = open(script, theorem);
  std::vector<char> ok(all.size(), 0);
  for (std::uint64_t k = 0; k < all.size(); ++k) ok[k] = verifies(all.at(k), *session);
  return finish(all, ok);
}

McspOracle mcsp_oracle_parallel(const std::string& proposal, const MiniScript& script,
                                const std::string& theorem, int threads) {
  CompatibleSemiProofs all(proposal);
  std::vector<char> ok(all.size(), 0);
  const auto n = static_cast<std::int64_t>(all.size());
  if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel num_threads(threads)
  {
    auto session = open(script, theorem);
#pragma omp for schedule(dynamic, 8)
    for (std::int64_t k = 0; k < n; ++k)
      ok[static_cast<std::size_t>(k)] = verifies(all.at(static_cast<std::uint64_t>(k)), *session);
  }
  return finish(all, ok);
}

bool augment_oracle(const std::string& proposal, const MiniScript& script,
                    const std::string& theorem, const ATPPortfolio& portfolio) {
  CompatibleSemiProofs all(proposal);
  auto session = open(script, theorem);
  for (std::uint64_t k = 0; k < all.size(); ++k) {
    const SemiProof semi = all.at(k);
    ITPState s = session->initial();
    bool good = true;
    for (const ProofStep& step : semi.steps.steps) {
      if (step.kind == StepKind::sorry) {
        auto goal = session->pending_goal(s);
        if (!goal || !closable(script.goal(*goal), s.facts, portfolio)) {
          good = false;
          break;
        }
      }
      s = session->apply(s, step);
      if (s.error) {
        good = false;
        break;
      }
    }
    if (good && s.finish) return true;
  }
  return closable(script.goal(script.root), {}, portfolio);
}

}  // namespace proofaug::testing
