#pragma once

// Random workloads: MiniITP goal trees, a correct proof of each, and a
// corrupted proof proposal with a bounded number of substitution slots.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "proofaug/harness.hpp"
#include "proofaug/lm.hpp"
#include "proofaug/mini_itp.hpp"

namespace proofaug {

struct GenOptions {
  int max_depth = 3;          // block nesting below the root
  int max_haves = 3;          // have-conjectures per block (plus ?thesis)
  std::size_t max_slots = 12; // blocks plus by-clauses in the proposal
  double block_prob = 0.45;   // a non-root conjecture gets its own block
  double coarse_prob = 0.35;  // a block goal is also closable by some method
  int max_corruptions = 3;
  std::vector<std::string> portfolio;  // defaults to the standard portfolio
  std::vector<std::string> extra_methods{"linarith", "metis", "smt", "presburger", "force"};
};

// A planted goal that only a completion can close.
struct ErpPlant {
  std::string goal;
  std::string completion;  // e.g. "by linarith"
};

struct GeneratedInstance {
  std::string name;
  std::string theorem;
  MiniScript script;
  std::string witness;   // a complete proof
  std::string proposal;  // the witness with corruptions
  std::vector<std::string> corruptions;
  std::optional<ErpPlant> erp;

  Problem problem() const;
};

class InstanceGenerator {
 public:
  explicit InstanceGenerator(std::uint64_t seed, GenOptions options = {});

  // Random instance; retries until the proposal fits within max_slots.
  GeneratedInstance next(const std::string& name);

  // Instance whose proposal fails on one goal solvable only by a method
  // outside the portfolio, with no coarser level closable automatically.
  GeneratedInstance next_erp(const std::string& name);

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  GenOptions options_;
};

// Mock-LM rules for a corpus: planted completions first, then an empty
// completion for every other completion request, then one rule per instance
// returning its proposal.
std::vector<MockLm::Rule> mock_rules(std::span<const GeneratedInstance> instances);

}  // namespace proofaug
