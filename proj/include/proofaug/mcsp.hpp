#pragma once

// Maximal compatible semi-proof (MCSP) extraction.
//
// A semi-proof is compatible with a proposal when each of its substituted
// sorry steps replaces one proof...qed block or by-clause of the proposal and
// everything else is textually the proposal. The MCSP is the finest such
// semi-proof that the prover accepts; every other compatible semi-proof is
// obtained from it by further substitution.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proofaug/frontend.hpp"
#include "proofaug/itp.hpp"

namespace proofaug {

struct SorryOrigin {
  std::size_t step = 0;  // 1-based index of the sorry in SemiProof::steps
  BlockSpan span;        // span of the proposal it replaced
};

struct SemiProof {
  StepSequence steps;
  std::vector<SorryOrigin> origin;
  std::string source_proposal;
  // Proposal span ids replaced by sorry (an antichain of the span forest).
  std::vector<std::size_t> substituted;

  std::string text() const { return render(steps); }
  std::size_t sorry_count() const;
};

// Pre-states recorded while scanning: states[i] is the state before step i
// (1-based; slot 0 unused).
using StateArray = std::vector<std::optional<ITPState>>;

struct McspResult {
  std::optional<SemiProof> semi_proof;
  std::string diagnostic;  // why no semi-proof was found
  StateArray states;
  std::size_t fallbacks = 0;
};

McspResult find_mcsp_detailed(std::string_view proposal, Session& session);

inline std::optional<SemiProof> find_mcsp(std::string_view proposal, Session& session) {
  return find_mcsp_detailed(proposal, session).semi_proof;
}

// Builds the semi-proof that replaces each span in `span_ids` (which must be
// pairwise non-nested) by a single sorry.
SemiProof substitute(const StepSequence& proposal, const BlockTree& tree,
                     const std::vector<std::size_t>& span_ids);

// Number of compatible semi-proofs: product over root spans of
// N(span) = 1 + prod N(child).
std::uint64_t count_compatible(const BlockTree& tree);

// Lazy, random-access enumeration of every compatible semi-proof of a
// proposal, coarsest (all outermost spans substituted) first. Used by tests
// and oracles; the augmentation engine never materializes this set.
class CompatibleSemiProofs {
 public:
  static constexpr std::size_t kDefaultSlotCap = 16;

  // Throws UnbalancedBlocks, or CombinatorialLimit when the proposal has more
  // than `slot_cap` blocks and by-clauses.
  explicit CompatibleSemiProofs(std::string_view proposal,
                                std::size_t slot_cap = kDefaultSlotCap);

  std::uint64_t size() const { return total_; }
  std::size_t slots() const { return tree_.spans.size(); }
  const StepSequence& proposal() const { return proposal_; }
  const BlockTree& tree() const { return tree_; }

  // Span ids substituted in the k-th candidate.
  std::vector<std::size_t> choice(std::uint64_t k) const;
  SemiProof at(std::uint64_t k) const;

  // Sequential access.
  std::optional<SemiProof> next();
  void rewind() { cursor_ = 0; }

 private:
  void decode(const std::vector<std::size_t>& forest, std::uint64_t k,
              std::vector<std::size_t>& out) const;

  StepSequence proposal_;
  BlockTree tree_;
  std::vector<std::uint64_t> count_;  // N(span) by span id
  std::uint64_t total_ = 1;
  std::uint64_t cursor_ = 0;
};

inline CompatibleSemiProofs compatible_semiproofs(std::string_view proposal,
                                                  std::size_t slot_cap =
                                                      CompatibleSemiProofs::kDefaultSlotCap) {
  return CompatibleSemiProofs(proposal, slot_cap);
}

}  // namespace proofaug
