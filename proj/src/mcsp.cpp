#include "proofaug/mcsp.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "proofaug/error.hpp"

namespace proofaug {

namespace {

bool method_bearing(StepKind kind) {
  return kind == StepKind::terminal_method || kind == StepKind::block_open;
}

// Packs non-empty slots into a sequence and remaps sorry origins.
SemiProof assemble(const StepSequence& proposal, const StepSlots& slots,
                   const std::map<std::size_t, BlockSpan>& origin_by_slot,
                   std::vector<std::size_t> substituted) {
  SemiProof semi;
  semi.source_proposal = proposal.source;
  for (std::size_t pos = 0; pos < slots.size(); ++pos) {
    if (!slots[pos]) continue;
    ProofStep step = *slots[pos];
    step.index = semi.steps.steps.size() + 1;
    if (auto it = origin_by_slot.find(pos + 1); it != origin_by_slot.end())
      semi.origin.push_back({step.index, it->second});
    semi.steps.steps.push_back(std::move(step));
  }
  semi.steps.source = render(semi.steps);
  std::sort(substituted.begin(), substituted.end());
  semi.substituted = std::move(substituted);
  return semi;
}

void mark_subtree(const BlockTree& tree, std::size_t id, std::vector<bool>& marks) {
  marks[id] = true;
  for (std::size_t child : tree.children[id]) mark_subtree(tree, child, marks);
}

}  // namespace

std::size_t SemiProof::sorry_count() const {
  return static_cast<std::size_t>(std::count_if(
      steps.steps.begin(), steps.steps.end(),
      [](const ProofStep& s) { return s.kind == StepKind::sorry; }));
}

McspResult find_mcsp_detailed(std::string_view proposal, Session& session) {
  McspResult result;
  StepSequence seq = parse(proposal);
  if (!seq.balanced()) {
    result.diagnostic = "unbalanced proposal: " + seq.imbalance->message;
    return result;
  }
  if (seq.empty()) {
    result.diagnostic = "empty proposal";
    return result;
  }
  const BlockTree tree = block_tree(seq);
  StepSlots a = to_slots(seq);
  const std::size_t n = a.size();
  StateArray& s = result.states;
  s.assign(n + 1, std::nullopt);
  std::vector<bool> collapsed(tree.spans.size(), false);
  std::map<std::size_t, BlockSpan> origin;  // slot index -> replaced span

  auto collapse = [&](const BlockSpan& span) {
    for (std::size_t k = span.start; k < span.end; ++k) a[k - 1].reset();
    a[span.end - 1] = ProofStep::make_sorry();
    for (auto it = origin.begin(); it != origin.end();) {
      it = span.contains(it->first) ? origin.erase(it) : std::next(it);
    }
    origin[span.end] = span;
    mark_subtree(tree, span.id, collapsed);
  };
  auto eligible = [&](const BlockSpan& span) { return !collapsed[span.id]; };

  std::size_t i = 1;
  ITPState cur = session.initial();
  while (i <= n) {
    if (!a[i - 1]) {
      ++i;
      continue;
    }
    s[i] = cur;
    const ProofStep& step = *a[i - 1];
    ITPState next = session.apply(cur, step);
    if (!next.error) {
      cur = std::move(next);
      ++i;
      continue;
    }

    if (cur.mode == Mode::prove && method_bearing(step.kind) && !origin.count(i)) {
      // The goal is fine but this proof of it is not: substitute exactly the
      // by-clause or the block this step opens.
      std::optional<BlockSpan> own = tree.headed_by(i);
      if (own && eligible(*own)) {
        collapse(*own);
        ++result.fallbacks;
        i = own->end;  // state stays at the pre-state of the opener
        continue;
      }
    }

    std::optional<BlockSpan> block = innermost_block(i, tree, eligible);
    if (!block) {
      result.diagnostic = "error outside every block at step " + std::to_string(i) + ": " +
                          next.message;
      return result;
    }
    collapse(*block);
    ++result.fallbacks;
    i = block->end;
    cur = *s[block->start];
  }

  if (!cur.finish) {
    result.diagnostic = "semi-proof does not finish the theorem";
    return result;
  }
  std::vector<std::size_t> substituted;
  for (const auto& [slot, span] : origin) substituted.push_back(span.id);
  result.semi_proof = assemble(seq, a, origin, std::move(substituted));
  return result;
}

SemiProof substitute(const StepSequence& proposal, const BlockTree& tree,
                     const std::vector<std::size_t>& span_ids) {
  StepSlots a = to_slots(proposal);
  std::map<std::size_t, BlockSpan> origin;
  for (std::size_t id : span_ids) {
    const BlockSpan& span = tree.spans.at(id);
    for (std::size_t k = span.start; k < span.end; ++k) a[k - 1].reset();
    a[span.end - 1] = ProofStep::make_sorry();
    origin[span.end] = span;
  }
  return assemble(proposal, a, origin, span_ids);
}

std::uint64_t count_compatible(const BlockTree& tree) {
  // Children always follow their parent in `spans`, so a reverse sweep sees
  // every child before its parent.
  std::vector<std::uint64_t> count(tree.spans.size(), 1);
  for (std::size_t k = tree.spans.size(); k-- > 0;) {
    std::uint64_t inner = 1;
    for (std::size_t child : tree.children[k]) inner *= count[child];
    count[k] = 1 + inner;
  }
  std::uint64_t total = 1;
  for (std::size_t root : tree.roots()) total *= count[root];
  return total;
}

CompatibleSemiProofs::CompatibleSemiProofs(std::string_view proposal, std::size_t slot_cap)
    : proposal_(parse(proposal)) {
  tree_ = block_tree(proposal_);
  if (tree_.spans.size() > slot_cap)
    throw CombinatorialLimit("proposal has " + std::to_string(tree_.spans.size()) +
                             " substitution slots, cap is " + std::to_string(slot_cap));
  count_.assign(tree_.spans.size(), 1);
  for (std::size_t k = tree_.spans.size(); k-- > 0;) {
    std::uint64_t inner = 1;
    for (std::size_t child : tree_.children[k]) inner *= count_[child];
    count_[k] = 1 + inner;
  }
  total_ = 1;
  for (std::size_t root : tree_.roots()) total_ *= count_[root];
}

void CompatibleSemiProofs::decode(const std::vector<std::size_t>& forest, std::uint64_t k,
                                  std::vector<std::size_t>& out) const {
  for (std::size_t span : forest) {
    const std::uint64_t digit = k % count_[span];
    k /= count_[span];
    if (digit == 0) {
      out.push_back(span);
    } else {
      decode(tree_.children[span], digit - 1, out);
    }
  }
}

std::vector<std::size_t> CompatibleSemiProofs::choice(std::uint64_t k) const {
  if (k >= total_) throw std::out_of_range("candidate index out of range");
  std::vector<std::size_t> out;
  decode(tree_.roots(), k, out);
  std::sort(out.begin(), out.end());
  return out;
}

SemiProof CompatibleSemiProofs::at(std::uint64_t k) const {
  return substitute(proposal_, tree_, choice(k));
}

std::optional<SemiProof> CompatibleSemiProofs::next() {
  if (cursor_ >= total_) return std::nullopt;
  return at(cursor_++);
}

}  // namespace proofaug
