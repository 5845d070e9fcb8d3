#pragma once

// Lexical front end for Isar-style proof scripts: splitting into proof
// steps, recovering the proof...qed block structure, and rendering step
// arrays back to text. Nothing in here talks to a prover.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace proofaug {

enum class StepKind {
  block_open,       // proof [method]
  block_close,      // qed
  terminal_method,  // by m, ".", ".."
  goal_intro,       // have / show / obtain / hence / thus
  structural,       // assume, fix, then, with, using, ...
  sorry,            // sorry / oops
  other,
};

std::string_view to_string(StepKind kind);

struct ProofStep {
  std::string text;  // verbatim source, surrounding whitespace trimmed
  StepKind kind = StepKind::other;
  std::size_t index = 0;  // 1-based position in the owning sequence

  static ProofStep make_sorry() { return {"sorry", StepKind::sorry, 0}; }
};

// Records where block balance first broke. `balanced_prefix` is the number
// of leading steps that form a balanced script and can be used downstream.
struct Imbalance {
  std::size_t balanced_prefix = 0;
  std::string message;
};

struct StepSequence {
  std::vector<ProofStep> steps;
  std::string source;
  std::optional<Imbalance> imbalance;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  bool balanced() const { return !imbalance.has_value(); }
  const ProofStep& at(std::size_t index) const { return steps.at(index - 1); }

  // The longest balanced prefix, re-indexed. Equal to *this when balanced.
  StepSequence balanced_part() const;
};

// A working step array in which slots can be cleared (the "Null" entries of
// the MCSP and augmentation scans). Position k holds step index k+1.
using StepSlots = std::vector<std::optional<ProofStep>>;

StepSlots to_slots(const StepSequence& seq);

enum class SpanKind {
  block,      // proof ... qed
  by_clause,  // zero-width span over a terminal method step
};

struct BlockSpan {
  std::size_t start = 0;  // 1-based step index of the opener (or the by-step)
  std::size_t end = 0;    // 1-based step index of the matching qed (or start)
  int depth = 0;          // 1 for outermost
  SpanKind kind = SpanKind::block;
  std::size_t id = 0;     // position in BlockTree::spans

  bool contains(std::size_t i) const { return start <= i && i <= end; }
  bool contains(const BlockSpan& other) const {
    return start <= other.start && other.end <= end && depth < other.depth;
  }
  friend bool operator==(const BlockSpan&, const BlockSpan&) = default;
};

struct BlockTree {
  std::vector<BlockSpan> spans;  // ordered by start, outer before inner
  std::vector<std::optional<std::size_t>> parent;  // by span id
  std::vector<std::vector<std::size_t>> children;  // by span id

  bool empty() const { return spans.empty(); }
  std::vector<std::size_t> roots() const;
  std::size_t count(SpanKind kind) const;
  int max_depth() const;
  // Span opened (or headed) by step `i`, if any.
  std::optional<BlockSpan> headed_by(std::size_t i) const;
};

// Splits `text` into proof steps. Never throws: unbalanced input is
// reported through StepSequence::imbalance.
StepSequence parse(std::string_view text);

// Throws UnbalancedBlocks when `seq` is not balanced.
BlockTree block_tree(const StepSequence& seq);

using SpanFilter = std::function<bool(const BlockSpan&)>;

// Deepest span containing step `i`; spans rejected by `eligible` are skipped.
std::optional<BlockSpan> innermost_block(std::size_t i, const BlockTree& tree,
                                         const SpanFilter& eligible = {});

// One step per line, indented two spaces per open block. A single-line
// terminal method or sorry stays on the line of the goal it closes, and a goal
// stays on the line of a preceding then/with/from/also/finally.
std::string render(const StepSequence& seq);
std::string render(std::span<const std::optional<ProofStep>> slots);

// Collapse runs of blanks, trim each line, drop blank lines.
std::string normalize_whitespace(std::string_view text);

// Step text with (* ... *) comments removed and whitespace normalized.
std::string strip_comments(std::string_view text);

// First word of a step (after comments) and the remainder.
struct StepHead {
  std::string keyword;
  std::string rest;
};
StepHead split_head(std::string_view step_text);

bool is_step_keyword(std::string_view word);

}  // namespace proofaug
