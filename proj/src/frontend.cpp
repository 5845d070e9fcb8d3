#include "proofaug/frontend.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "proofaug/error.hpp"

namespace proofaug {

namespace {

constexpr std::array kBlockOpen{std::string_view{"proof"}};
constexpr std::array kBlockClose{std::string_view{"qed"}};
constexpr std::array kTerminal{std::string_view{"by"}, std::string_view{"."},
                               std::string_view{".."}};
constexpr std::array kGoalIntro{std::string_view{"have"}, std::string_view{"show"},
                                std::string_view{"obtain"}, std::string_view{"hence"},
                                std::string_view{"thus"}};
constexpr std::array kStructural{
    std::string_view{"assume"},  std::string_view{"fix"},        std::string_view{"with"},
    std::string_view{"then"},    std::string_view{"also"},       std::string_view{"finally"},
    std::string_view{"moreover"}, std::string_view{"next"},      std::string_view{"define"},
    std::string_view{"let"},     std::string_view{"case"},       std::string_view{"using"},
    std::string_view{"from"},    std::string_view{"note"},       std::string_view{"ultimately"},
    std::string_view{"unfolding"}};
constexpr std::array kSorry{std::string_view{"sorry"}, std::string_view{"oops"}};

template <std::size_t N>
bool in(const std::array<std::string_view, N>& set, std::string_view word) {
  return std::find(set.begin(), set.end(), word) != set.end();
}

StepKind classify(std::string_view keyword) {
  if (in(kBlockOpen, keyword)) return StepKind::block_open;
  if (in(kBlockClose, keyword)) return StepKind::block_close;
  if (in(kTerminal, keyword)) return StepKind::terminal_method;
  if (in(kGoalIntro, keyword)) return StepKind::goal_intro;
  if (in(kStructural, keyword)) return StepKind::structural;
  if (in(kSorry, keyword)) return StepKind::sorry;
  return StepKind::other;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

// Cartouche delimiters: UTF-8 guillemets and the ASCII symbol spelling.
constexpr std::string_view kCartOpenUtf8 = "\xE2\x80\xB9";
constexpr std::string_view kCartCloseUtf8 = "\xE2\x80\xBA";
constexpr std::string_view kCartOpenAscii = "\\<open>";
constexpr std::string_view kCartCloseAscii = "\\<close>";

bool starts_at(std::string_view text, std::size_t pos, std::string_view token) {
  return text.substr(pos, token.size()) == token;
}

// Tracks whether the scanner sits inside opaque material.
struct Opaque {
  int comment = 0;
  bool quote = false;
  int cartouche = 0;

  bool active() const { return comment > 0 || quote || cartouche > 0; }

  // Consumes opaque delimiters at `pos`; returns the number of bytes eaten
  // (0 when nothing opaque starts or continues here).
  std::size_t step(std::string_view text, std::size_t pos) {
    if (comment > 0) {
      if (starts_at(text, pos, "(*")) { ++comment; return 2; }
      if (starts_at(text, pos, "*)")) { --comment; return 2; }
      return 1;
    }
    if (quote) {
      if (text[pos] == '"') quote = false;
      return 1;
    }
    if (cartouche > 0) {
      for (auto open : {kCartOpenUtf8, kCartOpenAscii})
        if (starts_at(text, pos, open)) { ++cartouche; return open.size(); }
      for (auto close : {kCartCloseUtf8, kCartCloseAscii})
        if (starts_at(text, pos, close)) { --cartouche; return close.size(); }
      return 1;
    }
    if (starts_at(text, pos, "(*")) { comment = 1; return 2; }
    if (text[pos] == '"') { quote = true; return 1; }
    for (auto open : {kCartOpenUtf8, kCartOpenAscii})
      if (starts_at(text, pos, open)) { cartouche = 1; return open.size(); }
    return 0;
  }
};

// Offsets at which a new step begins.
std::vector<std::size_t> step_starts(std::string_view text) {
  std::vector<std::size_t> starts;
  Opaque opaque;
  int paren = 0;
  bool line_start = true;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (opaque.active()) {
      i += opaque.step(text, i);
      continue;
    }
    if (std::size_t eaten = opaque.step(text, i)) {
      i += eaten;
      line_start = false;
      continue;
    }
    const char c = text[i];
    if (c == '\n') {
      line_start = true;
      ++i;
      continue;
    }
    if (c == '(') ++paren;
    if (c == ')') paren = std::max(0, paren - 1);

    const char prev = i > 0 ? text[i - 1] : ' ';
    const bool boundary_before =
        !is_ident_char(prev) && prev != '.' && prev != '<' && prev != '\\' && prev != '?';
    if (std::isalpha(static_cast<unsigned char>(c)) && boundary_before) {
      std::size_t j = i;
      while (j < n && is_ident_char(text[j])) ++j;
      const std::string_view word = text.substr(i, j - i);
      if (is_step_keyword(word)) {
        if (paren > 0 && line_start) paren = 0;
        if (paren == 0) starts.push_back(i);
      }
      line_start = false;
      i = j;
      continue;
    }
    if (c == '.' && is_blank(prev)) {
      std::size_t j = i;
      while (j < n && text[j] == '.') ++j;
      const bool standalone = j == n || is_blank(text[j]);
      if (standalone && (j - i) <= 2 && paren == 0) starts.push_back(i);
      line_start = false;
      i = j;
      continue;
    }
    if (!is_blank(c)) line_start = false;
    ++i;
  }
  return starts;
}

bool comment_only(std::string_view text) { return strip_comments(text).empty(); }

}  // namespace

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::block_open: return "block_open";
    case StepKind::block_close: return "block_close";
    case StepKind::terminal_method: return "terminal_method";
    case StepKind::goal_intro: return "goal_intro";
    case StepKind::structural: return "structural";
    case StepKind::sorry: return "sorry";
    case StepKind::other: return "other";
  }
  return "other";
}

bool is_step_keyword(std::string_view word) {
  return classify(word) != StepKind::other;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  std::string line;
  auto flush = [&] {
    std::string_view trimmed = trim(line);
    if (!trimmed.empty()) {
      if (!out.empty()) out += '\n';
      out += trimmed;
    }
    line.clear();
  };
  for (char c : text) {
    if (c == '\r') continue;
    if (c == '\n') {
      flush();
      continue;
    }
    if (c == ' ' || c == '\t') {
      if (!line.empty() && line.back() != ' ') line += ' ';
      continue;
    }
    line += c;
  }
  flush();
  return out;
}

std::string strip_comments(std::string_view text) {
  std::string out;
  Opaque opaque;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool was_comment = opaque.comment > 0;
    const std::size_t before = i;
    std::size_t eaten = opaque.step(text, i);
    const bool now_comment = opaque.comment > 0;
    if (eaten == 0) eaten = 1;
    if (!was_comment && !now_comment) {
      out.append(text.substr(before, eaten));
    } else if (!now_comment && was_comment) {
      out += ' ';
    }
    i += eaten;
  }
  return normalize_whitespace(out);
}

StepHead split_head(std::string_view step_text) {
  const std::string clean = strip_comments(step_text);
  std::string_view view = clean;
  std::size_t j = 0;
  if (!view.empty() && view.front() == '.') {
    while (j < view.size() && view[j] == '.') ++j;
  } else {
    while (j < view.size() && is_ident_char(view[j])) ++j;
  }
  StepHead head;
  head.keyword = std::string(view.substr(0, j));
  head.rest = std::string(trim(view.substr(j)));
  return head;
}

StepSequence StepSequence::balanced_part() const {
  if (balanced()) return *this;
  StepSequence out;
  out.source = source;
  out.steps.assign(steps.begin(), steps.begin() + imbalance->balanced_prefix);
  return out;
}

StepSlots to_slots(const StepSequence& seq) {
  return StepSlots(seq.steps.begin(), seq.steps.end());
}

StepSequence parse(std::string_view text) {
  StepSequence seq;
  seq.source = std::string(text);
  std::vector<std::size_t> starts = step_starts(text);

  std::vector<std::string_view> pieces;
  if (starts.empty()) {
    if (!trim(text).empty()) pieces.push_back(trim(text));
  } else {
    std::string_view lead = trim(text.substr(0, starts.front()));
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const std::size_t end = k + 1 < starts.size() ? starts[k + 1] : text.size();
      pieces.push_back(trim(text.substr(starts[k], end - starts[k])));
    }
    if (!lead.empty()) {
      if (comment_only(lead)) {
        // A leading comment belongs to the first real step.
        const std::size_t first_end = starts.size() > 1 ? starts[1] : text.size();
        pieces.front() = trim(text.substr(0, first_end));
      } else {
        pieces.insert(pieces.begin(), lead);
      }
    }
  }

  for (std::string_view piece : pieces) {
    if (normalize_whitespace(piece).empty()) continue;
    ProofStep step;
    step.text = std::string(piece);
    step.kind = classify(split_head(piece).keyword);
    step.index = seq.steps.size() + 1;
    seq.steps.push_back(std::move(step));
  }

  int depth = 0;
  std::size_t last_balanced = 0;
  for (const ProofStep& step : seq.steps) {
    if (step.kind == StepKind::block_open) ++depth;
    if (step.kind == StepKind::block_close) {
      if (depth == 0) {
        seq.imbalance = Imbalance{last_balanced, "unmatched qed at step " +
                                                     std::to_string(step.index)};
        return seq;
      }
      --depth;
    }
    if (depth == 0) last_balanced = step.index;
  }
  if (depth != 0) {
    seq.imbalance = Imbalance{last_balanced, std::to_string(depth) + " unclosed proof block(s)"};
  }
  return seq;
}

std::vector<std::size_t> BlockTree::roots() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < spans.size(); ++k)
    if (!parent[k]) out.push_back(k);
  return out;
}

std::size_t BlockTree::count(SpanKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      spans.begin(), spans.end(), [kind](const BlockSpan& s) { return s.kind == kind; }));
}

int BlockTree::max_depth() const {
  int best = 0;
  for (const BlockSpan& s : spans) best = std::max(best, s.depth);
  return best;
}

std::optional<BlockSpan> BlockTree::headed_by(std::size_t i) const {
  for (const BlockSpan& s : spans)
    if (s.start == i) return s;
  return std::nullopt;
}

BlockTree block_tree(const StepSequence& seq) {
  if (!seq.balanced()) throw UnbalancedBlocks(seq.imbalance->message);

  BlockTree tree;
  std::vector<std::size_t> open;  // span ids of currently open blocks
  auto add = [&](BlockSpan span) {
    span.id = tree.spans.size();
    std::optional<std::size_t> parent;
    if (!open.empty()) parent = open.back();
    tree.spans.push_back(span);
    tree.parent.push_back(parent);
    tree.children.emplace_back();
    if (parent) tree.children[*parent].push_back(span.id);
    return span.id;
  };

  for (const ProofStep& step : seq.steps) {
    const int depth = static_cast<int>(open.size()) + 1;
    switch (step.kind) {
      case StepKind::block_open:
        open.push_back(add({step.index, step.index, depth, SpanKind::block, 0}));
        break;
      case StepKind::block_close:
        tree.spans[open.back()].end = step.index;
        open.pop_back();
        break;
      case StepKind::terminal_method:
        add({step.index, step.index, depth, SpanKind::by_clause, 0});
        break;
      default:
        break;
    }
  }
  return tree;
}

std::optional<BlockSpan> innermost_block(std::size_t i, const BlockTree& tree,
                                         const SpanFilter& eligible) {
  std::optional<BlockSpan> best;
  for (const BlockSpan& span : tree.spans) {
    if (!span.contains(i)) continue;
    if (eligible && !eligible(span)) continue;
    if (!best || span.depth > best->depth) best = span;
  }
  return best;
}

namespace {

bool chains_forward(std::string_view keyword) {
  return keyword == "then" || keyword == "with" || keyword == "from" || keyword == "also" ||
         keyword == "moreover" || keyword == "ultimately" || keyword == "finally";
}

}  // namespace

std::string render(std::span<const std::optional<ProofStep>> slots) {
  std::string out;
  int depth = 0;
  std::optional<StepKind> prev;
  std::string prev_keyword;
  for (const auto& slot : slots) {
    if (!slot) continue;
    // Keep "then have c: P by auto" on one line, Isar style.
    const bool tail = slot->kind == StepKind::terminal_method || slot->kind == StepKind::sorry;
    const bool chained_goal = slot->kind == StepKind::goal_intro && prev &&
                              *prev == StepKind::structural && chains_forward(prev_keyword);
    if (((tail && prev && (*prev == StepKind::goal_intro || *prev == StepKind::structural)) ||
         chained_goal) &&
        slot->text.find('\n') == std::string::npos && !trim(slot->text).empty()) {
      out += ' ';
      out += trim(slot->text);
      prev = slot->kind;
      prev_keyword = split_head(slot->text).keyword;
      continue;
    }
    prev = slot->kind;
    prev_keyword = split_head(slot->text).keyword;
    if (slot->kind == StepKind::block_close) depth = std::max(0, depth - 1);
    const std::string indent(static_cast<std::size_t>(2 * depth), ' ');
    std::string_view text = slot->text;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = trim(text.substr(pos, nl - pos));
      if (!line.empty()) {
        if (!out.empty()) out += '\n';
        out += indent;
        out += line;
      }
      pos = nl + 1;
    }
    if (slot->kind == StepKind::block_open) ++depth;
  }
  return out;
}

std::string render(const StepSequence& seq) {
  StepSlots slots = to_slots(seq);
  return render(std::span<const std::optional<ProofStep>>(slots));
}

}  // namespace proofaug
