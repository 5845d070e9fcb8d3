// One line per acceptance criterion: "PASS [k] name: detail" or "FAIL ...".
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "proofaug/engine.hpp"
#include "proofaug/gen.hpp"
#include "proofaug/harness.hpp"
#include "support/oracle.hpp"
#include "support/scenario.hpp"

using namespace proofaug;
using proofaug::testing::data_path;
using proofaug::testing::load_scenario;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int k, const std::string& name, const std::function<Verdict()>& body) {
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  failures += v.pass ? 0 : 1;
  std::cout << (v.pass ? "PASS" : "FAIL") << " [" << k << "] " << name << ": " << v.detail
            << std::endl;
}

constexpr int kOracleInstances = 250;
constexpr std::uint64_t kOracleSeed = 20240501;

std::vector<GeneratedInstance> oracle_corpus() {
  InstanceGenerator gen(kOracleSeed);
  std::vector<GeneratedInstance> out;
  for (int k = 0; k < kOracleInstances; ++k) out.push_back(gen.next("acc" + std::to_string(k)));
  return out;
}

StrategyConfig strategy(const std::string& id, std::size_t attempts, bool erp) {
  StrategyConfig s;
  s.id = id;
  s.prompt = PromptTemplate::load(data_path("templates/few_shot.json"));
  s.demos = load_demos(data_path("demos/pool.jsonl"));
  s.shots = 1;
  s.attempts = attempts;
  s.erp = erp;
  s.erp_prompt = PromptTemplate::load(data_path("templates/zero_shot_erp.json"));
  return s;
}

struct Corpus {
  std::vector<GeneratedInstance> instances;
  std::vector<Problem> problems;
  MiniBackend backend;
};

Corpus campaign_corpus(std::size_t n, std::uint64_t seed, double planted_share) {
  Corpus c;
  InstanceGenerator gen(seed);
  const auto planted = static_cast<std::size_t>(planted_share * double(n) + 0.5);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string name = "cp" + std::to_string(k);
    c.instances.push_back(k < planted ? gen.next_erp(name) : gen.next(name));
    c.problems.push_back(c.instances.back().problem());
    c.backend.add(c.instances.back().theorem, c.instances.back().script);
  }
  return c;
}

}  // namespace

int main() {
  const auto corpus = oracle_corpus();
  const ATPPortfolio portfolio = ATPPortfolio::standard();

  criterion(1, "extraction equals brute-force finest verifying semi-proof", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t mismatches = 0, max_slots = 0;
    for (const auto& inst : corpus) {
      MiniBackend backend;
      backend.add(inst.theorem, inst.script);
      auto session = backend.open(inst.theorem);
      auto semi = find_mcsp(inst.proposal, *session);
      auto oracle = testing::mcsp_oracle_parallel(inst.proposal, inst.script, inst.theorem);
      max_slots = std::max(max_slots, block_tree(parse(inst.proposal)).spans.size());
      if (bool(semi) != bool(oracle.finest) || (semi && semi->substituted != *oracle.finest))
        ++mismatches;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream d;
    d << corpus.size() << " instances, max " << max_slots << " slots, " << mismatches
      << " mismatches, " << secs << " s (limit 60 s)";
    return Verdict{mismatches == 0 && corpus.size() >= 200 && max_slots <= 12 && secs < 60.0, d.str()};
  });

  criterion(2, "augmentation proves exactly the portfolio-completable instances", [&] {
    std::size_t mismatches = 0, proved = 0, reverify_fail = 0;
    for (const auto& inst : corpus) {
      MiniBackend backend;
      backend.add(inst.theorem, inst.script);
      auto session = backend.open(inst.theorem);
      const AugmentResult r = augment(inst.theorem, inst.proposal, *session, portfolio);
      if (r.proved != testing::augment_oracle(inst.proposal, inst.script, inst.theorem, portfolio))
        ++mismatches;
      if (r.proved) {
        ++proved;
        auto fresh = backend.open(inst.theorem);
        if (!is_proof(inst.theorem, r.final_proof, *fresh)) ++reverify_fail;
      }
    }
    std::ostringstream d;
    d << corpus.size() << " instances, " << proved << " proved, " << mismatches << " mismatches, "
      << reverify_fail << " failed re-verification";
    return Verdict{mismatches == 0 && reverify_fail == 0, d.str()};
  });

  criterion(3, "coarse-fallback scenario trace", [&] {
    auto sc = load_scenario("coarse_fallback");
    MiniBackend backend;
    backend.add(sc.problem.xf, sc.script);
    auto session = backend.open(sc.problem.xf);
    MockLm lm(sc.lm_rules);
    Sampler sampler(lm);
    ERPConfig erp;
    erp.enabled = true;
    erp.sampler = &sampler;
    erp.prompt = PromptTemplate::load(data_path("templates/zero_shot_erp.json"));
    erp.problem = sc.problem;
    const AugmentResult r = augment(sc.problem.xf, sc.proposal, *session, portfolio, erp);
    const std::vector<std::string> want{"atp_ok@3:arith", "erp_query@5", "erp_reject@5",
                                        "fallback@1-8", "atp_ok@8:fastforce", "proved"};
    const auto got = milestones(r.trace);
    std::string joined;
    for (const auto& m : got) joined += (joined.empty() ? "" : " ") + m;
    return Verdict{got == want && r.proved, joined};
  });

  criterion(4, "worked inequality: kept block, collapsed block, closing method", [&] {
    auto sc = load_scenario("sqineq_induced");
    MiniBackend backend;
    backend.add(sc.problem.xf, sc.script);
    auto session = backend.open(sc.problem.xf);
    const AugmentResult r = augment(sc.problem.xf, sc.proposal, *session, portfolio);
    const std::string kept =
        "  have \"(a - 1)\\<^sup>2 \\<ge> 0\" for a::real\n"
        "  proof -\n"
        "    have \"0 \\<le> (a - 1) * (a - 1)\"\n"
        "    using zero_le_square by auto\n"
        "    then show \"(a - 1)\\<^sup>2 \\<ge> 0\" by (simp add: power2_eq_square)\n"
        "  qed\n";
    const std::string closed = "  then have \"a * (2 - a) \\<le> 1\" for a::real by sos\n";
    const StepSequence seq = parse(r.final_proof);
    const bool shape = r.proved && r.final_proof.find(kept) != std::string::npos &&
                       r.final_proof.find(closed) != std::string::npos &&
                       r.final_proof.find("also") == std::string::npos &&
                       block_tree(seq).count(SpanKind::block) == 2;
    auto fresh = backend.open(sc.problem.xf);
    const bool valid = is_proof(sc.problem.xf, r.final_proof, *fresh);
    return Verdict{shape && valid, std::string(shape ? "shape ok" : "shape differs") +
                                       (valid ? ", re-verifies" : ", does not re-verify")};
  });

  criterion(5, "parser round-trip and block-tree invariants", [&] {
    InstanceGenerator gen(kOracleSeed + 5);
    std::vector<std::string> texts{load_scenario("sqineq_induced").proposal};
    for (int k = 0; k < 500; ++k) texts.push_back(gen.next("pr" + std::to_string(k)).proposal);
    std::size_t violations = 0;
    for (const auto& text : texts) {
      const StepSequence seq = parse(text);
      if (!seq.balanced()) {
        ++violations;
        continue;
      }
      const StepSequence back = parse(render(seq));
      bool same = back.size() == seq.size();
      for (std::size_t i = 1; same && i <= seq.size(); ++i)
        same = back.at(i).text == seq.at(i).text && back.at(i).kind == seq.at(i).kind;
      const BlockTree tree = block_tree(seq);
      for (const BlockSpan& a : tree.spans) {
        const auto& parent = tree.parent[a.id];
        if (parent && !(tree.spans[*parent].contains(a) && tree.spans[*parent].depth + 1 == a.depth))
          same = false;
        if (a.kind == SpanKind::block && (seq.at(a.start).kind != StepKind::block_open ||
                                          seq.at(a.end).kind != StepKind::block_close))
          same = false;
        for (const BlockSpan& b : tree.spans)
          if (a.id != b.id && !(a.end < b.start || b.end < a.start || a.contains(b) || b.contains(a)))
            same = false;
      }
      violations += same ? 0 : 1;
    }
    return Verdict{violations == 0, std::to_string(texts.size()) + " texts, " +
                                        std::to_string(violations) + " violations"};
  });

  criterion(6, "query accounting and budget cap", [&] {
    Corpus c = campaign_corpus(80, 77, 0.3);
    std::vector<std::string> lines;
    bool ok = true;
    for (std::uint64_t budget : {1, 3, 8}) {
      for (bool erp : {false, true}) {
        MockLm lm(mock_rules(c.instances));
        Sampler sampler(lm);
        CampaignLedger ledger;
        CampaignOptions opt;
        opt.budget = budget;
        opt.workers = 8;
        StrategyConfig s = strategy(erp ? "erp" : "plain", 5, erp);
        s.erp_attempts = 2;
        run_campaign(c.problems, {s}, c.backend, sampler, ledger, opt);
        std::uint64_t recorded = 0, worst = 0;
        for (const auto& r : ledger.records()) recorded += r.queries();
        for (const auto& [name, p] : ledger.snapshot()) worst = std::max(worst, p.queries_used);
        ok = ok && recorded == lm.calls() && recorded == sampler.queries() && worst <= budget;
        lines.push_back("N=" + std::to_string(budget) + (erp ? "/erp" : "") + " calls=" +
                        std::to_string(lm.calls()) + " recorded=" + std::to_string(recorded) +
                        " max_used=" + std::to_string(worst));
      }
    }
    std::string d;
    for (const auto& l : lines) d += (d.empty() ? "" : "; ") + l;
    return Verdict{ok, d};
  });

  criterion(7, "completion step raises the pass rate at equal budget", [&] {
    Corpus c = campaign_corpus(100, 99, 0.3);
    double rate[2] = {0, 0};
    for (int erp = 0; erp < 2; ++erp) {
      MockLm lm(mock_rules(c.instances));
      Sampler sampler(lm);
      CampaignLedger ledger;
      CampaignOptions opt;
      opt.budget = 16;
      run_campaign(c.problems, {strategy("s", 1, erp == 1)}, c.backend, sampler, ledger, opt);
      rate[erp] = report(ledger.records(), c.problems.size(), opt.budget).pass_rate();
    }
    std::ostringstream d;
    d << "off " << rate[0] << ", on " << rate[1] << " (100 problems, 30 planted, budget 16)";
    return Verdict{rate[1] > rate[0], d.str()};
  });

  criterion(8, "response token budget", [&] {
    const std::pair<std::size_t, long> cases[] = {{100, 2048}, {2048, 2048}, {2049, 2047}, {3000, 1096}};
    bool ok = true;
    std::string d;
    for (auto [len, want] : cases) {
      std::string prompt;
      for (std::size_t k = 0; k < len; ++k) prompt += "tok ";
      MockLm lm({{"", {"by simp"}, ""}});
      Sampler sampler(lm);
      sampler.sample(prompt, std::vector<std::string>{"```"});
      const long got = lm.requests().at(0).max_tokens;
      ok = ok && got == want;
      d += (d.empty() ? "" : ", ") + std::to_string(len) + "->" + std::to_string(got);
    }
    return Verdict{ok, d};
  });

  criterion(9, "cache on and off prove the same set, cache saves prover calls", [&] {
    Corpus c = campaign_corpus(60, 123, 0.0);
    std::set<std::string> proved[2];
    std::uint64_t atp[2] = {0, 0};
    for (int cache = 0; cache < 2; ++cache) {
      MockLm lm(mock_rules(c.instances));  // one proposal per problem: every retry duplicates it
      Sampler sampler(lm);
      CampaignLedger ledger;
      CampaignOptions opt;
      opt.budget = 4;
      opt.cache = cache == 1;
      run_campaign(c.problems, {strategy("s", 4, false)}, c.backend, sampler, ledger, opt);
      for (const auto& r : ledger.records()) {
        atp[cache] += r.atp_calls;
        if (r.outcome == "proved") proved[cache].insert(r.problem);
      }
    }
    std::ostringstream d;
    d << "proved off/on " << proved[0].size() << "/" << proved[1].size() << ", ATP calls off/on "
      << atp[0] << "/" << atp[1];
    return Verdict{proved[0] == proved[1] && atp[1] < atp[0], d.str()};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures;
}
