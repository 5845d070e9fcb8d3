#include <algorithm>
#include <set>

#include "doctest.h"
#include "proofaug/error.hpp"
#include "proofaug/gen.hpp"
#include "proofaug/mcsp.hpp"
#include "support/oracle.hpp"
#include "support/scenario.hpp"

using namespace proofaug;
using proofaug::testing::load_scenario;

namespace {

bool verifies_with_sorry(const SemiProof& semi, Session& session) {
  ITPState s = session.initial();
  for (const ProofStep& st : semi.steps.steps) {
    s = session.apply(s, st);
    if (s.error) return false;
  }
  return s.finish;
}

// Antichains of the span forest, counted by brute force over subsets.
std::uint64_t count_antichains(const BlockTree& tree) {
  const std::size_t n = tree.spans.size();
  std::uint64_t count = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    bool ok = true;
    for (std::size_t a = 0; a < n && ok; ++a)
      for (std::size_t b = 0; b < n && ok; ++b)
        if (a != b && (mask >> a & 1) && (mask >> b & 1) && tree.spans[a].contains(tree.spans[b]))
          ok = false;
    count += ok;
  }
  return count;
}

}  // namespace

TEST_CASE("worked proposal: three sorries, inner block kept") {
  auto sc = load_scenario("sqineq_induced");
  MiniBackend backend;
  backend.add(sc.problem.xf, sc.script);
  auto session = backend.open(sc.problem.xf);
  McspResult r = find_mcsp_detailed(sc.proposal, *session);
  REQUIRE(r.semi_proof);
  const SemiProof& semi = *r.semi_proof;
  const std::string want =
      "proof -\n"
      "  have \"(a - 1)\\<^sup>2 \\<ge> 0\" for a::real\n"
      "  proof -\n"
      "    have \"0 \\<le> (a - 1) * (a - 1)\"\n"
      "    using zero_le_square by auto\n"
      "    then show \"(a - 1)\\<^sup>2 \\<ge> 0\" by (simp add: power2_eq_square)\n"
      "  qed\n"
      "  then have \"a * (2 - a) \\<le> 1\" for a::real\n"
      "  proof -\n"
      "    have \"a * (2 - a) = 2 * a - a\\<^sup>2\" sorry\n"
      "    also have \"... = (a - 1)\\<^sup>2 + 1 - a\\<^sup>2\" sorry\n"
      "    also have \"... \\<le> 1\"\n"
      "    using \\<open>0 \\<le> (a - 1)\\<^sup>2\\<close> sorry\n"
      "    finally show ?thesis .\n"
      "  qed\n"
      "  then show ?thesis .\n"
      "qed";
  CHECK(semi.text() == want);
  CHECK(semi.sorry_count() == 3);
  CHECK(semi.origin.size() == 3);
  CHECK(semi.substituted.size() == 3);
  for (const SorryOrigin& o : semi.origin) CHECK(semi.steps.at(o.step).kind == StepKind::sorry);
  CHECK(verifies_with_sorry(semi, *session));
  CHECK(semi.text().find("using zero_le_square by auto") != std::string::npos);

  auto oracle = testing::mcsp_oracle(sc.proposal, sc.script, sc.problem.xf);
  REQUIRE(oracle.finest);
  CHECK(*oracle.finest == semi.substituted);
  CHECK(oracle.candidates == count_compatible(block_tree(parse(sc.proposal))));
}

TEST_CASE("a correct proof is its own semi-proof; unbalanced or empty input has none") {
  auto sc = load_scenario("coarse_fallback");
  MiniBackend backend;
  backend.add(sc.problem.xf, sc.script);
  auto session = backend.open(sc.problem.xf);
  auto same = find_mcsp("by fastforce", *session);
  REQUIRE(same);
  CHECK(same->sorry_count() == 0);
  CHECK(same->text() == "by fastforce");

  McspResult broken = find_mcsp_detailed("proof -\n  have c0: \"x\" by simp", *session);
  CHECK(!broken.semi_proof);
  CHECK(broken.diagnostic.find("unbalanced") != std::string::npos);
  CHECK(!find_mcsp("", *session));
  // a top-level error with no enclosing block
  McspResult outside = find_mcsp_detailed("qed", *session);
  CHECK(!outside.semi_proof);
}

TEST_CASE("compatible semi-proof enumeration") {
  const std::string proposal =
      "proof -\n"
      "  have a: \"A\"\n"
      "  proof -\n"
      "    show ?thesis by simp\n"
      "  qed\n"
      "  show ?thesis by auto\n"
      "qed";
  CompatibleSemiProofs all(proposal);
  // N(by) = 2, N(inner) = 1 + 2, N(root) = 1 + 3 * 2
  CHECK(all.size() == 7);
  CHECK(all.slots() == 4);
  CHECK(count_compatible(all.tree()) == 7);
  CHECK(all.at(0).text() == "sorry");
  std::set<std::string> texts;
  std::set<std::vector<std::size_t>> choices;
  for (std::uint64_t k = 0; k < all.size(); ++k) {
    texts.insert(all.at(k).text());
    choices.insert(all.choice(k));
    CHECK(all.at(k).sorry_count() == all.choice(k).size());
  }
  CHECK(texts.size() == 7);
  CHECK(choices.count({}) == 1);
  std::size_t seen = 0;
  while (auto semi = all.next()) ++seen;
  CHECK(seen == 7);
  all.rewind();
  CHECK(all.next()->text() == "sorry");

  const SemiProof sub = substitute(all.proposal(), all.tree(), {1});
  CHECK(sub.sorry_count() == 1);
  CHECK(sub.text().find("have a: \"A\" sorry") != std::string::npos);

  CHECK_THROWS_AS(CompatibleSemiProofs(proposal, 3), CombinatorialLimit);
  CHECK_THROWS_AS(CompatibleSemiProofs("proof -\n"), UnbalancedBlocks);
}

TEST_CASE("property: count_compatible equals the number of span antichains") {
  InstanceGenerator gen(77);
  for (int n = 0; n < 150; ++n) {
    const GeneratedInstance inst = gen.next("ac" + std::to_string(n));
    const BlockTree tree = block_tree(parse(inst.proposal));
    CHECK(count_compatible(tree) == count_antichains(tree));
  }
}

TEST_CASE("property: extraction matches the brute-force finest verifying semi-proof") {
  InstanceGenerator gen(404);
  std::size_t with_sorry = 0;
  for (int n = 0; n < 300; ++n) {
    const GeneratedInstance inst = gen.next("mc" + std::to_string(n));
    INFO(inst.proposal);
    MiniBackend backend;
    backend.add(inst.theorem, inst.script);
    auto session = backend.open(inst.theorem);
    auto semi = find_mcsp(inst.proposal, *session);
    auto oracle = testing::mcsp_oracle(inst.proposal, inst.script, inst.theorem);
    auto parallel = testing::mcsp_oracle_parallel(inst.proposal, inst.script, inst.theorem, 4);
    CHECK(parallel.verifying == oracle.verifying);
    CHECK(parallel.finest == oracle.finest);
    REQUIRE(bool(semi) == bool(oracle.finest));
    if (!semi) continue;
    CHECK(semi->substituted == *oracle.finest);
    CHECK(verifies_with_sorry(*semi, *session));
    CHECK(semi->sorry_count() == semi->substituted.size());
    // every verifying candidate is a coarsening of the extracted one
    for (const auto& other : oracle.verifying)
      CHECK(testing::finer_or_equal(semi->substituted, other, block_tree(parse(inst.proposal))));
    with_sorry += semi->sorry_count() > 0;
  }
  CHECK(with_sorry > 100);
}
