#include <set>

#include "doctest.h"
#include "proofaug/engine.hpp"
#include "proofaug/gen.hpp"
#include "support/oracle.hpp"

using namespace proofaug;

TEST_CASE("generated instances: witness proves, proposal fits the slot cap") {
  InstanceGenerator gen(7);
  std::set<std::string> kinds;
  for (int i = 0; i < 300; ++i) {
    GeneratedInstance inst = gen.next("p" + std::to_string(i));
    MiniBackend backend;
    backend.add(inst.theorem, inst.script);
    auto session = backend.open(inst.theorem);
    INFO(inst.witness);
    CHECK(is_proof(inst.theorem, inst.witness, *session));
    StepSequence seq = parse(inst.proposal);
    REQUIRE(seq.balanced());
    CHECK(block_tree(seq).spans.size() <= 12);
    for (const auto& c : inst.corruptions) kinds.insert(c.substr(0, c.find(':')));
  }
  CHECK(kinds.size() == 5);
}

TEST_CASE("planted instances need exactly the planted completion") {
  InstanceGenerator gen(11);
  for (int i = 0; i < 100; ++i) {
    GeneratedInstance inst = gen.next_erp("e" + std::to_string(i));
    REQUIRE(inst.erp);
    MiniBackend backend;
    backend.add(inst.theorem, inst.script);
    auto session = backend.open(inst.theorem);
    CHECK(is_proof(inst.theorem, inst.witness, *session));
    INFO(inst.proposal);
    CHECK(!testing::augment_oracle(inst.proposal, inst.script, inst.theorem,
                                   ATPPortfolio::standard()));
  }
}

