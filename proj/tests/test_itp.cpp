#include <thread>

#include "doctest.h"
#include "proofaug/error.hpp"
#include "proofaug/gen.hpp"
#include "proofaug/mini_itp.hpp"
#include "proofaug/mini_server.hpp"
#include "proofaug/remote_itp.hpp"

using namespace proofaug;

namespace {

const char* kTheorem = "theorem two_step: \"A \\<and> B\"";

// root: proof - have a; show ?thesis (needs a) qed
MiniScript two_step() {
  return MiniScript::from_json(nlohmann::json::parse(R"({
    "name": "two_step", "root": "g0",
    "universe": ["auto", "simp", "blast", "arith", "slow"],
    "goals": [
      {"id": "g0", "children": ["g1", "g2"],
       "conjectures": {"\"A\"": "g1", "?thesis": "g2"}},
      {"id": "g1", "solvable_by": ["simp"], "timeout_by": ["slow"]},
      {"id": "g2", "solvable_by": ["auto", "blast"], "needs": ["g1"]}
    ]})"));
}

ProofStep step(const std::string& text) {
  StepSequence seq = parse(text);
  REQUIRE(seq.size() == 1);
  return seq.at(1);
}

}  // namespace

TEST_CASE("state equality ignores bookkeeping and compares facts as a multiset") {
  ITPState a;
  a.state_text = "goal:g|pending:1";
  a.mode = Mode::state;
  a.facts = {"x", "y", "x"};
  ITPState b = a;
  b.facts = {"x", "x", "y"};
  b.checkpoint = 42;
  b.message = "different";
  b.timed_out = true;
  CHECK(states_equal(a, b));
  b.facts = {"x", "y", "y"};
  CHECK(!states_equal(a, b));
  b = a;
  b.mode = Mode::chain;
  CHECK(!states_equal(a, b));
  b = a;
  b.finish = true;
  CHECK(!states_equal(a, b));

  const ITPState back = state_from_json(to_json(a));
  CHECK(states_equal(a, back));
  ITPState err;
  err.error = true;
  err.state_text = "error: x";
  const ITPState err_back = state_from_json(to_json(err));
  CHECK(err_back.error);
  CHECK(!err_back.mode);
  CHECK(mode_from_string(to_string(Mode::chain)) == Mode::chain);
  CHECK(!mode_from_string("nonsense"));
}

TEST_CASE("script validation rejects malformed goal graphs") {
  auto with = [](const char* goals) {
    return nlohmann::json::parse(std::string(R"({"root":"g0","universe":["auto"],"goals":)") + goals + "}");
  };
  CHECK_NOTHROW(MiniScript::from_json(with(R"([{"id":"g0","solvable_by":["auto"]}])")));
  CHECK_THROWS_AS(MiniScript::from_json(with(R"([{"id":"g0"},{"id":"g0"}])")), ConfigError);
  CHECK_THROWS_AS(MiniScript::from_json(with(R"([{"id":"g0","children":["gx"]}])")), ConfigError);
  CHECK_THROWS_AS(MiniScript::from_json(with(R"([{"id":"g0","solvable_by":["blast"]}])")), ConfigError);
  CHECK_THROWS_AS(MiniScript::from_json(with(
                      R"([{"id":"g0","children":["g1"],"conjectures":{"?thesis":"g1"}},
                          {"id":"g1","children":["g0"],"conjectures":{"?thesis":"g0"}}])")),
                  ConfigError);
  CHECK_THROWS_AS(MiniScript::from_json(with(R"([{"id":"g0"},{"id":"orphan"}])")), ConfigError);
  const MiniScript s = two_step();
  CHECK(MiniScript::from_json(s.to_json()).to_json() == s.to_json());
}

TEST_CASE("method and statement helpers") {
  CHECK(normalize_method("(simp add: foo)") == "simpadd:foo");
  CHECK(normalize_method("simp add:foo") == "simpadd:foo");
  CHECK(method_step_text("auto") == "by auto");
  CHECK(method_step_text("simp add: foo") == "by (simp add: foo)");
  CHECK(method_step_text(".") == ".");
  CHECK(strip_label("c1: \"x > 0\"") == "\"x > 0\"");
  CHECK(strip_label("\"x > 0\"") == "\"x > 0\"");
  CHECK(theorem_name("theorem foo_bar: \"P\"") == "foo_bar");
  CHECK(theorem_name("lemma baz:\n  assumes x") == "baz");
  CHECK(theorem_name("\"P\"").empty());
}

TEST_CASE("mini prover walks the prove/state/chain modes") {
  MiniBackend backend;
  backend.add(kTheorem, two_step());
  auto s = backend.open_mini(kTheorem);
  ITPState s0 = s->initial();
  CHECK(s0.mode == Mode::prove);
  CHECK(s0.state_text == "goal:g0|pending:1");

  ITPState s1 = s->apply(s0, step("proof -"));
  CHECK(s1.mode == Mode::state);
  CHECK(s1.state_text == "goal:g0|pending:2");

  // a terminal method needs a pending goal
  ITPState bad = s->apply(s1, step("by auto"));
  CHECK(bad.error);
  CHECK(!bad.mode);
  CHECK(states_equal(s->current(), s1));

  // unknown conjecture
  CHECK(s->apply(s1, step("have \"C\"")).error);
  // ?thesis needs g1 first
  ITPState t = s->apply(s1, step("show ?thesis"));
  CHECK(s->apply(t, step("by auto")).error);

  ITPState s2 = s->apply(s1, step("have c: \"A\""));
  CHECK(s2.mode == Mode::prove);
  CHECK(s2.state_text == "goal:g1|pending:2");
  ITPState slow = s->apply(s2, step("by slow"));
  CHECK(slow.error);
  CHECK(slow.timed_out);
  CHECK(s->apply(s2, step("by auto")).error);
  ITPState s3 = s->apply(s2, step("by simp"));
  CHECK(s3.facts == std::vector<std::string>{"g1"});
  CHECK(s3.state_text == "goal:g0|pending:1");

  ITPState chained = s->apply(s3, step("then"));
  CHECK(chained.mode == Mode::chain);
  CHECK(s->apply(chained, step("then")).error);
  ITPState s4 = s->apply(chained, step("show ?thesis"));
  ITPState s5 = s->apply(s4, step("by (blast)"));
  CHECK(!s5.error);
  CHECK(!s5.finish);
  // qed closes the block and the theorem
  ITPState s6 = s->apply(s5, step("qed"));
  CHECK(s6.finish);
  CHECK(s->apply(s6, step("qed")).error);

  // earlier checkpoints stay valid
  s->restore(s2);
  CHECK(states_equal(s->current(), s2));
  ITPState sorry = s->apply(s2, step("sorry"));
  CHECK(states_equal(sorry, s3));

  ITPState ghost;
  ghost.checkpoint = 999;
  CHECK_THROWS_AS(s->apply(ghost, step("by simp")), UnknownCheckpoint);
  s->close();
  CHECK_THROWS_AS(s->initial(), SessionClosed);
}

TEST_CASE("lifted transitions, apply_steps and is_proof") {
  MiniBackend backend;
  backend.add(kTheorem, two_step());
  auto s = backend.open(kTheorem);
  const ITPState s0 = s->initial();
  ITPState e;
  e.error = true;
  CHECK(apply_step(e, step("by simp"), *s).error);

  const std::string proof = "proof -\n  have \"A\" by simp\n  then show ?thesis by auto\nqed";
  CHECK(apply_steps(s0, proof, *s).finish);
  CHECK(is_proof(kTheorem, proof, *s));
  CHECK(!is_proof(kTheorem, "proof -\n  have \"A\" sorry\n  then show ?thesis by auto\nqed", *s));
  CHECK(!is_proof(kTheorem, "proof -\n  have \"A\" by simp\nqed", *s));
  // stops at the first error
  const ITPState mid = apply_steps(s0, "proof -\n  have \"A\" by auto\n  then show ?thesis by auto\nqed", *s);
  CHECK(mid.error);
  CHECK(mid.message.find("g1") != std::string::npos);
  CHECK_THROWS_AS(backend.open("theorem other: \"Q\""), ItpUnavailable);
}

TEST_CASE("remote sessions over a served mini prover match local ones") {
  MiniBackend served;
  InstanceGenerator gen(31);
  std::vector<GeneratedInstance> instances;
  for (int i = 0; i < 25; ++i) {
    instances.push_back(gen.next("net" + std::to_string(i)));
    served.add(instances.back().theorem, instances.back().script);
  }
  served.add(kTheorem, two_step());
  MiniServer server(served);
  server.start();
  RemoteBackend remote(RemoteEndpoint::parse("tcp://127.0.0.1:" + std::to_string(server.port())),
                       std::chrono::seconds(2));
  CHECK(remote.describe() == "remote:127.0.0.1:" + std::to_string(server.port()));

  for (const auto& inst : instances) {
    auto local = served.open(inst.theorem);
    auto far = remote.open(inst.theorem);
    CHECK(far->theorem() == inst.theorem);
    ITPState a = local->initial();
    ITPState b = far->initial();
    CHECK(states_equal(a, b));
    for (const auto& st : parse(inst.proposal).steps) {
      const ITPState na = local->apply(a, st);
      const ITPState nb = far->apply(b, st);
      REQUIRE(states_equal(na, nb));
      if (!na.error) {
        a = na;
        b = nb;
      }
    }
    CHECK(is_proof(inst.theorem, inst.witness, *far));
  }

  // failures keep the session at `from`, checkpoints can be revisited
  auto far = remote.open(kTheorem);
  const ITPState s0 = far->initial();
  const ITPState s1 = far->apply(s0, step("proof -"));
  const ITPState slow = far->apply(far->apply(s1, step("have \"A\"")), step("by slow"));
  CHECK(slow.error);
  CHECK(slow.timed_out);
  CHECK(!far->apply(s1, step("have \"A\"")).error);
  CHECK(states_equal(far->apply(s0, step("proof -")), s1));
  ITPState ghost = s0;
  ghost.checkpoint = 12345;
  CHECK_THROWS_AS(far->apply(ghost, step("proof -")), UnknownCheckpoint);
  far->close();
  CHECK(far->closed());
  CHECK_THROWS_AS(far->apply(s0, step("proof -")), SessionClosed);

  CHECK_THROWS_AS(remote.open("theorem nobody_home: \"Z\""), ItpUnavailable);
  server.stop();
  CHECK(server.connections() >= instances.size());
}

TEST_CASE("unreachable remote prover and bad endpoints") {
  CHECK_THROWS_AS(RemoteEndpoint::parse("localhost"), ConfigError);
  CHECK_THROWS_AS(RemoteEndpoint::parse("localhost:99999"), ConfigError);
  const RemoteEndpoint ep = RemoteEndpoint::parse("example.org:8000");
  CHECK(ep.host == "example.org");
  CHECK(ep.port == 8000);

  std::uint16_t port = 0;
  {
    MiniServer probe{MiniBackend{}};
    port = probe.port();
  }  // closed again: nothing listens here now
  RemoteBackend remote(RemoteEndpoint{"127.0.0.1", port});
  CHECK_THROWS_AS(remote.open(kTheorem), ItpUnavailable);
}
