// Serial vs OpenMP timings for the two parallel kernels: the campaign runner
// (problems spread over workers) and brute-force candidate verification.
// The prover can be given an artificial per-step latency, which is where
// campaign workers pay off even on a single core.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <thread>

#include <omp.h>

#include "CLI11.hpp"
#include "proofaug/gen.hpp"
#include "proofaug/harness.hpp"
#include "support/oracle.hpp"

using namespace proofaug;

namespace {

class SlowSession : public Session {
 public:
  SlowSession(std::unique_ptr<Session> inner, std::chrono::microseconds delay)
      : inner_(std::move(inner)), delay_(delay) {}
  const std::string& theorem() const override { return inner_->theorem(); }
  ITPState initial() override { return inner_->initial(); }
  ITPState apply(const ITPState& from, const ProofStep& step) override {
    std::this_thread::sleep_for(delay_);
    ++transitions_;
    return inner_->apply(from, step);
  }
  ITPState current() override { return inner_->current(); }
  void restore(const ITPState& s) override { inner_->restore(s); }
  void close() override { inner_->close(); }
  bool closed() const override { return inner_->closed(); }

 private:
  std::unique_ptr<Session> inner_;
  std::chrono::microseconds delay_;
};

class SlowBackend : public Backend {
 public:
  SlowBackend(Backend& inner, std::chrono::microseconds delay) : inner_(inner), delay_(delay) {}
  std::unique_ptr<Session> open(std::string_view theorem) override {
    return std::make_unique<SlowSession>(inner_.open(theorem), delay_);
  }
  std::string describe() const override { return "slow:" + inner_.describe(); }

 private:
  Backend& inner_;
  std::chrono::microseconds delay_;
};

template <typename F>
double best_ms(int reps, F f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const std::string& kernel, const std::string& mode, int threads, double ms, double base) {
  std::cout << std::left << std::setw(12) << kernel << std::setw(10) << mode << std::right
            << std::setw(8) << threads << std::setw(12) << std::fixed << std::setprecision(1) << ms
            << std::setw(10) << std::setprecision(2) << base / ms << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP timings"};
  std::size_t problems = 48;
  std::vector<int> workers{2, 4, 8};
  int delay_us = 200;
  int reps = 3;
  std::size_t oracle_instances = 150;
  std::uint64_t seed = 1;
  app.add_option("--problems", problems, "campaign size");
  app.add_option("--workers", workers, "worker counts to time");
  app.add_option("--delay-us", delay_us, "simulated prover latency per step");
  app.add_option("--reps", reps, "repetitions, best time kept");
  app.add_option("--oracle-instances", oracle_instances, "instances for candidate verification");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  std::cout << "hardware threads: " << std::thread::hardware_concurrency()
            << ", omp max threads: " << omp_get_max_threads() << "\n\n";
  std::cout << std::left << std::setw(12) << "kernel" << std::setw(10) << "mode" << std::right
            << std::setw(8) << "threads" << std::setw(12) << "ms" << std::setw(10) << "speedup" << "\n";

  // campaign
  InstanceGenerator gen(seed);
  std::vector<GeneratedInstance> instances;
  std::vector<Problem> list;
  MiniBackend mini;
  for (std::size_t k = 0; k < problems; ++k) {
    const std::string name = "b" + std::to_string(k);
    instances.push_back(k % 10 < 3 ? gen.next_erp(name) : gen.next(name));
    list.push_back(instances.back().problem());
    mini.add(instances.back().theorem, instances.back().script);
  }
  SlowBackend slow(mini, std::chrono::microseconds(delay_us));
  StrategyConfig s;
  s.id = "bench";
  s.prompt = PromptTemplate{"{xi}\n{xf}\n", "{yf}\n", {"```"}};
  s.shots = 0;
  s.attempts = 2;
  s.erp = true;
  s.erp_prompt = PromptTemplate{"{xf}\n{yf_p}{ps}", "{yf_c}\n", {"```"}};
  CampaignOptions opt;
  opt.budget = 4;

  auto campaign = [&](int threads) {
    MockLm lm(mock_rules(instances));
    Sampler sampler(lm);
    CampaignLedger ledger;
    CampaignOptions o = opt;
    o.workers = std::max(threads, 1);
    if (threads == 0) run_campaign_serial(list, {s}, slow, sampler, ledger, o);
    else run_campaign(list, {s}, slow, sampler, ledger, o);
    return report(ledger.records(), list.size()).to_csv();
  };
  const std::string expect = campaign(0);
  const double serial = best_ms(reps, [&] { campaign(0); });
  row("campaign", "serial", 1, serial, serial);
  for (int w : workers) {
    if (campaign(w) != expect) {
      std::cerr << "campaign with " << w << " workers disagrees with the serial run\n";
      return 1;
    }
    row("campaign", "omp", w, best_ms(reps, [&] { campaign(w); }), serial);
  }

  // candidate verification
  InstanceGenerator ogen(seed + 1);
  std::vector<GeneratedInstance> corpus;
  for (std::size_t k = 0; k < oracle_instances; ++k) corpus.push_back(ogen.next("o" + std::to_string(k)));
  std::size_t serial_hits = 0;
  const double oserial = best_ms(reps, [&] {
    serial_hits = 0;
    for (const auto& inst : corpus)
      serial_hits += testing::mcsp_oracle(inst.proposal, inst.script, inst.theorem).verifying.size();
  });
  row("oracle", "serial", 1, oserial, oserial);
  for (int w : workers) {
    std::size_t hits = 0;
    const double ms = best_ms(reps, [&] {
      hits = 0;
      for (const auto& inst : corpus)
        hits += testing::mcsp_oracle_parallel(inst.proposal, inst.script, inst.theorem, w).verifying.size();
    });
    if (hits != serial_hits) {
      std::cerr << "parallel oracle disagrees with the serial one\n";
      return 1;
    }
    row("oracle", "omp", w, ms, oserial);
  }
  return 0;
}
