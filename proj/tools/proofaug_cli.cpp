// Command-line front end: run / resume a campaign, re-verify, report,
// augment a single proposal, serve MiniITP over TCP, generate workloads.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "proofaug/engine.hpp"
#include "proofaug/error.hpp"
#include "proofaug/gen.hpp"
#include "proofaug/harness.hpp"
#include "proofaug/mini_itp.hpp"
#include "proofaug/mini_server.hpp"
#include "proofaug/remote_itp.hpp"

using namespace proofaug;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

MiniBackend mini_from_problems(const std::vector<Problem>& problems) {
  MiniBackend backend;
  for (const Problem& p : problems)
    if (p.mini_itp) backend.add(p.xf, MiniScript::from_json(*p.mini_itp));
  return backend;
}

// mini | mini:PATH | remote:HOST:PORT
std::unique_ptr<Backend> make_backend(const std::string& spec, const std::vector<Problem>& problems) {
  if (spec == "mini") return std::make_unique<MiniBackend>(mini_from_problems(problems));
  if (spec.rfind("mini:", 0) == 0) return std::make_unique<MiniBackend>(MiniBackend::from_path(spec.substr(5)));
  if (spec.rfind("remote:", 0) == 0)
    return std::make_unique<RemoteBackend>(RemoteEndpoint::parse(spec.substr(7)));
  throw ConfigError("unknown backend '" + spec + "' (mini, mini:PATH, remote:HOST:PORT)");
}

// mock:FILE | http://...
std::unique_ptr<LmBackend> make_lm(const std::string& spec, int timeout_s) {
  if (spec.rfind("mock:", 0) == 0) {
    std::ifstream in(spec.substr(5));
    if (!in) throw ConfigError("cannot open " + spec.substr(5));
    auto lm = std::make_unique<MockLm>();
    for (std::string line; std::getline(in, line);)
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        lm->add_rule(MockLm::rule_from_json(nlohmann::json::parse(line)));
    return lm;
  }
  if (spec.rfind("http://", 0) == 0) return std::make_unique<HttpLm>(spec, std::chrono::seconds(timeout_s));
  if (spec.rfind("http:", 0) == 0)
    return std::make_unique<HttpLm>("http://" + spec.substr(5), std::chrono::seconds(timeout_s));
  throw ConfigError("unknown LM '" + spec + "' (mock:FILE, http://HOST:PORT/PATH)");
}

std::map<std::string, std::string> theorem_map(const std::vector<Problem>& problems) {
  std::map<std::string, std::string> out;
  for (const Problem& p : problems) out[p.name] = p.xf;
  return out;
}

void print_metrics(const Metrics& m) {
  std::cout << "problems " << m.problems << ", proved " << m.proved << " (" << m.pass_rate() * 100
            << "%), queries " << m.total_queries << "\n";
  for (const auto& [b, rate] : m.pass_at) std::cout << "  pass@" << b << " = " << rate << "\n";
  for (const StrategyRow& r : m.strategies)
    std::cout << "  " << r.strategy << ": attempts " << r.attempts << ", queries " << r.queries
              << ", atp calls " << r.atp_calls << ", first proofs " << r.proved
              << ", cumulative " << r.cumulative_pass << "\n";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proof augmentation toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run or resume a campaign");
  std::string problems_path, backend_spec = "mini", lm_spec, out_dir = "campaign_out";
  std::vector<std::string> strategy_paths;
  std::uint64_t budget = 1, seed = 0;
  int workers = 12, lm_timeout = 120;
  bool no_cache = false, serial = false, no_traces = false;
  run->add_option("--problems", problems_path, "problems JSONL")->required()->check(CLI::ExistingFile);
  run->add_option("--strategy", strategy_paths, "strategy JSON, in order (repeatable)")
      ->required()->check(CLI::ExistingFile);
  run->add_option("--budget", budget, "LM queries per problem");
  run->add_option("--workers", workers, "parallel problems")->check(CLI::PositiveNumber);
  run->add_option("--backend", backend_spec, "mini | mini:PATH | remote:HOST:PORT");
  run->add_option("--lm", lm_spec, "mock:FILE | http://HOST:PORT/PATH")->required();
  run->add_option("--lm-timeout", lm_timeout, "seconds per LM request");
  run->add_option("--out", out_dir, "output directory (attempt log, traces, metrics)");
  run->add_option("--seed", seed, "campaign seed");
  run->add_flag("--no-cache", no_cache, "disable the semi-proof cache");
  run->add_flag("--serial", serial, "single-threaded reference schedule");
  run->add_flag("--no-traces", no_traces, "do not write per-attempt traces");

  // verify
  auto* ver = app.add_subcommand("verify", "re-check proved attempts on a fresh prover");
  std::string attempts_path;
  ver->add_option("--attempts", attempts_path, "attempt log")->required()->check(CLI::ExistingFile);
  ver->add_option("--problems", problems_path, "problems JSONL")->required()->check(CLI::ExistingFile);
  ver->add_option("--backend", backend_spec, "mini | mini:PATH | remote:HOST:PORT");

  // report
  auto* rep = app.add_subcommand("report", "metrics from an attempt log");
  std::size_t problem_count = 0;
  std::string csv_path, json_path;
  rep->add_option("--attempts", attempts_path, "attempt log")->required()->check(CLI::ExistingFile);
  rep->add_option("--problems", problems_path, "problems JSONL (for the campaign size)")
      ->check(CLI::ExistingFile);
  rep->add_option("--budget", budget, "largest pass@ checkpoint");
  rep->add_option("--csv", csv_path, "write section,key,value rows");
  rep->add_option("--json", json_path, "write metrics JSON");

  // augment
  auto* aug = app.add_subcommand("augment", "augment one proposal and print the trace");
  std::string problem_name, proposal_path, erp_prompt_path;
  bool show_trace = false;
  aug->add_option("--problems", problems_path, "problems JSONL")->required()->check(CLI::ExistingFile);
  aug->add_option("--problem", problem_name, "problem name")->required();
  aug->add_option("--proposal", proposal_path, "proof proposal file")->required()->check(CLI::ExistingFile);
  aug->add_option("--backend", backend_spec, "mini | mini:PATH | remote:HOST:PORT");
  aug->add_option("--lm", lm_spec, "enables the completion step: mock:FILE | http://...");
  aug->add_option("--erp-prompt", erp_prompt_path, "completion prompt template")->check(CLI::ExistingFile);
  aug->add_flag("--trace", show_trace, "print every trace event as JSON");

  // serve-mini
  auto* serve = app.add_subcommand("serve-mini", "serve MiniITP scripts over TCP");
  std::string scripts_path;
  int port = 0;
  serve->add_option("--problems", problems_path, "problems JSONL with inline scripts")->check(CLI::ExistingFile);
  serve->add_option("--scripts", scripts_path, "script JSON object or directory")->check(CLI::ExistingPath);
  serve->add_option("--port", port, "TCP port (0: any free port)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a problem corpus and matching mock-LM rules");
  std::size_t count = 20;
  double erp_share = 0.3;
  std::string gen_out = "generated";
  gen->add_option("--count", count, "number of problems");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--erp-share", erp_share, "share of problems that need a completion")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", gen_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto problems = load_problems(problems_path);
      std::vector<StrategyConfig> strategies;
      for (const auto& p : strategy_paths) strategies.push_back(StrategyConfig::load(p));
      auto backend = make_backend(backend_spec, problems);
      auto lm = make_lm(lm_spec, lm_timeout);
      Sampler sampler(*lm);

      fs::create_directories(out_dir);
      const std::string log = (fs::path(out_dir) / "attempts.jsonl").string();
      CampaignLedger ledger(log);
      std::vector<AttemptRecord> earlier;
      if (fs::exists(log)) {
        earlier = load_attempts(log);
        ledger.replay(earlier);
        std::cerr << "resuming: " << earlier.size() << " earlier attempts\n";
      }
      CampaignOptions opt;
      opt.budget = budget;
      opt.workers = workers;
      opt.cache = !no_cache;
      opt.seed = seed;
      if (!no_traces) opt.trace_dir = (fs::path(out_dir) / "traces").string();
      if (serial) run_campaign_serial(problems, strategies, *backend, sampler, ledger, opt);
      else run_campaign(problems, strategies, *backend, sampler, ledger, opt);

      const Metrics m = report(ledger.records(), problems.size(), budget);
      write_file(fs::path(out_dir) / "metrics.json", m.to_json().dump(2) + "\n");
      write_file(fs::path(out_dir) / "metrics.csv", m.to_csv());
      print_metrics(m);
      std::cout << "new attempts " << ledger.records().size() - earlier.size() << ", LM queries "
                << sampler.queries() << ", log " << log << "\n";
      return 0;
    }

    if (*ver) {
      const auto problems = load_problems(problems_path);
      auto backend = make_backend(backend_spec, problems);
      const VerifyReport r = verify(load_attempts(attempts_path), theorem_map(problems), *backend);
      for (const auto& e : r.entries)
        std::cout << e.problem << "\t" << e.strategy << "\t" << e.attempt << "\t" << to_string(e.status) << "\n";
      std::cout << "ok " << r.count(VerifyStatus::ok) << ", timeout " << r.count(VerifyStatus::timeout)
                << ", failure " << r.count(VerifyStatus::failure) << ", unavailable "
                << r.count(VerifyStatus::unavailable) << "\n";
      return r.count(VerifyStatus::ok) == r.entries.size() ? 0 : 1;
    }

    if (*rep) {
      if (!problems_path.empty()) problem_count = load_problems(problems_path).size();
      const Metrics m = report(load_attempts(attempts_path), problem_count, rep->count("--budget") ? budget : 0);
      print_metrics(m);
      if (!csv_path.empty()) write_file(csv_path, m.to_csv());
      if (!json_path.empty()) write_file(json_path, m.to_json().dump(2) + "\n");
      return 0;
    }

    if (*aug) {
      const auto problems = load_problems(problems_path);
      auto it = std::find_if(problems.begin(), problems.end(),
                             [&](const Problem& p) { return p.name == problem_name; });
      if (it == problems.end()) throw ConfigError("no problem named '" + problem_name + "'");
      auto backend = make_backend(backend_spec, problems);
      auto session = backend->open(it->xf);
      std::unique_ptr<LmBackend> lm;
      std::unique_ptr<Sampler> sampler;
      ERPConfig erp;
      if (!lm_spec.empty()) {
        if (erp_prompt_path.empty()) throw ConfigError("--lm needs --erp-prompt");
        lm = make_lm(lm_spec, 120);
        sampler = std::make_unique<Sampler>(*lm);
        erp.enabled = true;
        erp.sampler = sampler.get();
        erp.prompt = PromptTemplate::load(erp_prompt_path);
        erp.problem = DemoExample{it->xi, it->yi, it->xf, ""};
      }
      const AugmentResult r =
          augment(it->xf, slurp(proposal_path), *session, ATPPortfolio::standard(), erp);
      if (show_trace) std::cout << trace_jsonl(r.trace);
      for (const auto& m : milestones(r.trace)) std::cout << m << "\n";
      std::cout << "semi-proof:\n" << r.semi_proof << "\n";
      if (r.proved) std::cout << "proof:\n" << r.final_proof << "\n";
      else std::cout << "failed: " << r.reason << "\n";
      std::cout << "atp calls " << r.atp_calls << ", completions " << r.erp_queries << ", fallbacks "
                << r.fallbacks << "\n";
      return r.proved ? 0 : 1;
    }

    if (*serve) {
      MiniBackend backend;
      if (!scripts_path.empty()) backend = MiniBackend::from_path(scripts_path);
      if (!problems_path.empty())
        for (const Problem& p : load_problems(problems_path))
          if (p.mini_itp) backend.add(p.xf, MiniScript::from_json(*p.mini_itp));
      MiniServer server(std::move(backend), static_cast<std::uint16_t>(port));
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      server.start();
      std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }

    if (*gen) {
      InstanceGenerator g(seed);
      std::vector<GeneratedInstance> instances;
      const auto planted = static_cast<std::size_t>(erp_share * double(count) + 0.5);
      for (std::size_t k = 0; k < count; ++k) {
        const std::string name = "gen" + std::to_string(k);
        instances.push_back(k < planted ? g.next_erp(name) : g.next(name));
      }
      fs::create_directories(gen_out);
      std::ofstream problems(fs::path(gen_out) / "problems.jsonl");
      for (const auto& inst : instances) {
        const Problem p = inst.problem();
        problems << nlohmann::json{{"name", p.name}, {"xi", p.xi}, {"yi", p.yi}, {"xf", p.xf},
                                   {"mini_itp", *p.mini_itp}}.dump()
                 << "\n";
      }
      std::ofstream rules(fs::path(gen_out) / "mock_rules.jsonl");
      for (const auto& r : mock_rules(instances))
        rules << nlohmann::json{{"match", r.match}, {"respond", r.responses}}.dump() << "\n";
      std::cout << "wrote " << count << " problems (" << planted << " needing a completion) to "
                << gen_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
