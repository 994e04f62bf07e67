// form: experiment driver and machine toolbelt.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "form/env.hpp"
#include "form/learner.hpp"
#include "form/machine.hpp"
#include "form/rl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace form;

namespace {

enum Exit { kOk = 0, kViolations = 1, kUsage = 2, kTimeout = 3, kUnsat = 4, kInput = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

// "0..4", "3", "1,5,7"
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  try {
    if (const auto dots = s.find(".."); dots != std::string::npos) {
      const auto a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
      if (b < a) throw UsageError("empty seed range '" + s + "'");
      for (auto k = a; k <= b; ++k) out.push_back(k);
    } else {
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    }
  } catch (const std::logic_error&) {
    throw UsageError("bad seeds '" + s + "'");
  }
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

LearnMode parse_learn_mode(const std::string& s) {
  if (s == "first-order") return LearnMode::FirstOrder;
  if (s == "propositional") return LearnMode::Propositional;
  throw UsageError("unknown learner mode '" + s + "'");
}

std::string learn_mode_name(LearnMode m) { return m == LearnMode::FirstOrder ? "first-order" : "propositional"; }

env::Task load_task(const std::string& name, std::optional<std::uint64_t> layout_seed, int max_steps,
                    const std::string& layout_file = {}) {
  env::Task t = env::make_task(name, {layout_seed, max_steps});
  if (!layout_file.empty()) t = env::Task(name, t.kind(), env::layout_from_text(slurp(layout_file)), max_steps);
  return t;
}

// ---- run ------------------------------------------------------------------

struct RunConfig {
  std::string task = "all-yellow-2";
  std::string mode = "fixed";
  std::vector<std::uint64_t> seeds{0};
  std::string out = "runs/out";
  std::string machine;  // fixed mode override
  std::string layout;   // layout file override
  std::optional<std::uint64_t> layout_seed;
  int max_steps = 300;
  double budget_learner_s = 60.0;
  std::string transfer_from;
  std::vector<std::string> retrain{"u0"};
  long source_episodes = 50000;
  int workers = 0;  // 0: hardware concurrency
  rl::RLConfig rl;
  SearchConfig search;
};

json to_json(const RunConfig& c) {
  json j;
  j["task"] = c.task;
  j["mode"] = c.mode;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["machine"] = c.machine;
  j["layout"] = c.layout;
  j["layout_seed"] = c.layout_seed ? json(*c.layout_seed) : json(nullptr);
  j["max_steps"] = c.max_steps;
  j["budget_learner_s"] = c.budget_learner_s;
  j["transfer_from"] = c.transfer_from;
  j["retrain"] = c.retrain;
  j["source_episodes"] = c.source_episodes;
  j["workers"] = c.workers;
  j["rl"] = {{"alpha", c.rl.alpha},
             {"gamma", c.rl.gamma},
             {"eps_start", c.rl.eps_start},
             {"eps_end", c.rl.eps_end},
             {"eps_decay_fraction", c.rl.eps_decay_fraction},
             {"episodes", c.rl.episodes},
             {"shaping", c.rl.shaping},
             {"window", c.rl.window},
             {"iteration_episodes", c.rl.iteration_episodes},
             {"target_success", c.rl.target_success},
             {"stop_at_target", c.rl.stop_at_target},
             {"early_stop",
              {{"enabled", c.rl.early_stop.enabled},
               {"crossing", c.rl.early_stop.crossing},
               {"drop", c.rl.early_stop.drop}}}};
  j["search"] = {{"max_states", c.search.max_states},
                 {"kappa", c.search.kappa},
                 {"max_literals_per_edge", c.search.max_literals_per_edge}};
  return j;
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) j.at(key).get_to(dst);
}

void from_json(const json& j, RunConfig& c) {
  static const std::set<std::string> known = {"task",    "mode",     "seeds",         "out",           "machine",
                                              "layout",  "layout_seed", "max_steps",  "budget_learner_s",
                                              "transfer_from", "retrain", "source_episodes", "workers", "rl", "search"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw UsageError("unknown config key '" + k + "'");
  take(j, "task", c.task);
  take(j, "mode", c.mode);
  if (j.contains("seeds")) {
    if (j["seeds"].is_string()) c.seeds = parse_seeds(j["seeds"].get<std::string>());
    else j["seeds"].get_to(c.seeds);
  }
  take(j, "out", c.out);
  take(j, "machine", c.machine);
  take(j, "layout", c.layout);
  if (j.contains("layout_seed") && !j["layout_seed"].is_null()) c.layout_seed = j["layout_seed"].get<std::uint64_t>();
  take(j, "max_steps", c.max_steps);
  take(j, "budget_learner_s", c.budget_learner_s);
  take(j, "transfer_from", c.transfer_from);
  take(j, "retrain", c.retrain);
  take(j, "source_episodes", c.source_episodes);
  take(j, "workers", c.workers);
  if (j.contains("rl")) {
    const json& r = j["rl"];
    take(r, "alpha", c.rl.alpha);
    take(r, "gamma", c.rl.gamma);
    take(r, "eps_start", c.rl.eps_start);
    take(r, "eps_end", c.rl.eps_end);
    take(r, "eps_decay_fraction", c.rl.eps_decay_fraction);
    take(r, "episodes", c.rl.episodes);
    take(r, "shaping", c.rl.shaping);
    take(r, "window", c.rl.window);
    take(r, "iteration_episodes", c.rl.iteration_episodes);
    take(r, "target_success", c.rl.target_success);
    take(r, "stop_at_target", c.rl.stop_at_target);
    if (r.contains("early_stop")) {
      take(r["early_stop"], "enabled", c.rl.early_stop.enabled);
      take(r["early_stop"], "crossing", c.rl.early_stop.crossing);
      take(r["early_stop"], "drop", c.rl.early_stop.drop);
    }
  }
  if (j.contains("search")) {
    take(j["search"], "max_states", c.search.max_states);
    take(j["search"], "kappa", c.search.kappa);
    take(j["search"], "max_literals_per_edge", c.search.max_literals_per_edge);
  }
}

struct SeedOutput {
  rl::TrainResult result;
  std::string error;
};

int cmd_run(RunConfig c) {
  const rl::Mode mode = [&] {
    try {
      return rl::parse_mode(c.mode);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  if (c.budget_learner_s <= 0) throw UsageError("--budget-learner must be positive");
  if (!c.transfer_from.empty() && mode != rl::Mode::Fixed) throw UsageError("transfer runs need --mode fixed");
  c.search.time_budget = std::chrono::milliseconds(static_cast<long long>(c.budget_learner_s * 1000.0));

  const env::Task task = load_task(c.task, c.layout_seed, c.max_steps, c.layout);
  std::optional<env::Task> source;
  if (!c.transfer_from.empty()) source = load_task(c.transfer_from, c.layout_seed, c.max_steps);
  std::optional<Form> machine;
  if (mode == rl::Mode::Fixed) machine = c.machine.empty() ? task.reference_machine() : from_file(c.machine);

  const fs::path out(c.out);
  fs::create_directories(out);
  spit(out / "config.json", to_json(c).dump(2) + "\n");
  spdlog::info("run {} {} seeds={} episodes={} -> {}", c.task, c.mode, c.seeds.size(), c.rl.episodes, c.out);

  std::vector<SeedOutput> results(c.seeds.size());
  auto work = [&](std::size_t i) {
    try {
      rl::RLConfig cfg = c.rl;
      cfg.seed = c.seeds[i];
      if (source) {
        rl::RLConfig src = cfg;
        src.episodes = c.source_episodes;
        const auto base = rl::train(*source, rl::Mode::Fixed, src, source->reference_machine(), c.search);
        const std::set<std::string> retrain(c.retrain.begin(), c.retrain.end());
        results[i].result = rl::transfer(*base.team, task, retrain, cfg);
      } else {
        results[i].result = rl::train(task, mode, cfg, machine, c.search);
      }
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, c.workers > 0 ? c.workers : std::max(1u, std::thread::hardware_concurrency()));
  for (std::size_t start = 0; start < c.seeds.size(); start += workers) {
    std::vector<std::jthread> pool;
    for (std::size_t i = start; i < std::min(c.seeds.size(), start + workers); ++i) pool.emplace_back(work, i);
  }

  std::ostringstream csv;
  rl::write_metrics_header(csv);
  json summary = json::array();
  int status = kOk;
  const std::string run_id = c.task + "/" + c.mode + (source ? "/transfer-from-" + c.transfer_from : "");
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    const auto& r = results[i];
    if (!r.error.empty()) {
      spdlog::error("seed {}: {}", c.seeds[i], r.error);
      status = kInput;
      continue;
    }
    const auto& t = r.result;
    rl::write_metrics(csv, run_id, c.seeds[i], t.metrics);
    for (std::size_t v = 0; v < t.machines.size(); ++v) {
      if (!validate(t.machines[v]).empty()) throw std::logic_error("invalid machine produced by a run");
      spit(out / ("seed" + std::to_string(c.seeds[i])) / ("machine_v" + std::to_string(v) + ".form"),
           to_text(t.machines[v]));
    }
    if (t.learner_timeouts > 0)
      spdlog::warn("seed {}: learner timed out {} time(s)", c.seeds[i], t.learner_timeouts);
    summary.push_back({{"seed", c.seeds[i]},
                       {"episodes_run", t.episodes_run},
                       {"episodes_to_target", t.episodes_to_target ? json(*t.episodes_to_target) : json(nullptr)},
                       {"final_success", t.final_success},
                       {"best_success", t.best_success},
                       {"stopped_early", t.stopped_early},
                       {"machine_versions", t.machines.size()},
                       {"learner_timeouts", t.learner_timeouts},
                       {"machine_steps", t.machine_steps},
                       {"conservation_failures", t.conservation_failures}});
    spdlog::info("seed {}: best {:.2f} final {:.2f} to-target {}", c.seeds[i], t.best_success, t.final_success,
                 t.episodes_to_target ? std::to_string(*t.episodes_to_target) : "never");
  }
  spit(out / "metrics.csv", csv.str());
  spit(out / "summary.json", summary.dump(2) + "\n");
  return status;
}

// ---- learn ----------------------------------------------------------------

// |U| counts u_acc and u_rej whether or not the machine uses u_rej.
json report_space(const Signature& sig, int states, int kappa) {
  json j;
  j["num_states"] = states;
  for (const auto m : {LearnMode::FirstOrder, LearnMode::Propositional}) {
    const auto s = space_size(hypothesis_space(sig, states, kappa, m));
    j[learn_mode_name(m)] = {{"edge_facts", s.edge_facts}, {"rule_count", s.rule_count}};
  }
  return j;
}

int cmd_learn(const std::string& traces_path, const std::string& sig_path, const std::string& task_name,
              const std::string& mode, SearchConfig cfg, double budget_s, const std::string& out,
              const std::string& report_path) {
  if (sig_path.empty() == task_name.empty()) throw UsageError("give exactly one of --signature and --task");
  if (budget_s <= 0) throw UsageError("--budget-learner must be positive");
  cfg.mode = parse_learn_mode(mode);
  cfg.time_budget = std::chrono::milliseconds(static_cast<long long>(budget_s * 1000.0));
  const Signature sig = sig_path.empty() ? env::make_task(task_name).signature() : signature_from_text(slurp(sig_path));
  const auto traces = read_traces(traces_path);
  for (std::size_t k = 0; k < traces.size(); ++k)
    for (const auto& o : traces[k].observations)
      for (const auto& a : o.atoms())
        if (!sig.contains(a))
          throw Error("trace " + std::to_string(k + 1) + ": atom " + a.to_string() + " is not in the signature");

  LearnResult r;
  try {
    r = learn(traces, sig, cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  json rep;
  rep["status"] = status_name(r.status);
  rep["mode"] = mode;
  rep["examples"] = traces.size();
  rep["elapsed_ms"] = r.stats.elapsed_ms;
  rep["rounds"] = r.stats.rounds;
  rep["examples_used"] = r.stats.examples_used;
  rep["nodes"] = r.stats.nodes;
  if (r.machine) {
    const auto cost = cost_of(*r.machine);
    rep["states"] = cost.states;
    rep["edges"] = r.machine->edges().size();
    rep["literals"] = cost.literals;
    rep["quantified_literals"] = cost.quantified;
    const int non_terminal = cost.states - 1 - (r.machine->rejecting() ? 1 : 0);
    rep["space_size"] = report_space(sig, non_terminal + 2, cfg.kappa);
    if (!out.empty()) to_file(*r.machine, out);
  } else {
    rep["space_size"] = report_space(sig, cfg.max_states, cfg.kappa);
  }
  const std::string text = rep.dump(2) + "\n";
  if (!report_path.empty()) spit(report_path, text);
  std::cout << text;
  if (r.machine && out.empty()) std::cout << to_text(*r.machine);
  switch (r.status) {
    case LearnStatus::Ok: return kOk;
    case LearnStatus::Timeout: spdlog::error("learner timed out after {:.0f} ms", r.stats.elapsed_ms); return kTimeout;
    case LearnStatus::Unsat: spdlog::error("no machine within the search bounds is consistent"); return kUnsat;
  }
  return kOk;
}

// ---- validate / export-dot / simulate / gen-traces -------------------------

int cmd_validate(const std::string& path) {
  const Form m = from_file(path);
  const auto v = validate(m);
  for (const auto& x : v) {
    std::cout << x.message;
    if (!x.edges.empty()) {
      std::cout << " [edges";
      for (const auto e : x.edges) {
        const Edge& ed = m.edges()[e];
        std::cout << ' ' << m.name(ed.from) << "->" << m.name(ed.to) << '#' << ed.index;
      }
      std::cout << ']';
    }
    std::cout << '\n';
  }
  if (v.empty()) std::cout << "ok: " << m.num_states() << " states, " << m.edges().size() << " edges\n";
  return v.empty() ? kOk : kViolations;
}

int cmd_export_dot(const std::string& path, const std::string& out) {
  const std::string dot = to_dot(from_file(path));
  if (out.empty()) std::cout << dot;
  else spit(out, dot);
  return kOk;
}

int cmd_simulate(const std::string& machine_path, const std::string& traces_path) {
  const Form m = from_file(machine_path);
  if (const auto v = validate(m); !v.empty()) {
    std::cerr << "machine is invalid: " << v.front().message << '\n';
    return kViolations;
  }
  const auto traces = read_traces(traces_path);
  int k = 0;
  for (const auto& t : traces) {
    const auto r = run_trace(m, t.observations);
    std::cout << ++k << ' ' << label_name(t.label) << ' ';
    for (std::size_t i = 0; i < r.states.size(); ++i) std::cout << (i ? "," : "") << m.name(r.states[i]);
    std::cout << " reward " << r.total_reward << (accepts_example(m, t) ? "" : " MISMATCH") << '\n';
  }
  return kOk;
}

int cmd_gen_traces(const std::string& task_name, int count, std::uint64_t seed, bool balanced,
                   const std::string& out, std::optional<std::uint64_t> layout_seed, int max_steps) {
  if (count < 1) throw UsageError("--count must be positive");
  const env::Task task = load_task(task_name, layout_seed, max_steps);
  const auto traces = balanced ? env::balanced_traces(task, count, seed) : env::generate_traces(task, count, seed);
  std::map<std::string, int> counts;
  for (const auto& t : traces) ++counts[label_name(t.label)];
  if (out.empty()) {
    for (const auto& t : traces) std::cout << trace_to_line(t) << '\n';
  } else {
    write_traces(out, traces);
  }
  for (const auto& [l, n] : counts) std::cerr << l << ' ' << n << '\n';
  return kOk;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("form");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("FORM_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"First-order reward machines: learning, validation and RL experiments"};
  app.require_subcommand(1);

  // run
  RunConfig rc;
  std::string config_path, seeds, task_flag, mode_flag, out_flag;
  std::optional<long> episodes;
  std::optional<double> budget;
  auto* run = app.add_subcommand("run", "Train agents on a task across seeds");
  run->add_option("--config", config_path, "JSON config file; flags override it");
  run->add_option("--task", task_flag, "Task name");
  run->add_option("--mode", mode_flag, "fixed, learn-form, learn-prop or no-machine");
  run->add_option("--seeds", seeds, "Seeds: a..b or a,b,c");
  run->add_option("--episodes", episodes, "Episodes per seed");
  run->add_option("--budget-learner", budget, "Learner budget per call, seconds");
  run->add_option("--out", out_flag, "Output directory");
  std::optional<std::string> machine_flag, transfer_flag;
  std::vector<std::string> retrain_flag;
  std::optional<int> workers_flag;
  run->add_option("--machine", machine_flag, "Machine file for fixed mode (default: the task's reference)");
  run->add_option("--transfer-from", transfer_flag, "Train on this task first, then transfer");
  run->add_option("--retrain", retrain_flag, "States that keep learning after transfer");
  run->add_option("--workers", workers_flag, "Parallel seeds");

  // learn
  std::string l_traces, l_sig, l_task, l_mode = "first-order", l_out, l_report;
  SearchConfig l_cfg;
  double l_budget = 60.0;
  auto* learn_cmd = app.add_subcommand("learn", "Learn a minimal machine from a labelled trace file");
  learn_cmd->add_option("--traces", l_traces, "Trace file")->required();
  learn_cmd->add_option("--signature", l_sig, "Signature file");
  learn_cmd->add_option("--task", l_task, "Use a task's signature");
  learn_cmd->add_option("--mode", l_mode, "first-order or propositional");
  learn_cmd->add_option("--max-states", l_cfg.max_states, "Largest machine tried");
  learn_cmd->add_option("--kappa", l_cfg.kappa, "Parallel edges per state pair");
  learn_cmd->add_option("--max-literals", l_cfg.max_literals_per_edge, "Literals per edge");
  learn_cmd->add_option("--budget-learner", l_budget, "Time budget, seconds");
  learn_cmd->add_option("--out", l_out, "Machine file to write");
  learn_cmd->add_option("--report", l_report, "JSON report file");

  std::string v_path;
  auto* val = app.add_subcommand("validate", "Check a machine file");
  val->add_option("machine", v_path, "Machine file")->required();

  std::string d_path, d_out;
  auto* dot = app.add_subcommand("export-dot", "Write a machine as Graphviz DOT");
  dot->add_option("machine", d_path, "Machine file")->required();
  dot->add_option("--out", d_out, "DOT file (default: stdout)");

  std::string s_machine, s_traces;
  auto* sim = app.add_subcommand("simulate", "Run a machine over a trace file");
  sim->add_option("machine", s_machine, "Machine file")->required();
  sim->add_option("traces", s_traces, "Trace file")->required();

  std::string g_task, g_out;
  int g_count = 100, g_max_steps = 300;
  std::uint64_t g_seed = 0;
  std::optional<std::uint64_t> g_layout_seed;
  bool g_balanced = false;
  auto* gen = app.add_subcommand("gen-traces", "Generate a labelled trace corpus");
  gen->add_option("--task", g_task, "Task name")->required();
  gen->add_option("--count", g_count, "Number of traces");
  gen->add_option("--seed", g_seed, "Seed");
  gen->add_option("--out", g_out, "Trace file (default: stdout)");
  gen->add_flag("--balanced", g_balanced, "Round-robin over labels");
  gen->add_option("--layout-seed", g_layout_seed, "Randomize checkpoint placement");
  gen->add_option("--max-steps", g_max_steps, "Episode step limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) {
      if (!config_path.empty()) {
        try {
          json j = json::parse(slurp(config_path));
          from_json(j, rc);
        } catch (const json::exception& e) {
          throw UsageError("config '" + config_path + "': " + e.what());
        }
      }
      if (!task_flag.empty()) rc.task = task_flag;
      if (!mode_flag.empty()) rc.mode = mode_flag;
      if (!seeds.empty()) rc.seeds = parse_seeds(seeds);
      if (episodes) rc.rl.episodes = *episodes;
      if (budget) rc.budget_learner_s = *budget;
      if (!out_flag.empty()) rc.out = out_flag;
      if (machine_flag) rc.machine = *machine_flag;
      if (transfer_flag) rc.transfer_from = *transfer_flag;
      if (!retrain_flag.empty()) rc.retrain = retrain_flag;
      if (workers_flag) rc.workers = *workers_flag;
      return cmd_run(rc);
    }
    if (*learn_cmd) return cmd_learn(l_traces, l_sig, l_task, l_mode, l_cfg, l_budget, l_out, l_report);
    if (*val) return cmd_validate(v_path);
    if (*dot) return cmd_export_dot(d_path, d_out);
    if (*sim) return cmd_simulate(s_machine, s_traces);
    if (*gen) return cmd_gen_traces(g_task, g_count, g_seed, g_balanced, g_out, g_layout_seed, g_max_steps);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const env::UnknownTask& e) {
    std::string known;
    for (const auto& n : env::task_names()) known += (known.empty() ? "" : ", ") + n;
    spdlog::error("{} (known: {})", e.what(), known);
    return kUsage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kInput;
  }
  return kOk;
}
