// normalign: command-line driver for the file-based pipeline stages.

#include "normalign/annotation_server.hpp"
#include "normalign/errors.hpp"
#include "normalign/pipeline.hpp"
#include "normalign/text.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace normalign;

// Exit codes, one per error class.
enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kMissingInput = 4,
  kInvalidInput = 5,
  kAuth = 6,
  kBackend = 7,
  kUnparseable = 8,
  kViolations = 9,
};

struct Globals {
  std::string config;
  std::string data_dir = "run";
  std::vector<std::string> backends;
  std::size_t parallelism = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> limit;
  std::string now;
  bool verbose = false;
};

/// Bare NAME applies to the stages a subcommand calls; STAGE=NAME to one.
std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& values,
                                                   const std::vector<std::string>& default_stages) {
  std::map<std::string, std::string> out;
  for (const auto& value : values) {
    const auto eq = value.find('=');
    if (eq != std::string::npos) {
      out[value.substr(0, eq)] = value.substr(eq + 1);
      continue;
    }
    if (default_stages.empty()) {
      throw InvalidInput("--backend " + value + " is ambiguous here; use STAGE=NAME");
    }
    for (const auto& stage : default_stages) out[stage] = value;
  }
  return out;
}

std::filesystem::path resolve_config(const Globals& g) {
  if (!g.config.empty()) return g.config;
  if (const char* env = std::getenv("NORMALIGN_CONFIG")) return env;
  return "normalign.ini";
}

struct Session {
  std::unique_ptr<BackendRegistry> registry;
  StageContext ctx;
};

Session open_session(const Globals& g, const std::vector<std::string>& default_stages,
                     bool config_required = true) {
  Session s;
  const auto config_path = resolve_config(g);
  if (std::filesystem::exists(config_path)) {
    s.registry = std::make_unique<BackendRegistry>(load_config(config_path));
  } else if (config_required || !g.config.empty() || std::getenv("NORMALIGN_CONFIG")) {
    // Only the implicit default may be absent.
    throw ConfigError("config file " + config_path.string() +
                      " not found (pass --config or set NORMALIGN_CONFIG)");
  }
  s.ctx.data_dir = g.data_dir;
  s.ctx.registry = s.registry.get();
  s.ctx.backend_overrides = parse_overrides(g.backends, default_stages);
  s.ctx.parallelism =
      g.parallelism > 0 ? g.parallelism : (s.registry ? s.registry->config().parallelism : 1);
  s.ctx.limit = g.limit;
  s.ctx.seed = g.seed;
  s.ctx.now = g.now;
  std::filesystem::create_directories(s.ctx.data_dir);
  return s;
}

void print_stats(const Session& s) {
  if (!s.registry) return;
  const auto st = s.registry->total_stats();
  std::cerr << "backend calls: " << st.transport_calls << ", cache hits: " << st.cache_hits
            << ", retries: " << st.retries << ", re-asks: " << st.reasks << "\n";
}

int serve(Session& s, const std::string& host, int port,
          const std::optional<std::filesystem::path>& static_dir, const ServeSetup& setup) {
  const auto dir = prepare_annotation(s.ctx, setup);
  auto store = std::make_shared<AnnotationStore>(dir);

  // Block the signals before the server spawns threads so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  AnnotationServer server(store, static_dir);
  const int bound = server.bind(host, port);
  std::cerr << "serving " << store->tasks().size() << " tasks from " << dir.string()
            << " on http://" << host << ":" << bound << "\n";
  std::thread worker([&server] { server.run(); });
  int received = 0;
  sigwait(&signals, &received);
  server.stop();
  worker.join();
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Social-norm alignment pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "pipeline config (INI); default $NORMALIGN_CONFIG or ./normalign.ini");
  app.add_option("--data-dir", g.data_dir, "directory holding the stage files")->capture_default_str();
  app.add_option("--backend", g.backends, "backend override: NAME or STAGE=NAME (repeatable)");
  app.add_option("--parallelism", g.parallelism, "concurrent requests; default from config")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for sampling")->capture_default_str();
  app.add_option("--limit", g.limit, "process at most N items");
  app.add_option("--now", g.now, "timestamp for created_at fields, for reproducible runs");
  app.add_flag("-v,--verbose", g.verbose, "debug logging");

  IngestStageOptions ingest_opts;
  std::string transcripts;
  auto* ingest = app.add_subcommand("ingest", "transcripts -> dilemmas.jsonl, audit.jsonl");
  ingest->add_option("--transcripts", transcripts, "default <data-dir>/transcripts.jsonl");
  ingest->add_option("--size", ingest_opts.chunk_size, "sentences per chunk")
      ->check(CLI::PositiveNumber)->capture_default_str();
  ingest->add_option("--stride", ingest_opts.stride, "chunk stride")
      ->check(CLI::PositiveNumber)->capture_default_str();
  ingest->add_option("--ceiling", ingest_opts.ceiling,
                     "section length ceiling in sentences; default the p95 section length");

  std::string agent;
  auto* respond = app.add_subcommand("respond", "dilemmas -> responses.jsonl for one agent");
  respond->add_option("--agent", agent, "agent name")->required();

  std::optional<std::string> extract_agent;
  auto* extract = app.add_subcommand("extract", "responses -> solutions.jsonl");
  extract->add_option("--agent", extract_agent, "only this agent's responses");

  std::string cand, ref = kPanelAgent;
  auto* match = app.add_subcommand("match", "judge every candidate/reference solution pair");
  match->add_option("--cand", cand, "candidate agent")->required();
  match->add_option("--ref", ref, "reference agent")->capture_default_str();

  std::string mode = "macro";
  std::optional<std::string> topics;
  auto* score = app.add_subcommand("score", "matches -> report.json");
  score->add_option("--mode", mode, "headline aggregation")
      ->check(CLI::IsMember({"macro", "micro"}))->capture_default_str();
  score->add_option("--topics", topics, "topic proportions CSV; default <data-dir>/topics.csv");

  auto* report = app.add_subcommand("report", "report.json -> CSV tables and a summary");

  std::string host = "127.0.0.1", annotators;
  int port = 8080;
  std::optional<std::string> static_dir;
  ServeSetup setup;
  auto* serve_cmd = app.add_subcommand("serve", "annotation service over the stage outputs");
  serve_cmd->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "directory with the browser UI bundle");
  serve_cmd->add_option("--annotators", annotators, "comma-separated names for task assignment");
  serve_cmd->add_option("--overlap", setup.overlap, "tasks per kind shared by every annotator")
      ->capture_default_str();
  serve_cmd->add_option("--per-cell", setup.per_cell, "match tasks per side per dilemma and agent")
      ->capture_default_str();

  auto* validate = app.add_subcommand("validate", "structural checks over the stage files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  auto logger = spdlog::stderr_color_mt("normalign");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  if (ingest->parsed()) {
    auto s = open_session(g, {});
    if (!transcripts.empty()) ingest_opts.transcripts = transcripts;
    std::cout << dump_pretty(run_ingest(s.ctx, ingest_opts)) << "\n";
    print_stats(s);
  } else if (respond->parsed()) {
    auto s = open_session(g, {"respond"});
    std::cout << dump_pretty(run_respond(s.ctx, agent)) << "\n";
    print_stats(s);
  } else if (extract->parsed()) {
    auto s = open_session(g, {"extract", "postprocess"});
    std::cout << dump_pretty(run_extract(s.ctx, extract_agent)) << "\n";
    print_stats(s);
  } else if (match->parsed()) {
    auto s = open_session(g, {"match"});
    std::cout << dump_pretty(run_match(s.ctx, cand, ref)) << "\n";
    print_stats(s);
  } else if (score->parsed()) {
    auto s = open_session(g, {});
    ScoreOptions options{aggregate_mode_from_string(mode), {}};
    if (topics) options.topics = *topics;
    std::cout << dump_pretty(run_score(s.ctx, options)) << "\n";
  } else if (report->parsed()) {
    auto s = open_session(g, {});
    std::cout << run_report(s.ctx);
  } else if (serve_cmd->parsed()) {
    auto s = open_session(g, {}, false);
    std::stringstream names(annotators);
    for (std::string name; std::getline(names, name, ',');) {
      if (!text::trim(name).empty()) setup.annotators.push_back(text::trim(name));
    }
    return serve(s, host, port, static_dir ? std::optional<std::filesystem::path>(*static_dir)
                                           : std::nullopt,
                 setup);
  } else if (validate->parsed()) {
    auto s = open_session(g, {}, false);
    const auto violations = run_validate(s.ctx);
    for (const auto& v : violations) std::cout << to_string(v.kind) << " " << v.subject << ": " << v.detail << "\n";
    if (!violations.empty()) {
      std::cerr << violations.size() << " violation(s)\n";
      return kViolations;
    }
    std::cerr << "ok\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const normalign::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const normalign::MissingStageInput& e) {
    spdlog::error("{}", e.what());
    return kMissingInput;
  } catch (const normalign::AuthError& e) {
    spdlog::error("auth: {}", e.what());
    return kAuth;
  } catch (const normalign::SchemaParseError& e) {
    spdlog::error("unparseable model output: {}", e.what());
    return kUnparseable;
  } catch (const normalign::ExhaustedRetries& e) {
    spdlog::error("backend: {}", e.what());
    return kBackend;
  } catch (const normalign::TransientError& e) {
    spdlog::error("backend: {}", e.what());
    return kBackend;
  } catch (const normalign::RequestError& e) {
    spdlog::error("backend: {}", e.what());
    return kBackend;
  } catch (const normalign::InvalidInput& e) {
    spdlog::error("invalid input: {}", e.what());
    return kInvalidInput;
  } catch (const normalign::IoError& e) {
    spdlog::error("io: {}", e.what());
    return kInvalidInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}
