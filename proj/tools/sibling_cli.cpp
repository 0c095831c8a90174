#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sibling/capture.hpp"
#include "sibling/classifiers.hpp"
#include "sibling/eval.hpp"
#include "sibling/features.hpp"
#include "sibling/ingest.hpp"
#include "sibling/plot.hpp"
#include "sibling/prober.hpp"
#include "sibling/simulator.hpp"
#include "sibling/util.hpp"

namespace fs = std::filesystem;
using namespace sibling;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPartialProbe = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string thresholds;
  unsigned workers = 0;
  std::string log_level = "info";
};

unsigned worker_count(const Globals& g) {
  if (g.workers > 0) return g.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

ClassifierParams classifier_params(const Globals& g) {
  if (g.thresholds.empty()) return {};
  try {
    return load_classifier_params(g.thresholds);
  } catch (const std::exception& e) {
    throw UsageError(std::string("threshold file: ") + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("output directory not writable: " + dir.string());
}

struct InputFiles {
  std::string traces;
  std::string options;
  std::string labels;
};

void add_inputs(CLI::App* cmd, InputFiles& in, bool labels_required) {
  cmd->add_option("--traces", in.traces, "traces.jsonl")->required()->check(CLI::ExistingFile);
  cmd->add_option("--options", in.options, "options.jsonl")->required();
  auto* lab = cmd->add_option("--labels", in.labels, "labels.csv");
  if (labels_required) lab->required();
}

LoadedBatch load_inputs(const InputFiles& in) {
  if (!fs::exists(in.options)) {
    throw IngestError(IngestErrc::MissingFile,
                      "options file missing: " + in.options + " (fingerprints are required)");
  }
  std::optional<fs::path> labels;
  if (!in.labels.empty()) labels = in.labels;
  LoadedBatch batch = load_batch(in.traces, in.options, labels);
  for (const auto& w : batch.warnings) spdlog::warn("skipped candidate: {}", w);
  spdlog::info("loaded {} candidate pairs", batch.pairs.size());
  return batch;
}

// simulate

struct SimulateArgs {
  std::size_t n = 200;
  double mix = 0.3;
  std::uint64_t seed = 1;
  std::string spec;
  std::string out = ".";
  std::size_t samples = 600;
  double interval = 60.0;
};

int cmd_simulate(const SimulateArgs& a) {
  ensure_dir(a.out);
  std::vector<CandidatePair> pairs;
  if (!a.spec.empty()) {
    const PopulationFile pop = load_population_file(a.spec);
    for (const auto& h : pop.hosts) pairs.push_back(simulate_sibling(h, pop.plan));
  } else {
    if (a.mix < 0.0 || a.mix > 1.0) throw UsageError("--mix must lie in [0, 1]");
    PopulationOptions opts;
    opts.plan.count = a.samples;
    opts.plan.interval = a.interval;
    pairs = generate_population(a.n, a.mix, a.seed, opts);
  }
  if (pairs.size() < 2) spdlog::warn("population of {} host(s): no non-siblings can be synthesized", pairs.size());
  const fs::path out(a.out);
  save_batch(pairs, out / "traces.jsonl", out / "options.jsonl", out / "labels.csv");
  spdlog::info("wrote {} siblings to {}", pairs.size(), out.string());
  return kExitOk;
}

// probe

struct ProbeArgs {
  std::string targets;
  std::string blacklist;
  std::string out = ".";
  ProbeConfig config;
};

int cmd_probe(const ProbeArgs& a) {
  try {
    a.config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  ensure_dir(a.out);
  std::vector<TargetPair> targets = load_targets(a.targets);
  if (targets.size() > a.config.batch_size) {
    spdlog::warn("{} targets exceed batch size {}; probing the first {}", targets.size(),
                 a.config.batch_size, a.config.batch_size);
    targets.resize(a.config.batch_size);
  }
  if (clock_discipline_active()) {
    spdlog::warn("local clock discipline is active; disable it to avoid non-linear offsets");
  }
  const fs::path out(a.out);
  PacketCapture capture;
  JsonlTraceSink sink(out / "traces.jsonl", out / "options.jsonl");
  Prober prober(a.config, capture, sink);
  if (!a.blacklist.empty()) prober.set_blacklist(load_blacklist(a.blacklist));
  const ProbeResult result = prober.probe_batch(targets);
  if (result.clock_adjusted) spdlog::warn("local clock was adjusted during the run");
  std::size_t failed = 0;
  for (const auto& o : result.outcomes) {
    if (o.blacklisted) {
      spdlog::info("{} {} blacklisted, skipped", o.target.id, o.target.ip);
      continue;
    }
    for (const auto& e : o.errors) {
      spdlog::warn("{} {}: {} {}", o.target.id, o.target.ip, to_string(e.code), e.detail);
    }
    if (o.failed) ++failed;
  }
  spdlog::info("probed {} addresses, {} failed", result.outcomes.size(), failed);
  return result.partial_failure() ? kExitPartialProbe : kExitOk;
}

// extract

struct ExtractArgs {
  InputFiles in;
  std::string out = "features.csv";
  std::string plots;
};

int cmd_extract(const ExtractArgs& a, const Globals& g) {
  const LoadedBatch batch = load_inputs(a.in);
  const FeatureConfig cfg;
  const auto features = extract_features_batch(batch.pairs, cfg, worker_count(g));
  std::ostringstream csv;
  write_feature_csv_header(csv);
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) write_feature_csv_row(csv, batch.pairs[i], features[i]);
  write_file_atomic(a.out, csv.str());
  if (!a.plots.empty()) {
    ensure_dir(a.plots);
    parallel_for(batch.pairs.size(), worker_count(g), [&](std::size_t i) {
      const auto& p = batch.pairs[i];
      write_file_atomic(fs::path(a.plots) / (p.id + ".svg"), render_offset_plot(p, cfg));
    });
  }
  spdlog::info("wrote features of {} pairs to {}", batch.pairs.size(), a.out);
  return kExitOk;
}

// classify

struct ClassifyArgs {
  InputFiles in;
  std::string model = "all";
  std::string out = "verdicts.jsonl";
};

std::vector<Model> parse_models(const std::string& s) {
  if (s == "ht") return {Model::HT};
  if (s == "ml1") return {Model::ML1};
  if (s == "bev") return {Model::Beverly};
  if (s == "all") return {Model::HT, Model::Beverly, Model::ML1};
  throw UsageError("unknown model: " + s);
}

int cmd_classify(const ClassifyArgs& a, const Globals& g) {
  const auto models = parse_models(a.model);
  const ClassifierParams params = classifier_params(g);
  const LoadedBatch batch = load_inputs(a.in);
  const auto features = extract_features_batch(batch.pairs, FeatureConfig{}, worker_count(g));

  std::string lines;
  std::vector<std::map<Verdict, std::size_t>> tally(models.size());
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = batch.pairs[i].id;
    j["ip4"] = batch.pairs[i].ip4;
    j["ip6"] = batch.pairs[i].ip6;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const Decision d = decide(models[m], features[i], params);
      ++tally[m][d.verdict];
      j[std::string(model_name(models[m]))] = {{"verdict", to_string(d.verdict)},
                                               {"reason", to_string(d.reason)}};
    }
    lines += j.dump() + "\n";
  }
  write_file_atomic(a.out, lines);

  std::printf("%-10s", "");
  for (auto m : models) std::printf("%12s", std::string(model_name(m)).c_str());
  std::printf("\n");
  for (Verdict v : {Verdict::Sibling, Verdict::NonSibling, Verdict::Unknown, Verdict::Error}) {
    std::printf("%-10s", std::string(to_string(v)).c_str());
    for (std::size_t m = 0; m < models.size(); ++m) std::printf("%12zu", tally[m][v]);
    std::printf("\n");
  }
  return kExitOk;
}

// evaluate

struct EvaluateArgs {
  InputFiles in;
  std::size_t k = 10;
  std::uint64_t seed = 1;
  std::string out = ".";
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g) {
  if (a.in.labels.empty()) throw UsageError("evaluate needs --labels: ground truth defines the sibling set");
  if (a.k < 2) throw UsageError("--k must be at least 2");
  ensure_dir(a.out);
  EvalOptions opts;
  opts.k = a.k;
  opts.seed = a.seed;
  opts.params = classifier_params(g);
  const LoadedBatch batch = load_inputs(a.in);

  std::vector<CandidatePair> siblings;
  for (const auto& p : batch.pairs) {
    if (p.label == Label::Sibling) siblings.push_back(p);
  }
  if (siblings.size() < a.k) {
    throw IngestError(IngestErrc::MalformedRecord,
                      "need at least k=" + std::to_string(a.k) + " labeled siblings, got " +
                          std::to_string(siblings.size()));
  }
  const PairFeatureTable table(siblings, FeatureConfig{}, worker_count(g));
  const EvalReport report = cross_validate(siblings, table, opts);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  const fs::path out(a.out);
  write_file_atomic(out / "report.json", report.to_json().dump(2) + "\n");
  const std::string table_text = report.to_table();
  write_file_atomic(out / "report.txt", table_text);
  std::cout << table_text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-stack sibling detection from TCP timestamps"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--thresholds", g.thresholds, "classifier threshold override (JSON)")
      ->check(CLI::ExistingFile);
  app.add_option("--workers", g.workers, "worker threads (0 = all cores)");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic sibling population");
  c_sim->add_option("--n", sim.n, "number of dual-stack hosts")->check(CLI::PositiveNumber);
  c_sim->add_option("--mix", sim.mix, "fraction of constant-skew hosts");
  c_sim->add_option("--seed", sim.seed, "population seed");
  c_sim->add_option("--spec", sim.spec, "declarative population file (JSON)")->check(CLI::ExistingFile);
  c_sim->add_option("--samples", sim.samples, "samples per address")->check(CLI::PositiveNumber);
  c_sim->add_option("--interval", sim.interval, "seconds between samples")->check(CLI::PositiveNumber);
  c_sim->add_option("--out", sim.out, "output directory");

  ProbeArgs probe;
  auto* c_probe = app.add_subcommand("probe", "collect TCP timestamps from live targets");
  c_probe->add_option("--targets", probe.targets, "CSV id,ip4,ip6")->required()->check(CLI::ExistingFile);
  c_probe->add_option("--blacklist", probe.blacklist, "addresses never to contact")->check(CLI::ExistingFile);
  c_probe->add_option("--out", probe.out, "output directory");
  c_probe->add_option("--duration", probe.config.duration, "seconds");
  c_probe->add_option("--min-sample-interval", probe.config.min_sample_interval, "seconds");
  c_probe->add_option("--batch-size", probe.config.batch_size, "candidate pairs per run");
  c_probe->add_option("--request-path", probe.config.request_path, "HTTP path");
  c_probe->add_option("--user-agent", probe.config.user_agent, "HTTP User-Agent");
  c_probe->add_option("--port", probe.config.port, "TCP port");
  c_probe->add_option("--max-parallel", probe.config.max_parallel_connections, "open connections");
  c_probe->add_option("--connect-timeout", probe.config.connect_timeout, "seconds");
  c_probe->add_option("--response-timeout", probe.config.response_timeout, "seconds");
  c_probe->add_option("--max-failures", probe.config.max_consecutive_failures, "consecutive errors per target");

  ExtractArgs ext;
  auto* c_ext = app.add_subcommand("extract", "compute pair features");
  add_inputs(c_ext, ext.in, false);
  c_ext->add_option("--out", ext.out, "feature CSV");
  c_ext->add_option("--emit-plots", ext.plots, "directory for per-pair offset plots (SVG)");

  ClassifyArgs cls;
  auto* c_cls = app.add_subcommand("classify", "label candidate pairs");
  add_inputs(c_cls, cls.in, false);
  c_cls->add_option("--model", cls.model, "ht|ml1|bev|all")->check(CLI::IsMember({"ht", "ml1", "bev", "all"}));
  c_cls->add_option("--out", cls.out, "verdicts JSONL");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "k-fold evaluation on labeled siblings");
  c_ev->add_option("--traces", ev.in.traces, "traces.jsonl")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--options", ev.in.options, "options.jsonl")->required();
  c_ev->add_option("--labels", ev.in.labels, "labels.csv");
  c_ev->add_option("--k", ev.k, "folds");
  c_ev->add_option("--seed", ev.seed, "fold seed");
  c_ev->add_option("--out", ev.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  auto logger = spdlog::stderr_color_mt("sibling");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_probe) return cmd_probe(probe);
    if (*c_ext) return cmd_extract(ext, g);
    if (*c_cls) return cmd_classify(cls, g);
    if (*c_ev) return cmd_evaluate(ev, g);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
