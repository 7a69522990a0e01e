// semprobe: simulate machine observers, fit psychometric curves, and emit
// bias/sensitivity tables and plot data. `semprobe <command> --help` lists
// the flags of each command.

#include <signal.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "semprobe/config.hpp"
#include "semprobe/error.hpp"
#include "semprobe/fit_io.hpp"
#include "semprobe/http_api.hpp"
#include "semprobe/machine_observer.hpp"
#include "semprobe/pipeline.hpp"
#include "semprobe/report.hpp"
#include "semprobe/session_store.hpp"
#include "semprobe/softmax_io.hpp"
#include "semprobe/trial_log.hpp"

namespace {

using namespace semprobe;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDegenerate = 3;

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

// Writes to `path`, or stdout for "-".
void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << content;
  if (!out.flush()) throw Error(ErrorKind::io, "write failed for " + path);
}

std::set<std::string> split_ids(const std::vector<std::string>& values) {
  std::set<std::string> ids;
  for (const auto& value : values) {
    std::stringstream in(value);
    std::string id;
    while (std::getline(in, id, ',')) {
      if (!id.empty()) ids.insert(id);
    }
  }
  return ids;
}

struct SimulateArgs {
  std::string softmax;
  std::string labels;
  std::string pair = "duck-rabbit";
  std::uint64_t seed = 0;
  int trials_per_image = 1;
  std::string manifest;
  std::string out = "-";
  int threads = 1;
};

int run_simulate(const SimulateArgs& args) {
  analysis::SimulateOptions options;
  options.pair = CategoryPair::parse(args.pair);
  options.trials = {args.seed, args.trials_per_image};
  options.threads = args.threads;
  if (!args.manifest.empty()) options.manifest = service::load_manifest(args.manifest);

  auto labels = args.labels.empty() ? machine::LabelMap::imagenet_animals()
                                     : machine::LabelMap::load(args.labels);
  auto records = machine::load_softmax(args.softmax);
  auto result = analysis::simulate(records, labels, options);
  for (const auto& message : result.warnings) warn(message);

  std::ostringstream out;
  ingest::write_trial_log(out, result.log);
  write_output(args.out, out.str());
  return kExitOk;
}

struct FitArgs {
  std::string log;
  std::string config;
  std::string out = "-";
  std::vector<std::string> allow;
  std::vector<std::string> deny;
  int threads = 1;
  bool strict = false;
};

int run_fit(const FitArgs& args) {
  analysis::FitOptions options;
  if (!args.config.empty()) options.config = load_config(args.config);
  options.observers.allow = split_ids(args.allow);
  options.observers.deny = split_ids(args.deny);
  options.threads = args.threads;

  auto log = ingest::parse_trial_log(args.log);
  auto batch = analysis::fit_log(log, options);
  for (const auto& report : batch.exclusions) {
    std::cerr << "exclusions: " << report.observer_id << ' '
              << (report.excluded_fast + report.excluded_slow) << '/' << report.total_trials
              << (report.observer_flagged ? " (flagged)" : "") << '\n';
  }
  for (const auto& message : batch.warnings) warn(message);

  std::ostringstream out;
  write_fit_rows(out, batch.rows);
  write_output(args.out, out.str());
  if (args.strict && (batch.degenerate_cells > 0 || batch.failed_cells > 0)) {
    return kExitDegenerate;
  }
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> fits;
  std::string mode = "bias";
  std::string out = "-";
  std::string text;
  std::string group_label = "Humans";
  bool individuals = false;
};

int run_report(const ReportArgs& args) {
  auto mode = analysis::parse_report_mode(args.mode);
  if (!mode) throw Error(ErrorKind::validation, "mode must be 'bias' or 'sensitivity'");
  std::vector<analysis::SourcedRows> inputs;
  for (const auto& path : args.fits) inputs.push_back({path, load_fit_rows(path)});
  analysis::ReportOptions options{args.group_label, args.individuals};
  auto table = analysis::build_report(inputs, *mode, options);
  write_output(args.out, analysis::report_to_json(table));
  if (!args.text.empty()) write_output(args.text, analysis::render_text(table));
  return kExitOk;
}

struct CurvesArgs {
  std::string fits;
  std::string log;
  std::string config;
  std::string out = "-";
};

int run_curves(const CurvesArgs& args) {
  AnalysisConfig config;
  if (!args.config.empty()) config = load_config(args.config);
  auto rows = load_fit_rows(args.fits);
  auto log = ingest::parse_trial_log(args.log);
  auto curves = analysis::curves_from_log(log, config.exclusion);
  auto result = analysis::build_curves(rows, curves);
  for (const auto& message : result.warnings) warn(message);
  write_output(args.out, analysis::curves_to_json(result));
  return kExitOk;
}

struct ServeArgs {
  std::string data_dir = "semprobe-data";
  std::string stimuli_dir;
  std::vector<std::string> manifests;
  std::string host = "127.0.0.1";
  int port = 8080;
  int ttl_minutes = 120;
  int duration_ms = 500;
  bool allow_concurrent = false;
};

int run_serve(const ServeArgs& args) {
  service::StoreOptions options;
  options.allow_concurrent_sessions = args.allow_concurrent;
  options.idle_ttl = std::chrono::minutes(args.ttl_minutes);
  options.presentation.stimulus_duration_ms = args.duration_ms;
  service::SessionStore store(args.data_dir, options);
  for (const auto& path : args.manifests) store.add_manifest(service::load_manifest(path));

  service::HttpService http(store, {args.stimuli_dir});
  if (!http.bind(args.host, args.port)) {
    throw Error(ErrorKind::io, "cannot bind " + args.host + ":" + std::to_string(args.port));
  }

  // Signals are handled on a dedicated thread so stop() runs outside a
  // signal handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int received = 0;
    sigwait(&signals, &received);
    http.stop();
  });
  std::atomic<bool> serving{true};
  std::thread sweeper([&] {
    while (serving) {
      for (int i = 0; i < 600 && serving; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      if (serving) {
        for (const auto& id : store.sweep_idle()) std::cerr << "session " << id << " abandoned\n";
      }
    }
  });

  std::cerr << "serving /v1 on " << args.host << ':' << args.port << " (data: " << args.data_dir
            << ")\n";
  http.listen_after_bind();
  serving = false;
  sweeper.join();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kExitOk;
}

int exit_code_for(const Error& error) {
  return error.kind() == ErrorKind::io ? kExitFailure : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semprobe: psychophysics of semantic decision boundaries"};
  app.require_subcommand(1);

  SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand("simulate", "Machine-observer trials from classifier softmax output");
  simulate->add_option("--softmax", simulate_args.softmax, "Softmax file (long or columnar)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--labels", simulate_args.labels,
                       "Label map JSON (default: built-in ImageNet duck/rabbit/elephant)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--pair", simulate_args.pair, "Category pair <a>-<b>; responses model P(b)")
      ->capture_default_str();
  simulate->add_option("--seed", simulate_args.seed, "RNG seed (required)")->required();
  simulate->add_option("--trials-per-image", simulate_args.trials_per_image, "Bernoulli draws per image")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--manifest", simulate_args.manifest,
                       "Manifest mapping image refs to conditions (default: decode file names)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--threads", simulate_args.threads, "Worker threads")->capture_default_str();
  simulate->add_option("-o,--out", simulate_args.out, "Output trial log ('-' for stdout)")
      ->capture_default_str();

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit one psychometric function per observer and guidance scale");
  fit->add_option("--log", fit_args.log, "Trial log")->required()->check(CLI::ExistingFile);
  fit->add_option("--config", fit_args.config, "Config file ([fit], [exclusion])")
      ->check(CLI::ExistingFile);
  fit->add_option("--allow", fit_args.allow, "Only these observers (comma separated)");
  fit->add_option("--deny", fit_args.deny, "Drop these observers (comma separated)");
  fit->add_option("--threads", fit_args.threads, "Worker threads")->capture_default_str();
  fit->add_flag("--strict", fit_args.strict, "Exit 3 when any cell is degenerate or unfittable");
  fit->add_option("-o,--out", fit_args.out, "Output fit file ('-' for stdout)")->capture_default_str();

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Guidance x observer bias or sensitivity table");
  report->add_option("--fits", report_args.fits, "Fit files")->required()->check(CLI::ExistingFile);
  report->add_option("--mode", report_args.mode, "bias | sensitivity")
      ->capture_default_str()
      ->check(CLI::IsMember({"bias", "sensitivity"}));
  report->add_option("-o,--out", report_args.out, "JSON table ('-' for stdout)")->capture_default_str();
  report->add_option("--text", report_args.text, "Aligned text rendering ('-' for stdout)");
  report->add_option("--group-label", report_args.group_label, "Column label of the human average")
      ->capture_default_str();
  report->add_flag("--individuals", report_args.individuals, "Also list each human observer");

  CurvesArgs curves_args;
  auto* curves = app.add_subcommand("curves", "Plot-ready observed proportions and fitted curves");
  curves->add_option("--fits", curves_args.fits, "Fit file")->required()->check(CLI::ExistingFile);
  curves->add_option("--log", curves_args.log, "Trial log the fits came from")
      ->required()
      ->check(CLI::ExistingFile);
  curves->add_option("--config", curves_args.config, "Config file (exclusion thresholds)")
      ->check(CLI::ExistingFile);
  curves->add_option("-o,--out", curves_args.out, "Output JSON ('-' for stdout)")->capture_default_str();

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the 2AFC experiment service");
  serve->add_option("--data-dir", serve_args.data_dir, "Session journals and manifests")
      ->capture_default_str();
  serve->add_option("--stimuli-dir", serve_args.stimuli_dir, "Directory served under /v1/stimuli");
  serve->add_option("--manifest", serve_args.manifests, "Manifest files to register")
      ->check(CLI::ExistingFile);
  serve->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_args.port, "Port")->capture_default_str();
  serve->add_option("--ttl-minutes", serve_args.ttl_minutes, "Idle time before a session is abandoned")
      ->capture_default_str();
  serve->add_option("--stimulus-ms", serve_args.duration_ms, "Stimulus presentation time")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  serve->add_flag("--allow-concurrent", serve_args.allow_concurrent,
                  "Allow several active sessions per observer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*simulate) return run_simulate(simulate_args);
    if (*fit) return run_fit(fit_args);
    if (*report) return run_report(report_args);
    if (*curves) return run_curves(curves_args);
    if (*serve) return run_serve(serve_args);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
