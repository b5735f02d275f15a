// idlewatch: run the detection pipeline, export events, audit exports, or
// serve a simulated fleet.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "idlewatch/app/config.hpp"
#include "idlewatch/app/pipeline.hpp"
#include "idlewatch/audit/battery.hpp"
#include "idlewatch/sim/fleet_script.hpp"
#include "idlewatch/sim/oracle.hpp"
#include "idlewatch/sim/sim_server.hpp"
#include "idlewatch/store/event_store.hpp"

namespace {

using namespace idlewatch;

/// Blocks SIGINT/SIGTERM in every thread so the main loop can collect them
/// with sigtimedwait.
sigset_t block_termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

/// Waits until `done` turns true or a termination signal arrives. Returns
/// true for a signal.
bool wait_for_signal(const sigset_t& set, const std::atomic<bool>& done) {
  const timespec poll{0, 200'000'000};
  while (!done) {
    if (sigtimedwait(&set, nullptr, &poll) > 0) return true;
  }
  return false;
}

/// export and audit never contact sources, so unset secrets are tolerated.
app::PipelineConfig load_config_without_secrets(const std::string& path) {
  return app::load_config(path, [](const std::string& name) {
    return std::optional<std::string>(app::getenv_lookup(name).value_or(""));
  });
}

store::ExportRange parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--range", "expected start..end");
  auto parse = [&](std::string_view s) {
    EpochSeconds v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw CLI::ValidationError("--range", "bounds must be epoch seconds");
    }
    return v;
  };
  store::ExportRange range{parse(std::string_view(text).substr(0, dots)),
                           parse(std::string_view(text).substr(dots + 2))};
  range.validate();
  return range;
}

int cmd_run(const std::string& config_path, std::optional<int> r, std::optional<int> h, std::optional<int> m,
            std::optional<std::size_t> ticks) {
  auto config = app::load_config(config_path);
  app::apply_overrides(config, r, h, m);

  const sigset_t signals = block_termination_signals();
  app::PipelineOptions options;
  options.max_ticks = ticks;
  app::Pipeline pipeline(config, options);
  pipeline.start();
  for (const auto& region : config.regions) {
    spdlog::info("region {}: {} source(s), r={} h={} m={}", region.region_id, region.sources.size(),
                 region.params.poll_interval, region.params.horizon, region.params.eviction_bound);
  }

  std::atomic<bool> done{false};
  std::thread waiter([&] {
    pipeline.wait();
    done = true;
  });
  if (wait_for_signal(signals, done)) {
    spdlog::info("termination requested; draining");
    pipeline.request_stop();
  }
  waiter.join();

  for (const auto& region : config.regions) {
    const auto& c = pipeline.counters(region.region_id);
    spdlog::info("region {}: {} snapshots, {} batches, {} events streamed, {} stored, {} insert failures",
                 region.region_id, c.snapshots.load(), c.batches.load(), c.events_broadcast.load(),
                 c.events_inserted.load(), c.insert_failures.load());
  }
  return 0;
}

int cmd_export(const std::string& config_path, const std::string& range_text, std::string out) {
  const auto config = load_config_without_secrets(config_path);
  const auto range = parse_range(range_text);
  if (out.empty()) out = "events-" + std::to_string(range.start) + "-" + std::to_string(range.end) + ".csv";
  store::EventStore store(config.store_path);
  const auto rows = store.export_csv(range, out);
  std::cout << out << "\n";
  spdlog::info("exported {} rows", rows);
  return 0;
}

int cmd_audit(const std::string& config_path, const std::string& input, const std::vector<std::string>& gtfs,
              std::optional<double> dm, std::optional<int> r, std::optional<int> h, const std::string& out_dir) {
  audit::BatteryOptions options;
  if (!config_path.empty()) {
    const auto config = load_config_without_secrets(config_path);
    options.d_m = config.audit_d_m;
    options.cities = config.audit_cities;
    options.poll_interval = config.defaults.poll_interval;
    options.horizon = config.defaults.horizon;
  }
  for (const auto& arg : gtfs) {
    // city=region=path
    const auto a = arg.find('=');
    const auto b = a == std::string::npos ? a : arg.find('=', a + 1);
    if (b == std::string::npos) throw CLI::ValidationError("--gtfs", "expected city=region=path, got " + arg);
    options.cities.push_back({arg.substr(0, a), arg.substr(a + 1, b - a - 1), arg.substr(b + 1)});
  }
  if (dm) options.d_m = *dm;
  if (r) options.poll_interval = *r;
  if (h) options.horizon = *h;
  if (options.d_m < 0) throw CLI::ValidationError("--dm", "must be >= 0");

  const auto report = audit::run_battery_file(input, options);
  std::filesystem::create_directories(out_dir);
  const auto json_path = std::filesystem::path(out_dir) / "audit.json";
  const auto text_path = std::filesystem::path(out_dir) / "audit.txt";
  std::ofstream(json_path) << report.to_json() << "\n";
  std::ofstream(text_path) << report.to_text();
  std::cout << report.to_text();
  std::cout << "\nwrote " << json_path.string() << " and " << text_path.string() << "\n";
  return 0;
}

struct SimulateArgs {
  std::string script_path;
  std::optional<std::uint64_t> random_seed;
  std::size_t vehicles = 20;
  std::string bind = "127.0.0.1";
  std::uint16_t port = 8080;
  double scale = 1.0;
  bool keep_start = false;
  std::string write_script;
  std::string gtfs_out;
  std::string oracle_out;
  std::size_t oracle_ticks = 120;
  int r = 30, h = 1, m = 10;
};

int cmd_simulate(const SimulateArgs& args) {
  sim::FleetScript script;
  if (!args.script_path.empty()) {
    script = sim::load_script(args.script_path);
  } else {
    sim::RandomScriptOptions opt;
    opt.vehicles = args.vehicles;
    script = sim::random_script(args.random_seed.value_or(1), opt);
  }
  if (!args.keep_start) script.start_time = static_cast<EpochSeconds>(std::time(nullptr));

  if (!args.write_script.empty()) std::ofstream(args.write_script) << sim::script_to_json(script) << "\n";
  if (!args.gtfs_out.empty()) sim::write_gtfs_bundle(script, args.gtfs_out);
  if (!args.oracle_out.empty()) {
    DetectorParams params{args.r, args.h, args.m};
    const auto polls = sim::poll_schedule(script, args.r, args.oracle_ticks);
    const auto batches = sim::oracle_events(script, params, polls);
    std::ofstream out(args.oracle_out);
    out << "poll_time,vehicle_id,latitude,longitude,datetime,duration\n";
    for (std::size_t k = 0; k < batches.size(); ++k) {
      for (const auto& ev : batches[k]) {
        out << polls[k] << "," << ev.vehicle_id << "," << ev.latitude << "," << ev.longitude << "," << ev.datetime
            << "," << ev.duration << "\n";
      }
    }
  }

  const sigset_t signals = block_termination_signals();
  auto clock = std::make_shared<ScaledClock>(static_cast<double>(script.start_time), args.scale);
  sim::SimServer server(script, clock, args.bind, args.port);
  std::cout << "serving " << script.vehicles.size() << " vehicles at " << server.url() << std::endl;
  std::atomic<bool> never{false};
  wait_for_signal(signals, never);
  server.stop();
  spdlog::info("simulator stopped after {} requests", server.requests());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Realtime transit bus idling detection"};
  cli.set_help_flag("--help", "Print this help message and exit");
  cli.require_subcommand(1);
  std::string log_level = "info";
  cli.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();

  std::string config_path;
  std::optional<int> r, h, m;

  auto* run = cli.add_subcommand("run", "Poll, detect, stream and store until SIGTERM");
  run->add_option("--config", config_path, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--r", r, "Poll interval in seconds")->check(CLI::PositiveNumber);
  run->add_option("--h", h, "Idle horizon in buffer steps")->check(CLI::PositiveNumber);
  run->add_option("--m", m, "Eviction bound in iterations")->check(CLI::PositiveNumber);
  std::optional<std::size_t> ticks;
  run->add_option("--ticks", ticks, "Stop each region after this many polls");

  auto* exp = cli.add_subcommand("export", "Write stored events in a datetime range to CSV");
  exp->add_option("--config", config_path, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  std::string range;
  exp->add_option("--range", range, "Inclusive epoch-second range start..end")->required();
  std::string out;
  exp->add_option("--out", out, "Output CSV path");

  auto* aud = cli.add_subcommand("audit", "Run the validation battery over an exported CSV");
  std::string input;
  aud->add_option("--input", input, "Exported CSV")->required()->check(CLI::ExistingFile);
  aud->add_option("--config", config_path, "Configuration supplying audit cities and parameters");
  std::vector<std::string> gtfs;
  aud->add_option("--gtfs", gtfs, "GTFS static bundle as city=region=path (repeatable)");
  std::optional<double> dm;
  aud->add_option("--dm", dm, "Distance threshold D_m in meters (default 25)");
  aud->add_option("--r", r, "Poll interval the export was produced with")->check(CLI::PositiveNumber);
  aud->add_option("--h", h, "Idle horizon the export was produced with")->check(CLI::PositiveNumber);
  std::string out_dir = "audit";
  aud->add_option("--out-dir", out_dir, "Directory for audit.json and audit.txt")->capture_default_str();

  SimulateArgs sim_args;
  auto* simc = cli.add_subcommand("simulate", "Serve a scripted fleet as a GTFS Realtime feed");
  auto* script_opt = simc->add_option("--script", sim_args.script_path, "Fleet script (JSON)")->check(CLI::ExistingFile);
  simc->add_option("--random-seed", sim_args.random_seed, "Generate a random fleet instead")->excludes(script_opt);
  simc->add_option("--vehicles", sim_args.vehicles, "Vehicles in a random fleet")->capture_default_str();
  simc->add_option("--bind", sim_args.bind)->capture_default_str();
  simc->add_option("--port", sim_args.port)->capture_default_str();
  simc->add_option("--scale", sim_args.scale, "Simulated seconds per wall second")->check(CLI::PositiveNumber);
  simc->add_flag("--keep-start", sim_args.keep_start, "Use the script's start_time instead of now");
  simc->add_option("--write-script", sim_args.write_script, "Save the (possibly generated) script");
  simc->add_option("--gtfs-out", sim_args.gtfs_out, "Write a GTFS static bundle of the fleet paths here");
  simc->add_option("--oracle-out", sim_args.oracle_out, "Write the expected events as CSV");
  simc->add_option("--oracle-ticks", sim_args.oracle_ticks, "Polls covered by --oracle-out")->capture_default_str();
  simc->add_option("--r", sim_args.r, "Oracle poll interval")->check(CLI::PositiveNumber);
  simc->add_option("--h", sim_args.h, "Oracle idle horizon")->check(CLI::PositiveNumber);
  simc->add_option("--m", sim_args.m, "Oracle eviction bound")->check(CLI::PositiveNumber);

  CLI11_PARSE(cli, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (run->parsed()) return cmd_run(config_path, r, h, m, ticks);
    if (exp->parsed()) return cmd_export(config_path, range, out);
    if (aud->parsed()) return cmd_audit(config_path, input, gtfs, dm, r, h, out_dir);
    if (simc->parsed()) return cmd_simulate(sim_args);
  } catch (const CLI::Error& e) {
    return cli.exit(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
