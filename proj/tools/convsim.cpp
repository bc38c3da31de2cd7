// convsim: run, resume, probe and export simulation studies.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "convsim/binary_io.hpp"
#include "convsim/config.hpp"
#include "convsim/errors.hpp"
#include "convsim/metrics.hpp"
#include "convsim/study.hpp"
#include "convsim/trajectory.hpp"

namespace fs = std::filesystem;
using namespace convsim;
using nlohmann::json;

namespace {

constexpr const char* kOutEnv = "CONVSIM_OUT";
constexpr const char* kCheckpoint = "checkpoint.bin";
constexpr const char* kFinalCheckpoint = "checkpoint_final.bin";

std::mutex io_mutex;

void progress(const std::string& line) {
  std::lock_guard lock(io_mutex);
  std::cerr << line << std::endl;
}

std::string default_outdir() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? env : "runs";
}

struct ConfigOptions {
  std::string config_path;
  std::string study;
  int size = 0;
  int epochs = 0;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Study config (JSON)");
    cmd->add_option("--study", study, "Study kind")
        ->check(CLI::IsMember({"individuation", "regularity", "generational"}));
    cmd->add_option("--size", size, "Population size");
    cmd->add_option("--epochs", epochs, "Training epochs (base phase for generational)");
    cmd->add_option("--set", overrides, "Config override key=value (repeatable)");
  }

  StudyConfig load() const {
    std::vector<std::string> all;
    if (!study.empty()) all.push_back("study=\"" + study + "\"");
    if (size) all.push_back("population_size=" + std::to_string(size));
    if (epochs) all.push_back("epochs=" + std::to_string(epochs));
    all.insert(all.end(), overrides.begin(), overrides.end());
    if (!config_path.empty()) return load_config(config_path, all);
    std::string text = to_json(StudyConfig{});
    apply_overrides(text, all);
    return config_from_json(text);
  }
};

// Keeps only rows of epochs <= last in a CSV whose first or fourth column is
// the epoch. Used when resuming from a checkpoint older than the files.
void truncate_csv(const fs::path& path, int epoch_column, int last) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::ostringstream kept;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept << line << '\n';
      header = false;
      continue;
    }
    std::istringstream cells(line);
    std::string cell;
    for (int i = 0; i <= epoch_column; ++i) std::getline(cells, cell, ',');
    if (std::stoi(cell) <= last) kept << line << '\n';
  }
  in.close();
  write_file(path.string(), kept.str());
}

void write_manifest_file(const fs::path& dir, const World& world) {
  std::ofstream out(dir / "manifest.csv");
  write_manifest(out, world.manifest());
}

// Pooled final-window ratios for the summary: sum(num)/sum(den) per
// (group, role, measure) over the last `window` epochs.
json summarize(const std::vector<TidyRow>& rows, int last_epoch, int window) {
  std::map<std::string, std::pair<double, double>> pooled;
  for (const auto& r : rows) {
    if (r.epoch <= last_epoch - window) continue;
    auto& p = pooled[r.group + "/" + r.role + "/" + r.measure];
    p.first += r.numerator;
    p.second += r.denominator;
  }
  json out = json::object();
  for (const auto& [key, p] : pooled)
    out[key] = p.second > 0 ? json(p.first / p.second) : json(nullptr);
  return out;
}

struct RunJob {
  StudyConfig config;
  std::uint64_t seed = 0;
  fs::path dir;
  bool resume = false;
};

// The furthest-trained of the periodic and final checkpoints in a run dir.
World latest_checkpoint(const fs::path& dir) {
  std::optional<World> best;
  for (const char* name : {kFinalCheckpoint, kCheckpoint}) {
    if (!fs::exists(dir / name)) continue;
    World w = World::restore(read_file((dir / name).string()));
    if (!best || w.epoch() > best->epoch()) best = std::move(w);
  }
  if (!best) throw FormatError(dir.string() + " has no checkpoint");
  return std::move(*best);
}

json execute(const RunJob& job) {
  const auto& config = job.config;
  const std::string id = run_id(config.study, job.seed);
  World world = [&] {
    if (!job.resume) return start_world(config, job.seed);
    return latest_checkpoint(job.dir);
  }();
  if (job.resume && world.config().study == config.study)
    world.adopt_config(config);

  fs::create_directories(job.dir);
  write_file((job.dir / "config.json").string(), to_json(config) + "\n");
  const auto metrics_path = job.dir / "metrics.csv";
  const auto stats_path = job.dir / "train_stats.csv";
  if (job.resume) {
    truncate_csv(metrics_path, 3, world.epoch());
    truncate_csv(stats_path, 0, world.epoch());
  }
  const bool fresh_files = !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, std::ios::app);
  std::ofstream stats(stats_path, std::ios::app);
  if (!metrics || !stats) throw std::runtime_error("cannot write to " + job.dir.string());
  if (fresh_files) {
    metrics << kTidyHeader << '\n';
    stats << kTrainStatsHeader << '\n';
  }

  std::vector<TidyRow> recent;
  const int total = config.total_epochs();
  const int started = world.epoch();
  run_schedule(world, config, [&](const World& w, const EpochResult& r) {
    auto rows = to_tidy(id, config.study, job.seed, r.metrics);
    write_tidy(metrics, rows, false);
    write_train_stats(stats, r.train_stats);
    recent.insert(recent.end(), rows.begin(), rows.end());
    std::erase_if(recent, [&](const TidyRow& t) { return t.epoch <= w.epoch() - 10; });
    if (config.checkpoint_every > 0 && w.epoch() % config.checkpoint_every == 0) {
      metrics.flush();
      stats.flush();
      write_manifest_file(job.dir, w);
      write_file((job.dir / kCheckpoint).string(), w.checkpoint());
    }
    if (w.epoch() % 10 == 0 || w.epoch() == total) {
      std::ostringstream line;
      line << id << ": epoch " << w.epoch() << "/" << total << " market reward "
           << r.log.market_reward;
      progress(line.str());
    }
  });
  metrics.close();
  stats.close();
  write_manifest_file(job.dir, world);
  write_file((job.dir / kFinalCheckpoint).string(), world.checkpoint());

  json summary = {{"run", id},
                  {"study", to_string(config.study)},
                  {"seed", job.seed},
                  {"dir", job.dir.string()},
                  {"epochs", world.epoch()},
                  {"epochs_this_invocation", world.epoch() - started},
                  {"final_window", summarize(recent, world.epoch(), 10)}};
  write_file((job.dir / "summary.json").string(), summary.dump(2) + "\n");
  return summary;
}

bool has_artifacts(const fs::path& dir) {
  for (const char* name : {"metrics.csv", kCheckpoint, kFinalCheckpoint, "summary.json"})
    if (fs::exists(dir / name)) return true;
  return false;
}

int run_jobs(std::vector<RunJob> jobs, int workers) {
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::vector<json> summaries(jobs.size());
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        summaries[i] = execute(jobs[i]);
      } catch (const std::exception& e) {
        progress(run_id(jobs[i].config.study, jobs[i].seed) + ": error: " + e.what());
        ++failures;
      }
    }
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& s : summaries)
    if (!s.is_null()) std::cout << s.dump() << '\n';
  return failures > 0 ? 1 : 0;
}

fs::path resolve_base(const std::string& from, std::uint64_t seed) {
  fs::path p(from);
  if (fs::is_regular_file(p)) return p;
  if (fs::exists(p / kFinalCheckpoint)) return p / kFinalCheckpoint;
  const auto per_seed = p / run_id(StudyKind::Regularity, seed) / kFinalCheckpoint;
  if (fs::exists(per_seed)) return per_seed;
  throw ConfigError("--from: no regularity checkpoint for seed " +
                    std::to_string(seed) + " under " + from);
}

World load_run_world(const fs::path& run, const std::string& checkpoint) {
  if (!checkpoint.empty()) return World::restore(read_file(checkpoint));
  return latest_checkpoint(run);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent economy simulator with a learned market decider"};
  app.require_subcommand(1);

  // run
  ConfigOptions run_cfg;
  std::string seeds_text;
  std::string outdir = default_outdir();
  std::string from;
  bool force = false;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run a study for each seed");
  run_cfg.add_to(run);
  run->add_option("--seeds", seeds_text, "Seeds, e.g. 1..5 or 3,7 (default 1..runs)");
  run->add_option("-o,--out", outdir, std::string("Output directory (env ") + kOutEnv + ")");
  run->add_option("--from", from,
                  "Regularity run directory or checkpoint to continue (generational)");
  run->add_flag("--force", force, "Overwrite existing run artifacts");
  run->add_option("-j,--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  // resume
  std::vector<std::string> resume_dirs;
  std::vector<std::string> resume_overrides;
  int resume_jobs = 1;
  auto* resume = app.add_subcommand("resume", "Continue runs from their checkpoints");
  resume->add_option("runs", resume_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  resume->add_option("--set", resume_overrides, "Config override key=value (e.g. epochs=300)");
  resume->add_option("-j,--jobs", resume_jobs, "Parallel runs")->check(CLI::PositiveNumber);

  // probe
  std::string probe_run;
  std::string probe_checkpoint;
  std::int64_t probe_sample_seed = -1;
  auto* probe = app.add_subcommand("probe", "Evaluate the market on held-out codes");
  probe->add_option("run", probe_run, "Run directory")->check(CLI::ExistingDirectory);
  probe->add_option("--checkpoint", probe_checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  probe->add_option("--sample", probe_sample_seed,
                    "Sample predictions with this seed instead of argmax");

  // export
  std::string export_run;
  std::string timepoint;
  std::string game;
  std::string export_out;
  int window = 10;
  auto* exp = app.add_subcommand("export", "Write a trajectory JSON for the webgame");
  exp->add_option("run", export_run, "Generational run directory")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--timepoint", timepoint, "Timepoint")->required()->check(
      CLI::IsMember({"initial", "wave2", "wave5"}));
  exp->add_option("--game", game, "Game table")->required()->check(CLI::IsMember({"market", "agent"}));
  exp->add_option("-o,--out", export_out, "Output file (default <run>/trajectory_<game>_<timepoint>.json)");
  exp->add_option("--window", window, "Market-game evaluation window in epochs")->check(CLI::PositiveNumber);

  // validate-config
  ConfigOptions check_cfg;
  auto* validate = app.add_subcommand("validate-config", "Check a config and print it normalized");
  check_cfg.add_to(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      StudyConfig config = run_cfg.load();
      config.validate();
      const auto seeds = seeds_text.empty()
                             ? parse_seed_list("1.." + std::to_string(config.runs))
                             : parse_seed_list(seeds_text);
      if (!from.empty() && config.study != StudyKind::Generational)
        throw ConfigError("--from only applies to the generational study");
      std::vector<RunJob> work;
      for (auto seed : seeds) {
        RunJob job{config, seed, fs::path(outdir) / run_id(config.study, seed), false};
        if (!from.empty()) job.config.base_checkpoint = resolve_base(from, seed).string();
        if (has_artifacts(job.dir)) {
          if (!force)
            throw ConfigError(job.dir.string() +
                              " already holds run artifacts (use --force to overwrite)");
          fs::remove_all(job.dir);
        }
        work.push_back(std::move(job));
      }
      return run_jobs(std::move(work), jobs);
    }
    if (*resume) {
      std::vector<RunJob> work;
      for (const auto& d : resume_dirs) {
        fs::path dir(d);
        StudyConfig config = load_config((dir / "config.json").string(), resume_overrides);
        World peek = load_run_world(dir, "");
        work.push_back({config, peek.seed(), dir, true});
      }
      return run_jobs(std::move(work), resume_jobs);
    }
    if (*probe) {
      if (probe_run.empty() && probe_checkpoint.empty())
        throw ConfigError("probe needs a run directory or --checkpoint");
      World world = load_run_world(probe_run, probe_checkpoint);
      std::optional<RandomStream> sampler;
      if (probe_sample_seed >= 0)
        sampler = RandomStream::derive(static_cast<std::uint64_t>(probe_sample_seed), "probe");
      json out = json::array();
      for (const auto& set : world.probes()) {
        auto r = probe_market(world.market().actor, set, sampler ? &*sampler : nullptr);
        auto opt = [](const Ratio& x) { return x.value() ? json(*x.value()) : json(nullptr); };
        out.push_back({{"group", group_name(set.group)},
                       {"epoch", world.epoch()},
                       {"probes", r.probes},
                       {"wood_proportion", static_cast<double>(r.predicted_wood) / r.probes},
                       {"stereotypic_proportion", opt(r.stereotypic)},
                       {"accuracy", opt(r.accuracy)}});
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*exp) {
      fs::path dir(export_run);
      World world = load_run_world(dir, "");
      const Timepoint t = *parse_timepoint(timepoint);
      json doc = game == "market" ? to_json(export_market_game(world, t, window))
                                  : to_json(export_agent_game(world, t));
      const auto errors = validate_trajectory(doc);
      if (!errors.empty()) throw FormatError("export failed validation: " + errors.front());
      fs::path path = export_out.empty()
                          ? dir / ("trajectory_" + game + "_" + timepoint + ".json")
                          : fs::path(export_out);
      write_file(path.string(), doc.dump(2) + "\n");
      std::cout << path.string() << '\n';
      return 0;
    }
    if (*validate) {
      StudyConfig config = check_cfg.load();
      config.validate();
      std::cout << to_json(config) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
