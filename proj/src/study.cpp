#include "convsim/study.hpp"

#include <cstdio>
#include <ostream>

#include "convsim/binary_io.hpp"
#include "convsim/errors.hpp"

namespace convsim {

World start_world(const StudyConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.study != StudyKind::Generational) return World::create(config, seed);
  if (!config.base_checkpoint.empty()) {
    World w = World::restore(read_file(config.base_checkpoint));
    if (w.config().study != StudyKind::Regularity)
      throw ConfigError("config field 'base_checkpoint': " +
                        config.base_checkpoint + " is not a regularity checkpoint");
    return w;
  }
  StudyConfig base = config;
  base.study = StudyKind::Regularity;
  return World::create(base, seed);
}

bool schedule_complete(const World& world, const StudyConfig& target) {
  if (target.study != StudyKind::Generational)
    return world.epoch() >= target.epochs;
  if (world.config().study != StudyKind::Generational) return false;
  const auto& r = target.replacement;
  if (world.wave() < r.waves) return false;
  const auto& phases = world.phases();
  const auto& last = phases.back();
  const int done = last.last_epoch - last.first_epoch + 1;
  if (r.replace_market)
    return last.label == "market" && done >= r.post_market_epochs;
  return last.label == "wave" + std::to_string(r.waves) &&
         done >= r.inter_wave_epochs;
}

EpochResult step_epoch(World& world, StudyKind cells) {
  EpochResult r;
  r.log = world.run_epoch();
  r.metrics.cells = compute_epoch_metrics(r.log, world.manifest(), cells);
  r.metrics.signal = compute_signal(r.log, world.manifest(), cells);
  for (const auto& p : world.probes()) {
    auto result = probe_market(world.market().actor, p);
    result.epoch = r.log.epoch;
    r.metrics.probes.push_back(result);
  }
  r.train_stats.reserve(r.log.agent_stats.size() + 1);
  for (std::size_t i = 0; i < r.log.agent_stats.size(); ++i)
    r.train_stats.push_back({r.log.epoch,
                             "agent" + std::to_string(r.log.agents[i].agent_id),
                             r.log.agent_stats[i]});
  r.train_stats.push_back({r.log.epoch, "market", r.log.market_stats});
  return r;
}

namespace {

int phase_length(const World& world) {
  const auto& p = world.phases().back();
  return p.last_epoch - p.first_epoch + 1;
}

}  // namespace

void run_schedule(World& world, const StudyConfig& target,
                  const EpochCallback& on_epoch) {
  auto step = [&] {
    auto r = step_epoch(world, target.study);
    if (on_epoch) on_epoch(world, r);
  };
  if (world.config().study != StudyKind::Generational) {
    while (world.epoch() < target.epochs) step();
  }
  if (target.study != StudyKind::Generational) return;
  if (world.config().study != StudyKind::Generational) world.adopt_config(target);

  const auto& r = target.replacement;
  for (int wave = 1; wave <= r.waves; ++wave) {
    const std::string label = "wave" + std::to_string(wave);
    if (world.wave() < wave) {
      world.apply_replacement(wave);
      world.begin_phase(label);
    } else if (world.phases().back().label != label) {
      continue;  // finished earlier
    }
    while (phase_length(world) < r.inter_wave_epochs) step();
  }
  if (!r.replace_market) return;
  if (world.phases().back().label != "market") {
    world.replace_market();
    world.begin_phase("market");
  }
  while (phase_length(world) < r.post_market_epochs) step();
}

RunArtifact run_study(const StudyConfig& config, std::uint64_t seed) {
  World world = start_world(config, seed);
  RunMetrics metrics;
  run_schedule(world, config, [&](const World&, const EpochResult& r) {
    auto append = [](auto& dst, const auto& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    append(metrics.cells, r.metrics.cells);
    append(metrics.signal, r.metrics.signal);
    append(metrics.probes, r.metrics.probes);
  });
  return {std::move(metrics), std::move(world)};
}

void write_train_stats(std::ostream& out, const std::vector<TrainStatRow>& rows) {
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%zu,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.model.c_str(), r.stats.steps, r.stats.loss.clip,
                  r.stats.loss.value, r.stats.loss.entropy,
                  r.stats.loss.mean_ratio);
    out << buf;
  }
}

std::string run_id(StudyKind study, std::uint64_t seed) {
  return std::string(to_string(study)) + "_s" + std::to_string(seed);
}

}  // namespace convsim
