#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "convsim/config.hpp"
#include "convsim/metrics.hpp"
#include "convsim/world.hpp"

namespace convsim {

struct TrainStatRow {
  int epoch = 0;
  std::string model;  // "market" or "agent<id>"
  TrainStats stats;
};

// Everything measured in one epoch.
struct EpochResult {
  EpochLog log;
  RunMetrics metrics;
  std::vector<TrainStatRow> train_stats;
};

// Fresh world for a study. Generational studies start from a Regularity world,
// restored from config.base_checkpoint when set.
World start_world(const StudyConfig& config, std::uint64_t seed);

bool schedule_complete(const World& world, const StudyConfig& target);

// Runs one epoch and measures it. `cells` fixes the reported group/role
// cells so every epoch of a run has the same row layout.
EpochResult step_epoch(World& world, StudyKind cells);

using EpochCallback = std::function<void(const World&, const EpochResult&)>;

// Advances the world through whatever remains of the target schedule:
// base training, then for Generational each replacement wave with its
// training, then market replacement and post-training. Safe to call on a
// restored checkpoint.
void run_schedule(World& world, const StudyConfig& target,
                  const EpochCallback& on_epoch);

struct RunArtifact {
  RunMetrics metrics;
  World world;
};

RunArtifact run_study(const StudyConfig& config, std::uint64_t seed);

// epoch,model,steps,clip,value,entropy,mean_ratio
inline constexpr std::string_view kTrainStatsHeader =
    "epoch,model,steps,clip,value,entropy,mean_ratio";
void write_train_stats(std::ostream& out, const std::vector<TrainStatRow>& rows);

std::string run_id(StudyKind study, std::uint64_t seed);

}  // namespace convsim
