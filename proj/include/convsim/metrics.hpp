#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "convsim/config.hpp"
#include "convsim/population.hpp"
#include "convsim/tinynet.hpp"
#include "convsim/world.hpp"

namespace convsim {

enum class RoleClass : std::uint8_t {
  Individual,           // chopper/miner without a group label
  Majority,             // original agent holding its group's majority skill
  Minority,             // original chopper/miner outside the majority skill
  Builder,
  ReplacementMajority,  // replacement whose skill matches the group majority
  ReplacementMinority,
  All,                  // population-wide aggregate
};

std::string_view to_string(RoleClass r);
std::optional<RoleClass> parse_role(std::string_view s);
RoleClass role_of(const AgentRecord& record);

// num/den with an explicit undefined state for empty denominators.
struct Ratio {
  double num = 0.0;
  double den = 0.0;

  void add(double n, double d) {
    num += n;
    den += d;
  }
  std::optional<double> value() const {
    if (den == 0.0) return std::nullopt;
    return num / den;
  }
};

struct EpochMetrics {
  int epoch = 0;
  std::optional<GroupLabel> group;
  RoleClass role = RoleClass::All;
  int agents = 0;
  Ratio skilled_extraction;           // skilled extraction attempts / extraction attempts
  Ratio skilled_sale;                 // skilled sell attempts / sell attempts
  Ratio skill_consistent_prediction;  // predictions of the seller's skill / predictions
  Ratio stereotypic_sale;             // offers of the group's majority resource / offers
  Ratio stereotypic_prediction;       // predictions of the group's majority resource
  Ratio reward;                       // coins summed / agents
};

// Offered resources seen by the market, per group.
struct SignalTally {
  int epoch = 0;
  std::optional<GroupLabel> group;
  int wood = 0;
  int stone = 0;
};

struct ProbeResult {
  int epoch = 0;
  std::optional<GroupLabel> group;
  int probes = 0;
  int predicted_wood = 0;
  Ratio stereotypic;  // undefined for groups without a majority resource
  Ratio accuracy;     // against the probes' balanced hypothetical resources
};

// Stable (group, role) cells reported for a study, population cell last.
std::vector<std::pair<std::optional<GroupLabel>, RoleClass>> metric_cells(
    StudyKind study);

std::vector<EpochMetrics> compute_epoch_metrics(
    const EpochLog& log, const std::vector<AgentRecord>& manifest,
    StudyKind study);

std::vector<SignalTally> compute_signal(const EpochLog& log,
                                        const std::vector<AgentRecord>& manifest,
                                        StudyKind study);

// Argmax evaluation unless a sampling stream is given. Never updates the
// market.
ProbeResult probe_market(const MlpParams& market_actor, const ProbeSet& probes,
                         RandomStream* sampling = nullptr);

// One tidy row per (run, epoch, group, role, measure).
struct TidyRow {
  std::string run;
  std::string study;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string group;
  std::string role;
  std::string measure;
  double numerator = 0.0;
  double denominator = 0.0;
  std::optional<double> value;

  int epoch_centered() const { return epoch - 100; }
  friend bool operator==(const TidyRow&, const TidyRow&) = default;
};

struct RunMetrics {
  std::vector<EpochMetrics> cells;
  std::vector<SignalTally> signal;
  std::vector<ProbeResult> probes;
};

std::vector<TidyRow> to_tidy(const std::string& run, StudyKind study,
                             std::uint64_t seed, const RunMetrics& metrics);

inline constexpr std::string_view kTidyHeader =
    "run,study,seed,epoch,epoch_centered,group,role,measure,value,numerator,"
    "denominator";

void write_tidy(std::ostream& out, const std::vector<TidyRow>& rows,
                bool header = true);
std::vector<TidyRow> read_tidy(std::istream& in);

std::string group_name(const std::optional<GroupLabel>& g);

}  // namespace convsim
