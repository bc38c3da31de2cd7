#include "convsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "convsim/errors.hpp"

namespace convsim {

std::string_view to_string(RoleClass r) {
  switch (r) {
    case RoleClass::Individual: return "individual";
    case RoleClass::Majority: return "majority";
    case RoleClass::Minority: return "minority";
    case RoleClass::Builder: return "builder";
    case RoleClass::ReplacementMajority: return "replacement_majority";
    case RoleClass::ReplacementMinority: return "replacement_minority";
    case RoleClass::All: return "all";
  }
  return "?";
}

std::optional<RoleClass> parse_role(std::string_view s) {
  for (auto r : {RoleClass::Individual, RoleClass::Majority, RoleClass::Minority,
                 RoleClass::Builder, RoleClass::ReplacementMajority,
                 RoleClass::ReplacementMinority, RoleClass::All}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

RoleClass role_of(const AgentRecord& record) {
  const Specialization s = record.specialization();
  if (s == Specialization::Builder) return RoleClass::Builder;
  if (!record.group) return RoleClass::Individual;
  const bool majority = s == majority_specialization(*record.group);
  if (record.wave_introduced > 0) {
    return majority ? RoleClass::ReplacementMajority
                    : RoleClass::ReplacementMinority;
  }
  return majority ? RoleClass::Majority : RoleClass::Minority;
}

std::string group_name(const std::optional<GroupLabel>& g) {
  return g ? std::string(color_name(*g)) : std::string("all");
}

std::vector<std::pair<std::optional<GroupLabel>, RoleClass>> metric_cells(
    StudyKind study) {
  std::vector<std::pair<std::optional<GroupLabel>, RoleClass>> cells;
  if (study == StudyKind::Individuation) {
    cells.emplace_back(std::nullopt, RoleClass::Individual);
    cells.emplace_back(std::nullopt, RoleClass::Builder);
  } else {
    for (GroupLabel g : kAllGroups) {
      cells.emplace_back(g, RoleClass::Majority);
      cells.emplace_back(g, RoleClass::Minority);
      cells.emplace_back(g, RoleClass::Builder);
      if (study == StudyKind::Generational) {
        cells.emplace_back(g, RoleClass::ReplacementMajority);
        cells.emplace_back(g, RoleClass::ReplacementMinority);
      }
    }
  }
  cells.emplace_back(std::nullopt, RoleClass::All);
  return cells;
}

namespace {

const AgentRecord& lookup(const std::vector<AgentRecord>& manifest,
                          std::uint32_t id) {
  auto it = std::lower_bound(
      manifest.begin(), manifest.end(), id,
      [](const AgentRecord& r, std::uint32_t v) { return r.state.id < v; });
  if (it == manifest.end() || it->state.id != id) {
    throw TrainingError("agent " + std::to_string(id) + " missing from manifest");
  }
  return *it;
}

void accumulate(EpochMetrics& m, const AgentRecord& rec,
                const AgentEpochSummary& s) {
  ++m.agents;
  m.reward.add(s.coins, 1.0);
  const auto skilled = rec.state.skill.skilled_resource();
  const int chops = s.attempts_of(ActionKind::ChopWood);
  const int mines = s.attempts_of(ActionKind::MineStone);
  const int sells_wood = s.attempts_of(ActionKind::SellWood);
  const int sells_stone = s.attempts_of(ActionKind::SellStone);
  const int sales = sells_wood + sells_stone;
  if (skilled) {
    const bool wood = *skilled == Resource::Wood;
    m.skilled_extraction.add(wood ? chops : mines, chops + mines);
    m.skilled_sale.add(wood ? sells_wood : sells_stone, sales);
    m.skill_consistent_prediction.add(s.predicted_skilled, sales);
  }
  if (rec.group) {
    if (auto stereo = majority_resource(*rec.group)) {
      const bool wood = *stereo == Resource::Wood;
      m.stereotypic_sale.add(wood ? sells_wood : sells_stone, sales);
      m.stereotypic_prediction.add(
          wood ? s.predicted_wood : sales - s.predicted_wood, sales);
    }
  }
}

}  // namespace

std::vector<EpochMetrics> compute_epoch_metrics(
    const EpochLog& log, const std::vector<AgentRecord>& manifest,
    StudyKind study) {
  const auto cells = metric_cells(study);
  std::vector<EpochMetrics> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out[i].epoch = log.epoch;
    out[i].group = cells[i].first;
    out[i].role = cells[i].second;
  }
  EpochMetrics& all = out.back();
  for (const auto& s : log.agents) {
    const AgentRecord& rec = lookup(manifest, s.agent_id);
    const RoleClass role = role_of(rec);
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (out[i].role == role && out[i].group == rec.group) {
        accumulate(out[i], rec, s);
        break;
      }
    }
    accumulate(all, rec, s);
  }
  // The population row reports stereotype measures only where groups exist.
  if (study == StudyKind::Individuation) {
    all.stereotypic_sale = {};
    all.stereotypic_prediction = {};
  }
  return out;
}

std::vector<SignalTally> compute_signal(const EpochLog& log,
                                        const std::vector<AgentRecord>& manifest,
                                        StudyKind study) {
  std::vector<SignalTally> out;
  if (study == StudyKind::Individuation) {
    out.push_back({log.epoch, std::nullopt, 0, 0});
  } else {
    for (GroupLabel g : kAllGroups) out.push_back({log.epoch, g, 0, 0});
  }
  for (const auto& s : log.agents) {
    const AgentRecord& rec = lookup(manifest, s.agent_id);
    SignalTally& t =
        out[rec.group && study != StudyKind::Individuation
                ? static_cast<std::size_t>(*rec.group)
                : 0];
    t.wood += s.attempts_of(ActionKind::SellWood);
    t.stone += s.attempts_of(ActionKind::SellStone);
  }
  return out;
}

ProbeResult probe_market(const MlpParams& market_actor, const ProbeSet& probes,
                         RandomStream* sampling) {
  ProbeResult r;
  r.group = probes.group;
  r.probes = static_cast<int>(probes.codes.size());
  const auto stereo =
      probes.group ? majority_resource(*probes.group) : std::nullopt;
  for (std::size_t i = 0; i < probes.codes.size(); ++i) {
    const auto dist = forward_actor(market_actor, probes.codes[i].as_input());
    const int a = sampling ? sample_action(dist, *sampling).index : dist.argmax();
    const Resource predicted =
        predicted_resource(static_cast<MarketPrediction>(a));
    if (predicted == Resource::Wood) ++r.predicted_wood;
    if (stereo) r.stereotypic.add(predicted == *stereo ? 1.0 : 0.0, 1.0);
    if (i < probes.truth.size()) {
      r.accuracy.add(predicted == probes.truth[i] ? 1.0 : 0.0, 1.0);
    }
  }
  return r;
}

std::vector<TidyRow> to_tidy(const std::string& run, StudyKind study,
                             std::uint64_t seed, const RunMetrics& metrics) {
  std::vector<TidyRow> rows;
  const std::string study_name(to_string(study));
  auto push = [&](int epoch, const std::optional<GroupLabel>& g,
                  std::string_view role, std::string_view measure,
                  const Ratio& ratio) {
    TidyRow row;
    row.run = run;
    row.study = study_name;
    row.seed = seed;
    row.epoch = epoch;
    row.group = group_name(g);
    row.role = std::string(role);
    row.measure = std::string(measure);
    row.numerator = ratio.num;
    row.denominator = ratio.den;
    row.value = ratio.value();
    rows.push_back(std::move(row));
  };
  for (const auto& m : metrics.cells) {
    const auto role = to_string(m.role);
    push(m.epoch, m.group, role, "skilled_extraction_ratio", m.skilled_extraction);
    push(m.epoch, m.group, role, "skilled_sale_ratio", m.skilled_sale);
    push(m.epoch, m.group, role, "skill_consistent_prediction_ratio",
         m.skill_consistent_prediction);
    push(m.epoch, m.group, role, "stereotypic_sale_ratio", m.stereotypic_sale);
    push(m.epoch, m.group, role, "stereotypic_prediction_ratio",
         m.stereotypic_prediction);
    push(m.epoch, m.group, role, "mean_reward", m.reward);
  }
  for (const auto& s : metrics.signal) {
    Ratio share;
    share.add(s.wood, s.wood + s.stone);
    push(s.epoch, s.group, "market_signal", "signal_wood_share", share);
  }
  for (const auto& p : metrics.probes) {
    Ratio wood;
    wood.add(p.predicted_wood, p.probes);
    push(p.epoch, p.group, "probe", "probe_stereotypic_proportion", p.stereotypic);
    push(p.epoch, p.group, "probe", "probe_accuracy", p.accuracy);
    push(p.epoch, p.group, "probe", "probe_wood_proportion", wood);
  }
  return rows;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("metrics line " + std::to_string(line) +
                      ": bad number '" + s + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_tidy(std::ostream& out, const std::vector<TidyRow>& rows,
                bool header) {
  if (header) out << kTidyHeader << '\n';
  for (const auto& r : rows) {
    out << r.run << ',' << r.study << ',' << r.seed << ',' << r.epoch << ','
        << r.epoch_centered() << ',' << r.group << ',' << r.role << ','
        << r.measure << ',' << (r.value ? format_double(*r.value) : "NA") << ','
        << format_double(r.numerator) << ',' << format_double(r.denominator)
        << '\n';
  }
}

std::vector<TidyRow> read_tidy(std::istream& in) {
  std::vector<TidyRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != kTidyHeader) {
    throw FormatError("metrics: missing or unexpected header");
  }
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 11) {
      throw FormatError("metrics line " + std::to_string(n) + ": expected 11 cells");
    }
    TidyRow r;
    r.run = cells[0];
    r.study = cells[1];
    r.seed = std::stoull(cells[2]);
    r.epoch = std::stoi(cells[3]);
    if (std::stoi(cells[4]) != r.epoch_centered()) {
      throw FormatError("metrics line " + std::to_string(n) +
                        ": epoch_centered inconsistent with epoch");
    }
    r.group = cells[5];
    r.role = cells[6];
    r.measure = cells[7];
    if (cells[8] != "NA") r.value = parse_double(cells[8], n);
    r.numerator = parse_double(cells[9], n);
    r.denominator = parse_double(cells[10], n);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace convsim
