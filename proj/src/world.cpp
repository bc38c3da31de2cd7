#include "convsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "convsim/binary_io.hpp"
#include "convsim/errors.hpp"

namespace convsim {

namespace {

constexpr std::string_view kWorldMagic = "CONVSIM-WORLD";
constexpr std::uint32_t kWorldVersion = 1;

void write_record(BinaryWriter& w, const AgentRecord& r) {
  w.put<std::uint32_t>(r.state.id);
  w.put<std::uint16_t>(r.state.identity.bits());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(r.specialization()));
  w.put<std::int8_t>(r.group ? static_cast<std::int8_t>(*r.group) : -1);
  w.put<std::int32_t>(r.wave_introduced);
  w.put<std::int32_t>(r.state.wood);
  w.put<std::int32_t>(r.state.stone);
  w.put<double>(r.state.coins);
}

AgentRecord read_record(BinaryReader& in) {
  AgentRecord r;
  r.state.id = in.get<std::uint32_t>();
  r.state.identity = IdentityCode(in.get<std::uint16_t>());
  const auto spec = in.get<std::uint8_t>();
  if (spec > 2) throw FormatError("bad specialization");
  r.state.skill = Skill::of(static_cast<Specialization>(spec));
  const auto group = in.get<std::int8_t>();
  if (group > 2 || group < -1) throw FormatError("bad group");
  if (group >= 0) r.group = static_cast<GroupLabel>(group);
  r.wave_introduced = in.get<std::int32_t>();
  r.state.wood = in.get<std::int32_t>();
  r.state.stone = in.get<std::int32_t>();
  r.state.coins = in.get<double>();
  return r;
}

void write_summary(BinaryWriter& w, const AgentEpochSummary& s) {
  w.put<std::uint32_t>(s.agent_id);
  for (int a : s.attempts) w.put<std::int32_t>(a);
  for (int a : s.successes) w.put<std::int32_t>(a);
  w.put<std::int32_t>(s.predicted_wood);
  w.put<std::int32_t>(s.predicted_skilled);
  w.put<double>(s.coins);
  w.put<double>(s.market_wood_prob);
}

AgentEpochSummary read_summary(BinaryReader& in) {
  AgentEpochSummary s;
  s.agent_id = in.get<std::uint32_t>();
  for (int& a : s.attempts) a = in.get<std::int32_t>();
  for (int& a : s.successes) a = in.get<std::int32_t>();
  s.predicted_wood = in.get<std::int32_t>();
  s.predicted_skilled = in.get<std::int32_t>();
  s.coins = in.get<double>();
  s.market_wood_prob = in.get<double>();
  return s;
}

double signed_log(double x) {
  return std::copysign(std::log1p(std::abs(x)), x);
}

}  // namespace

Observation agent_network_input(const Observation& obs, InputScaling scaling) {
  if (scaling == InputScaling::Raw) return obs;
  Observation out = obs;
  for (int i = 0; i < 3; ++i) out[i] = signed_log(obs[i]);
  return out;
}

World World::create(const StudyConfig& config, std::uint64_t seed) {
  config.validate();
  World w;
  w.config_ = config;
  w.seed_ = seed;
  w.population_rng_ = RandomStream::derive(seed, "population");
  w.init_rng_ = RandomStream::derive(seed, "init");
  w.order_rng_ = RandomStream::derive(seed, "order");
  w.env_rng_ = RandomStream::derive(seed, "env");
  w.agent_policy_rng_ = RandomStream::derive(seed, "agent-policy");
  w.market_policy_rng_ = RandomStream::derive(seed, "market-policy");

  auto spec = config.population_spec();
  if (spec.scheme == PopulationScheme::ReplacementCohort)
    throw ConfigError(
        "generational worlds start from a regularity checkpoint; create a "
        "regularity world and adopt the generational config");
  auto records = generate_population(spec, w.population_rng_, w.registry_,
                                     w.next_id_);
  if (spec.scheme != PopulationScheme::Random) {
    auto mixes = spec.composition();
    for (int g = 0; g < kNumGroups; ++g) w.original_group_size_[g] = mixes[g].total();
  }
  for (auto& r : records) {
    w.manifest_.push_back(r);
    w.agents_.push_back({r, PolicyModel::create(kObservationSize, kNumActions,
                                                w.init_rng_),
                         RolloutBuffer(kObservationSize)});
  }
  w.market_ = PolicyModel::create(kCodeDigits, kNumPredictions, w.init_rng_);
  w.market_buffer_ = RolloutBuffer(kCodeDigits);

  auto make_truth = [&](std::size_t n) {
    std::vector<Resource> truth(n);
    for (std::size_t i = 0; i < n; ++i)
      truth[i] = i % 2 == 0 ? Resource::Wood : Resource::Stone;
    w.population_rng_.shuffle(truth.begin(), truth.end());
    return truth;
  };
  if (spec.scheme == PopulationScheme::Random) {
    ProbeSet set;
    set.codes = generate_heldout_probes(config.probes_per_group * kNumGroups,
                                        w.population_rng_, w.registry_);
    set.truth = make_truth(set.codes.size());
    w.probes_.push_back(std::move(set));
  } else {
    for (auto g : kAllGroups) {
      ProbeSet set;
      set.group = g;
      set.codes = generate_heldout_probes(g, config.probes_per_group,
                                          w.population_rng_, w.registry_);
      set.truth = make_truth(set.codes.size());
      w.probes_.push_back(std::move(set));
    }
  }
  return w;
}

const AgentRecord* World::find_record(std::uint32_t id) const {
  auto it = std::lower_bound(
      manifest_.begin(), manifest_.end(), id,
      [](const AgentRecord& r, std::uint32_t v) { return r.state.id < v; });
  if (it == manifest_.end() || it->state.id != id) return nullptr;
  return &*it;
}

void World::begin_phase(std::string label) {
  phases_.push_back({std::move(label), epoch_ + 1, epoch_});
}

void World::adopt_config(const StudyConfig& config) {
  config.validate();
  if (config.population_size != config_.population_size)
    throw ConfigError("config field 'population_size': " +
                      std::to_string(config.population_size) +
                      " does not match the checkpoint's population of " +
                      std::to_string(config_.population_size));
  if (config.study == StudyKind::Generational &&
      config_.study != StudyKind::Regularity &&
      config_.study != StudyKind::Generational)
    throw ConfigError("generational study must continue a regularity checkpoint");
  config_ = config;
}

EpochLog World::run_epoch() {
  if (phases_.empty()) begin_phase(std::string(to_string(config_.study)));
  ++epoch_;
  const auto& rules = config_.economy;
  const std::size_t n = agents_.size();

  EpochLog log;
  log.epoch = epoch_;
  log.phase = static_cast<int>(phases_.size()) - 1;
  log.agents.resize(n);

  // The market's parameters are fixed within the epoch, so its policy for
  // each seller is evaluated once.
  std::vector<ActionDistribution> market_dist(n);
  std::vector<double> market_value(n);
  std::vector<std::array<double, kCodeDigits>> code_input(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = agents_[i];
    a.record.state.wood = 0;
    a.record.state.stone = 0;
    a.record.state.coins = 0.0;
    a.buffer.clear();
    code_input[i] = a.record.state.identity.as_input();
    market_dist[i] = forward_actor(market_.actor, code_input[i]);
    market_value[i] = forward_critic(market_.critic, code_input[i]);
    log.agents[i].agent_id = a.record.state.id;
    log.agents[i].market_wood_prob =
        market_dist[i].prob(static_cast<int>(MarketPrediction::PredictWood));
  }
  market_buffer_.clear();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  log.events.reserve(n * config_.steps_per_epoch);
  for (int step = 0; step < config_.steps_per_epoch; ++step) {
    order_rng_.shuffle(order.begin(), order.end());
    for (std::size_t i : order) {
      auto& agent = agents_[i];
      auto& state = agent.record.state;
      const auto input =
          agent_network_input(observe_agent(state, rules), config_.agent_input);
      const auto decision = agent.model.act(input, agent_policy_rng_);
      const auto kind = static_cast<ActionKind>(decision.action);

      std::optional<MarketPrediction> prediction;
      ActionSample market_choice;
      if (is_sale(kind)) {
        market_choice = sample_action(market_dist[i], market_policy_rng_);
        prediction = static_cast<MarketPrediction>(market_choice.index);
      }
      const auto outcome = apply_action(state, kind, env_rng_, rules, prediction);
      agent.buffer.store(input, decision.action, decision.log_prob,
                         outcome.agent_reward, decision.value);

      auto& sum = log.agents[i];
      ++sum.attempts[decision.action];
      if (outcome.success) ++sum.successes[decision.action];
      if (prediction) {
        market_buffer_.store(code_input[i], market_choice.index,
                             market_choice.log_prob, outcome.market_reward,
                             market_value[i]);
        const auto predicted = predicted_resource(*prediction);
        if (predicted == Resource::Wood) ++sum.predicted_wood;
        if (predicted == state.skill.skilled_resource()) ++sum.predicted_skilled;
        log.market_reward += outcome.market_reward;
        log.sales.push_back({state.id, *resource_of(kind), *prediction,
                             outcome.coordinated, outcome.insufficient,
                             outcome.agent_reward, outcome.market_reward});
      }
      log.events.push_back({epoch_, step, state.id, kind, outcome.success,
                            outcome.agent_reward, outcome.market_reward,
                            outcome.wood_delta, outcome.stone_delta});
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    log.agents[i].coins = agents_[i].record.state.coins;

  log.market_steps = market_buffer_.size();
  log.agent_stats.reserve(n);
  for (auto& a : agents_) {
    a.buffer.mark_terminal();
    log.agent_stats.push_back(train_on_epoch(a.model, a.buffer, config_.trainer));
  }
  market_buffer_.mark_terminal();
  log.market_stats = train_on_epoch(market_, market_buffer_, config_.trainer);

  phases_.back().last_epoch = epoch_;
  history_.push_back({epoch_, log.phase, log.agents});
  return log;
}

void World::apply_replacement(int wave) {
  const int waves = config_.replacement.waves;
  if (wave != wave_ + 1 || wave < 1 || wave > waves)
    throw std::logic_error("replacement wave " + std::to_string(wave) +
                           " out of order (last applied: " +
                           std::to_string(wave_) + ")");
  if (original_group_size_[0] == 0)
    throw std::logic_error("replacement needs a group-labelled population");
  for (auto g : kAllGroups) {
    const int k = original_group_size_[static_cast<int>(g)] / waves;
    std::vector<std::size_t> originals;
    for (std::size_t i = 0; i < agents_.size(); ++i)
      if (agents_[i].record.group == g && agents_[i].record.wave_introduced == 0)
        originals.push_back(i);
    if (static_cast<int>(originals.size()) < k)
      throw std::logic_error("not enough original agents left to replace");
    population_rng_.shuffle(originals.begin(), originals.end());
    originals.resize(k);
    std::sort(originals.begin(), originals.end());
    auto cohort = generate_replacement_cohort(g, k, wave, population_rng_,
                                              registry_, next_id_);
    for (int j = 0; j < k; ++j) {
      manifest_.push_back(cohort[j]);
      agents_[originals[j]] = {
          cohort[j], PolicyModel::create(kObservationSize, kNumActions, init_rng_),
          RolloutBuffer(kObservationSize)};
    }
  }
  wave_ = wave;
}

void World::replace_market() {
  market_ = PolicyModel::create(kCodeDigits, kNumPredictions, init_rng_);
  market_buffer_ = RolloutBuffer(kCodeDigits);
}

std::string World::checkpoint() const {
  BinaryWriter w;
  w.put_string(to_json(config_));
  w.put<std::uint64_t>(seed_);
  w.put<std::int32_t>(epoch_);
  w.put<std::int32_t>(wave_);
  w.put<std::uint32_t>(next_id_);
  for (const auto* rng : {&population_rng_, &init_rng_, &order_rng_, &env_rng_,
                          &agent_policy_rng_, &market_policy_rng_})
    w.put_string(rng->serialize());
  for (int s : original_group_size_) w.put<std::int32_t>(s);

  w.put<std::uint64_t>(registry_.size());
  for (auto code : registry_.issued()) w.put<std::uint16_t>(code.bits());
  w.put<std::uint64_t>(manifest_.size());
  for (const auto& r : manifest_) write_record(w, r);

  w.put<std::uint64_t>(agents_.size());
  for (const auto& a : agents_) {
    write_record(w, a.record);
    a.model.write(w);
    a.buffer.write(w);
  }
  market_.write(w);
  market_buffer_.write(w);

  w.put<std::uint64_t>(probes_.size());
  for (const auto& p : probes_) {
    w.put<std::int8_t>(p.group ? static_cast<std::int8_t>(*p.group) : -1);
    w.put<std::uint64_t>(p.codes.size());
    for (std::size_t i = 0; i < p.codes.size(); ++i) {
      w.put<std::uint16_t>(p.codes[i].bits());
      w.put<std::uint8_t>(static_cast<std::uint8_t>(p.truth[i]));
    }
  }

  w.put<std::uint64_t>(phases_.size());
  for (const auto& p : phases_) {
    w.put_string(p.label);
    w.put<std::int32_t>(p.first_epoch);
    w.put<std::int32_t>(p.last_epoch);
  }
  w.put<std::uint64_t>(history_.size());
  for (const auto& h : history_) {
    w.put<std::int32_t>(h.epoch);
    w.put<std::int32_t>(h.phase);
    w.put<std::uint64_t>(h.agents.size());
    for (const auto& s : h.agents) write_summary(w, s);
  }
  return seal(kWorldMagic, kWorldVersion, w.bytes());
}

World World::restore(std::string_view bytes) {
  const std::string payload = unseal(kWorldMagic, kWorldVersion, bytes);
  BinaryReader in(payload);
  World w;
  try {
    w.config_ = config_from_json(in.get_string());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  w.seed_ = in.get<std::uint64_t>();
  w.epoch_ = in.get<std::int32_t>();
  w.wave_ = in.get<std::int32_t>();
  w.next_id_ = in.get<std::uint32_t>();
  for (auto* rng : {&w.population_rng_, &w.init_rng_, &w.order_rng_,
                    &w.env_rng_, &w.agent_policy_rng_, &w.market_policy_rng_})
    *rng = RandomStream::deserialize(in.get_string());
  for (int& s : w.original_group_size_) s = in.get<std::int32_t>();

  const auto n_codes = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_codes; ++i)
    w.registry_.issue(IdentityCode(in.get<std::uint16_t>()));
  const auto n_manifest = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_manifest; ++i)
    w.manifest_.push_back(read_record(in));

  const auto n_agents = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_agents; ++i) {
    AgentSlot slot;
    slot.record = read_record(in);
    slot.model = PolicyModel::read(in);
    slot.buffer = RolloutBuffer::read(in);
    w.agents_.push_back(std::move(slot));
  }
  w.market_ = PolicyModel::read(in);
  w.market_buffer_ = RolloutBuffer::read(in);

  const auto n_probes = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_probes; ++i) {
    ProbeSet p;
    const auto g = in.get<std::int8_t>();
    if (g >= 0) p.group = static_cast<GroupLabel>(g);
    const auto n = in.get<std::uint64_t>();
    for (std::uint64_t j = 0; j < n; ++j) {
      p.codes.emplace_back(in.get<std::uint16_t>());
      p.truth.push_back(static_cast<Resource>(in.get<std::uint8_t>()));
    }
    w.probes_.push_back(std::move(p));
  }

  const auto n_phases = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_phases; ++i) {
    Phase p;
    p.label = in.get_string();
    p.first_epoch = in.get<std::int32_t>();
    p.last_epoch = in.get<std::int32_t>();
    w.phases_.push_back(std::move(p));
  }
  const auto n_history = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_history; ++i) {
    EpochHistory h;
    h.epoch = in.get<std::int32_t>();
    h.phase = in.get<std::int32_t>();
    const auto n = in.get<std::uint64_t>();
    for (std::uint64_t j = 0; j < n; ++j) h.agents.push_back(read_summary(in));
    w.history_.push_back(std::move(h));
  }
  if (!in.done()) throw FormatError("trailing bytes in checkpoint");
  return w;
}

bool operator==(const World& a, const World& b) {
  return a.checkpoint() == b.checkpoint();
}

}  // namespace convsim
