#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "sdflow/error.hpp"
#include "sdflow/ingest.hpp"
#include "sdflow/rng.hpp"

namespace sdflow {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, "synthetic config: " + message);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_lognormal(const json& j, const char* key, LogNormalParams& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  read_opt(v, "log_mean", out.log_mean);
  read_opt(v, "log_sigma", out.log_sigma);
}

json lognormal_json(const LogNormalParams& p) {
  return {{"log_mean", p.log_mean}, {"log_sigma", p.log_sigma}};
}

struct FlowPlan {
  std::vector<Micros> delays;
  std::vector<PlantedBurst> bursts;
};

class FlowSynthesizer {
 public:
  FlowSynthesizer(const SynthConfig& config, const AppProfile& profile, bool degraded, Rng& rng)
      : config_(config), profile_(profile), degraded_(degraded), rng_(rng) {}

  FlowPlan plan_delays(std::size_t n) {
    FlowPlan plan;
    plan.delays.reserve(n);
    const std::uint32_t msl = profile_.msl;
    std::size_t i = 0;
    bool after_run = false;
    while (i < n) {
      if (!after_run) {
        if (rng_.bernoulli(burst_rate_at(i))) {
          const std::size_t length = msl + rng_.geometric_mean(profile_.burst_extra_length_mean);
          if (i + length <= n) {
            emit_run(plan.delays, length);
            plan.bursts.push_back({i, length});
            i += length;
            after_run = true;
            continue;
          }
        } else if (msl >= 2 && rng_.bernoulli(profile_.near_miss_rate)) {
          const std::size_t length = 1 + rng_.below(msl - 1);
          if (i + length <= n) {
            emit_run(plan.delays, length);
            i += length;
            after_run = true;
            continue;
          }
        }
      }
      plan.delays.push_back(base_delay());
      after_run = false;
      ++i;
    }
    return plan;
  }

 private:
  double burst_rate_at(std::size_t i) const {
    double rate = i < profile_.onset_delays ? profile_.onset_burst_rate : profile_.sd_burst_rate;
    if (degraded_) rate *= config_.degraded_rate_multiplier;
    return std::min(rate, 1.0);
  }

  Micros base_delay() {
    const Micros limit = profile_.thresholds.delay_threshold;
    const double scale = degraded_ ? config_.degraded_delay_scale : 1.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
      const auto d = static_cast<Micros>(
          std::llround(rng_.lognormal(profile_.base_delay.log_mean, profile_.base_delay.log_sigma) *
                       scale));
      if (d < limit) return std::max<Micros>(d, 0);
    }
    return limit - 1;
  }

  // Every run delay clears delay + jitter thresholds, so the run's first
  // delay enters with a jitter above the jitter threshold whatever the
  // preceding base delay was.
  void emit_run(std::vector<Micros>& out, std::size_t length) {
    const Micros floor = profile_.thresholds.delay_threshold + profile_.thresholds.jitter_threshold + 1;
    for (std::size_t k = 0; k < length; ++k) {
      out.push_back(floor + static_cast<Micros>(std::llround(
                                rng_.lognormal(profile_.burst_excess.log_mean,
                                               profile_.burst_excess.log_sigma))));
    }
  }

  const SynthConfig& config_;
  const AppProfile& profile_;
  bool degraded_;
  Rng& rng_;
};

}  // namespace

void SynthConfig::validate() const {
  require(n_flows >= 1, "n_flows must be >= 1");
  require(!app_profiles.empty(), "at least one app profile is required");
  require(!location_pool.empty(), "location_pool must be non-empty");
  require(!connection_types.empty(), "connection_types must be non-empty");
  require(!day_tag.empty(), "day_tag must be non-empty");
  require(min_packets >= 1 && min_packets <= packet_capture_cap,
          "min_packets must be in [1, packet_capture_cap]");
  require(inbound_burst_extra_mean >= 0, "inbound_burst_extra_mean must be >= 0");
  require(degraded_fraction >= 0 && degraded_fraction <= 1, "degraded_fraction must be in [0,1]");
  for (const auto& [conn, frac] : degraded_fraction_by_connection) {
    require(frac >= 0 && frac <= 1, "degraded fraction for " + conn + " must be in [0,1]");
  }
  require(degraded_delay_scale > 0, "degraded_delay_scale must be > 0");
  require(degraded_rate_multiplier >= 0, "degraded_rate_multiplier must be >= 0");
  double total_weight = 0;
  for (const auto& p : app_profiles) {
    require(!p.application.empty() && !p.category.empty(), "profile names must be non-empty");
    require(p.msl >= 1, "profile " + p.application + ": msl must be >= 1");
    require(p.thresholds.delay_threshold > 0 && p.thresholds.jitter_threshold > 0,
            "profile " + p.application + ": thresholds must be > 0");
    require(p.sd_burst_rate >= 0 && p.near_miss_rate >= 0 && p.onset_burst_rate >= 0,
            "profile " + p.application + ": rates must be >= 0");
    require(p.burst_extra_length_mean >= 0, "profile " + p.application + ": burst length mean < 0");
    require(p.weight >= 0, "profile " + p.application + ": weight must be >= 0");
    total_weight += p.weight;
  }
  require(total_weight > 0, "profile weights sum to zero");
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  try {
    read_opt(j, "seed", c.seed);
    read_opt(j, "n_flows", c.n_flows);
    read_opt(j, "day_tag", c.day_tag);
    read_opt(j, "location_pool", c.location_pool);
    read_opt(j, "connection_types", c.connection_types);
    read_lognormal(j, "packets_per_flow", c.packets_per_flow);
    read_opt(j, "min_packets", c.min_packets);
    read_opt(j, "packet_capture_cap", c.packet_capture_cap);
    read_opt(j, "inbound_burst_extra_mean", c.inbound_burst_extra_mean);
    read_lognormal(j, "wan_gap", c.wan_gap);
    read_opt(j, "degraded_fraction", c.degraded_fraction);
    read_opt(j, "degraded_fraction_by_connection", c.degraded_fraction_by_connection);
    read_opt(j, "degraded_delay_scale", c.degraded_delay_scale);
    read_opt(j, "degraded_rate_multiplier", c.degraded_rate_multiplier);
    if (j.contains("app_profiles")) {
      for (const auto& pj : j.at("app_profiles")) {
        AppProfile p;
        read_opt(pj, "application", p.application);
        read_opt(pj, "category", p.category);
        read_opt(pj, "msl", p.msl);
        read_opt(pj, "delay_threshold_us", p.thresholds.delay_threshold);
        read_opt(pj, "jitter_threshold_us", p.thresholds.jitter_threshold);
        read_opt(pj, "weight", p.weight);
        read_lognormal(pj, "base_delay", p.base_delay);
        read_opt(pj, "sd_burst_rate", p.sd_burst_rate);
        read_opt(pj, "burst_extra_length_mean", p.burst_extra_length_mean);
        read_lognormal(pj, "burst_excess", p.burst_excess);
        read_opt(pj, "near_miss_rate", p.near_miss_rate);
        read_opt(pj, "onset_delays", p.onset_delays);
        read_opt(pj, "onset_burst_rate", p.onset_burst_rate);
        c.app_profiles.push_back(std::move(p));
      }
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig, std::string("synthetic config: ") + ex.what());
  }
  return c;
}

json SynthConfig::to_json() const {
  json profiles = json::array();
  for (const auto& p : app_profiles) {
    profiles.push_back({{"application", p.application},
                        {"category", p.category},
                        {"msl", p.msl},
                        {"delay_threshold_us", p.thresholds.delay_threshold},
                        {"jitter_threshold_us", p.thresholds.jitter_threshold},
                        {"weight", p.weight},
                        {"base_delay", lognormal_json(p.base_delay)},
                        {"sd_burst_rate", p.sd_burst_rate},
                        {"burst_extra_length_mean", p.burst_extra_length_mean},
                        {"burst_excess", lognormal_json(p.burst_excess)},
                        {"near_miss_rate", p.near_miss_rate},
                        {"onset_delays", p.onset_delays},
                        {"onset_burst_rate", p.onset_burst_rate}});
  }
  return {{"seed", seed},
          {"n_flows", n_flows},
          {"day_tag", day_tag},
          {"app_profiles", profiles},
          {"location_pool", location_pool},
          {"connection_types", connection_types},
          {"packets_per_flow", lognormal_json(packets_per_flow)},
          {"min_packets", min_packets},
          {"packet_capture_cap", packet_capture_cap},
          {"inbound_burst_extra_mean", inbound_burst_extra_mean},
          {"wan_gap", lognormal_json(wan_gap)},
          {"degraded_fraction", degraded_fraction},
          {"degraded_fraction_by_connection", degraded_fraction_by_connection},
          {"degraded_delay_scale", degraded_delay_scale},
          {"degraded_rate_multiplier", degraded_rate_multiplier}};
}

SyntheticCorpus generate_synthetic(const SynthConfig& config) {
  config.validate();

  SyntheticCorpus out;
  out.corpus.origin = CorpusOrigin::Synthetic;
  out.corpus.day_tag = config.day_tag;
  out.corpus.flows.reserve(config.n_flows);
  out.truth.reserve(config.n_flows);

  std::vector<double> cumulative;
  double total = 0;
  for (const auto& p : config.app_profiles) cumulative.push_back(total += p.weight);

  const std::uint64_t day_seed = config.seed ^ Rng::hash_string(config.day_tag);
  for (std::size_t f = 0; f < config.n_flows; ++f) {
    Rng rng(Rng::stream_seed(day_seed, f));

    const double pick = rng.uniform() * total;
    const std::size_t profile_index = std::min<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
        cumulative.size() - 1);
    const AppProfile& profile = config.app_profiles[profile_index];

    FlowRecord flow;
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%07zu", config.day_tag.c_str(), f);
    flow.meta.flow_id = id;
    flow.meta.application = profile.application;
    flow.meta.category = profile.category;
    flow.meta.location = config.location_pool[rng.below(config.location_pool.size())];
    flow.meta.connection_type = config.connection_types[rng.below(config.connection_types.size())];
    flow.meta.msl = profile.msl;

    double degraded_share = config.degraded_fraction;
    if (auto it = config.degraded_fraction_by_connection.find(flow.meta.connection_type);
        it != config.degraded_fraction_by_connection.end()) {
      degraded_share = it->second;
    }
    const bool degraded = rng.bernoulli(degraded_share);

    // Packet budget -> inbound bursts, each answered by one outbound packet.
    const auto target = static_cast<std::size_t>(std::clamp<double>(
        std::round(rng.lognormal(config.packets_per_flow.log_mean, config.packets_per_flow.log_sigma)),
        static_cast<double>(config.min_packets), static_cast<double>(config.packet_capture_cap)));
    std::vector<std::size_t> inbound;
    std::size_t used = 0;
    while (used + 2 <= target) {
      std::size_t burst = 1 + rng.geometric_mean(config.inbound_burst_extra_mean);
      burst = std::min(burst, target - used - 1);
      inbound.push_back(burst);
      used += burst + 1;
    }
    const std::size_t trailing = target - used;

    FlowSynthesizer synth(config, profile, degraded, rng);
    FlowPlan plan = synth.plan_delays(inbound.size());

    Micros t = 0;
    bool first = true;
    auto next_inbound = [&] {
      if (!first) {
        t += std::max<Micros>(
            1, std::llround(rng.lognormal(config.wan_gap.log_mean, config.wan_gap.log_sigma)));
      }
      first = false;
      flow.packets.push_back({t, Direction::ToLan});
    };
    flow.packets.reserve(target);
    for (std::size_t c = 0; c < inbound.size(); ++c) {
      for (std::size_t b = 0; b < inbound[c]; ++b) next_inbound();
      t += plan.delays[c];
      flow.packets.push_back({t, Direction::ToWan});
    }
    for (std::size_t b = 0; b < trailing; ++b) next_inbound();

    out.truth.push_back({flow.meta.flow_id, std::move(plan.bursts)});
    out.corpus.flows.push_back(std::move(flow));
  }
  return out;
}

nlohmann::ordered_json truth_to_json(const std::vector<FlowTruth>& truth) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& t : truth) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : t.bursts) {
      arr.push_back({{"start_delay_index", b.start_delay_index}, {"length", b.length}});
    }
    j[t.flow_id] = std::move(arr);
  }
  return j;
}

std::vector<FlowTruth> truth_from_json(const nlohmann::ordered_json& j) {
  std::vector<FlowTruth> out;
  for (const auto& [flow_id, bursts] : j.items()) {
    FlowTruth t{flow_id, {}};
    for (const auto& b : bursts) {
      t.bursts.push_back({b.at("start_delay_index").get<std::size_t>(), b.at("length").get<std::size_t>()});
    }
    out.push_back(std::move(t));
  }
  return out;
}

ThresholdTable thresholds_for(const SynthConfig& config) {
  config.validate();
  const auto& first = config.app_profiles.front();
  ThresholdTable table(ThresholdEntry{first.thresholds, first.msl});
  for (const auto& p : config.app_profiles) {
    table.set(p.application, ThresholdEntry{p.thresholds, p.msl});
  }
  return table;
}

}  // namespace sdflow
