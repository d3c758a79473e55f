#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evscore/channel_grammar.hpp"
#include "evscore/error.hpp"
#include "evscore/event_log.hpp"
#include "evscore/rng.hpp"
#include "evscore/timestamp.hpp"

namespace evscore {

// One nominal channel: a concrete PV cycling through its state pattern.
// Successive events on the channel step the cycle by one transition
// (states[k] -> states[k+1 mod n]), producing the repetitive chatter typical
// of event-logger traffic.
struct PvTemplate {
  std::string pv;
  std::vector<std::string> cycle;  // at least 2 states
  std::string description;
  double weight = 1.0;  // relative draw probability
};

// One anomalous event template; bursts cycle through a pattern's events.
struct AnomalyEvent {
  std::string pv;
  std::string prev_state;
  std::string new_state;
  std::string description;
};

struct AnomalyPattern {
  std::vector<AnomalyEvent> events;
};

struct CorpusSpec {
  std::vector<PvTemplate> nominal;
  std::vector<AnomalyPattern> anomaly_patterns;
  std::size_t n_events = 20000;
  double anomaly_rate = 0.01;  // anomalous fraction; bursts of 2-4 events
  Timestamp start_time = parse_timestamp("2025-06-25 00:00:00.000");
  std::uint64_t max_step_ms = 20;  // timestamps advance 1..max_step_ms per event
  std::uint64_t seed = 42;
};

struct LabeledCorpus {
  std::vector<std::string> lines;  // event-log wire format
  std::vector<bool> labels;        // per-line anomaly flag
};

namespace detail {

inline TokenSequence safe_tokens(const std::string& pv, const std::string& description) {
  try {
    return tokenize_event(pv, description);
  } catch (const Error&) {
    return {};
  }
}

// Every anomaly pattern must be distinguishable from nominal traffic: at
// least one event with a token never seen in nominal text, or a
// (pv, prev, new) transition no nominal cycle can produce.
inline void validate_spec(const CorpusSpec& spec) {
  if (spec.n_events == 0) throw Error(Errc::spec_invalid, "n_events must be >= 1");
  if (spec.nominal.empty()) throw Error(Errc::spec_invalid, "no nominal pv families");
  if (!(spec.anomaly_rate >= 0.0 && spec.anomaly_rate < 0.5))
    throw Error(Errc::spec_invalid, "anomaly_rate must lie in [0, 0.5): anomalies are a strict minority");
  if (spec.max_step_ms < 1) throw Error(Errc::spec_invalid, "max_step_ms must be >= 1");
  for (const PvTemplate& t : spec.nominal) {
    if (t.pv.empty()) throw Error(Errc::spec_invalid, "empty nominal PV");
    if (t.cycle.size() < 2) throw Error(Errc::spec_invalid, "cycle needs >= 2 states: " + t.pv);
    if (!(t.weight > 0)) throw Error(Errc::spec_invalid, "non-positive weight: " + t.pv);
    for (const std::string& s : t.cycle)
      if (s.empty()) throw Error(Errc::spec_invalid, "empty state in cycle of " + t.pv);
  }
  if (spec.anomaly_rate > 0 && spec.anomaly_patterns.empty())
    throw Error(Errc::spec_invalid, "anomaly_rate > 0 but no anomaly patterns");

  std::set<std::string> nominal_tokens;
  std::set<std::tuple<std::string, std::string, std::string>> nominal_transitions;
  for (const PvTemplate& t : spec.nominal) {
    for (const std::string& tok : safe_tokens(t.pv, t.description)) nominal_tokens.insert(tok);
    for (std::size_t k = 0; k < t.cycle.size(); ++k)
      nominal_transitions.insert({t.pv, t.cycle[k], t.cycle[(k + 1) % t.cycle.size()]});
  }
  for (const AnomalyPattern& pattern : spec.anomaly_patterns) {
    if (pattern.events.empty()) throw Error(Errc::spec_invalid, "empty anomaly pattern");
    bool novel = false;
    for (const AnomalyEvent& ev : pattern.events) {
      if (ev.pv.empty() || ev.prev_state.empty() || ev.new_state.empty())
        throw Error(Errc::spec_invalid, "anomaly event with empty field");
      for (const std::string& tok : safe_tokens(ev.pv, ev.description))
        if (!nominal_tokens.contains(tok)) novel = true;
      if (!nominal_transitions.contains({ev.pv, ev.prev_state, ev.new_state})) novel = true;
    }
    if (!novel)
      throw Error(Errc::spec_invalid,
                  "anomaly pattern is indistinguishable from nominal traffic");
  }
}

}  // namespace detail

// Deterministic corpus generation: weighted nominal chatter with strictly
// increasing millisecond timestamps, interrupted by short anomaly bursts
// (2-4 consecutive events) at seeded random positions.
inline LabeledCorpus generate_corpus(const CorpusSpec& spec) {
  detail::validate_spec(spec);
  Rng rng(spec.seed);

  const auto target_anomalous =
      static_cast<std::size_t>(std::llround(spec.anomaly_rate * static_cast<double>(spec.n_events)));
  const std::size_t n_nominal = spec.n_events - target_anomalous;

  // Burst lengths in \{2,3,4\}, summing exactly to the target (a lone burst
  // of 1 only when the target itself is 1).
  std::vector<std::size_t> burst_lens;
  std::size_t remaining = target_anomalous;
  while (remaining > 0) {
    std::size_t len = std::min<std::size_t>(2 + rng.below(3), remaining);
    if (remaining - len == 1) len = len > 2 ? len - 1 : len + 1;
    burst_lens.push_back(len);
    remaining -= len;
  }
  // Each burst is attached to a gap in the nominal sequence (gap g = before
  // the g-th nominal event; g = n_nominal appends at the end).
  std::vector<std::pair<std::size_t, std::size_t>> bursts;  // (gap, length)
  bursts.reserve(burst_lens.size());
  for (std::size_t len : burst_lens) bursts.emplace_back(rng.below(n_nominal + 1), len);
  std::stable_sort(bursts.begin(), bursts.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  // Weighted choice over nominal channels.
  std::vector<double> weight_cdf(spec.nominal.size());
  double acc = 0;
  for (std::size_t i = 0; i < spec.nominal.size(); ++i) {
    acc += spec.nominal[i].weight;
    weight_cdf[i] = acc;
  }
  std::vector<std::size_t> cycle_pos(spec.nominal.size(), 0);

  LabeledCorpus corpus;
  corpus.lines.reserve(spec.n_events);
  corpus.labels.reserve(spec.n_events);
  Timestamp now = spec.start_time;

  auto next_time = [&] {
    now.ms_since_epoch += 1 + static_cast<std::int64_t>(rng.below(spec.max_step_ms));
    return now;
  };
  auto emit_nominal = [&] {
    const double u = rng.uniform() * weight_cdf.back();
    const auto idx = static_cast<std::size_t>(
        std::upper_bound(weight_cdf.begin(), weight_cdf.end(), u) - weight_cdf.begin());
    const PvTemplate& t = spec.nominal[std::min(idx, spec.nominal.size() - 1)];
    std::size_t& pos = cycle_pos[std::min(idx, spec.nominal.size() - 1)];
    LogEvent ev;
    ev.timestamp = next_time();
    ev.pv = t.pv;
    ev.prev_state = t.cycle[pos];
    pos = (pos + 1) % t.cycle.size();
    ev.new_state = t.cycle[pos];
    ev.description = t.description;
    corpus.lines.push_back(format_event(ev));
    corpus.labels.push_back(false);
  };
  auto emit_burst = [&](std::size_t len) {
    const AnomalyPattern& pattern =
        spec.anomaly_patterns[rng.below(spec.anomaly_patterns.size())];
    for (std::size_t j = 0; j < len; ++j) {
      const AnomalyEvent& a = pattern.events[j % pattern.events.size()];
      LogEvent ev;
      ev.timestamp = next_time();
      ev.pv = a.pv;
      ev.prev_state = a.prev_state;
      ev.new_state = a.new_state;
      ev.description = a.description;
      corpus.lines.push_back(format_event(ev));
      corpus.labels.push_back(true);
    }
  };

  std::size_t burst_idx = 0;
  for (std::size_t g = 0; g <= n_nominal; ++g) {
    while (burst_idx < bursts.size() && bursts[burst_idx].first == g)
      emit_burst(bursts[burst_idx++].second);
    if (g < n_nominal) emit_nominal();
  }
  return corpus;
}

// The built-in corpus: storage-ring status chatter with two interlock burst
// patterns.
//
// Nominal channel names deliberately share most of their tokens (the "SR"
// system and the "Ok" signal), the way a real naming convention repeats its
// vocabulary across channels. The shared tokens give every routine event a
// large common component in embedding space, so nominal event vectors form a
// tight cluster that the detector compresses hard, while the interlock
// bursts are built solely from tokens that never occur in routine traffic
// and land far outside it.
inline CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  spec.n_events = 20000;
  spec.anomaly_rate = 0.01;
  spec.seed = 42;

  auto add_family = [&](std::vector<std::string> pvs, std::vector<std::string> cycle,
                        double weight) {
    for (std::string& pv : pvs) spec.nominal.push_back({std::move(pv), cycle, "", weight});
  };
  add_family({"SR:MTR1:Ok", "SR:MTR2:Ok", "SR:MTR3:Ok", "SR:MTR4:Ok"}, {"0", "1"}, 1.5);
  add_family({"SR:GDS1:Ok", "SR:GDS2:Ok"}, {"0", "1"}, 1.0);
  add_family({"SR:PSS111:Ok", "SR:PSS112:Ok"}, {"0", "1"}, 0.8);
  add_family({"SR:KLY1:Ok", "SR:KLY2:Ok"}, {"1", "0"}, 0.6);

  AnomalyPattern thermocouple_trip;
  thermocouple_trip.events = {
      {"SR12S___TCUP9__BM", "0", "1", "thermocouple interlock"},
      {"SR12S___TCUP9_L_BM", "0", "1", "thermocouple latch"},
      {"SR12S___UP_OUT_BM", "0", "1", "upper chamber trip"},
  };
  AnomalyPattern beam_loss;
  beam_loss.events = {
      {"SR12C___QD1____BM02", "1", "0", "quadrupole monitor"},
      {"SR12C___DCCT5__BM00", "1", "0", "beam current monitor"},
      {"SR12C___QD1____BM02", "0", "1", "quadrupole monitor"},
  };
  spec.anomaly_patterns = {thermocouple_trip, beam_loss};
  return spec;
}

// JSON (de)serialization of corpus specs; see the README for the schema.
inline CorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
  CorpusSpec spec = default_corpus_spec();
  spec.nominal.clear();
  spec.anomaly_patterns.clear();
  try {
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_events")) spec.n_events = j.at("n_events").get<std::size_t>();
    if (j.contains("anomaly_rate")) spec.anomaly_rate = j.at("anomaly_rate").get<double>();
    if (j.contains("start_time")) spec.start_time = parse_timestamp(j.at("start_time").get<std::string>());
    if (j.contains("max_step_ms")) spec.max_step_ms = j.at("max_step_ms").get<std::uint64_t>();
    for (const auto& f : j.at("families")) {
      PvTemplate t;
      t.cycle = f.at("cycle").get<std::vector<std::string>>();
      t.description = f.value("description", std::string());
      t.weight = f.value("weight", 1.0);
      // either a concrete "pvs" list or a "template" with substitution alphabets
      if (f.contains("pvs")) {
        for (const auto& pv : f.at("pvs")) {
          t.pv = pv.get<std::string>();
          spec.nominal.push_back(t);
        }
      } else {
        const auto tmpl = f.at("template").get<std::string>();
        std::map<std::string, std::vector<std::string>> alphabets;
        if (f.contains("alphabets"))
          alphabets = f.at("alphabets").get<std::map<std::string, std::vector<std::string>>>();
        std::vector<std::string> expanded = {tmpl};
        for (const auto& [key, values] : alphabets) {
          const std::string placeholder = "{" + key + "}";
          std::vector<std::string> next;
          for (const std::string& base : expanded)
            for (const std::string& value : values) {
              std::string s = base;
              for (std::size_t pos; (pos = s.find(placeholder)) != std::string::npos;)
                s.replace(pos, placeholder.size(), value);
              next.push_back(std::move(s));
            }
          expanded = std::move(next);
        }
        for (std::string& pv : expanded) {
          t.pv = std::move(pv);
          spec.nominal.push_back(t);
        }
      }
    }
    for (const auto& p : j.at("anomaly_patterns")) {
      AnomalyPattern pattern;
      for (const auto& e : p.at("events"))
        pattern.events.push_back({e.at("pv").get<std::string>(),
                                  e.at("prev").get<std::string>(),
                                  e.at("new").get<std::string>(),
                                  e.value("description", std::string())});
      spec.anomaly_patterns.push_back(std::move(pattern));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::spec_invalid, std::string("bad corpus spec: ") + e.what());
  }
  return spec;
}

inline std::string write_labels_csv(const LabeledCorpus& corpus) {
  std::string out = "line_no,is_anomaly\n";
  for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
    out += std::to_string(i + 1);
    out += corpus.labels[i] ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace evscore
