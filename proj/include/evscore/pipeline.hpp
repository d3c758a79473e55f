#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evscore/channel_grammar.hpp"
#include "evscore/detail/serial.hpp"
#include "evscore/detail/text.hpp"
#include "evscore/detector.hpp"
#include "evscore/embeddings.hpp"
#include "evscore/error.hpp"
#include "evscore/event_log.hpp"
#include "evscore/timestamp.hpp"

namespace evscore {

// What text goes into an event "sentence" for embedding and scoring.
enum class TokenizerMode : std::uint8_t {
  pv_and_description = 0,
  pv_only = 1,
};

inline const char* tokenizer_mode_name(TokenizerMode m) {
  return m == TokenizerMode::pv_only ? "pv_only" : "pv_and_description";
}

inline TokenizerMode tokenizer_mode_from_name(const std::string& name) {
  if (name == "pv_only") return TokenizerMode::pv_only;
  if (name == "pv_and_description") return TokenizerMode::pv_and_description;
  throw Error(Errc::invalid_config, "unknown tokenizer mode '" + name + "'");
}

// Fully resolved run configuration. The master seed determines the embedding
// and detector seeds; everything else has the documented default.
struct PipelineConfig {
  SkipgramConfig embedding;
  DetectorConfig detector;
  TokenizerMode tokenizer = TokenizerMode::pv_and_description;
  std::optional<Timestamp> start_time;  // training-data time range, inclusive
  std::optional<Timestamp> end_time;
  std::uint64_t seed = 42;
};

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["tokenizer"] = tokenizer_mode_name(c.tokenizer);
  if (c.start_time) j["start_time"] = format_timestamp(*c.start_time);
  if (c.end_time) j["end_time"] = format_timestamp(*c.end_time);
  j["embedding"] = {{"dim", c.embedding.dim},
                    {"window", c.embedding.window},
                    {"negatives", c.embedding.negatives},
                    {"epochs", c.embedding.epochs},
                    {"learning_rate", c.embedding.learning_rate},
                    {"min_count", c.embedding.min_count}};
  j["detector"] = {{"hidden", c.detector.hidden},
                   {"latent", c.detector.latent},
                   {"segment_len", c.detector.segment_len},
                   {"epochs", c.detector.epochs},
                   {"learning_rate", c.detector.learning_rate},
                   {"weight_decay", c.detector.weight_decay},
                   {"center_floor", c.detector.center_floor}};
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tokenizer")) c.tokenizer = tokenizer_mode_from_name(j.at("tokenizer").get<std::string>());
    if (j.contains("start_time")) c.start_time = parse_timestamp(j.at("start_time").get<std::string>());
    if (j.contains("end_time")) c.end_time = parse_timestamp(j.at("end_time").get<std::string>());
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      c.embedding.dim = e.value("dim", c.embedding.dim);
      c.embedding.window = e.value("window", c.embedding.window);
      c.embedding.negatives = e.value("negatives", c.embedding.negatives);
      c.embedding.epochs = e.value("epochs", c.embedding.epochs);
      c.embedding.learning_rate = e.value("learning_rate", c.embedding.learning_rate);
      c.embedding.min_count = e.value("min_count", c.embedding.min_count);
    }
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      c.detector.hidden = d.value("hidden", c.detector.hidden);
      c.detector.latent = d.value("latent", c.detector.latent);
      c.detector.segment_len = d.value("segment_len", c.detector.segment_len);
      c.detector.epochs = d.value("epochs", c.detector.epochs);
      c.detector.learning_rate = d.value("learning_rate", c.detector.learning_rate);
      c.detector.weight_decay = d.value("weight_decay", c.detector.weight_decay);
      c.detector.center_floor = d.value("center_floor", c.detector.center_floor);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("bad config: ") + e.what());
  }
  return c;
}

// Self-contained trained model: everything scoring needs, including the
// preprocessing snapshot, so later changes to external filter files cannot
// alter the behavior of an existing bundle.
struct ModelBundle {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  EmbeddingModel embedding;
  DetectorParams detector;
  Hypersphere sphere;
  FilterList filter;        // snapshot taken at training time
  TokenizerMode tokenizer = TokenizerMode::pv_and_description;
  PipelineConfig config;    // resolved snapshot, for provenance
  std::uint64_t seed = 42;
};

// One scored, non-filtered event, in input order.
struct ScoreRecord {
  Timestamp timestamp;
  std::string pv;
  std::string prev_state;
  std::string new_state;
  double score = 0;
  std::size_t n_known = 0;
  Eigen::VectorXd latent;
};

namespace detail {

inline TokenSequence event_tokens(const LogEvent& ev, TokenizerMode mode) {
  try {
    return mode == TokenizerMode::pv_only ? tokenize_event(ev.pv, "")
                                          : tokenize_event(ev.pv, ev.description);
  } catch (const Error&) {
    return {};  // no alphanumeric text at all; scored as an all-OOV event
  }
}

inline bool in_time_range(const LogEvent& ev, const PipelineConfig& config) {
  if (config.start_time && ev.timestamp < *config.start_time) return false;
  if (config.end_time && *config.end_time < ev.timestamp) return false;
  return true;
}

}  // namespace detail

// Trains the full pipeline: parse + filter -> tokenize -> skip-gram
// embeddings -> event vectors -> center + SVDD training. Deterministic for
// fixed inputs and seed. epoch_losses receives the detector loss trace.
inline ModelBundle train_pipeline(std::istream& log, const FilterList& filter,
                                  PipelineConfig config,
                                  std::vector<Diagnostic>* diagnostics = nullptr,
                                  std::vector<double>* epoch_losses = nullptr) {
  // The master seed drives both stages through fixed derivation.
  Rng master(config.seed);
  config.embedding.seed = master.next_u64();
  config.detector.seed = master.next_u64();

  std::vector<LogEvent> events;
  for_each_event(
      log, filter,
      [&](LogEvent ev) {
        if (detail::in_time_range(ev, config)) events.push_back(std::move(ev));
      },
      [&](const Diagnostic& d) {
        if (diagnostics) diagnostics->push_back(d);
      });
  if (events.empty())
    throw Error(Errc::empty_corpus, "no events left after filtering and time-range selection");

  std::vector<TokenSequence> sentences;
  sentences.reserve(events.size());
  for (const LogEvent& ev : events) sentences.push_back(detail::event_tokens(ev, config.tokenizer));

  ModelBundle bundle;
  bundle.embedding = train_skipgram(sentences, config.embedding);

  std::vector<Eigen::VectorXd> vectors;
  vectors.reserve(events.size());
  for (const TokenSequence& s : sentences) vectors.push_back(embed_event(s, bundle.embedding).values);

  DetectorParams params = init_params({static_cast<Eigen::Index>(config.embedding.dim),
                                       config.detector.hidden, config.detector.latent},
                                      config.detector.seed);
  TrainResult trained = train_detector(std::move(params), vectors, config.detector);
  if (epoch_losses) *epoch_losses = trained.epoch_losses;

  bundle.detector = std::move(trained.params);
  bundle.sphere = std::move(trained.sphere);
  bundle.filter = filter;
  bundle.tokenizer = config.tokenizer;
  bundle.seed = config.seed;
  bundle.config = std::move(config);
  return bundle;
}

// Streaming scorer: one callback per non-filtered event, in input order,
// using the bundle's own filter and tokenizer snapshot. The caller owns the
// StreamState, which makes restart/resume and live stdin scoring possible.
template <class RecordFn>
std::size_t for_each_score(const ModelBundle& bundle, std::istream& log, StreamState& state,
                           RecordFn&& on_record,
                           std::vector<Diagnostic>* diagnostics = nullptr) {
  if (state.hidden.size() == 0) state = make_stream_state(bundle.detector);
  return for_each_event(
      log, bundle.filter,
      [&](const LogEvent& ev) {
        const TokenSequence tokens = detail::event_tokens(ev, bundle.tokenizer);
        const EventVector vec = embed_event(tokens, bundle.embedding);
        const Scored scored = score_step(bundle.detector, bundle.sphere, state, vec.values);
        ScoreRecord rec;
        rec.timestamp = ev.timestamp;
        rec.pv = ev.pv;
        rec.prev_state = ev.prev_state;
        rec.new_state = ev.new_state;
        rec.score = scored.score;
        rec.n_known = vec.n_known;
        rec.latent = scored.latent;
        on_record(std::move(rec), ev);
      },
      [&](const Diagnostic& d) {
        if (diagnostics) diagnostics->push_back(d);
      });
}

inline std::vector<ScoreRecord> score_events(const ModelBundle& bundle, std::istream& log,
                                             StreamState* state = nullptr,
                                             std::vector<Diagnostic>* diagnostics = nullptr) {
  StreamState local;
  StreamState& st = state ? *state : local;
  std::vector<ScoreRecord> records;
  for_each_score(
      bundle, log, st, [&](ScoreRecord rec, const LogEvent&) { records.push_back(std::move(rec)); },
      diagnostics);
  return records;
}

// --- score output formats ------------------------------------------------

inline constexpr const char* kScoreCsvHeader = "timestamp,pv,prev,new,score,n_known";

inline std::string format_score_row(const ScoreRecord& r) {
  std::string out = format_timestamp(r.timestamp);
  out += ',';
  out += r.pv;
  out += ',';
  out += r.prev_state;
  out += ',';
  out += r.new_state;
  out += ',';
  out += detail::format_double(r.score);
  out += ',';
  out += std::to_string(r.n_known);
  return out;
}

inline void write_score_csv(const std::vector<ScoreRecord>& records, std::ostream& out) {
  out << kScoreCsvHeader << '\n';
  for (const ScoreRecord& r : records) out << format_score_row(r) << '\n';
}

inline std::string latent_csv_header(Eigen::Index z_dim) {
  std::string h = "timestamp,pv";
  for (Eigen::Index k = 0; k < z_dim; ++k) h += ",z_" + std::to_string(k);
  return h;
}

inline std::string format_latent_row(const ScoreRecord& r) {
  std::string out = format_timestamp(r.timestamp);
  out += ',';
  out += r.pv;
  for (Eigen::Index k = 0; k < r.latent.size(); ++k) {
    out += ',';
    out += detail::format_double(r.latent[k]);
  }
  return out;
}

inline void write_latent_csv(const std::vector<ScoreRecord>& records, Eigen::Index z_dim,
                             std::ostream& out) {
  out << latent_csv_header(z_dim) << '\n';
  for (const ScoreRecord& r : records) out << format_latent_row(r) << '\n';
}

// --- bundle persistence ---------------------------------------------------
//
// Single self-describing binary file, little-endian:
//   "EVSB" | u32 format_version | payload | u64 FNV-1a(payload)
// Doubles are raw IEEE-754 bit patterns, so save -> load is lossless and
// scoring after a round trip is bitwise identical.

namespace detail {

inline void put_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
  w.put_u64(static_cast<std::uint64_t>(m.rows()));
  w.put_u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.put_f64(m(r, c));
}

inline Eigen::MatrixXd get_matrix(ByteReader& r) {
  const auto rows = static_cast<Eigen::Index>(r.get_u64());
  const auto cols = static_cast<Eigen::Index>(r.get_u64());
  if (rows < 0 || cols < 0 || (rows > 0 && cols > (1 << 24)))
    throw Error(Errc::corrupt_bundle, "implausible matrix shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.get_f64();
  return m;
}

inline void put_config(ByteWriter& w, const PipelineConfig& c) {
  w.put_u64(c.seed);
  w.put_u8(static_cast<std::uint8_t>(c.tokenizer));
  w.put_u8(c.start_time ? 1 : 0);
  w.put_i64(c.start_time ? c.start_time->ms_since_epoch : 0);
  w.put_u8(c.end_time ? 1 : 0);
  w.put_i64(c.end_time ? c.end_time->ms_since_epoch : 0);
  w.put_u64(c.embedding.dim);
  w.put_u64(c.embedding.window);
  w.put_u64(c.embedding.negatives);
  w.put_u64(c.embedding.epochs);
  w.put_f64(c.embedding.learning_rate);
  w.put_u64(c.embedding.min_count);
  w.put_u64(c.embedding.seed);
  w.put_u64(static_cast<std::uint64_t>(c.detector.hidden));
  w.put_u64(static_cast<std::uint64_t>(c.detector.latent));
  w.put_u64(c.detector.segment_len);
  w.put_u64(c.detector.epochs);
  w.put_f64(c.detector.learning_rate);
  w.put_f64(c.detector.weight_decay);
  w.put_f64(c.detector.center_floor);
  w.put_u64(c.detector.seed);
}

inline PipelineConfig get_config(ByteReader& r) {
  PipelineConfig c;
  c.seed = r.get_u64();
  c.tokenizer = static_cast<TokenizerMode>(r.get_u8());
  const bool has_start = r.get_u8() != 0;
  const std::int64_t start_ms = r.get_i64();
  if (has_start) c.start_time = Timestamp{start_ms};
  const bool has_end = r.get_u8() != 0;
  const std::int64_t end_ms = r.get_i64();
  if (has_end) c.end_time = Timestamp{end_ms};
  c.embedding.dim = r.get_u64();
  c.embedding.window = r.get_u64();
  c.embedding.negatives = r.get_u64();
  c.embedding.epochs = r.get_u64();
  c.embedding.learning_rate = r.get_f64();
  c.embedding.min_count = r.get_u64();
  c.embedding.seed = r.get_u64();
  c.detector.hidden = static_cast<Eigen::Index>(r.get_u64());
  c.detector.latent = static_cast<Eigen::Index>(r.get_u64());
  c.detector.segment_len = r.get_u64();
  c.detector.epochs = r.get_u64();
  c.detector.learning_rate = r.get_f64();
  c.detector.weight_decay = r.get_f64();
  c.detector.center_floor = r.get_f64();
  c.detector.seed = r.get_u64();
  return c;
}

}  // namespace detail

inline constexpr char kBundleMagic[4] = {'E', 'V', 'S', 'B'};
inline constexpr char kStateMagic[4] = {'E', 'V', 'S', 'T'};

inline void save_bundle(const ModelBundle& bundle, std::ostream& out) {
  detail::ByteWriter payload;
  payload.put_u64(bundle.seed);
  payload.put_u8(static_cast<std::uint8_t>(bundle.tokenizer));
  detail::put_config(payload, bundle.config);

  payload.put_u64(bundle.filter.exact_order.size());
  for (const std::string& s : bundle.filter.exact_order) payload.put_string(s);
  payload.put_u64(bundle.filter.globs.size());
  for (const std::string& s : bundle.filter.globs) payload.put_string(s);

  const Vocab& vocab = bundle.embedding.vocab;
  payload.put_u64(vocab.size());
  payload.put_u64(vocab.min_count);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    payload.put_string(vocab.tokens[i]);
    payload.put_u64(vocab.freq[i]);
  }
  payload.put_u64(bundle.embedding.dim);
  detail::put_matrix(payload, bundle.embedding.input_vectors);
  detail::put_matrix(payload, bundle.embedding.output_vectors);

  for (const auto* m : bundle.detector.matrices()) detail::put_matrix(payload, *m);

  payload.put_u64(static_cast<std::uint64_t>(bundle.sphere.center.size()));
  for (Eigen::Index k = 0; k < bundle.sphere.center.size(); ++k)
    payload.put_f64(bundle.sphere.center[k]);
  payload.put_f64(bundle.sphere.floor);

  out.write(kBundleMagic, 4);
  detail::ByteWriter version;
  version.put_u32(ModelBundle::kFormatVersion);
  out.write(version.bytes().data(), static_cast<std::streamsize>(version.bytes().size()));
  out.write(payload.bytes().data(), static_cast<std::streamsize>(payload.bytes().size()));
  detail::ByteWriter checksum;
  checksum.put_u64(detail::fnv1a64(payload.bytes()));
  out.write(checksum.bytes().data(), static_cast<std::streamsize>(checksum.bytes().size()));
  if (!out) throw Error(Errc::stream_io, "failed writing bundle");
}

inline ModelBundle load_bundle(std::istream& in) {
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::stream_io, "failed reading bundle");
  if (raw.size() < 16 || raw.compare(0, 4, kBundleMagic, 4) != 0)
    throw Error(Errc::corrupt_bundle, "not a model bundle");
  detail::ByteReader header(std::string_view(raw).substr(4, 4));
  const std::uint32_t version = header.get_u32();
  if (version != ModelBundle::kFormatVersion)
    throw Error(Errc::version_mismatch, "bundle format_version " + std::to_string(version) +
                                            ", expected " +
                                            std::to_string(ModelBundle::kFormatVersion));
  const std::string_view payload = std::string_view(raw).substr(8, raw.size() - 16);
  detail::ByteReader trailer(std::string_view(raw).substr(raw.size() - 8));
  if (detail::fnv1a64(payload) != trailer.get_u64())
    throw Error(Errc::corrupt_bundle, "checksum mismatch");

  detail::ByteReader r(payload);
  ModelBundle bundle;
  bundle.format_version = version;
  bundle.seed = r.get_u64();
  bundle.tokenizer = static_cast<TokenizerMode>(r.get_u8());
  bundle.config = detail::get_config(r);

  const std::uint64_t n_exact = r.get_u64();
  for (std::uint64_t i = 0; i < n_exact; ++i) {
    std::string s = r.get_string();
    if (bundle.filter.exact.insert(s).second) bundle.filter.exact_order.push_back(std::move(s));
  }
  const std::uint64_t n_globs = r.get_u64();
  for (std::uint64_t i = 0; i < n_globs; ++i) bundle.filter.globs.push_back(r.get_string());

  const std::uint64_t vocab_size = r.get_u64();
  bundle.embedding.vocab.min_count = r.get_u64();
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    std::string token = r.get_string();
    bundle.embedding.vocab.index.emplace(token, i);
    bundle.embedding.vocab.tokens.push_back(std::move(token));
    bundle.embedding.vocab.freq.push_back(r.get_u64());
  }
  bundle.embedding.dim = r.get_u64();
  bundle.embedding.input_vectors = detail::get_matrix(r);
  bundle.embedding.output_vectors = detail::get_matrix(r);
  bundle.embedding.unigram_cdf = detail::unigram_cdf_pow75(bundle.embedding.vocab.freq);

  for (auto* m : bundle.detector.matrices()) *m = detail::get_matrix(r);

  const auto z = static_cast<Eigen::Index>(r.get_u64());
  bundle.sphere.center.resize(z);
  for (Eigen::Index k = 0; k < z; ++k) bundle.sphere.center[k] = r.get_f64();
  bundle.sphere.floor = r.get_f64();
  bundle.sphere.frozen = true;
  if (!r.exhausted()) throw Error(Errc::corrupt_bundle, "trailing bytes in bundle");

  if (bundle.embedding.input_vectors.rows() != static_cast<Eigen::Index>(vocab_size) ||
      bundle.embedding.input_vectors.cols() != static_cast<Eigen::Index>(bundle.embedding.dim) ||
      bundle.detector.input_dim() != static_cast<Eigen::Index>(bundle.embedding.dim) ||
      bundle.detector.latent_dim() != z)
    throw Error(Errc::corrupt_bundle, "inconsistent dimensions");
  return bundle;
}

// --- stream-state persistence ----------------------------------------------
// "EVST" | u32 version | payload{u64 H, H doubles, u64 events_seen} | u64 checksum

inline void save_stream_state(const StreamState& state, std::ostream& out) {
  detail::ByteWriter payload;
  payload.put_u64(static_cast<std::uint64_t>(state.hidden.size()));
  for (Eigen::Index i = 0; i < state.hidden.size(); ++i) payload.put_f64(state.hidden[i]);
  payload.put_u64(state.events_seen);

  out.write(kStateMagic, 4);
  detail::ByteWriter version;
  version.put_u32(ModelBundle::kFormatVersion);
  out.write(version.bytes().data(), static_cast<std::streamsize>(version.bytes().size()));
  out.write(payload.bytes().data(), static_cast<std::streamsize>(payload.bytes().size()));
  detail::ByteWriter checksum;
  checksum.put_u64(detail::fnv1a64(payload.bytes()));
  out.write(checksum.bytes().data(), static_cast<std::streamsize>(checksum.bytes().size()));
  if (!out) throw Error(Errc::stream_io, "failed writing stream state");
}

inline StreamState load_stream_state(std::istream& in) {
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::stream_io, "failed reading stream state");
  if (raw.size() < 16 || raw.compare(0, 4, kStateMagic, 4) != 0)
    throw Error(Errc::corrupt_bundle, "not a stream-state file");
  detail::ByteReader header(std::string_view(raw).substr(4, 4));
  const std::uint32_t version = header.get_u32();
  if (version != ModelBundle::kFormatVersion)
    throw Error(Errc::version_mismatch, "state format_version " + std::to_string(version));
  const std::string_view payload = std::string_view(raw).substr(8, raw.size() - 16);
  detail::ByteReader trailer(std::string_view(raw).substr(raw.size() - 8));
  if (detail::fnv1a64(payload) != trailer.get_u64())
    throw Error(Errc::corrupt_bundle, "checksum mismatch");

  detail::ByteReader r(payload);
  StreamState state;
  const auto h = static_cast<Eigen::Index>(r.get_u64());
  state.hidden.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) state.hidden[i] = r.get_f64();
  state.events_seen = r.get_u64();
  if (!r.exhausted()) throw Error(Errc::corrupt_bundle, "trailing bytes in state file");
  return state;
}

}  // namespace evscore
