// evscore command-line tool: parse/filter event logs, export channel-name
// token flows, train the anomaly detector, score event streams, and generate
// and evaluate labeled synthetic corpora.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evscore/evscore.hpp"

namespace {

using evscore::Errc;
using evscore::Error;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::stream_io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(Errc::stream_io, "failed reading '" + path + "'");
  return buf.str();
}

// Input source that is either stdin ("-") or a file.
class InputStream {
 public:
  explicit InputStream(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(Errc::stream_io, "cannot open '" + path + "'");
    }
  }
  std::istream& get() { return file_.is_open() ? file_ : std::cin; }

 private:
  std::ifstream file_;
};

class OutputStream {
 public:
  explicit OutputStream(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(Errc::stream_io, "cannot open '" + path + "' for writing");
    }
  }
  std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

evscore::FilterList load_filter_file(const std::string& path) {
  if (path.empty()) return {};
  return evscore::load_filter(read_file(path));
}

void print_diagnostic(const evscore::Diagnostic& d) {
  std::cerr << evscore::format_diagnostic(d) << '\n';
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// --- parse ------------------------------------------------------------------

struct ParseArgs {
  std::string input, filter, output = "-";
  bool strict = false;
};

int cmd_parse(const ParseArgs& args) {
  const evscore::FilterList filter = load_filter_file(args.filter);
  InputStream in(args.input);
  OutputStream out(args.output);

  std::size_t n_events = 0, n_malformed = 0, n_filtered = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in.get(), line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    evscore::LogEvent ev;
    try {
      ev = evscore::parse_line(line, line_no);
    } catch (const Error& e) {
      ++n_malformed;
      print_diagnostic({line_no, e.code(), e.what()});
      continue;
    }
    if (evscore::is_filtered(filter, ev.pv)) {
      ++n_filtered;
      continue;
    }
    ++n_events;
    out.get() << evscore::format_event(ev) << '\n';
  }
  if (in.get().bad()) throw Error(Errc::stream_io, "read failed on '" + args.input + "'");
  std::cerr << "events=" << n_events << " malformed=" << n_malformed
            << " filtered=" << n_filtered << '\n';
  if (args.strict && n_malformed > 0) {
    std::cerr << "error: MalformedLine: " << n_malformed << " malformed line(s) with --strict\n";
    return 1;
  }
  return 0;
}

// --- sankey -----------------------------------------------------------------

struct SankeyArgs {
  std::string input, output = "-";
  bool strip_numbers = false;
};

int cmd_sankey(const SankeyArgs& args) {
  InputStream in(args.input);
  std::vector<std::string> pvs;
  evscore::for_each_event(
      in.get(), evscore::FilterList{}, [&](const evscore::LogEvent& ev) { pvs.push_back(ev.pv); },
      print_diagnostic);
  const evscore::TokenFlowGraph graph = evscore::build_flow_graph(pvs, args.strip_numbers);
  OutputStream out(args.output);
  out.get() << evscore::export_sankey(graph) << '\n';
  std::cerr << "pvs=" << pvs.size() << " skipped=" << graph.skipped << '\n';
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string input, filter, config, out, embeddings;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> embed_dim, window, negatives, embed_epochs, min_count;
  std::optional<double> embed_lr;
  std::optional<std::int64_t> hidden, latent;
  std::optional<std::size_t> segment_len, detector_epochs;
  std::optional<double> detector_lr, weight_decay;
  std::string start_time, end_time, tokenizer;
};

evscore::PipelineConfig resolve_config(const TrainArgs& args) {
  evscore::PipelineConfig config;
  bool seed_from_file = false;
  if (!args.config.empty()) {
    nlohmann::json j = nlohmann::json::parse(read_file(args.config), nullptr, true, true);
    config = evscore::config_from_json(j);
    seed_from_file = j.contains("seed");
  }
  if (args.seed)
    config.seed = *args.seed;
  else if (!seed_from_file)
    config.seed = random_seed();  // still printed, so the run can be reproduced
  if (args.embed_dim) config.embedding.dim = *args.embed_dim;
  if (args.window) config.embedding.window = *args.window;
  if (args.negatives) config.embedding.negatives = *args.negatives;
  if (args.embed_epochs) config.embedding.epochs = *args.embed_epochs;
  if (args.embed_lr) config.embedding.learning_rate = *args.embed_lr;
  if (args.min_count) config.embedding.min_count = *args.min_count;
  if (args.hidden) config.detector.hidden = static_cast<Eigen::Index>(*args.hidden);
  if (args.latent) config.detector.latent = static_cast<Eigen::Index>(*args.latent);
  if (args.segment_len) config.detector.segment_len = *args.segment_len;
  if (args.detector_epochs) config.detector.epochs = *args.detector_epochs;
  if (args.detector_lr) config.detector.learning_rate = *args.detector_lr;
  if (args.weight_decay) config.detector.weight_decay = *args.weight_decay;
  if (!args.start_time.empty()) config.start_time = evscore::parse_timestamp(args.start_time);
  if (!args.end_time.empty()) config.end_time = evscore::parse_timestamp(args.end_time);
  if (!args.tokenizer.empty()) config.tokenizer = evscore::tokenizer_mode_from_name(args.tokenizer);
  return config;
}

int cmd_train(const TrainArgs& args) {
  evscore::PipelineConfig config = resolve_config(args);
  const evscore::FilterList filter = load_filter_file(args.filter);

  std::cout << "config=" << evscore::config_to_json(config).dump() << '\n';
  std::cout << "seed=" << config.seed << '\n';

  InputStream in(args.input);
  std::vector<evscore::Diagnostic> diagnostics;
  std::vector<double> losses;
  const evscore::ModelBundle bundle =
      evscore::train_pipeline(in.get(), filter, config, &diagnostics, &losses);
  for (const auto& d : diagnostics) print_diagnostic(d);
  for (std::size_t i = 0; i < losses.size(); ++i)
    std::cout << "epoch=" << i + 1 << " loss=" << evscore::detail::format_double_pointed(losses[i])
              << '\n';

  std::ofstream out(args.out, std::ios::binary);
  if (!out) throw Error(Errc::stream_io, "cannot open '" + args.out + "' for writing");
  evscore::save_bundle(bundle, out);
  std::cout << "bundle=" << args.out << " vocab=" << bundle.embedding.vocab.size() << '\n';

  if (!args.embeddings.empty()) {
    std::ofstream emb(args.embeddings, std::ios::binary);
    if (!emb) throw Error(Errc::stream_io, "cannot open '" + args.embeddings + "' for writing");
    evscore::write_embedding_csv(bundle.embedding, emb);
  }
  return 0;
}

// --- score ------------------------------------------------------------------

struct ScoreArgs {
  std::string model, input, out = "-", latents, state;
  std::size_t top = 0;
};

struct TopEntry {
  double score;
  std::size_t line_no;
  std::string timestamp;
  std::string pv;
};

int cmd_score(const ScoreArgs& args) {
  std::ifstream model_in(args.model, std::ios::binary);
  if (!model_in) throw Error(Errc::stream_io, "cannot open '" + args.model + "'");
  const evscore::ModelBundle bundle = evscore::load_bundle(model_in);

  evscore::StreamState state = evscore::make_stream_state(bundle.detector);
  if (!args.state.empty()) {
    std::ifstream state_in(args.state, std::ios::binary);
    if (state_in) {
      state = evscore::load_stream_state(state_in);
      if (state.hidden.size() != bundle.detector.hidden_dim())
        throw Error(Errc::corrupt_bundle, "stream state does not match the model's hidden size");
    }
  }

  InputStream in(args.input);
  OutputStream out(args.out);
  std::ofstream latents;
  if (!args.latents.empty()) {
    latents.open(args.latents, std::ios::binary);
    if (!latents) throw Error(Errc::stream_io, "cannot open '" + args.latents + "' for writing");
    latents << evscore::latent_csv_header(bundle.detector.latent_dim()) << '\n';
  }
  out.get() << evscore::kScoreCsvHeader << '\n';

  // Worst entry on top so it can be evicted; ties prefer earlier events.
  auto worse = [](const TopEntry& a, const TopEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.line_no < b.line_no;
  };
  std::vector<TopEntry> top;

  std::size_t n_scored = 0;
  evscore::for_each_score(
      bundle, in.get(), state,
      [&](const evscore::ScoreRecord& rec, const evscore::LogEvent& ev) {
        out.get() << evscore::format_score_row(rec) << '\n';
        if (latents.is_open()) latents << evscore::format_latent_row(rec) << '\n';
        if (args.top > 0) {
          top.push_back({rec.score, ev.line_no, evscore::format_timestamp(rec.timestamp), rec.pv});
          std::push_heap(top.begin(), top.end(), worse);
          if (top.size() > args.top) {
            std::pop_heap(top.begin(), top.end(), worse);
            top.pop_back();
          }
        }
        ++n_scored;
      },
      nullptr);

  if (!args.state.empty()) {
    std::ofstream state_out(args.state, std::ios::binary);
    if (!state_out) throw Error(Errc::stream_io, "cannot open '" + args.state + "' for writing");
    evscore::save_stream_state(state, state_out);
  }

  if (args.top > 0) {
    std::sort(top.begin(), top.end(), [](const TopEntry& a, const TopEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.line_no < b.line_no;
    });
    for (std::size_t i = 0; i < top.size(); ++i)
      std::cout << "top" << i + 1 << " line_no=" << top[i].line_no
                << " score=" << evscore::detail::format_double(top[i].score) << " timestamp="
                << top[i].timestamp << " pv=" << top[i].pv << '\n';
  }
  std::cerr << "scored=" << n_scored << '\n';
  return 0;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out, labels;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_events;
  std::optional<double> anomaly_rate;
};

int cmd_synth(const SynthArgs& args) {
  evscore::CorpusSpec spec;
  if (!args.spec.empty()) {
    spec = evscore::corpus_spec_from_json(
        nlohmann::json::parse(read_file(args.spec), nullptr, true, true));
  } else {
    spec = evscore::default_corpus_spec();
  }
  if (args.seed) spec.seed = *args.seed;
  if (args.n_events) spec.n_events = *args.n_events;
  if (args.anomaly_rate) spec.anomaly_rate = *args.anomaly_rate;

  const evscore::LabeledCorpus corpus = evscore::generate_corpus(spec);

  std::ofstream log(args.out, std::ios::binary);
  if (!log) throw Error(Errc::stream_io, "cannot open '" + args.out + "' for writing");
  for (const std::string& line : corpus.lines) log << line << '\n';
  std::ofstream labels(args.labels, std::ios::binary);
  if (!labels) throw Error(Errc::stream_io, "cannot open '" + args.labels + "' for writing");
  labels << evscore::write_labels_csv(corpus);

  const auto n_anomalous =
      static_cast<std::size_t>(std::count(corpus.labels.begin(), corpus.labels.end(), true));
  std::cout << "seed=" << spec.seed << '\n';
  std::cout << "events=" << corpus.lines.size() << " anomalous=" << n_anomalous << '\n';
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string scores, labels;
};

int cmd_eval(const EvalArgs& args) {
  std::vector<double> scores;
  {
    std::istringstream in(read_file(args.scores));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (first) {
        first = false;
        if (line.rfind("timestamp,", 0) == 0) continue;  // header
      }
      const auto fields = evscore::detail::split(line, ',');
      if (fields.size() < 5)
        throw Error(Errc::invalid_config, "bad score row: '" + line + "'");
      double s = 0;
      if (!evscore::detail::parse_double(fields[4], s))
        throw Error(Errc::invalid_config, "bad score value: '" + std::string(fields[4]) + "'");
      scores.push_back(s);
    }
  }
  std::vector<bool> labels;
  {
    std::istringstream in(read_file(args.labels));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (first) {
        first = false;
        if (line.rfind("line_no,", 0) == 0) continue;
      }
      const auto fields = evscore::detail::split(line, ',');
      if (fields.size() != 2)
        throw Error(Errc::invalid_config, "bad label row: '" + line + "'");
      labels.push_back(fields[1] == "1");
    }
  }
  if (scores.size() != labels.size())
    throw Error(Errc::dimension_mismatch,
                "score rows (" + std::to_string(scores.size()) + ") != label rows (" +
                    std::to_string(labels.size()) + "); rows must align one-to-one");

  const evscore::EvalReport report = evscore::evaluate(scores, labels);
  using evscore::detail::format_double_pointed;
  if (report.auroc) std::cout << "auroc=" << format_double_pointed(*report.auroc) << '\n';
  if (report.median_ratio)
    std::cout << "median_ratio=" << format_double_pointed(*report.median_ratio) << '\n';
  if (report.p95_nominal)
    std::cout << "p95_nominal=" << format_double_pointed(*report.p95_nominal) << '\n';
  if (report.median_anomalous)
    std::cout << "median_anomalous=" << format_double_pointed(*report.median_anomalous) << '\n';
  if (!report.auroc) {
    std::cerr << "error: DegenerateLabels: both classes are required for auroc\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPICS event-log anomaly scoring toolkit"};
  app.require_subcommand(1);

  ParseArgs parse_args;
  auto* parse_cmd = app.add_subcommand("parse", "Parse, validate and filter an event log");
  parse_cmd->add_option("--input", parse_args.input, "event log file, or - for stdin")->required();
  parse_cmd->add_option("--filter", parse_args.filter, "PV filter list file");
  parse_cmd->add_option("--output", parse_args.output, "output path, or - for stdout")
      ->capture_default_str();
  parse_cmd->add_flag("--strict", parse_args.strict, "exit 1 if any line is malformed");

  SankeyArgs sankey_args;
  auto* sankey_cmd = app.add_subcommand("sankey", "Export channel-name token-flow JSON");
  sankey_cmd->add_option("--input", sankey_args.input, "event log file, or - for stdin")->required();
  sankey_cmd->add_option("--output", sankey_args.output, "output path, or - for stdout")
      ->capture_default_str();
  sankey_cmd->add_flag("--strip-numbers", sankey_args.strip_numbers,
                       "drop purely numeric tokens from paths");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train embeddings and the anomaly detector");
  train_cmd->add_option("--input", train_args.input, "event log file, or - for stdin")->required();
  train_cmd->add_option("--filter", train_args.filter, "PV filter list file");
  train_cmd->add_option("--config", train_args.config, "JSON config file");
  train_cmd->add_option("--out", train_args.out, "output bundle path")->required();
  train_cmd->add_option("--embeddings", train_args.embeddings, "also export embeddings CSV here");
  train_cmd->add_option("--seed", train_args.seed, "master seed (default: config file, else random)");
  train_cmd->add_option("--embed-dim", train_args.embed_dim, "embedding dimension (default 32)");
  train_cmd->add_option("--window", train_args.window, "skip-gram window (default 8)");
  train_cmd->add_option("--negatives", train_args.negatives, "negative samples per pair (default 5)");
  train_cmd->add_option("--embed-epochs", train_args.embed_epochs, "embedding epochs (default 5)");
  train_cmd->add_option("--embed-lr", train_args.embed_lr, "initial embedding lr (default 0.025)");
  train_cmd->add_option("--min-count", train_args.min_count, "vocabulary min count (default 1)");
  train_cmd->add_option("--hidden", train_args.hidden, "GRU hidden size (default 64)");
  train_cmd->add_option("--latent", train_args.latent, "latent dimension (default 16)");
  train_cmd->add_option("--segment-len", train_args.segment_len, "BPTT segment length (default 64)");
  train_cmd->add_option("--detector-epochs", train_args.detector_epochs,
                        "detector epochs (default 8)");
  train_cmd->add_option("--detector-lr", train_args.detector_lr, "detector lr (default 0.001)");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "L2 penalty (default 0)");
  train_cmd->add_option("--start", train_args.start_time,
                        "training range start, 'YYYY-MM-DD hh:mm:ss[.fff]'");
  train_cmd->add_option("--end", train_args.end_time, "training range end (inclusive)");
  train_cmd->add_option("--tokenizer", train_args.tokenizer,
                        "pv_and_description (default) or pv_only");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "Score an event stream with a trained bundle");
  score_cmd->add_option("--model", score_args.model, "trained bundle path")->required();
  score_cmd->add_option("--input", score_args.input, "event log file, or - for a live stdin stream")
      ->required();
  score_cmd->add_option("--out", score_args.out, "score CSV path, or - for stdout")
      ->capture_default_str();
  score_cmd->add_option("--latents", score_args.latents, "also write latent-vector CSV here");
  score_cmd->add_option("--state", score_args.state,
                        "stream-state file: loaded if present, saved on completion");
  score_cmd->add_option("--top", score_args.top, "print the K highest-scoring events")
      ->capture_default_str();

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth_cmd->add_option("--spec", synth_args.spec, "corpus spec JSON (default: built-in spec)");
  synth_cmd->add_option("--out", synth_args.out, "output event log path")->required();
  synth_cmd->add_option("--labels", synth_args.labels, "output labels CSV path")->required();
  synth_cmd->add_option("--seed", synth_args.seed, "override spec seed (default 42)");
  synth_cmd->add_option("--n-events", synth_args.n_events, "override event count (default 20000)");
  synth_cmd->add_option("--anomaly-rate", synth_args.anomaly_rate,
                        "override anomalous fraction (default 0.01)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate scores against labels");
  eval_cmd->add_option("--scores", eval_args.scores, "score CSV from 'score'")->required();
  eval_cmd->add_option("--labels", eval_args.labels, "labels CSV from 'synth'")->required();

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
    if (app.got_subcommand(parse_cmd)) return cmd_parse(parse_args);
    if (app.got_subcommand(sankey_cmd)) return cmd_sankey(sankey_args);
    if (app.got_subcommand(train_cmd)) return cmd_train(train_args);
    if (app.got_subcommand(score_cmd)) return cmd_score(score_args);
    if (app.got_subcommand(synth_cmd)) return cmd_synth(synth_args);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
