// Acceptance suite. Runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion; the process exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "evscore/evscore.hpp"
#include "oracles.hpp"

using namespace evscore;

namespace {

int g_failures = 0;
std::chrono::steady_clock::time_point g_started;

void begin() { g_started = std::chrono::steady_clock::now(); }

void report(int number, const std::string& name, bool ok, const std::string& details) {
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - g_started).count();
  std::printf("%s criterion %d (%s): %s [%.1fs]\n", ok ? "PASS" : "FAIL", number, name.c_str(),
              details.c_str(), elapsed);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string corpus_text(const LabeledCorpus& corpus) {
  std::string text;
  for (const std::string& line : corpus.lines) {
    text += line;
    text += '\n';
  }
  return text;
}

// Shared artifacts of the full default pipeline (criteria 1 and 4-6).
struct PipelineRun {
  LabeledCorpus corpus;
  std::string text;
  ModelBundle bundle;
  std::vector<ScoreRecord> records;
  std::string bundle_bytes;
  std::string score_csv;
};

PipelineRun run_default_pipeline() {
  PipelineRun run;
  run.corpus = generate_corpus(default_corpus_spec());
  run.text = corpus_text(run.corpus);

  std::istringstream train_in(run.text);
  run.bundle = train_pipeline(train_in, FilterList{}, PipelineConfig{});

  std::istringstream score_in(run.text);
  run.records = score_events(run.bundle, score_in);

  std::ostringstream bundle_out(std::ios::binary);
  save_bundle(run.bundle, bundle_out);
  run.bundle_bytes = bundle_out.str();

  std::ostringstream csv;
  write_score_csv(run.records, csv);
  run.score_csv = csv.str();
  return run;
}

}  // namespace

int main() {
  // ---- criterion 1: separation on the default synthetic corpus ------------
  begin();
  PipelineRun run = run_default_pipeline();
  {
    std::vector<double> scores;
    scores.reserve(run.records.size());
    for (const ScoreRecord& r : run.records) scores.push_back(r.score);
    const EvalReport report_1 = evaluate(scores, run.corpus.labels);
    const bool ok = report_1.auroc && *report_1.auroc >= 0.9 && report_1.median_ratio &&
                    *report_1.median_ratio >= 10.0;
    char details[160];
    std::snprintf(details, sizeof(details),
                  "20000 events, 1%% bursts, seed 42: auroc=%.4f (>=0.9), median_ratio=%.1f (>=10)",
                  report_1.auroc.value_or(-1.0), report_1.median_ratio.value_or(-1.0));
    report(1, "separation", ok, details);
  }

  // ---- criterion 2: SVDD-through-GRU gradients vs finite differences ------
  begin();
  {
    Rng rng(1001);
    double worst = 0;
    const double h_step = 1e-5;
    for (int instance = 0; instance < 20; ++instance) {
      DetectorParams p = init_params({4, 6, 3}, rng.next_u64());
      std::vector<Eigen::VectorXd> xs;
      for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd x(4);
        for (Eigen::Index i = 0; i < 4; ++i) x[i] = rng.uniform(-1.0, 1.0);
        xs.push_back(x);
      }
      Eigen::VectorXd h0(6), c(3);
      for (Eigen::Index i = 0; i < 6; ++i) h0[i] = rng.uniform(-0.5, 0.5);
      for (Eigen::Index i = 0; i < 3; ++i) c[i] = rng.uniform(-1.0, 1.0);

      const DetectorGrads analytic = svdd_grad(p, xs, h0, c, 0.0);
      auto gm = analytic.grads.matrices();
      auto pm = p.matrices();
      for (std::size_t m = 0; m < 7; ++m) {
        Eigen::MatrixXd& weights = *pm[m];
        for (Eigen::Index r = 0; r < weights.rows(); ++r)
          for (Eigen::Index col = 0; col < weights.cols(); ++col) {
            const double saved = weights(r, col);
            weights(r, col) = saved + h_step;
            const double up = svdd_loss(forward(p, xs, h0).latents, c);
            weights(r, col) = saved - h_step;
            const double down = svdd_loss(forward(p, xs, h0).latents, c);
            weights(r, col) = saved;
            const double fd = (up - down) / (2.0 * h_step);
            worst = std::max(worst, oracles::relative_error((*gm[m])(r, col), fd));
          }
      }
    }
    char details[160];
    std::snprintf(details, sizeof(details),
                  "20 instances (D=4,H=6,Z=3,T=5), all 7 matrices: worst rel err %.2e (<=1e-4)",
                  worst);
    report(2, "svdd gradient", worst <= 1e-4, details);
  }

  // ---- criterion 3: skip-gram pair gradient ---------------------------------
  begin();
  {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
    const double zero_loss = sg_pair_grad(zero, zero, {zero}).loss;
    const bool zero_ok = std::fabs(zero_loss - 2.0 * std::log(2.0)) <= 1e-12;

    Rng rng(1002);
    double worst = 0;
    const double h = 1e-5;
    for (int instance = 0; instance < 100; ++instance) {
      const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.below(6));
      auto random_vec = [&] {
        Eigen::VectorXd v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.uniform(-1.5, 1.5);
        return v;
      };
      Eigen::VectorXd center = random_vec();
      Eigen::VectorXd context = random_vec();
      std::vector<Eigen::VectorXd> negatives;
      const std::size_t n_neg = 1 + rng.below(3);
      for (std::size_t k = 0; k < n_neg; ++k) negatives.push_back(random_vec());

      const SgPairGrad g = sg_pair_grad(center, context, negatives);
      auto probe = [&](Eigen::VectorXd& vec, Eigen::Index i, double analytic) {
        const double saved = vec[i];
        vec[i] = saved + h;
        const double up = sg_pair_grad(center, context, negatives).loss;
        vec[i] = saved - h;
        const double down = sg_pair_grad(center, context, negatives).loss;
        vec[i] = saved;
        worst = std::max(worst, oracles::relative_error(analytic, (up - down) / (2.0 * h)));
      };
      for (Eigen::Index i = 0; i < dim; ++i) {
        probe(center, i, g.d_center[i]);
        probe(context, i, g.d_context[i]);
        for (std::size_t k = 0; k < n_neg; ++k) probe(negatives[k], i, g.d_negatives[k][i]);
      }
    }
    char details[160];
    std::snprintf(details, sizeof(details),
                  "zero case |loss-2ln2|<=1e-12: %s; 100 instances worst rel err %.2e (<=1e-6)",
                  zero_ok ? "yes" : "NO", worst);
    report(3, "skip-gram gradient", zero_ok && worst <= 1e-6, details);
  }

  // ---- criterion 4: non-collapse after training -----------------------------
  begin();
  {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(run.bundle.detector.latent_dim());
    for (const ScoreRecord& r : run.records) mean += r.latent;
    mean /= static_cast<double>(run.records.size());
    double var = 0;
    for (const ScoreRecord& r : run.records) var += (r.latent - mean).squaredNorm();
    const double stddev = std::sqrt(var / static_cast<double>(run.records.size()));

    const double center_min = run.bundle.sphere.center.cwiseAbs().minCoeff();
    const bool ok = stddev > 1e-6 && center_min >= 0.01;
    char details[160];
    std::snprintf(details, sizeof(details),
                  "latent stddev %.3e (>1e-6), min |c_k| %.3f (>=0.01 floor)", stddev, center_min);
    report(4, "non-collapse", ok, details);
  }

  // ---- criterion 5: stream/batch/resume equivalence -------------------------
  begin();
  {
    // one event at a time through the same state
    StreamState state = make_stream_state(run.bundle.detector);
    std::vector<ScoreRecord> stepped;
    {
      std::istringstream lines(run.text);
      std::string line;
      while (std::getline(lines, line)) {
        std::istringstream one(line + "\n");
        const auto part = score_events(run.bundle, one, &state);
        stepped.insert(stepped.end(), part.begin(), part.end());
      }
    }
    std::ostringstream stepped_csv;
    write_score_csv(stepped, stepped_csv);

    // 50/50 split with state persisted and reloaded between the halves
    std::size_t cut = 0;
    for (int seen = 0; seen < 10000; ++seen) cut = run.text.find('\n', cut) + 1;
    StreamState first_state = make_stream_state(run.bundle.detector);
    std::istringstream first_in(run.text.substr(0, cut));
    auto records_split = score_events(run.bundle, first_in, &first_state);
    std::ostringstream state_bytes(std::ios::binary);
    save_stream_state(first_state, state_bytes);
    std::istringstream state_in(state_bytes.str());
    StreamState second_state = load_stream_state(state_in);
    std::istringstream second_in(run.text.substr(cut));
    const auto part2 = score_events(run.bundle, second_in, &second_state);
    records_split.insert(records_split.end(), part2.begin(), part2.end());
    std::ostringstream split_csv;
    write_score_csv(records_split, split_csv);

    const bool ok = stepped_csv.str() == run.score_csv && split_csv.str() == run.score_csv;
    report(5, "stream/batch/resume equivalence", ok,
           ok ? "one-at-a-time, batch, and 50/50-resume CSVs are byte-identical"
              : "CSV outputs differ");
  }

  // ---- criterion 6: end-to-end determinism ----------------------------------
  begin();
  {
    const PipelineRun second = run_default_pipeline();
    const bool ok = second.bundle_bytes == run.bundle_bytes && second.score_csv == run.score_csv &&
                    second.text == run.text;
    report(6, "determinism", ok,
           ok ? "two seed-42 runs: byte-identical corpus, bundle, and score CSV"
              : "outputs differ between identical runs");
  }

  // ---- criterion 7: tokenizer conformance ------------------------------------
  begin();
  {
    const bool example_ok =
        tokenize_event("SR07U:GDS1E:BC02", "") == TokenSequence{"SR07U", "GDS1E", "BC02"};

    oracles::NameGen names(2025);
    bool digit_free = true;
    bool round_trip = true;
    for (int i = 0; i < 10000; ++i) {
      const std::string pv = names.next();
      for (const std::string& token : tokenize_grammar(pv, true))
        for (char ch : token)
          if (ch >= '0' && ch <= '9') digit_free = false;
      if (reassemble_channel_name(parse_channel_name(pv)) != pv) round_trip = false;
    }
    char details[160];
    std::snprintf(details, sizeof(details),
                  "worked example %s; 10k names: stripped tokens digit-free %s, parse round-trip %s",
                  example_ok ? "ok" : "WRONG", digit_free ? "ok" : "NO", round_trip ? "ok" : "NO");
    report(7, "tokenizer conformance", example_ok && digit_free && round_trip, details);
  }

  // ---- criterion 8: flow-graph conservation -----------------------------------
  begin();
  {
    oracles::NameGen names(2026);
    Rng dup(2027);
    std::vector<std::string> pvs;
    while (pvs.size() < 1000) {
      const std::string pv = names.next();
      const std::size_t copies = 1 + dup.below(3);
      for (std::size_t k = 0; k < copies && pvs.size() < 1000; ++k) pvs.push_back(pv);
    }
    const TokenFlowGraph graph = build_flow_graph(pvs, true);

    // conservation on the exported document
    bool conserved = true;
    const auto doc = nlohmann::json::parse(export_sankey(graph));
    std::map<std::size_t, std::uint64_t> incoming;
    for (const auto& link : doc["links"])
      incoming[link["target_id"].get<std::size_t>()] += link["count"].get<std::uint64_t>();
    for (const auto& node : doc["nodes"])
      if (node["depth"].get<int>() > 0 &&
          incoming[node["id"].get<std::size_t>()] != node["count"].get<std::uint64_t>())
        conserved = false;

    // exact equality with an independent counter
    std::map<std::pair<int, std::string>, std::uint64_t> node_counts;
    std::map<std::tuple<int, std::string, std::string>, std::uint64_t> edge_counts;
    for (const std::string& pv : pvs) {
      const auto path = oracles::ref_grammar_tokens(pv, true);
      for (std::size_t i = 0; i < path.size(); ++i) {
        ++node_counts[{static_cast<int>(i), path[i]}];
        if (i + 1 < path.size()) ++edge_counts[{static_cast<int>(i), path[i], path[i + 1]}];
      }
    }
    bool counts_match = graph.nodes.size() == node_counts.size() &&
                        graph.edges.size() == edge_counts.size();
    if (counts_match)
      for (const auto& [key, count] : graph.nodes)
        if (node_counts[{key.depth, key.token}] != count) counts_match = false;
    if (counts_match)
      for (const auto& [key, count] : graph.edges)
        if (edge_counts[key] != count) counts_match = false;

    char details[160];
    std::snprintf(details, sizeof(details),
                  "1000 PVs, %zu nodes: incoming sums match counts %s, brute-force counts %s",
                  graph.nodes.size(), conserved ? "ok" : "NO", counts_match ? "ok" : "NO");
    report(8, "flow-graph conservation", conserved && counts_match, details);
  }

  // ---- criterion 9: AUROC oracle ----------------------------------------------
  begin();
  {
    Rng rng(2028);
    bool all_equal = true;
    for (int instance = 0; instance < 50; ++instance) {
      const std::size_t n = 10 + rng.below(191);
      std::vector<double> scores;
      std::vector<bool> labels;
      for (std::size_t i = 0; i < n; ++i) {
        scores.push_back(static_cast<double>(rng.below(10)) / 3.0);  // frequent exact ties
        labels.push_back(rng.below(3) == 0);
      }
      labels[0] = false;
      labels[n - 1] = true;
      const EvalReport r = evaluate(scores, labels);
      if (!r.auroc || *r.auroc != oracles::pairwise_auroc(scores, labels)) all_equal = false;
    }
    report(9, "auroc oracle", all_equal,
           all_equal ? "rank AUROC == pairwise AUROC exactly on 50 tied instances"
                     : "rank and pairwise AUROC diverge");
  }

  // ---- criterion 10: GRU zero fixed point ---------------------------------------
  begin();
  {
    Rng rng(2029);
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      const DetectorParams p = init_params({6, 9, 4}, rng.next_u64());
      Hypersphere sphere;
      sphere.center.resize(4);
      for (Eigen::Index k = 0; k < 4; ++k) sphere.center[k] = rng.uniform(-2.0, 2.0);
      sphere.frozen = true;

      const Eigen::VectorXd h = gru_step(p, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(9));
      if (!h.isZero(0.0)) ok = false;
      StreamState state = make_stream_state(p);
      const Scored s = score_step(p, sphere, state, Eigen::VectorXd::Zero(6));
      if (!state.hidden.isZero(0.0)) ok = false;
      if (s.score != sphere.center.norm()) ok = false;
    }
    report(10, "gru zero fixed point", ok,
           ok ? "100 random draws: zero in, zero state out, score exactly ||c||"
              : "fixed point violated");
  }

  std::printf("%s: %d/10 criteria passed\n", g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
