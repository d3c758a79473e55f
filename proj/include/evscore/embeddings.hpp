#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "evscore/channel_grammar.hpp"
#include "evscore/detail/text.hpp"
#include "evscore/error.hpp"
#include "evscore/rng.hpp"

namespace evscore {

// Token vocabulary with dense indices 0..V-1 assigned in order of first
// appearance in the corpus; only tokens seen at least min_count times are
// retained.
struct Vocab {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> tokens;      // id -> token
  std::vector<std::uint64_t> freq;      // id -> corpus count
  std::size_t min_count = 1;

  std::size_t size() const { return tokens.size(); }

  std::optional<std::size_t> lookup(const std::string& token) const {
    auto it = index.find(token);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

inline Vocab build_vocab(const std::vector<TokenSequence>& sentences, std::size_t min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::vector<std::string> first_seen;
  for (const TokenSequence& sentence : sentences) {
    for (const std::string& token : sentence) {
      if (++counts[token] == 1) first_seen.push_back(token);
    }
  }
  Vocab vocab;
  vocab.min_count = min_count;
  for (const std::string& token : first_seen) {
    const std::uint64_t n = counts[token];
    if (n < min_count) continue;
    vocab.index.emplace(token, vocab.tokens.size());
    vocab.tokens.push_back(token);
    vocab.freq.push_back(n);
  }
  if (vocab.tokens.empty()) throw Error(Errc::empty_vocab, "no token reached min_count");
  return vocab;
}

struct SkipgramConfig {
  std::size_t dim = 32;
  std::size_t window = 8;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 10% over all updates
  std::size_t min_count = 1;
  std::uint64_t seed = 42;
};

// Skip-gram model with negative sampling. input_vectors holds the v(t) used
// downstream; output_vectors holds the context-side weights. Negatives are
// drawn from a unigram distribution raised to the 0.75 power.
struct EmbeddingModel {
  Vocab vocab;
  Eigen::MatrixXd input_vectors;   // V x D
  Eigen::MatrixXd output_vectors;  // V x D
  std::size_t dim = 0;
  std::vector<double> unigram_cdf;  // cumulative freq^0.75 weights, by vocab index

  std::size_t sample_negative(Rng& rng) const {
    const double u = rng.uniform() * unigram_cdf.back();
    auto it = std::upper_bound(unigram_cdf.begin(), unigram_cdf.end(), u);
    if (it == unigram_cdf.end()) --it;
    return static_cast<std::size_t>(it - unigram_cdf.begin());
  }
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without catastrophic cancellation at large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline std::vector<double> unigram_cdf_pow75(const std::vector<std::uint64_t>& freq) {
  std::vector<double> cdf(freq.size());
  double acc = 0;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    acc += std::pow(static_cast<double>(freq[i]), 0.75);
    cdf[i] = acc;
  }
  return cdf;
}

}  // namespace detail

// Loss and exact analytic gradients of one negative-sampling pair:
//   loss = -log s(u_ctx . v_c) - sum_k log s(-u_k . v_c)
struct SgPairGrad {
  double loss = 0;
  Eigen::VectorXd d_center;
  Eigen::VectorXd d_context;
  std::vector<Eigen::VectorXd> d_negatives;
};

inline SgPairGrad sg_pair_grad(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                               const std::vector<Eigen::VectorXd>& negatives) {
  if (context.size() != center.size())
    throw Error(Errc::dimension_mismatch, "context dimension != center dimension");
  for (const auto& n : negatives)
    if (n.size() != center.size())
      throw Error(Errc::dimension_mismatch, "negative dimension != center dimension");

  SgPairGrad g;
  g.d_center = Eigen::VectorXd::Zero(center.size());

  const double pos_dot = context.dot(center);
  g.loss = -detail::log_sigmoid(pos_dot);
  // d/dx of -log s(x) is s(x) - 1
  const double pos_coeff = detail::sigmoid(pos_dot) - 1.0;
  g.d_context = pos_coeff * center;
  g.d_center += pos_coeff * context;

  g.d_negatives.reserve(negatives.size());
  for (const auto& u : negatives) {
    const double dot = u.dot(center);
    g.loss -= detail::log_sigmoid(-dot);
    const double coeff = detail::sigmoid(dot);  // d/dx of -log s(-x)
    g.d_negatives.push_back(coeff * center);
    g.d_center += coeff * u;
  }
  return g;
}

// Trains skip-gram with negative sampling over the sentences. For every
// (center, context) pair within `window`, one SGD step is applied to the
// center input vector and the context/negative output vectors. Fully
// deterministic for a fixed config: single-threaded, with all sampling
// driven by the seeded generator.
inline EmbeddingModel train_skipgram(const std::vector<TokenSequence>& sentences,
                                     const SkipgramConfig& config) {
  if (config.dim < 2) throw Error(Errc::invalid_config, "embedding dim must be >= 2");
  if (config.negatives < 1) throw Error(Errc::invalid_config, "negatives must be >= 1");

  EmbeddingModel model;
  model.vocab = build_vocab(sentences, config.min_count);
  model.dim = config.dim;
  model.unigram_cdf = detail::unigram_cdf_pow75(model.vocab.freq);

  const auto V = static_cast<Eigen::Index>(model.vocab.size());
  const auto D = static_cast<Eigen::Index>(config.dim);
  Rng rng(config.seed);

  model.input_vectors.resize(V, D);
  const double init_bound = 0.5 / static_cast<double>(config.dim);
  for (Eigen::Index r = 0; r < V; ++r)
    for (Eigen::Index c = 0; c < D; ++c) model.input_vectors(r, c) = rng.uniform(-init_bound, init_bound);
  model.output_vectors = Eigen::MatrixXd::Zero(V, D);

  // Sentences reduced to in-vocabulary indices; window positions refer to
  // the reduced sentence.
  std::vector<std::vector<std::size_t>> encoded;
  encoded.reserve(sentences.size());
  std::uint64_t pairs_per_epoch = 0;
  for (const TokenSequence& sentence : sentences) {
    std::vector<std::size_t> ids;
    ids.reserve(sentence.size());
    for (const std::string& token : sentence)
      if (auto id = model.vocab.lookup(token)) ids.push_back(*id);
    const std::size_t n = ids.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i > config.window ? i - config.window : 0;
      const std::size_t hi = std::min(n, i + config.window + 1);
      pairs_per_epoch += (hi - lo) - 1;
    }
    encoded.push_back(std::move(ids));
  }

  const std::uint64_t total_updates = pairs_per_epoch * config.epochs;
  if (total_updates == 0) return model;  // no context anywhere; vectors stay at init

  std::uint64_t update = 0;
  std::vector<Eigen::VectorXd> negative_rows(config.negatives);
  std::vector<std::size_t> negative_ids(config.negatives);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& ids : encoded) {
      const std::size_t n = ids.size();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > config.window ? i - config.window : 0;
        const std::size_t hi = std::min(n, i + config.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          const std::size_t center = ids[i];
          const std::size_t context = ids[j];
          const double lr = config.learning_rate *
                            (1.0 - 0.9 * static_cast<double>(update) / static_cast<double>(total_updates));
          ++update;

          for (std::size_t k = 0; k < config.negatives; ++k) {
            negative_ids[k] = model.sample_negative(rng);
            negative_rows[k] = model.output_vectors.row(static_cast<Eigen::Index>(negative_ids[k])).transpose();
          }
          const Eigen::VectorXd center_vec = model.input_vectors.row(static_cast<Eigen::Index>(center)).transpose();
          const Eigen::VectorXd context_vec = model.output_vectors.row(static_cast<Eigen::Index>(context)).transpose();
          SgPairGrad grad = sg_pair_grad(center_vec, context_vec, negative_rows);

          model.input_vectors.row(static_cast<Eigen::Index>(center)) -= lr * grad.d_center.transpose();
          model.output_vectors.row(static_cast<Eigen::Index>(context)) -= lr * grad.d_context.transpose();
          for (std::size_t k = 0; k < config.negatives; ++k)
            model.output_vectors.row(static_cast<Eigen::Index>(negative_ids[k])) -=
                lr * grad.d_negatives[k].transpose();

          bool finite = model.input_vectors.row(static_cast<Eigen::Index>(center)).allFinite() &&
                        model.output_vectors.row(static_cast<Eigen::Index>(context)).allFinite();
          for (std::size_t k = 0; finite && k < config.negatives; ++k)
            finite = model.output_vectors.row(static_cast<Eigen::Index>(negative_ids[k])).allFinite();
          if (!finite)
            throw Error(Errc::non_finite_update,
                        "weights diverged at update " + std::to_string(update) +
                            "; lower the learning rate");
        }
      }
    }
  }
  return model;
}

// Event vector E = sum of input vectors of the in-vocabulary tokens.
// Out-of-vocabulary tokens contribute nothing; n_known reports coverage.
struct EventVector {
  Eigen::VectorXd values;
  std::size_t n_known = 0;
};

inline EventVector embed_event(const TokenSequence& tokens, const EmbeddingModel& model) {
  EventVector ev;
  ev.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dim));
  for (const std::string& token : tokens) {
    if (auto id = model.vocab.lookup(token)) {
      ev.values += model.input_vectors.row(static_cast<Eigen::Index>(*id)).transpose();
      ++ev.n_known;
    }
  }
  return ev;
}

// CSV export of the input vectors, one row per token in vocab-index order:
// token,dim_0..dim_{D-1}. Floats use shortest round-trip formatting.
inline void write_embedding_csv(const EmbeddingModel& model, std::ostream& out) {
  out << "token";
  for (std::size_t d = 0; d < model.dim; ++d) out << ",dim_" << d;
  out << '\n';
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    out << model.vocab.tokens[i];
    for (std::size_t d = 0; d < model.dim; ++d)
      out << ',' << detail::format_double(model.input_vectors(static_cast<Eigen::Index>(i),
                                                              static_cast<Eigen::Index>(d)));
    out << '\n';
  }
}

}  // namespace evscore
