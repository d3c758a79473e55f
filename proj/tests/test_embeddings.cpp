#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "evscore/embeddings.hpp"
#include "oracles.hpp"

using namespace evscore;
using Catch::Approx;

namespace {

std::vector<TokenSequence> dialect_corpus(std::uint64_t seed, int sentences_per_dialect = 80) {
  Rng rng(seed);
  const std::vector<std::string> d1{"A", "B", "C"};
  const std::vector<std::string> d2{"X", "Y", "Z"};
  std::vector<TokenSequence> corpus;
  for (int i = 0; i < sentences_per_dialect; ++i) {
    for (const auto& dialect : {d1, d2}) {
      TokenSequence s;
      const std::size_t n = 3 + rng.below(3);
      for (std::size_t k = 0; k < n; ++k) s.push_back(dialect[rng.below(dialect.size())]);
      corpus.push_back(s);
    }
  }
  return corpus;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("build_vocab counts, thresholds, and orders by first appearance") {
  const std::vector<TokenSequence> sentences{{"A", "B"}, {"A"}};
  const Vocab v1 = build_vocab(sentences, 1);
  CHECK(v1.tokens == std::vector<std::string>{"A", "B"});
  CHECK(v1.lookup("A") == 0);
  CHECK(v1.lookup("B") == 1);
  CHECK(v1.freq == std::vector<std::uint64_t>{2, 1});

  const Vocab v2 = build_vocab(sentences, 2);
  CHECK(v2.tokens == std::vector<std::string>{"A"});
  CHECK_FALSE(v2.lookup("B").has_value());

  try {
    build_vocab({{"A"}}, 5);
    FAIL("expected EmptyVocab");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_vocab);
  }
}

TEST_CASE("build_vocab matches an independent hash-count oracle") {
  Rng rng(55);
  std::vector<TokenSequence> sentences;
  for (int i = 0; i < 1000; ++i) {
    TokenSequence s;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t k = 0; k < n; ++k) s.push_back("tok" + std::to_string(rng.below(60)));
    sentences.push_back(s);
  }
  std::unordered_map<std::string, std::uint64_t> reference;
  for (const auto& s : sentences)
    for (const auto& t : s) ++reference[t];

  const std::size_t min_count = 12;
  const Vocab vocab = build_vocab(sentences, min_count);
  std::size_t expected_retained = 0;
  for (const auto& [token, count] : reference)
    if (count >= min_count) ++expected_retained;
  CHECK(vocab.size() == expected_retained);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    CHECK(reference.at(vocab.tokens[i]) == vocab.freq[i]);
    CHECK(vocab.freq[i] >= min_count);
  }
}

TEST_CASE("sg_pair_grad closed-form values at zero vectors") {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  const SgPairGrad g1 = sg_pair_grad(zero, zero, {zero});
  CHECK(g1.loss == Approx(2.0 * std::log(2.0)).margin(1e-12));

  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(4);
  e1[0] = 1.0;
  e2[1] = 1.0;
  const SgPairGrad g2 = sg_pair_grad(e1, e2, {});
  CHECK(g2.loss == Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("sg_pair_grad rejects mismatched dimensions") {
  const Eigen::VectorXd a = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(5);
  try {
    sg_pair_grad(a, b, {});
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::dimension_mismatch);
  }
  CHECK_THROWS_AS(sg_pair_grad(a, a, {b}), Error);
}

TEST_CASE("sg_pair_grad matches central finite differences") {
  Rng rng(303);
  const double h = 1e-5;
  double worst = 0;
  for (int instance = 0; instance < 100; ++instance) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.below(6));
    const std::size_t n_neg = rng.below(4);
    auto random_vec = [&] {
      Eigen::VectorXd v(dim);
      for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.uniform(-1.5, 1.5);
      return v;
    };
    Eigen::VectorXd center = random_vec();
    Eigen::VectorXd context = random_vec();
    std::vector<Eigen::VectorXd> negatives;
    for (std::size_t k = 0; k < n_neg; ++k) negatives.push_back(random_vec());

    const SgPairGrad g = sg_pair_grad(center, context, negatives);
    auto loss_at = [&] { return sg_pair_grad(center, context, negatives).loss; };

    for (Eigen::Index i = 0; i < dim; ++i) {
      const double fd = oracles::central_difference(
          [&](double x) {
            const double saved = center[i];
            center[i] = x;
            const double l = loss_at();
            center[i] = saved;
            return l;
          },
          center[i], h);
      worst = std::max(worst, oracles::relative_error(g.d_center[i], fd));

      const double fd_ctx = oracles::central_difference(
          [&](double x) {
            const double saved = context[i];
            context[i] = x;
            const double l = loss_at();
            context[i] = saved;
            return l;
          },
          context[i], h);
      worst = std::max(worst, oracles::relative_error(g.d_context[i], fd_ctx));

      for (std::size_t k = 0; k < n_neg; ++k) {
        const double fd_neg = oracles::central_difference(
            [&](double x) {
              const double saved = negatives[k][i];
              negatives[k][i] = x;
              const double l = loss_at();
              negatives[k][i] = saved;
              return l;
            },
            negatives[k][i], h);
        worst = std::max(worst, oracles::relative_error(g.d_negatives[k][i], fd_neg));
      }
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto corpus = dialect_corpus(1);
  SkipgramConfig config;
  config.dim = 8;
  config.epochs = 3;
  config.seed = 99;
  const EmbeddingModel m1 = train_skipgram(corpus, config);
  const EmbeddingModel m2 = train_skipgram(corpus, config);
  CHECK(m1.input_vectors == m2.input_vectors);
  CHECK(m1.output_vectors == m2.output_vectors);
  CHECK(m1.vocab.tokens == m2.vocab.tokens);
}

TEST_CASE("a single-token corpus produces no updates") {
  SkipgramConfig config;
  config.dim = 4;
  config.seed = 5;
  const EmbeddingModel m = train_skipgram({{"A"}}, config);
  CHECK(m.output_vectors.isZero(0.0));  // context weights start at zero and never move
  const double bound = 0.5 / static_cast<double>(config.dim);
  CHECK(m.input_vectors.cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("co-occurring dialects cluster: intra-group cosine beats inter-group") {
  SkipgramConfig config;
  config.dim = 8;
  config.epochs = 20;
  config.window = 8;
  config.seed = 7;
  const EmbeddingModel m = train_skipgram(dialect_corpus(2), config);

  const std::vector<std::string> g1{"A", "B", "C"};
  const std::vector<std::string> g2{"X", "Y", "Z"};
  auto vec = [&](const std::string& t) {
    return Eigen::VectorXd(m.input_vectors.row(static_cast<Eigen::Index>(*m.vocab.lookup(t))));
  };
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (const auto& group : {g1, g2})
    for (std::size_t i = 0; i < group.size(); ++i)
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        intra += cosine(vec(group[i]), vec(group[j]));
        ++n_intra;
      }
  for (const auto& a : g1)
    for (const auto& b : g2) {
      inter += cosine(vec(a), vec(b));
      ++n_inter;
    }
  CHECK(intra / n_intra > inter / n_inter);
}

TEST_CASE("an absurd learning rate reports NonFiniteUpdate") {
  SkipgramConfig config;
  config.dim = 4;
  config.epochs = 50;
  config.learning_rate = 1e300;
  config.seed = 11;
  try {
    train_skipgram(dialect_corpus(3, 10), config);
    FAIL("expected NonFiniteUpdate");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_finite_update);
  }
}

TEST_CASE("embed_event sums known-token vectors and skips OOV") {
  const auto corpus = dialect_corpus(4);
  SkipgramConfig config;
  config.dim = 8;
  config.epochs = 2;
  config.seed = 21;
  const EmbeddingModel m = train_skipgram(corpus, config);

  auto row = [&](const std::string& t) {
    return Eigen::VectorXd(m.input_vectors.row(static_cast<Eigen::Index>(*m.vocab.lookup(t))));
  };
  const EventVector ev = embed_event({"A", "B", "C"}, m);
  CHECK(ev.n_known == 3);
  CHECK((ev.values - (row("A") + row("B") + row("C"))).norm() == 0.0);

  const EventVector single = embed_event({"X"}, m);
  CHECK(single.n_known == 1);
  CHECK(single.values == row("X"));

  const EventVector with_oov = embed_event({"A", "NEVERSEEN"}, m);
  CHECK(with_oov.n_known == 1);
  CHECK(with_oov.values == row("A"));

  const EventVector all_oov = embed_event({"NOPE", "NADA"}, m);
  CHECK(all_oov.n_known == 0);
  CHECK(all_oov.values.isZero(0.0));
}

TEST_CASE("embed_event is permutation-invariant and additive") {
  const auto corpus = dialect_corpus(5);
  SkipgramConfig config;
  config.dim = 8;
  config.epochs = 2;
  config.seed = 23;
  const EmbeddingModel m = train_skipgram(corpus, config);

  const TokenSequence s1{"A", "B", "X"};
  const TokenSequence s2{"X", "A", "B"};
  CHECK((embed_event(s1, m).values - embed_event(s2, m).values).norm() < 1e-12);

  const TokenSequence t1{"A", "Y"};
  const TokenSequence t2{"C", "Z", "B"};
  TokenSequence joined = t1;
  joined.insert(joined.end(), t2.begin(), t2.end());
  const Eigen::VectorXd lhs = embed_event(joined, m).values;
  const Eigen::VectorXd rhs = embed_event(t1, m).values + embed_event(t2, m).values;
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("embedding CSV export has the documented shape") {
  SkipgramConfig config;
  config.dim = 4;
  config.epochs = 1;
  config.seed = 31;
  const EmbeddingModel m = train_skipgram({{"A", "B"}, {"B", "C"}}, config);
  std::ostringstream out;
  write_embedding_csv(m, out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "token,dim_0,dim_1,dim_2,dim_3");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == m.vocab.size());
  CHECK(rows[0].rfind("A,", 0) == 0);
  CHECK(rows[1].rfind("B,", 0) == 0);
  CHECK(rows[2].rfind("C,", 0) == 0);
}
