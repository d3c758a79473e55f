#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evscore/error.hpp"
#include "evscore/rng.hpp"

namespace evscore {

struct DetectorDims {
  Eigen::Index input = 0;   // D: event-vector dimension
  Eigen::Index hidden = 0;  // H
  Eigen::Index latent = 0;  // Z
};

// GRU + linear projection, deliberately without any bias terms: a constant
// output can then only be produced by trivialized weights, which the fixed
// nonzero hypersphere center penalizes. The parameter set is exactly these
// seven matrices.
struct DetectorParams {
  Eigen::MatrixXd W_z, W_r, W_h;  // H x D, input-to-hidden per gate
  Eigen::MatrixXd U_z, U_r, U_h;  // H x H, hidden-to-hidden per gate
  Eigen::MatrixXd W_out;          // Z x H, latent projection

  Eigen::Index input_dim() const { return W_z.cols(); }
  Eigen::Index hidden_dim() const { return W_z.rows(); }
  Eigen::Index latent_dim() const { return W_out.rows(); }

  std::array<Eigen::MatrixXd*, 7> matrices() {
    return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &W_out};
  }
  std::array<const Eigen::MatrixXd*, 7> matrices() const {
    return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &W_out};
  }
  static std::array<std::string_view, 7> names() {
    return {"W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "W_out"};
  }

  bool all_finite() const {
    for (const auto* m : matrices())
      if (!m->allFinite()) return false;
    return true;
  }
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per matrix, filled in a
// fixed order so a seed fully determines the parameters.
inline DetectorParams init_params(DetectorDims dims, std::uint64_t seed) {
  if (dims.input < 1 || dims.hidden < 1 || dims.latent < 1)
    throw Error(Errc::invalid_config, "detector dims must be >= 1");
  DetectorParams p;
  p.W_z.resize(dims.hidden, dims.input);
  p.W_r.resize(dims.hidden, dims.input);
  p.W_h.resize(dims.hidden, dims.input);
  p.U_z.resize(dims.hidden, dims.hidden);
  p.U_r.resize(dims.hidden, dims.hidden);
  p.U_h.resize(dims.hidden, dims.hidden);
  p.W_out.resize(dims.latent, dims.hidden);
  Rng rng(seed);
  for (auto* m : p.matrices()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m->cols()));
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = rng.uniform(-bound, bound);
  }
  return p;
}

namespace detail {

inline Eigen::ArrayXd sigmoid_array(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

}  // namespace detail

// One GRU step:
//   z = s(W_z x + U_z h_prev)
//   r = s(W_r x + U_r h_prev)
//   h~ = tanh(W_h x + U_h (r . h_prev))
//   h  = (1 - z) . h_prev + z . h~
// Zero input with zero state is a fixed point: every pre-activation is zero.
inline Eigen::VectorXd gru_step(const DetectorParams& p, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& h_prev) {
  const Eigen::ArrayXd z = detail::sigmoid_array((p.W_z * x + p.U_z * h_prev).array());
  const Eigen::ArrayXd r = detail::sigmoid_array((p.W_r * x + p.U_r * h_prev).array());
  const Eigen::ArrayXd h_cand =
      ((p.W_h * x + p.U_h * (r * h_prev.array()).matrix()).array()).tanh();
  return ((1.0 - z) * h_prev.array() + z * h_cand).matrix();
}

struct ForwardResult {
  std::vector<Eigen::VectorXd> latents;  // W_out * h_t for every timestep
  Eigen::VectorXd h_final;
};

inline ForwardResult forward(const DetectorParams& p, std::span<const Eigen::VectorXd> xs,
                             const Eigen::VectorXd& h0) {
  ForwardResult res;
  res.latents.reserve(xs.size());
  res.h_final = h0;
  for (const Eigen::VectorXd& x : xs) {
    res.h_final = gru_step(p, x, res.h_final);
    res.latents.emplace_back(p.W_out * res.h_final);
  }
  return res;
}

// Fixed hypersphere center in latent space. Once frozen the center never
// changes; every component satisfies |c_k| >= floor.
struct Hypersphere {
  Eigen::VectorXd center;
  bool frozen = false;
  double floor = 0.01;
};

// Center = mean of all per-timestep latents of a forward pass with the given
// (freshly initialized) parameters; components inside (-floor, +floor) are
// pushed out to sign(c_k) * floor, with exact zeros going to +floor.
inline Hypersphere compute_center(const DetectorParams& p,
                                  const std::vector<std::vector<Eigen::VectorXd>>& dataset,
                                  double c_floor = 0.01) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.latent_dim());
  std::uint64_t count = 0;
  for (const auto& sequence : dataset) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(p.hidden_dim());
    for (const Eigen::VectorXd& x : sequence) {
      h = gru_step(p, x, h);
      sum += p.W_out * h;
      ++count;
    }
  }
  if (count == 0) throw Error(Errc::empty_dataset, "no timesteps to average for the center");

  Hypersphere sphere;
  sphere.floor = c_floor;
  sphere.center = sum / static_cast<double>(count);
  for (Eigen::Index k = 0; k < sphere.center.size(); ++k) {
    double& v = sphere.center[k];
    if (std::abs(v) < c_floor) v = v < 0 ? -c_floor : c_floor;
  }
  sphere.frozen = true;
  return sphere;
}

// Mean squared distance to the center: (1/T) sum_t ||latent_t - c||^2.
// The per-event anomaly score is the square root of one term.
inline double svdd_loss(std::span<const Eigen::VectorXd> latents, const Eigen::VectorXd& c) {
  if (latents.empty()) return 0.0;
  double acc = 0;
  for (const Eigen::VectorXd& l : latents) acc += (l - c).squaredNorm();
  return acc / static_cast<double>(latents.size());
}

// Loss and analytic gradients of the SVDD objective over one segment,
// backpropagated through every GRU step (gradients stop at h0). With
// weight_decay > 0 the objective gains (weight_decay/2) * sum ||W||_F^2.
struct DetectorGrads {
  double loss = 0;
  DetectorParams grads;        // same shapes as the parameters
  Eigen::VectorXd h_final;     // carried state for truncated BPTT
};

inline DetectorGrads svdd_grad(const DetectorParams& p, std::span<const Eigen::VectorXd> xs,
                               const Eigen::VectorXd& h0, const Eigen::VectorXd& c,
                               double weight_decay = 0.0) {
  const Eigen::Index H = p.hidden_dim();
  const std::size_t T = xs.size();

  DetectorGrads out;
  {
    auto gs = out.grads.matrices();
    auto ws = p.matrices();
    for (std::size_t i = 0; i < 7; ++i) *gs[i] = Eigen::MatrixXd::Zero(ws[i]->rows(), ws[i]->cols());
  }

  if (T == 0) {
    out.h_final = h0;
    if (weight_decay > 0) {
      for (std::size_t i = 0; i < 7; ++i) {
        out.loss += 0.5 * weight_decay * p.matrices()[i]->squaredNorm();
        *out.grads.matrices()[i] = weight_decay * *p.matrices()[i];
      }
    }
    return out;
  }

  // Forward pass, caching everything the backward pass needs.
  std::vector<Eigen::ArrayXd> zs(T), rs(T), cands(T);
  std::vector<Eigen::VectorXd> hs(T + 1);
  hs[0] = h0;
  std::vector<Eigen::VectorXd> latents(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::VectorXd& h_prev = hs[t];
    zs[t] = detail::sigmoid_array((p.W_z * xs[t] + p.U_z * h_prev).array());
    rs[t] = detail::sigmoid_array((p.W_r * xs[t] + p.U_r * h_prev).array());
    cands[t] = ((p.W_h * xs[t] + p.U_h * (rs[t] * h_prev.array()).matrix()).array()).tanh();
    hs[t + 1] = ((1.0 - zs[t]) * h_prev.array() + zs[t] * cands[t]).matrix();
    latents[t] = p.W_out * hs[t + 1];
    out.loss += (latents[t] - c).squaredNorm();
  }
  out.loss /= static_cast<double>(T);
  out.h_final = hs[T];

  // Backward pass.
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(H);
  const double scale = 2.0 / static_cast<double>(T);
  for (std::size_t t = T; t-- > 0;) {
    const Eigen::VectorXd d_latent = scale * (latents[t] - c);
    out.grads.W_out.noalias() += d_latent * hs[t + 1].transpose();
    dh.noalias() += p.W_out.transpose() * d_latent;

    const Eigen::ArrayXd h_prev = hs[t].array();
    const Eigen::ArrayXd dz = dh.array() * (cands[t] - h_prev);
    const Eigen::ArrayXd d_cand = dh.array() * zs[t];
    const Eigen::ArrayXd da_h = d_cand * (1.0 - cands[t].square());

    const Eigen::VectorXd da_h_vec = da_h.matrix();
    out.grads.W_h.noalias() += da_h_vec * xs[t].transpose();
    out.grads.U_h.noalias() += da_h_vec * (rs[t] * h_prev).matrix().transpose();

    const Eigen::ArrayXd d_rh = (p.U_h.transpose() * da_h_vec).array();
    const Eigen::ArrayXd dr = d_rh * h_prev;
    const Eigen::ArrayXd da_z = dz * zs[t] * (1.0 - zs[t]);
    const Eigen::ArrayXd da_r = dr * rs[t] * (1.0 - rs[t]);

    const Eigen::VectorXd da_z_vec = da_z.matrix();
    const Eigen::VectorXd da_r_vec = da_r.matrix();
    out.grads.W_z.noalias() += da_z_vec * xs[t].transpose();
    out.grads.U_z.noalias() += da_z_vec * hs[t].transpose();
    out.grads.W_r.noalias() += da_r_vec * xs[t].transpose();
    out.grads.U_r.noalias() += da_r_vec * hs[t].transpose();

    Eigen::VectorXd dh_prev = (dh.array() * (1.0 - zs[t]) + d_rh * rs[t]).matrix();
    dh_prev.noalias() += p.U_z.transpose() * da_z_vec;
    dh_prev.noalias() += p.U_r.transpose() * da_r_vec;
    dh = std::move(dh_prev);
  }

  if (weight_decay > 0) {
    for (std::size_t i = 0; i < 7; ++i) {
      out.loss += 0.5 * weight_decay * p.matrices()[i]->squaredNorm();
      *out.grads.matrices()[i] += weight_decay * *p.matrices()[i];
    }
  }
  return out;
}

struct DetectorConfig {
  Eigen::Index hidden = 64;
  Eigen::Index latent = 16;
  std::size_t segment_len = 64;  // truncated-BPTT segment length
  std::size_t epochs = 8;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double center_floor = 0.01;
  std::uint64_t seed = 42;
};

struct TrainResult {
  DetectorParams params;
  Hypersphere sphere;
  std::vector<double> epoch_losses;
};

// SVDD training over a contiguous event-vector stream. The center is fixed
// once from the initial parameters; each epoch then walks the stream in
// segments of segment_len, carrying the hidden state across segment
// boundaries while cutting gradients there, and applies plain gradient
// descent with a fixed learning rate after every segment.
inline TrainResult train_detector(DetectorParams params, const std::vector<Eigen::VectorXd>& stream,
                                  const DetectorConfig& config) {
  if (stream.empty()) throw Error(Errc::empty_dataset, "empty training stream");
  if (config.segment_len == 0) throw Error(Errc::invalid_config, "segment_len must be >= 1");

  TrainResult result;
  result.sphere = compute_center(params, {stream}, config.center_floor);
  const Eigen::VectorXd& c = result.sphere.center;

  const std::size_t T = stream.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(params.hidden_dim());
    double weighted_loss = 0;
    for (std::size_t start = 0; start < T; start += config.segment_len) {
      const std::size_t len = std::min(config.segment_len, T - start);
      std::span<const Eigen::VectorXd> segment(stream.data() + start, len);
      DetectorGrads g = svdd_grad(params, segment, h, c, config.weight_decay);
      h = g.h_final;  // carried forward, detached
      weighted_loss += g.loss * static_cast<double>(len);
      for (std::size_t i = 0; i < 7; ++i)
        *params.matrices()[i] -= config.learning_rate * *g.grads.matrices()[i];
      if (!std::isfinite(g.loss) || !params.all_finite())
        throw Error(Errc::non_finite_update,
                    "training diverged in epoch " + std::to_string(epoch + 1) +
                        "; lower the learning rate");
    }
    result.epoch_losses.push_back(weighted_loss / static_cast<double>(T));
  }
  result.params = std::move(params);
  return result;
}

// Per-stream scoring state. hidden starts at zero and is only ever updated
// by score_step.
struct StreamState {
  Eigen::VectorXd hidden;
  std::uint64_t events_seen = 0;
};

inline StreamState make_stream_state(const DetectorParams& p) {
  return StreamState{Eigen::VectorXd::Zero(p.hidden_dim()), 0};
}

struct Scored {
  double score = 0;            // || latent - c ||_2
  Eigen::VectorXd latent;      // context-aware embedding of the event
};

// Scores one event and advances the stream state; only the state is needed,
// never the history, so iterated calls reproduce a batch forward() exactly.
inline Scored score_step(const DetectorParams& p, const Hypersphere& sphere, StreamState& state,
                         const Eigen::VectorXd& event_vec) {
  if (state.hidden.size() == 0) state.hidden = Eigen::VectorXd::Zero(p.hidden_dim());
  state.hidden = gru_step(p, event_vec, state.hidden);
  ++state.events_seen;
  Scored s;
  s.latent = p.W_out * state.hidden;
  s.score = (s.latent - sphere.center).norm();
  return s;
}

}  // namespace evscore
