#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "amg/agents/mlp.hpp"

// Losses with their exact gradients. Each returns the loss and, when `grad` is
// given, adds its gradient with respect to the network parameters.
namespace amg::agents {

/// Q(s,a) + alpha (r + gamma max_a' Q(s',a') - Q(s,a))
inline double q_update(double q_old, double r, double max_next_q, double alpha, double gamma) {
  return q_old + alpha * (r + gamma * max_next_q - q_old);
}

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits) {
  const Scalar top = logits.maxCoeff();
  VectorX<Scalar> p = (logits.array() - top).exp().matrix();
  p /= p.sum();
  // keep every probability strictly positive even for extreme logits
  p = p.cwiseMax(Scalar(1e-300));
  return p / p.sum();
}

template <typename Scalar>
VectorX<Scalar> log_softmax(const VectorX<Scalar>& logits) {
  const Scalar top = logits.maxCoeff();
  const Scalar lse = top + std::log((logits.array() - top).exp().sum());
  return (logits.array() - lse).matrix();
}

template <typename Scalar>
struct QSample {
  VectorX<Scalar> state;
  int action = 0;
  Scalar target = 0;
};

/// Mean of 1/2 (Q(s,a) - y)^2 over the batch.
template <typename Scalar>
Scalar q_loss(const Mlp<Scalar>& net, std::span<const QSample<Scalar>> batch, VectorX<Scalar>* grad) {
  Scalar loss = 0;
  const Scalar n = static_cast<Scalar>(batch.size());
  typename Mlp<Scalar>::Tape tape;
  for (const auto& s : batch) {
    const auto q = net.forward(s.state, tape);
    const Scalar err = q[s.action] - s.target;
    loss += Scalar(0.5) * err * err / n;
    if (grad) {
      VectorX<Scalar> d = VectorX<Scalar>::Zero(q.size());
      d[s.action] = err / n;
      net.backward(tape, d, *grad);
    }
  }
  return loss;
}

template <typename Scalar>
struct PgSample {
  VectorX<Scalar> state;
  int action = 0;
  Scalar weight = 0;  // normalized return
};

/// -mean(weight * log pi(a|s)) - entropy_coef * mean(H(pi(.|s)))
template <typename Scalar>
Scalar pg_loss(const Mlp<Scalar>& net, std::span<const PgSample<Scalar>> batch, Scalar entropy_coef,
               VectorX<Scalar>* grad) {
  Scalar loss = 0;
  const Scalar n = static_cast<Scalar>(batch.size());
  typename Mlp<Scalar>::Tape tape;
  for (const auto& s : batch) {
    const auto logits = net.forward(s.state, tape);
    const auto logp = log_softmax(logits);
    const VectorX<Scalar> p = logp.array().exp().matrix();
    const Scalar entropy = -(p.array() * logp.array()).sum();
    loss += (-s.weight * logp[s.action] - entropy_coef * entropy) / n;
    if (grad) {
      // d(-log p_a)/dz = p - e_a ; dH/dz_j = -p_j (log p_j + H)
      VectorX<Scalar> d = -s.weight * (-p);
      d[s.action] += -s.weight;
      d += entropy_coef * (p.array() * (logp.array() + entropy)).matrix();
      net.backward(tape, d / n, *grad);
    }
  }
  return loss;
}

template <typename Scalar>
struct PpoSample {
  VectorX<Scalar> state;
  int action = 0;
  Scalar old_log_prob = 0;
  Scalar advantage = 0;
  Scalar return_target = 0;
};

struct PpoCoefficients {
  double clip = 0.2;
  double value = 0.5;
  double entropy = 0.01;
};

/// Network outputs are `actions` policy logits followed by one value estimate.
/// Loss = -mean(min(rho A, clip(rho) A)) + c_v mean(1/2 (V - G)^2) - c_e mean(H).
template <typename Scalar>
Scalar ppo_loss(const Mlp<Scalar>& net, std::span<const PpoSample<Scalar>> batch, int actions,
                const PpoCoefficients& c, VectorX<Scalar>* grad, std::vector<Scalar>* ratios = nullptr) {
  Scalar loss = 0;
  const Scalar n = static_cast<Scalar>(batch.size());
  const Scalar lo = Scalar(1 - c.clip), hi = Scalar(1 + c.clip);
  typename Mlp<Scalar>::Tape tape;
  for (const auto& s : batch) {
    const auto out = net.forward(s.state, tape);
    const VectorX<Scalar> logits = out.head(actions);
    const Scalar value = out[actions];
    const auto logp = log_softmax(logits);
    const VectorX<Scalar> p = logp.array().exp().matrix();
    const Scalar entropy = -(p.array() * logp.array()).sum();
    const Scalar rho = std::exp(logp[s.action] - s.old_log_prob);
    if (ratios) ratios->push_back(rho);
    const Scalar a = s.advantage;
    const Scalar unclipped = rho * a;
    const Scalar clipped = std::clamp(rho, lo, hi) * a;
    const bool clip_active = clipped < unclipped;
    const Scalar surrogate = clip_active ? clipped : unclipped;
    const Scalar verr = value - s.return_target;
    loss += (-surrogate + Scalar(c.value) * Scalar(0.5) * verr * verr - Scalar(c.entropy) * entropy) / n;
    if (grad) {
      VectorX<Scalar> d = VectorX<Scalar>::Zero(out.size());
      // the clipped branch is constant in theta
      if (!clip_active) {
        VectorX<Scalar> dlogp_a = -p;
        dlogp_a[s.action] += Scalar(1);
        d.head(actions) -= rho * a * dlogp_a;
      }
      d.head(actions) += Scalar(c.entropy) * (p.array() * (logp.array() + entropy)).matrix();
      d[actions] = Scalar(c.value) * verr;
      net.backward(tape, d / n, *grad);
    }
  }
  return loss;
}

}  // namespace amg::agents
