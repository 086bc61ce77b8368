#pragma once

#include <functional>
#include <vector>

#include "leo/autograd.hpp"

namespace leo {

enum class ScheduleKind { kLinear };

/// Forward-process tables. Computed and stored in double; ᾱ_t is the exact
/// running product of (1-β_s).
struct DiffusionSchedule {
    int steps = 0;                   // T
    std::vector<double> betas;       // β_1..β_T   (index t-1)
    std::vector<double> alphas;      // 1-β
    std::vector<double> alpha_bars;  // ᾱ_1..ᾱ_T

    double beta(int t) const { return betas[static_cast<size_t>(t - 1)]; }
    double alpha(int t) const { return alphas[static_cast<size_t>(t - 1)]; }
    double alpha_bar(int t) const { return alpha_bars[static_cast<size_t>(t - 1)]; }
};

DiffusionSchedule make_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02,
                                ScheduleKind kind = ScheduleKind::kLinear);

/// Epsilon-prediction model as used by the reverse process. Conditioning is
/// bound into the concrete model object.
struct EpsModel {
    virtual ~EpsModel() = default;
    virtual Tensor eps(const Tensor& x_t, int t) const = 0;
};

/// √ᾱ_t·x0 + √(1-ᾱ_t)·eps, elementwise; 1 <= t <= T.
template <class T>
TensorT<T> q_sample(const TensorT<T>& x0, int t, const TensorT<T>& eps,
                    const DiffusionSchedule& sched);

/// One ancestral reverse step given a precomputed ε̂. Adds σ_t·z with
/// σ_t² = β_t for t > 1; the final step (t = 1) is deterministic.
Tensor p_step_from_eps(const Tensor& x_t, const Tensor& eps_hat, int t,
                       const DiffusionSchedule& sched, Rng& rng);

Tensor p_step(const EpsModel& net, const Tensor& x_t, int t, const DiffusionSchedule& sched,
              Rng& rng);

/// Deterministic DDIM jump from step t to step t_prev (0 means x0).
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev,
                 const DiffusionSchedule& sched);

/// Full reverse chain from x_T ~ N(0,I). ddim_stride 0 runs the ancestral
/// sampler; a stride >= 1 runs the deterministic DDIM sampler visiting every
/// stride-th step.
Tensor p_sample_loop(const EpsModel& net, const std::vector<int>& shape,
                     const DiffusionSchedule& sched, Rng& rng, int ddim_stride = 0);

/// Tape-aware predictor: returns ε̂ as a graph node.
template <class T>
using EpsFnT = std::function<typename Tape<T>::Var(Tape<T>&, typename Tape<T>::Var, int)>;

/// MSE(ε, net(q_sample(x0,t,ε), t)) as a differentiable node.
template <class T>
typename Tape<T>::Var training_loss_on(Tape<T>& tape, const EpsFnT<T>& net, const TensorT<T>& x0,
                                       int t, const TensorT<T>& eps,
                                       const DiffusionSchedule& sched);

/// Loss value only (no gradients).
template <class T>
double training_loss(const EpsFnT<T>& net, const TensorT<T>& x0, int t, const TensorT<T>& eps,
                     const DiffusionSchedule& sched);

}  // namespace leo
