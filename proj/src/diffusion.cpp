#include "leo/diffusion.hpp"

#include <cmath>

namespace leo {

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind) {
    if (steps < 1) throw ParamError("make_schedule: steps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ParamError("make_schedule: need 0 < beta_start <= beta_end < 1");
    if (kind != ScheduleKind::kLinear) throw ParamError("make_schedule: unknown kind");
    DiffusionSchedule s;
    s.steps = steps;
    s.betas.resize(steps);
    s.alphas.resize(steps);
    s.alpha_bars.resize(steps);
    double bar = 1.0;
    for (int t = 0; t < steps; ++t) {
        double beta = steps == 1
                          ? beta_start
                          : beta_start + (beta_end - beta_start) * t / (steps - 1);
        s.betas[t] = beta;
        s.alphas[t] = 1.0 - beta;
        bar *= 1.0 - beta;
        s.alpha_bars[t] = bar;
    }
    return s;
}

namespace {

void check_t(int t, const DiffusionSchedule& sched, const char* what) {
    if (t < 1 || t > sched.steps) throw ParamError(std::string(what) + ": t out of range");
}

}  // namespace

template <class T>
TensorT<T> q_sample(const TensorT<T>& x0, int t, const TensorT<T>& eps,
                    const DiffusionSchedule& sched) {
    check_t(t, sched, "q_sample");
    if (!x0.same_shape(eps)) throw ParamError("q_sample: eps shape mismatch");
    T a = static_cast<T>(std::sqrt(sched.alpha_bar(t)));
    T b = static_cast<T>(std::sqrt(1.0 - sched.alpha_bar(t)));
    TensorT<T> out(x0.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

template Tensor q_sample<float>(const Tensor&, int, const Tensor&, const DiffusionSchedule&);
template TensorD q_sample<double>(const TensorD&, int, const TensorD&, const DiffusionSchedule&);

Tensor p_step_from_eps(const Tensor& x_t, const Tensor& eps_hat, int t,
                       const DiffusionSchedule& sched, Rng& rng) {
    check_t(t, sched, "p_step");
    if (!x_t.same_shape(eps_hat)) throw ParamError("p_step: eps shape mismatch");
    double beta = sched.beta(t);
    float k = static_cast<float>(beta / std::sqrt(1.0 - sched.alpha_bar(t)));
    float inv_sqrt_alpha = static_cast<float>(1.0 / std::sqrt(1.0 - beta));
    float sigma = static_cast<float>(std::sqrt(beta));
    Tensor out(x_t.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = inv_sqrt_alpha * (x_t[i] - k * eps_hat[i]);
    if (t > 1)
        for (long i = 0; i < out.numel(); ++i)
            out[i] += sigma * static_cast<float>(rng.gaussian());
    if (!out.all_finite()) throw NumericError("p_step: non-finite state at t=" + std::to_string(t));
    return out;
}

Tensor p_step(const EpsModel& net, const Tensor& x_t, int t, const DiffusionSchedule& sched,
              Rng& rng) {
    return p_step_from_eps(x_t, net.eps(x_t, t), t, sched, rng);
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev,
                 const DiffusionSchedule& sched) {
    check_t(t, sched, "ddim_step");
    if (t_prev < 0 || t_prev >= t) throw ParamError("ddim_step: need 0 <= t_prev < t");
    double ab_t = sched.alpha_bar(t);
    double ab_p = t_prev == 0 ? 1.0 : sched.alpha_bar(t_prev);
    float c0 = static_cast<float>(1.0 / std::sqrt(ab_t));
    float c1 = static_cast<float>(std::sqrt(1.0 - ab_t) / std::sqrt(ab_t));
    float a = static_cast<float>(std::sqrt(ab_p));
    float b = static_cast<float>(std::sqrt(1.0 - ab_p));
    Tensor out(x_t.shape);
    for (long i = 0; i < out.numel(); ++i) {
        float x0 = c0 * x_t[i] - c1 * eps_hat[i];
        out[i] = a * x0 + b * eps_hat[i];
    }
    return out;
}

Tensor p_sample_loop(const EpsModel& net, const std::vector<int>& shape,
                     const DiffusionSchedule& sched, Rng& rng, int ddim_stride) {
    Tensor x(shape);
    for (long i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.gaussian());
    if (ddim_stride <= 0) {
        for (int t = sched.steps; t >= 1; --t) x = p_step(net, x, t, sched, rng);
        return x;
    }
    std::vector<int> ts;
    for (int t = sched.steps; t >= 1; t -= ddim_stride) ts.push_back(t);
    for (size_t k = 0; k < ts.size(); ++k) {
        int t = ts[k];
        int t_prev = (k + 1 < ts.size()) ? ts[k + 1] : 0;
        x = ddim_step(x, net.eps(x, t), t, t_prev, sched);
    }
    if (!x.all_finite()) throw NumericError("p_sample_loop: non-finite sample");
    return x;
}

template <class T>
typename Tape<T>::Var training_loss_on(Tape<T>& tape, const EpsFnT<T>& net, const TensorT<T>& x0,
                                       int t, const TensorT<T>& eps,
                                       const DiffusionSchedule& sched) {
    TensorT<T> x_t = q_sample<T>(x0, t, eps, sched);
    auto pred = net(tape, tape.input(std::move(x_t)), t);
    return tape.mse_to(pred, eps);
}

template Tape<float>::Var training_loss_on<float>(Tape<float>&, const EpsFnT<float>&,
                                                  const Tensor&, int, const Tensor&,
                                                  const DiffusionSchedule&);
template Tape<double>::Var training_loss_on<double>(Tape<double>&, const EpsFnT<double>&,
                                                    const TensorD&, int, const TensorD&,
                                                    const DiffusionSchedule&);

template <class T>
double training_loss(const EpsFnT<T>& net, const TensorT<T>& x0, int t, const TensorT<T>& eps,
                     const DiffusionSchedule& sched) {
    Tape<T> tape(false);
    auto l = training_loss_on<T>(tape, net, x0, t, eps, sched);
    return static_cast<double>(tape.val(l)[0]);
}

template double training_loss<float>(const EpsFnT<float>&, const Tensor&, int, const Tensor&,
                                     const DiffusionSchedule&);
template double training_loss<double>(const EpsFnT<double>&, const TensorD&, int, const TensorD&,
                                      const DiffusionSchedule&);

}  // namespace leo
