#include "emnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "emnn/data.hpp"
#include "emnn/parallel.hpp"

namespace emnn::trainer {

using model::CombiningMode;
using model::ForwardTrace;
using model::SimParameters;

void TrainerConfig::validate() const {
    if (!(initial_lr >= 0.0)) throw std::invalid_argument("trainer: initial learning rate must be >= 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw std::invalid_argument("trainer: decay factor must be in (0, 1]");
    if (decay_interval < 1) throw std::invalid_argument("trainer: decay interval must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("trainer: batch size must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("trainer: max_epochs must be >= 0");
    if (fixed_temperature && !(*fixed_temperature > 0.0)) {
        throw std::invalid_argument("trainer: fixed temperature must be positive");
    }
}

void GradientSet::set_zero() {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    std::fill(theta.begin(), theta.end(), 0.0);
    temperature = 0.0;
}

bool GradientSet::finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    return std::isfinite(temperature) && std::all_of(alpha.begin(), alpha.end(), ok) &&
           std::all_of(theta.begin(), theta.end(), ok);
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] += other.alpha[i];
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += other.theta[i];
    temperature += other.temperature;
    return *this;
}

GradientSet& GradientSet::operator*=(double s) {
    for (double& v : alpha) v *= s;
    for (double& v : theta) v *= s;
    temperature *= s;
    return *this;
}

TrainerState::TrainerState(std::size_t n, double initial_temperature)
    : temperature(initial_temperature),
      temperature_scale(initial_temperature),
      m_alpha(n, 0.0),
      v_alpha(n, 0.0),
      m_theta(n, 0.0),
      v_theta(n, 0.0) {}

SimParameters init_params(int num_sims, int num_layers, int atoms, Rng& rng) {
    SimParameters params(num_sims, num_layers, atoms);
    for (double& a : params.alpha_data()) a = rng.uniform();
    for (double& t : params.theta_data()) t = rng.uniform(0.0, 2.0 * kPi);
    return params;
}

double init_temperature(const SimParameters& params, const EncodedSample& sample,
                        const channel::ChannelRealization& chan, const model::Propagation& prop, CombiningMode mode,
                        Rng& rng) {
    const ForwardTrace trace = model::forward(params, sample.entries, chan, prop, mode, 1.0, rng);
    const double t = trace.power.minCoeff();
    return t > kMinTemperature ? t : kMinTemperature;
}

void accumulate_backward(const ForwardTrace& trace, int label, const SimParameters& params,
                         const channel::ChannelRealization& chan, const model::Propagation& prop, double weight,
                         GradientSet& out) {
    const int num_sims = params.num_sims();
    if (static_cast<int>(trace.sims.size()) != num_sims || out.alpha.size() != params.size()) {
        throw std::invalid_argument("backward: trace or gradient buffer does not match the parameters");
    }
    const Eigen::Index m = trace.power.size();
    if (label < 0 || label >= m) throw std::out_of_range("backward: label out of range");
    const double t = trace.temperature;

    // d loss / d y = (c - onehot) / T
    RVector dpower = trace.probs;
    dpower[label] -= 1.0;
    out.temperature += weight * (-dpower.dot(trace.power) / (t * t));
    dpower /= t;

    CVector combined;
    if (trace.mode == CombiningMode::PreDetection) {
        combined = CVector::Zero(m);
        for (const auto& st : trace.sims) combined += st.x;
    }

    const double amp = std::sqrt(chan.tx_power);
    const int atoms = params.atoms();
    for (int k = 0; k < num_sims; ++k) {
        const auto& st = trace.sims[k];
        if (static_cast<int>(st.incident.size()) != params.trainable_layers()) {
            throw std::invalid_argument("backward: trace depth does not match L");
        }
        // Complex gradient convention g = dL/dRe + j dL/dIm; for y = |x|^2, g_x = 2 x dL/dy.
        const CVector& x = trace.mode == CombiningMode::PreDetection ? combined : st.x;
        const CVector gx = 2.0 * (x.array() * dpower.array().cast<cplx>()).matrix();
        CVector gs = amp * (chan.h[k].adjoint() * gx);

        for (int layer = params.num_layers(); layer >= 2; --layer) {
            const CVector& incident = st.incident[layer - 2];
            const auto a = params.alpha(k, layer);
            const auto th = params.theta(k, layer);
            const std::size_t off = params.offset(k, layer);
            CVector ga(atoms);
            for (int n = 0; n < atoms; ++n) {
                const cplx e = std::polar(1.0, th[n]);
                const cplx psi = a[n] * e;
                const cplx prod = std::conj(gs[n]) * incident[n];
                out.alpha[off + n] += weight * (prod * e).real();
                out.theta[off + n] -= weight * (prod * psi).imag();
                ga[n] = std::conj(psi) * gs[n];
            }
            if (layer > 2) gs = prop.w_adj * ga;
        }
    }
}

GradientSet backward(const ForwardTrace& trace, int label, const SimParameters& params,
                     const channel::ChannelRealization& chan, const model::Propagation& prop) {
    GradientSet g(params.size());
    accumulate_backward(trace, label, params, chan, prop, 1.0, g);
    return g;
}

GradientSet batch_gradient(const SimParameters& params, double temperature,
                           std::span<const EncodedSample* const> batch, const channel::ChannelRealization& chan,
                           const model::Propagation& prop, CombiningMode mode, std::span<Rng> rngs) {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    if (rngs.size() != batch.size()) throw std::invalid_argument("batch_gradient: need one rng per sample");
    GradientSet total(params.size());
    const double w = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ForwardTrace trace = model::forward(params, batch[i]->entries, chan, prop, mode, temperature, rngs[i]);
        accumulate_backward(trace, batch[i]->label, params, chan, prop, w, total);
    }
    return total;
}

void adam_step(SimParameters& params, TrainerState& state, const GradientSet& grads, double lr,
               const AdamConfig& adam, bool train_temperature, bool scale_temperature_step) {
    if (grads.alpha.size() != params.size() || state.m_alpha.size() != params.size()) {
        throw std::invalid_argument("adam_step: gradient/state shape does not match parameters");
    }
    if (!grads.finite()) throw NumericFailure("adam_step: non-finite gradient at step " + std::to_string(state.step + 1));

    ++state.step;
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
    auto update = [&](double& p, double& m, double& v, double g) {
        m = adam.beta1 * m + (1.0 - adam.beta1) * g;
        v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
        const double delta = lr * (m / c1) / (std::sqrt(v / c2) + adam.epsilon);
        p -= delta;
    };

    auto& alpha = params.alpha_data();
    auto& theta = params.theta_data();
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        update(alpha[i], state.m_alpha[i], state.v_alpha[i], grads.alpha[i]);
        alpha[i] = std::clamp(alpha[i], 0.0, 1.0);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) update(theta[i], state.m_theta[i], state.v_theta[i], grads.theta[i]);

    if (train_temperature) {
        const double scale = scale_temperature_step ? state.temperature_scale : 1.0;
        double tau = state.temperature / scale;
        update(tau, state.m_temperature, state.v_temperature, grads.temperature * scale);
        state.temperature = std::max(tau * scale, kMinTemperature);
    }
}

double lr_schedule(double initial_lr, double decay_factor, int decay_interval, int epoch) {
    if (decay_interval < 1) throw std::invalid_argument("lr_schedule: decay interval must be >= 1");
    return initial_lr * std::pow(decay_factor, static_cast<double>(epoch / decay_interval));
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate(const SimParameters& params, double temperature, std::span<const EncodedSample> dataset,
                const channel::ChannelRealization& chan, const model::Propagation& prop, CombiningMode mode,
                std::uint64_t seed, int threads) {
    if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<int> predictions(dataset.size());
    std::vector<int> labels(dataset.size());
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        Rng rng(derive_seed(seed, {i}));
        const ForwardTrace trace = model::forward(params, dataset[i].entries, chan, prop, mode, temperature, rng);
        predictions[i] = model::classify(trace.power);
        labels[i] = dataset[i].label;
    });
    return accuracy(predictions, labels);
}

TrainResult train(SimParameters params, std::optional<double> initial_temperature,
                  std::span<const EncodedSample> train_set, std::span<const EncodedSample> test_set,
                  const channel::ChannelRealization& chan, const model::Propagation& prop, const TrainerConfig& cfg,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");

    const bool train_temperature = !cfg.fixed_temperature.has_value();
    double t0 = 0.0;
    if (cfg.fixed_temperature) {
        t0 = *cfg.fixed_temperature;
    } else if (initial_temperature) {
        t0 = *initial_temperature;
    } else {
        Rng rng(derive_seed(cfg.noise_seed, {~0ULL}));
        t0 = init_temperature(params, train_set.front(), chan, prop, cfg.mode, rng);
    }

    TrainResult result;
    result.state = TrainerState(params.size(), t0);
    TrainerState& state = result.state;

    const std::size_t batch_cap = static_cast<std::size_t>(cfg.batch_size);
    std::vector<GradientSet> slot_grads(batch_cap, GradientSet(params.size()));
    std::vector<double> slot_loss(batch_cap);
    std::vector<char> slot_hit(batch_cap);
    GradientSet total(params.size());

    double previous_loss = std::numeric_limits<double>::quiet_NaN();
    int stalled = 0;
    channel::ChannelRealization epoch_chan;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const channel::ChannelRealization* active = &chan;
        if (hooks.channel_for_epoch) {
            epoch_chan = hooks.channel_for_epoch(epoch);
            active = &epoch_chan;
        }
        state.epoch = epoch;
        state.lr = lr_schedule(cfg.initial_lr, cfg.decay_factor, cfg.decay_interval, epoch);

        Rng order_rng(derive_seed(cfg.data_seed, {static_cast<std::uint64_t>(epoch)}));
        const auto batches = data::make_batches(train_set.size(), cfg.batch_size, order_rng);

        double loss_sum = 0.0;
        std::size_t hits = 0;
        std::size_t position = 0;
        for (const auto& batch : batches) {
            const double weight = 1.0 / static_cast<double>(batch.size());
            parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
                const EncodedSample& sample = train_set[batch[i]];
                Rng rng(derive_seed(cfg.noise_seed, {static_cast<std::uint64_t>(epoch), position + i}));
                const ForwardTrace trace =
                    model::forward(params, sample.entries, *active, prop, cfg.mode, state.temperature, rng);
                slot_loss[i] = model::softmax_cross_entropy(trace.power, state.temperature, sample.label);
                slot_hit[i] = model::classify(trace.power) == sample.label;
                slot_grads[i].set_zero();
                accumulate_backward(trace, sample.label, params, *active, prop, weight, slot_grads[i]);
            });
            total.set_zero();
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (!std::isfinite(slot_loss[i])) {
                    throw NumericFailure("train: non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                         std::to_string(batch[i]) + " (T = " + std::to_string(state.temperature) +
                                         ")");
                }
                loss_sum += slot_loss[i];
                hits += slot_hit[i];
                total += slot_grads[i];
            }
            adam_step(params, state, total, state.lr, cfg.adam, train_temperature, cfg.scale_temperature_step);
            position += batch.size();
        }

        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.mean_loss = loss_sum / static_cast<double>(train_set.size());
        metrics.train_acc = static_cast<double>(hits) / static_cast<double>(train_set.size());
        metrics.test_acc = test_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : evaluate(params, state.temperature, test_set, *active, prop, cfg.mode,
                                                       cfg.eval_seed, cfg.threads);
        metrics.lr = state.lr;
        metrics.temperature = state.temperature;
        metrics.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        state.loss_history.push_back(metrics.mean_loss);
        result.history.push_back(metrics);
        if (hooks.on_epoch) hooks.on_epoch(metrics, params, state);

        if (std::isfinite(previous_loss)) {
            const double rel = (previous_loss - metrics.mean_loss) / std::max(std::abs(previous_loss), 1e-300);
            stalled = rel < cfg.convergence_tol ? stalled + 1 : 0;
            if (stalled >= cfg.convergence_patience) {
                result.converged = true;
                break;
            }
        }
        previous_loss = metrics.mean_loss;
    }
    result.params = std::move(params);
    return result;
}

}  // namespace emnn::trainer
