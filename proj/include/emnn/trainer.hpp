#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "emnn/channel.hpp"
#include "emnn/model.hpp"
#include "emnn/random.hpp"

namespace emnn::trainer {

inline constexpr double kMinTemperature = 1e-30;

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainerConfig {
    double initial_lr = 0.01;
    double decay_factor = 0.8;
    int decay_interval = 1;  // epochs
    int batch_size = 64;
    AdamConfig adam;
    int max_epochs = 30;
    double convergence_tol = 1e-4;  // relative improvement of the epoch-mean loss
    int convergence_patience = 3;
    model::CombiningMode mode = model::CombiningMode::PostDetection;

    // When set, T is held at this value and not trained.
    std::optional<double> fixed_temperature;
    // Adam moves T in units of its initial value (see TrainerState).
    bool scale_temperature_step = true;

    int threads = 1;
    std::uint64_t data_seed = 0;   // batch order
    std::uint64_t noise_seed = 0;  // receiver noise during training
    std::uint64_t eval_seed = 0;   // receiver noise during evaluation

    void validate() const;
};

struct GradientSet {
    std::vector<double> alpha;  // same layout as SimParameters
    std::vector<double> theta;
    double temperature = 0.0;

    GradientSet() = default;
    explicit GradientSet(std::size_t n) : alpha(n, 0.0), theta(n, 0.0) {}
    void set_zero();
    bool finite() const;
    GradientSet& operator+=(const GradientSet& other);
    GradientSet& operator*=(double s);
};

/// Optimizer state. T is trained in the coordinate tau = T / temperature_scale
/// where temperature_scale is the initial temperature, so a unit Adam step
/// changes T by a fixed fraction of its initial magnitude regardless of how
/// small the received powers are.
struct TrainerState {
    double temperature = 1.0;
    double temperature_scale = 1.0;
    std::vector<double> m_alpha, v_alpha, m_theta, v_theta;
    double m_temperature = 0.0, v_temperature = 0.0;
    long long step = 0;
    int epoch = 0;
    double lr = 0.0;
    std::vector<double> loss_history;

    TrainerState() = default;
    TrainerState(std::size_t n, double initial_temperature);
};

struct EncodedSample {
    std::vector<model::EntryLayer> entries;  // one per SIM
    int label = 0;
};

// alpha ~ U[0, 1], theta ~ U[0, 2pi), drawn SIM by SIM, layer by layer,
// alpha block before theta block.
model::SimParameters init_params(int num_sims, int num_layers, int atoms, Rng& rng);

// T = min_m y_m for one sample, projected up to kMinTemperature.
double init_temperature(const model::SimParameters& params, const EncodedSample& sample,
                        const channel::ChannelRealization& chan, const model::Propagation& prop,
                        model::CombiningMode mode, Rng& rng);

/// Gradient of the single-sample loss -log c[label] with respect to every
/// alpha, theta and T, accumulated into `out` scaled by `weight`.
/// Reverse-mode through: cross-entropy, temperature softmax, modulus-square
/// combining, the linear channel and the diagonal/diffraction cascade.
void accumulate_backward(const model::ForwardTrace& trace, int label, const model::SimParameters& params,
                         const channel::ChannelRealization& chan, const model::Propagation& prop, double weight,
                         GradientSet& out);

GradientSet backward(const model::ForwardTrace& trace, int label, const model::SimParameters& params,
                     const channel::ChannelRealization& chan, const model::Propagation& prop);

// Mean of the per-sample gradients, one noise stream per sample taken from
// `rngs` (or none when the noise power is zero).
GradientSet batch_gradient(const model::SimParameters& params, double temperature,
                           std::span<const EncodedSample* const> batch, const channel::ChannelRealization& chan,
                           const model::Propagation& prop, model::CombiningMode mode, std::span<Rng> rngs);

// Bias-corrected Adam on alpha, theta and (if train_temperature) T, then
// alpha clamped to [0, 1] and T to >= kMinTemperature. Throws NumericFailure
// on non-finite gradients, leaving everything untouched.
void adam_step(model::SimParameters& params, TrainerState& state, const GradientSet& grads, double lr,
               const AdamConfig& adam, bool train_temperature, bool scale_temperature_step = true);

// xi_t = xi_0 * gamma^floor(t / interval), t counted in completed epochs.
double lr_schedule(double initial_lr, double decay_factor, int decay_interval, int epoch);

struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double lr = 0.0;
    double temperature = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    model::SimParameters params;
    TrainerState state;
    std::vector<EpochMetrics> history;
    bool converged = false;
};

struct TrainHooks {
    // Called after every epoch with the updated parameters.
    std::function<void(const EpochMetrics&, const model::SimParameters&, const TrainerState&)> on_epoch;
    // Returns the channel to use for an epoch; unset keeps one realization for the run.
    std::function<channel::ChannelRealization(int epoch)> channel_for_epoch;
};

/// Temperature-adaptive training loop: per epoch, shuffle, then per batch
/// forward, batch-mean loss, backward, Adam, projection; the learning rate
/// decays by epoch. Stops at max_epochs or when the epoch-mean loss improves
/// by less than convergence_tol (relative) for convergence_patience epochs
/// in a row. test_acc is computed after each epoch when a test set is given.
TrainResult train(model::SimParameters params, std::optional<double> initial_temperature,
                  std::span<const EncodedSample> train_set, std::span<const EncodedSample> test_set,
                  const channel::ChannelRealization& chan, const model::Propagation& prop, const TrainerConfig& cfg,
                  const TrainHooks& hooks = {});

// Fraction of samples whose argmax power matches the label. Sample i draws
// its noise from derive_seed(seed, {i}); calls with equal arguments agree.
double evaluate(const model::SimParameters& params, double temperature, std::span<const EncodedSample> dataset,
                const channel::ChannelRealization& chan, const model::Propagation& prop, model::CombiningMode mode,
                std::uint64_t seed, int threads = 1);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

}  // namespace emnn::trainer
