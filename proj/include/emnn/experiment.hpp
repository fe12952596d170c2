#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emnn/channel.hpp"
#include "emnn/data.hpp"
#include "emnn/model.hpp"
#include "emnn/trainer.hpp"
#include "emnn/wavegeom.hpp"

namespace emnn::experiment {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every knob of an experiment, in the units named by each key. Defaults are
/// the reference simulation setup (10-antenna ground station, 4 UAVs, 0.3 THz,
/// 4-layer 11x11 SIMs ...). The key=value file format, one entry per line,
/// '#' starts a comment:
///
///     K = 2
///     combining = pre
///     angles_deg = -20, 20
///
/// Unknown keys and unparsable values are rejected with the key named.
struct ExperimentConfig {
    // ground station array
    int antennas_x = 5;
    int antennas_y = 2;
    double antenna_spacing_wavelengths = 0.5;

    // link budget
    double rician_factor_db = 3.0;
    double noise_power_dbm = -104.0;
    double tx_power_dbm = 10.0;
    double distance_m = 100.0;
    double pathloss_ref_db = -35.0;
    double pathloss_exponent = 2.5;

    // SIM geometry
    int num_sims = 4;    // K
    int num_layers = 4;  // L
    int n_row = 11;
    int n_col = 11;
    double wavelength_m = 1e-3;
    double thickness_wavelengths = 10.0;
    double atom_spacing_wavelengths = 1.0;
    double atom_area_wavelengths2 = 1.0;

    // optimizer
    double learning_rate = 0.01;
    int batch_size = 64;
    double decay_factor = 0.8;
    int decay_interval_epochs = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int epochs = 30;
    double convergence_tol = 1e-4;
    int convergence_patience = 3;
    model::CombiningMode combining = model::CombiningMode::PostDetection;
    double fixed_temperature_w = 0.0;       // > 0: hold T at this value
    double fixed_temperature_factor = 0.0;  // > 0: hold T at factor * initial T
    bool redraw_channel_per_epoch = false;

    // views
    std::vector<double> angles_deg;  // empty: K evenly spaced in [-30, 30]

    // seeds: channel = seed + 1, init = seed + 2, data = seed + 3 unless set
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> channel_seed;
    std::optional<std::uint64_t> init_seed;
    std::optional<std::uint64_t> data_seed;

    // dataset and output
    std::string data_dir = "data/mnist";
    std::string train_images = "train-images-idx3-ubyte";
    std::string train_labels = "train-labels-idx1-ubyte";
    std::string test_images = "t10k-images-idx3-ubyte";
    std::string test_labels = "t10k-labels-idx1-ubyte";
    int train_subset = 0;  // 0: whole file
    int test_subset = 0;
    std::string out_dir = "runs/default";

    // execution
    int threads = 1;
    int checkpoint_interval = 0;  // epochs; 0: final checkpoint only
    bool record_wall_clock = false;
    bool parallel_sweep = false;

    std::uint64_t resolved_channel_seed() const { return channel_seed.value_or(seed + 1); }
    std::uint64_t resolved_init_seed() const { return init_seed.value_or(seed + 2); }
    std::uint64_t resolved_data_seed() const { return data_seed.value_or(seed + 3); }
    std::vector<double> resolved_angles() const;
    int atoms() const { return n_row * n_col; }
};

struct ConfigKey {
    std::string key;
    std::string unit;
    std::string value;  // current value, formatted
};

// Applies one key=value assignment; throws ConfigError naming the key.
void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value);
std::vector<ConfigKey> describe(const ExperimentConfig& cfg);

ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

// Linear-unit views consumed by the core modules.
struct Resolved {
    wavegeom::SimGeometry geometry;
    wavegeom::UpaLayout grs;
    channel::ChannelConfig channel;
    trainer::TrainerConfig trainer;
    int num_sims = 1;
};

Resolved resolve(const ExperimentConfig& cfg);

struct Dataset {
    std::vector<data::LabeledImage> train;
    std::vector<data::LabeledImage> test;
};

// Loads both splits, honoring the subset limits. Throws if a file is missing.
Dataset load_dataset(const ExperimentConfig& cfg);
void check_dataset_paths(const ExperimentConfig& cfg);

std::vector<trainer::EncodedSample> encode_dataset(std::span<const data::LabeledImage> images,
                                                   std::span<const double> angles,
                                                   const wavegeom::SimGeometry& geom);

// Channel for the run: link angles and scattering both from the channel seed.
channel::ChannelRealization make_channel(const Resolved& r, std::uint64_t channel_seed, int epoch = -1);

struct RunOutcome {
    trainer::TrainResult result;
    double initial_temperature = 0.0;
    double final_test_acc = 0.0;
    channel::ChannelRealization channel;
};

// Full in-memory train + per-epoch test evaluation for one config.
RunOutcome run_training(const ExperimentConfig& cfg, const Dataset& dataset, const trainer::TrainHooks& hooks = {});

// CSV helpers; rows are flushed as they are written.
std::string metrics_header();
std::string metrics_row(const trainer::EpochMetrics& m, bool with_wall_clock);

// Commands. Each returns a process exit status and reports to `log`.
int cmd_train(const ExperimentConfig& cfg, std::ostream& log);
int cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);
// axis: L, N, K or T_fixed (values are multiples of the initial temperature).
int cmd_sweep(const ExperimentConfig& cfg, std::string_view axis, std::span<const double> values, std::ostream& log);
int cmd_power_dump(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, int sample_index,
                   std::ostream& log);

// Per-antenna, per-SIM |x^k_m|^2 / T plus the combined y/T, for one sample.
struct PowerDump {
    std::vector<std::vector<double>> per_sim;  // [k][m]
    std::vector<double> combined;              // [m]
    int predicted = 0;
    int label = 0;
};

PowerDump power_dump(const model::Checkpoint& ckpt, const trainer::EncodedSample& sample,
                     const channel::ChannelRealization& chan, const model::Propagation& prop,
                     model::CombiningMode mode, Rng& rng);

}  // namespace emnn::experiment
