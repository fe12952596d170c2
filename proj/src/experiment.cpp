#include "emnn/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "emnn/numfmt.hpp"
#include "emnn/parallel.hpp"

#ifndef EMNN_VERSION
#define EMNN_VERSION "unknown"
#endif

namespace emnn::experiment {

namespace fs = std::filesystem;

namespace {

struct Field {
    const char* key;
    const char* unit;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field int_field(const char* key, const char* unit, T ExperimentConfig::*member) {
    return {key, unit, [member](ExperimentConfig& c, std::string_view v) { c.*member = static_cast<T>(parse_int(v)); },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(const char* key, const char* unit, double ExperimentConfig::*member) {
    return {key, unit, [member](ExperimentConfig& c, std::string_view v) { c.*member = parse_double(v); },
            [member](const ExperimentConfig& c) { return fmt_double(c.*member); }};
}

Field text_field(const char* key, std::string ExperimentConfig::*member) {
    return {key, "path", [member](ExperimentConfig& c, std::string_view v) { c.*member = std::string(v); },
            [member](const ExperimentConfig& c) { return c.*member; }};
}

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected true/false");
}

Field bool_field(const char* key, bool ExperimentConfig::*member) {
    return {key, "bool", [member](ExperimentConfig& c, std::string_view v) { c.*member = parse_bool(v); },
            [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field seed_field(const char* key, std::optional<std::uint64_t> ExperimentConfig::*member) {
    return {key, "u64",
            [member](ExperimentConfig& c, std::string_view v) {
                c.*member = static_cast<std::uint64_t>(parse_int(v));
            },
            [member](const ExperimentConfig& c) { return (c.*member) ? std::to_string(*(c.*member)) : "derived"; }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        int_field("antennas_x", "count", &ExperimentConfig::antennas_x),
        int_field("antennas_y", "count", &ExperimentConfig::antennas_y),
        real_field("antenna_spacing_wavelengths", "lambda", &ExperimentConfig::antenna_spacing_wavelengths),
        real_field("rician_factor_db", "dB", &ExperimentConfig::rician_factor_db),
        real_field("noise_power_dbm", "dBm", &ExperimentConfig::noise_power_dbm),
        real_field("tx_power_dbm", "dBm", &ExperimentConfig::tx_power_dbm),
        real_field("distance_m", "m", &ExperimentConfig::distance_m),
        real_field("pathloss_ref_db", "dB", &ExperimentConfig::pathloss_ref_db),
        real_field("pathloss_exponent", "1", &ExperimentConfig::pathloss_exponent),
        int_field("K", "count", &ExperimentConfig::num_sims),
        int_field("L", "count", &ExperimentConfig::num_layers),
        int_field("n_row", "count", &ExperimentConfig::n_row),
        int_field("n_col", "count", &ExperimentConfig::n_col),
        real_field("wavelength_m", "m", &ExperimentConfig::wavelength_m),
        real_field("thickness_wavelengths", "lambda", &ExperimentConfig::thickness_wavelengths),
        real_field("atom_spacing_wavelengths", "lambda", &ExperimentConfig::atom_spacing_wavelengths),
        real_field("atom_area_wavelengths2", "lambda^2", &ExperimentConfig::atom_area_wavelengths2),
        real_field("learning_rate", "1", &ExperimentConfig::learning_rate),
        int_field("batch_size", "count", &ExperimentConfig::batch_size),
        real_field("decay_factor", "1", &ExperimentConfig::decay_factor),
        int_field("decay_interval_epochs", "epochs", &ExperimentConfig::decay_interval_epochs),
        real_field("adam_beta1", "1", &ExperimentConfig::adam_beta1),
        real_field("adam_beta2", "1", &ExperimentConfig::adam_beta2),
        real_field("adam_epsilon", "1", &ExperimentConfig::adam_epsilon),
        int_field("epochs", "epochs", &ExperimentConfig::epochs),
        real_field("convergence_tol", "1", &ExperimentConfig::convergence_tol),
        int_field("convergence_patience", "epochs", &ExperimentConfig::convergence_patience),
        {"combining", "pre|post",
         [](ExperimentConfig& c, std::string_view v) { c.combining = model::parse_combining(v); },
         [](const ExperimentConfig& c) { return std::string(model::to_string(c.combining)); }},
        real_field("fixed_temperature_w", "W", &ExperimentConfig::fixed_temperature_w),
        real_field("fixed_temperature_factor", "1", &ExperimentConfig::fixed_temperature_factor),
        bool_field("redraw_channel_per_epoch", &ExperimentConfig::redraw_channel_per_epoch),
        {"angles_deg", "deg",
         [](ExperimentConfig& c, std::string_view v) { c.angles_deg = data::parse_angles(v); },
         [](const ExperimentConfig& c) {
             std::string out;
             for (double a : c.resolved_angles()) out += (out.empty() ? "" : ",") + fmt_double(a);
             return out;
         }},
        {"seed", "u64", [](ExperimentConfig& c, std::string_view v) { c.seed = static_cast<std::uint64_t>(parse_int(v)); },
         [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
        seed_field("channel_seed", &ExperimentConfig::channel_seed),
        seed_field("init_seed", &ExperimentConfig::init_seed),
        seed_field("data_seed", &ExperimentConfig::data_seed),
        text_field("data_dir", &ExperimentConfig::data_dir),
        text_field("train_images", &ExperimentConfig::train_images),
        text_field("train_labels", &ExperimentConfig::train_labels),
        text_field("test_images", &ExperimentConfig::test_images),
        text_field("test_labels", &ExperimentConfig::test_labels),
        int_field("train_subset", "count", &ExperimentConfig::train_subset),
        int_field("test_subset", "count", &ExperimentConfig::test_subset),
        text_field("out_dir", &ExperimentConfig::out_dir),
        int_field("threads", "count", &ExperimentConfig::threads),
        int_field("checkpoint_interval", "epochs", &ExperimentConfig::checkpoint_interval),
        bool_field("record_wall_clock", &ExperimentConfig::record_wall_clock),
        bool_field("parallel_sweep", &ExperimentConfig::parallel_sweep),
    };
    return table;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

fs::path data_path(const ExperimentConfig& cfg, const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(cfg.data_dir) / p;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_manifest(const ExperimentConfig& cfg, const fs::path& out, const std::vector<std::string>& files) {
    nlohmann::ordered_json j;
    j["code_version"] = EMNN_VERSION;
    j["started_utc"] = utc_now();
    nlohmann::ordered_json conf;
    for (const auto& k : describe(cfg)) conf[k.key] = {{"value", k.value}, {"unit", k.unit}};
    j["config"] = conf;
    j["seeds"] = {{"master", cfg.seed},
                  {"channel", cfg.resolved_channel_seed()},
                  {"init", cfg.resolved_init_seed()},
                  {"data", cfg.resolved_data_seed()}};
    j["outputs"] = files;
    std::ofstream os(out / "manifest.json");
    os << j.dump(2) << '\n';
}

std::ofstream open_or_throw(const fs::path& p, std::ios::openmode mode = std::ios::out) {
    std::ofstream os(p, mode);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    return os;
}

model::Checkpoint load_checkpoint(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + p.string() + "'");
    return model::read_checkpoint(in);
}

void check_shape(const model::Checkpoint& ckpt, const ExperimentConfig& cfg) {
    const auto& p = ckpt.params;
    if (p.num_sims() != cfg.num_sims || p.num_layers() != cfg.num_layers || p.atoms() != cfg.atoms()) {
        throw ConfigError("checkpoint shape K=" + std::to_string(p.num_sims()) + " L=" + std::to_string(p.num_layers()) +
                          " N=" + std::to_string(p.atoms()) + " does not match config K=" +
                          std::to_string(cfg.num_sims) + " L=" + std::to_string(cfg.num_layers) +
                          " N=" + std::to_string(cfg.atoms()));
    }
}

}  // namespace

std::vector<double> ExperimentConfig::resolved_angles() const {
    return angles_deg.empty() ? data::default_angles(num_sims) : angles_deg;
}

void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            try {
                f.set(cfg, trim(value));
            } catch (const std::exception& e) {
                throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                                  "' (" + e.what() + ")");
            }
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<ConfigKey> describe(const ExperimentConfig& cfg) {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back({f.key, f.unit, f.get(cfg)});
    return out;
}

ExperimentConfig parse_config_text(std::string_view text) {
    ExperimentConfig cfg;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig parse_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

Resolved resolve(const ExperimentConfig& cfg) {
    Resolved r;
    r.num_sims = cfg.num_sims;
    const double lambda = cfg.wavelength_m;
    r.geometry.wavelength = lambda;
    r.geometry.atom_area = cfg.atom_area_wavelengths2 * lambda * lambda;
    r.geometry.n_row = cfg.n_row;
    r.geometry.n_col = cfg.n_col;
    r.geometry.atom_spacing = cfg.atom_spacing_wavelengths * lambda;
    r.geometry.num_layers = cfg.num_layers;
    r.geometry.thickness = cfg.thickness_wavelengths * lambda;
    r.geometry.validate();

    r.grs = {cfg.antennas_x, cfg.antennas_y, cfg.antenna_spacing_wavelengths * lambda};
    r.grs.validate();

    if (cfg.num_sims < 1) throw ConfigError("config key 'K': need at least one SIM");
    if (cfg.resolved_angles().size() != static_cast<std::size_t>(cfg.num_sims)) {
        throw ConfigError("config key 'angles_deg': expected " + std::to_string(cfg.num_sims) + " angles, got " +
                          std::to_string(cfg.resolved_angles().size()));
    }

    r.channel.rician_factor = channel::db_to_linear(cfg.rician_factor_db);
    r.channel.pathloss_ref = channel::db_to_linear(cfg.pathloss_ref_db);
    r.channel.pathloss_exponent = cfg.pathloss_exponent;
    r.channel.distance = cfg.distance_m;
    r.channel.noise_power = channel::dbm_to_watts(cfg.noise_power_dbm);
    r.channel.tx_power = channel::dbm_to_watts(cfg.tx_power_dbm);
    r.channel.validate();

    auto& t = r.trainer;
    t.initial_lr = cfg.learning_rate;
    t.decay_factor = cfg.decay_factor;
    t.decay_interval = cfg.decay_interval_epochs;
    t.batch_size = cfg.batch_size;
    t.adam = {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
    t.max_epochs = cfg.epochs;
    t.convergence_tol = cfg.convergence_tol;
    t.convergence_patience = cfg.convergence_patience;
    t.mode = cfg.combining;
    if (cfg.fixed_temperature_w > 0.0) t.fixed_temperature = cfg.fixed_temperature_w;
    t.threads = cfg.threads;
    const std::uint64_t ds = cfg.resolved_data_seed();
    t.data_seed = derive_seed(ds, {1});
    t.noise_seed = derive_seed(ds, {2});
    t.eval_seed = derive_seed(ds, {3});
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return r;
}

void check_dataset_paths(const ExperimentConfig& cfg) {
    for (const auto* name : {&cfg.train_images, &cfg.train_labels, &cfg.test_images, &cfg.test_labels}) {
        const fs::path p = data_path(cfg, *name);
        if (!fs::is_regular_file(p)) throw ConfigError("dataset file not found: '" + p.string() + "'");
    }
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    check_dataset_paths(cfg);
    Dataset d;
    d.train = data::load_idx(data_path(cfg, cfg.train_images), data_path(cfg, cfg.train_labels));
    d.test = data::load_idx(data_path(cfg, cfg.test_images), data_path(cfg, cfg.test_labels));
    if (cfg.train_subset > 0 && static_cast<std::size_t>(cfg.train_subset) < d.train.size()) d.train.resize(cfg.train_subset);
    if (cfg.test_subset > 0 && static_cast<std::size_t>(cfg.test_subset) < d.test.size()) d.test.resize(cfg.test_subset);
    return d;
}

std::vector<trainer::EncodedSample> encode_dataset(std::span<const data::LabeledImage> images,
                                                   std::span<const double> angles,
                                                   const wavegeom::SimGeometry& geom) {
    std::vector<trainer::EncodedSample> out(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const data::ViewSet views = data::make_views(images[i], angles, geom);
        out[i].label = views.label;
        for (const auto& v : views.views) out[i].entries.push_back(model::encode_source_gray(v));
    }
    return out;
}

channel::ChannelRealization make_channel(const Resolved& r, std::uint64_t channel_seed, int epoch) {
    // epoch < 0 is the run's fixed block; epochs >= 0 only when redrawing.
    const std::uint64_t seed =
        epoch < 0 ? channel_seed : derive_seed(channel_seed, {static_cast<std::uint64_t>(epoch) + 1});
    Rng angle_rng(derive_seed(seed, {0xa11e5ULL}));
    channel::ChannelConfig cc = r.channel;
    cc.links = channel::draw_link_angles(angle_rng, r.num_sims);
    return channel::realize_channel(cc, r.geometry, r.grs, seed);
}

RunOutcome run_training(const ExperimentConfig& cfg, const Dataset& dataset, const trainer::TrainHooks& hooks) {
    const Resolved r = resolve(cfg);
    const auto angles = cfg.resolved_angles();
    const auto train_set = encode_dataset(dataset.train, angles, r.geometry);
    const auto test_set = encode_dataset(dataset.test, angles, r.geometry);
    const model::Propagation prop = model::make_propagation(r.geometry);

    RunOutcome out;
    out.channel = make_channel(r, cfg.resolved_channel_seed());

    Rng init_rng(cfg.resolved_init_seed());
    model::SimParameters params = trainer::init_params(cfg.num_sims, cfg.num_layers, cfg.atoms(), init_rng);

    trainer::TrainerConfig tc = r.trainer;
    {
        Rng rng(derive_seed(tc.noise_seed, {~0ULL}));
        out.initial_temperature = trainer::init_temperature(params, train_set.front(), out.channel, prop, tc.mode, rng);
    }
    if (cfg.fixed_temperature_factor > 0.0) tc.fixed_temperature = cfg.fixed_temperature_factor * out.initial_temperature;

    trainer::TrainHooks h = hooks;
    if (cfg.redraw_channel_per_epoch && !h.channel_for_epoch) {
        h.channel_for_epoch = [&r, seed = cfg.resolved_channel_seed()](int epoch) {
            return make_channel(r, seed, epoch);
        };
    }
    out.result = trainer::train(std::move(params), out.initial_temperature, train_set, test_set, out.channel, prop, tc, h);
    out.final_test_acc = out.result.history.empty() ? 0.0 : out.result.history.back().test_acc;
    return out;
}

std::string metrics_header() { return "epoch,mean_loss,train_acc,test_acc,lr,temperature,wall_seconds"; }

std::string metrics_row(const trainer::EpochMetrics& m, bool with_wall_clock) {
    std::string row = std::to_string(m.epoch) + ',' + fmt_double(m.mean_loss) + ',' + fmt_double(m.train_acc) + ',' +
                      fmt_double(m.test_acc) + ',' + fmt_double(m.lr) + ',' + fmt_double(m.temperature) + ',';
    row += with_wall_clock ? fmt_double(m.wall_seconds, 6) : "0";
    return row;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
    try {
        resolve(cfg);
        check_dataset_paths(cfg);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }

    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_manifest(cfg, out, {"manifest.json", "channel.txt", "metrics.csv", "checkpoint.txt"});

    try {
        const Dataset dataset = load_dataset(cfg);
        log << "loaded " << dataset.train.size() << " train / " << dataset.test.size() << " test samples\n";

        auto metrics = open_or_throw(out / "metrics.csv");
        metrics << metrics_header() << '\n' << std::flush;

        trainer::TrainHooks hooks;
        hooks.on_epoch = [&](const trainer::EpochMetrics& m, const model::SimParameters& params,
                             const trainer::TrainerState& state) {
            metrics << metrics_row(m, cfg.record_wall_clock) << '\n' << std::flush;
            log << "epoch " << m.epoch << " loss " << fmt_double(m.mean_loss, 6) << " train_acc "
                << fmt_double(m.train_acc, 4) << " test_acc " << fmt_double(m.test_acc, 4) << " T "
                << fmt_double(m.temperature, 6) << '\n';
            if (cfg.checkpoint_interval > 0 && (m.epoch + 1) % cfg.checkpoint_interval == 0) {
                auto os = open_or_throw(out / ("checkpoint_epoch" + std::to_string(m.epoch) + ".txt"));
                model::write_checkpoint(os, {params, state.temperature});
            }
        };
        const RunOutcome run = run_training(cfg, dataset, hooks);

        auto chan_os = open_or_throw(out / "channel.txt");
        channel::write_channel(chan_os, run.channel);
        auto ckpt_os = open_or_throw(out / "checkpoint.txt");
        model::write_checkpoint(ckpt_os, {run.result.params, run.result.state.temperature});
        log << "final test accuracy " << fmt_double(run.final_test_acc, 6) << (run.result.converged ? " (converged)" : "")
            << '\n';
        return 0;
    } catch (const trainer::NumericFailure& e) {
        log << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }
}

int cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
    try {
        const Resolved r = resolve(cfg);
        const model::Checkpoint ckpt = load_checkpoint(checkpoint);
        check_shape(ckpt, cfg);
        const Dataset dataset = load_dataset(cfg);
        const auto test_set = encode_dataset(dataset.test, cfg.resolved_angles(), r.geometry);
        const auto chan = make_channel(r, cfg.resolved_channel_seed());
        const auto prop = model::make_propagation(r.geometry);
        const double acc = trainer::evaluate(ckpt.params, ckpt.temperature, test_set, chan, prop, cfg.combining,
                                             r.trainer.eval_seed, cfg.threads);
        log << "accuracy " << fmt_double(acc) << '\n';

        const fs::path out(cfg.out_dir);
        fs::create_directories(out);
        const fs::path csv = out / "eval.csv";
        const bool fresh = !fs::exists(csv);
        auto os = open_or_throw(csv, std::ios::app);
        if (fresh) os << "checkpoint,samples,accuracy\n";
        os << checkpoint.string() << ',' << test_set.size() << ',' << fmt_double(acc) << '\n';
        return 0;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }
}

int cmd_sweep(const ExperimentConfig& cfg, std::string_view axis, std::span<const double> values, std::ostream& log) {
    auto point_config = [&](double v) {
        ExperimentConfig c = cfg;
        if (axis == "L") {
            c.num_layers = static_cast<int>(std::lround(v));
        } else if (axis == "N") {
            const int side = static_cast<int>(std::lround(std::sqrt(v)));
            if (side * side != static_cast<int>(std::lround(v))) throw ConfigError("sweep N: value is not a square grid");
            c.n_row = c.n_col = side;
        } else if (axis == "K") {
            c.num_sims = static_cast<int>(std::lround(v));
            c.angles_deg.clear();
        } else if (axis == "T_fixed") {
            c.fixed_temperature_factor = v;
            c.fixed_temperature_w = 0.0;
        }
        return c;
    };
    if (axis != "L" && axis != "N" && axis != "K" && axis != "T_fixed") {
        log << "error: sweep axis must be one of L, N, K, T_fixed\n";
        return 2;
    }
    Dataset dataset;
    try {
        resolve(cfg);
        dataset = load_dataset(cfg);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }

    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_manifest(cfg, out, {"manifest.json", "sweep_" + std::string(axis) + ".csv"});
    auto csv = open_or_throw(out / ("sweep_" + std::string(axis) + ".csv"));
    csv << "axis,value,accuracy,initial_temperature,final_temperature,status\n" << std::flush;

    struct Point {
        double accuracy = std::nan("");
        double t0 = std::nan("");
        double t_final = std::nan("");
        std::string status = "ok";
    };
    auto run_point = [&](double v) {
        Point p;
        try {
            const RunOutcome run = run_training(point_config(v), dataset);
            p.accuracy = run.final_test_acc;
            p.t0 = run.initial_temperature;
            p.t_final = run.result.state.temperature;
        } catch (const std::exception& e) {
            p.status = e.what();
            for (char& ch : p.status) {
                if (ch == ',' || ch == '\n') ch = ' ';
            }
        }
        return p;
    };
    auto emit = [&](double v, const Point& p) {
        csv << axis << ',' << fmt_double(v) << ',' << fmt_double(p.accuracy) << ',' << fmt_double(p.t0) << ','
            << fmt_double(p.t_final) << ',' << p.status << '\n'
            << std::flush;
        log << axis << '=' << fmt_double(v) << " accuracy " << fmt_double(p.accuracy, 4) << ' ' << p.status << '\n';
    };

    if (cfg.parallel_sweep) {
        std::vector<std::future<Point>> futures;
        for (double v : values) futures.push_back(std::async(std::launch::async, run_point, v));
        for (std::size_t i = 0; i < values.size(); ++i) emit(values[i], futures[i].get());
    } else {
        for (double v : values) emit(v, run_point(v));
    }
    return 0;
}

PowerDump power_dump(const model::Checkpoint& ckpt, const trainer::EncodedSample& sample,
                     const channel::ChannelRealization& chan, const model::Propagation& prop,
                     model::CombiningMode mode, Rng& rng) {
    const auto trace = model::forward(ckpt.params, sample.entries, chan, prop, mode, ckpt.temperature, rng);
    PowerDump out;
    const double t = ckpt.temperature;
    for (const auto& st : trace.sims) {
        std::vector<double> col(st.x.size());
        for (Eigen::Index m = 0; m < st.x.size(); ++m) col[m] = std::norm(st.x[m]) / t;
        out.per_sim.push_back(std::move(col));
    }
    for (Eigen::Index m = 0; m < trace.power.size(); ++m) out.combined.push_back(trace.power[m] / t);
    out.predicted = model::classify(trace.power);
    out.label = sample.label;
    return out;
}

int cmd_power_dump(const ExperimentConfig& cfg, const fs::path& checkpoint, int sample_index, std::ostream& log) {
    try {
        const Resolved r = resolve(cfg);
        const model::Checkpoint ckpt = load_checkpoint(checkpoint);
        check_shape(ckpt, cfg);
        const Dataset dataset = load_dataset(cfg);
        if (sample_index < 0 || static_cast<std::size_t>(sample_index) >= dataset.test.size()) {
            throw std::out_of_range("sample index " + std::to_string(sample_index) + " outside test split of " +
                                    std::to_string(dataset.test.size()));
        }
        const auto encoded = encode_dataset(std::span(dataset.test).subspan(sample_index, 1), cfg.resolved_angles(),
                                            r.geometry);
        const auto chan = make_channel(r, cfg.resolved_channel_seed());
        const auto prop = model::make_propagation(r.geometry);
        Rng rng(derive_seed(r.trainer.eval_seed, {static_cast<std::uint64_t>(sample_index)}));
        const PowerDump dump = power_dump(ckpt, encoded.front(), chan, prop, cfg.combining, rng);

        const fs::path out(cfg.out_dir);
        fs::create_directories(out);
        auto os = open_or_throw(out / ("power_dump_" + std::to_string(sample_index) + ".csv"));
        os << "antenna";
        for (std::size_t k = 0; k < dump.per_sim.size(); ++k) os << ",sim_" << k + 1;
        os << ",combined,predicted,label\n";
        for (std::size_t m = 0; m < dump.combined.size(); ++m) {
            os << m;
            for (const auto& col : dump.per_sim) os << ',' << fmt_double(col[m]);
            os << ',' << fmt_double(dump.combined[m]) << ',' << dump.predicted << ',' << dump.label << '\n';
        }
        log << "sample " << sample_index << " label " << dump.label << " predicted " << dump.predicted << '\n';
        return 0;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace emnn::experiment
