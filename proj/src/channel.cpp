#include "emnn/channel.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "emnn/numfmt.hpp"

namespace emnn::channel {

using wavegeom::ArrivalAngles;
using wavegeom::SimGeometry;
using wavegeom::UpaLayout;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

std::vector<LinkAngles> draw_link_angles(Rng& rng, int num_links) {
    std::vector<LinkAngles> links(num_links);
    for (auto& link : links) {
        link.grs = {rng.uniform(0.0, 2.0 * kPi), rng.uniform() * 0.5 * kPi};
        link.sim = {rng.uniform(0.0, 2.0 * kPi), rng.uniform() * 0.5 * kPi};
    }
    return links;
}

void ChannelConfig::validate() const {
    if (!(distance > 0.0)) throw std::invalid_argument("channel: distance must be positive");
    if (!(pathloss_exponent > 0.0)) throw std::invalid_argument("channel: path loss exponent must be positive");
    if (!(rician_factor >= 0.0)) throw std::invalid_argument("channel: Rician factor must be >= 0");
    if (!(noise_power >= 0.0)) throw std::invalid_argument("channel: noise power must be >= 0");
    if (!(tx_power >= 0.0)) throw std::invalid_argument("channel: transmit power must be >= 0");
}

double path_loss(const ChannelConfig& cfg) {
    if (!(cfg.distance > 0.0)) throw std::invalid_argument("path_loss: distance must be positive");
    return cfg.pathloss_ref * std::pow(cfg.distance, -cfg.pathloss_exponent);
}

CMatrix los_component(const ArrivalAngles& grs_angles, const ArrivalAngles& sim_angles, const UpaLayout& grs,
                      const SimGeometry& geom) {
    grs.validate();
    geom.validate();
    const CVector b_r = wavegeom::steering_vector(
        wavegeom::electrical_angles(grs_angles, grs.spacing, geom.wavelength), grs);
    const CVector b_s = wavegeom::steering_vector(
        wavegeom::electrical_angles(sim_angles, geom.atom_spacing, geom.wavelength), geom.n_row, geom.n_col);
    return b_r * b_s.adjoint();
}

CMatrix sample_nlos(Rng& rng, int rows, int cols) {
    const double s = std::sqrt(0.5);
    CMatrix h(rows, cols);
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            const double re = rng.normal();
            const double im = rng.normal();
            h(i, j) = cplx(s * re, s * im);
        }
    }
    return h;
}

CVector sample_noise(Rng& rng, double noise_power, int size) {
    if (!(noise_power >= 0.0)) throw std::invalid_argument("sample_noise: noise power must be >= 0");
    CVector n = CVector::Zero(size);
    if (noise_power == 0.0) return n;
    const double s = std::sqrt(0.5 * noise_power);
    for (int i = 0; i < size; ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        n[i] = cplx(s * re, s * im);
    }
    return n;
}

ChannelRealization realize_channel(const ChannelConfig& cfg, const SimGeometry& geom, const UpaLayout& grs,
                                   std::uint64_t seed) {
    cfg.validate();
    geom.validate();
    grs.validate();
    if (cfg.links.empty()) throw std::invalid_argument("realize_channel: no links configured");

    ChannelRealization out;
    out.path_loss = path_loss(cfg);
    out.rician_factor = cfg.rician_factor;
    out.noise_power = cfg.noise_power;
    out.tx_power = cfg.tx_power;
    out.seed = seed;

    const double z = cfg.rician_factor;
    const double scale = std::sqrt(out.path_loss / (1.0 + z));
    for (std::size_t k = 0; k < cfg.links.size(); ++k) {
        Rng rng(derive_seed(seed, {k}));
        CMatrix h = sample_nlos(rng, grs.size(), geom.atoms());
        if (z > 0.0) h += std::sqrt(z) * los_component(cfg.links[k].grs, cfg.links[k].sim, grs, geom);
        out.h.push_back(scale * h);
    }
    return out;
}

void write_channel(std::ostream& os, const ChannelRealization& chan) {
    os << "emnn-channel 1\n";
    os << chan.num_sims() << ' ' << chan.rows() << ' ' << chan.cols() << '\n';
    os << "path_loss " << fmt_double(chan.path_loss) << '\n';
    os << "rician_factor " << fmt_double(chan.rician_factor) << '\n';
    os << "noise_power " << fmt_double(chan.noise_power) << '\n';
    os << "tx_power " << fmt_double(chan.tx_power) << '\n';
    os << "seed " << chan.seed << '\n';
    for (const auto& h : chan.h) {
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                os << fmt_double(h(i, j).real()) << ' ' << fmt_double(h(i, j).imag()) << '\n';
            }
        }
    }
}

namespace {

double read_named(std::istream& is, const char* name) {
    std::string key;
    std::string value;
    if (!(is >> key >> value) || key != name) {
        throw std::runtime_error(std::string("read_channel: expected field '") + name + "'");
    }
    return parse_double(value);
}

}  // namespace

ChannelRealization read_channel(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "emnn-channel" || version != 1) {
        throw std::runtime_error("read_channel: not an emnn-channel v1 stream");
    }
    int k = 0, m = 0, n = 0;
    if (!(is >> k >> m >> n) || k < 1 || m < 1 || n < 1) throw std::runtime_error("read_channel: bad dimensions");

    ChannelRealization out;
    out.path_loss = read_named(is, "path_loss");
    out.rician_factor = read_named(is, "rician_factor");
    out.noise_power = read_named(is, "noise_power");
    out.tx_power = read_named(is, "tx_power");
    std::string key;
    if (!(is >> key >> out.seed) || key != "seed") throw std::runtime_error("read_channel: expected field 'seed'");

    std::string re, im;
    for (int s = 0; s < k; ++s) {
        CMatrix h(m, n);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                if (!(is >> re >> im)) throw std::runtime_error("read_channel: truncated matrix data");
                h(i, j) = cplx(parse_double(re), parse_double(im));
            }
        }
        out.h.push_back(std::move(h));
    }
    return out;
}

}  // namespace emnn::channel
