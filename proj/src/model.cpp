#include "emnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "emnn/numfmt.hpp"

namespace emnn::model {

CombiningMode parse_combining(std::string_view s) {
    if (s == "pre") return CombiningMode::PreDetection;
    if (s == "post") return CombiningMode::PostDetection;
    throw std::invalid_argument("combining mode must be 'pre' or 'post', got '" + std::string(s) + "'");
}

std::string_view to_string(CombiningMode mode) {
    return mode == CombiningMode::PreDetection ? "pre" : "post";
}

SimParameters::SimParameters(int num_sims, int num_layers, int atoms)
    : num_sims_(num_sims), num_layers_(num_layers), atoms_(atoms) {
    if (num_sims < 1 || num_layers < 2 || atoms < 1) {
        throw std::invalid_argument("SimParameters: need K >= 1, L >= 2, N >= 1");
    }
    const std::size_t n = std::size_t(num_sims) * (num_layers - 1) * atoms;
    alpha_.assign(n, 1.0);
    theta_.assign(n, 0.0);
}

std::size_t SimParameters::offset(int k, int layer) const {
    if (k < 0 || k >= num_sims_ || layer < 2 || layer > num_layers_) {
        throw std::out_of_range("SimParameters: (sim " + std::to_string(k) + ", layer " + std::to_string(layer) +
                                ") out of range");
    }
    return (std::size_t(k) * (num_layers_ - 1) + (layer - 2)) * atoms_;
}

CVector SimParameters::psi(int k, int layer) const {
    const auto a = alpha(k, layer);
    const auto t = theta(k, layer);
    CVector out(atoms_);
    for (int n = 0; n < atoms_; ++n) out[n] = std::polar(a[n], t[n]);
    return out;
}

void SimParameters::validate() const {
    for (double a : alpha_) {
        if (!(a >= 0.0 && a <= 1.0)) throw std::domain_error("SimParameters: amplitude outside [0, 1]");
    }
    for (double t : theta_) {
        if (!std::isfinite(t)) throw std::domain_error("SimParameters: non-finite phase");
    }
}

EntryLayer encode_source_gray(const Image& image) {
    EntryLayer out{CVector(image.size())};
    for (std::size_t n = 0; n < image.size(); ++n) {
        const double p = image.pixels[n];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::domain_error("encode_source_gray: pixel " + std::to_string(n) + " outside [0, 1]");
        }
        out.diag[n] = std::polar(1.0, 2.0 * kPi * p);
    }
    return out;
}

EntryLayer encode_source_color(const Image& y, const Image& cb, const Image& cr) {
    if (y.size() != cb.size() || y.size() != cr.size()) {
        throw std::invalid_argument("encode_source_color: channel sizes differ");
    }
    const double norm = 1.0 / std::sqrt(2.0);
    EntryLayer out{CVector(y.size())};
    for (std::size_t n = 0; n < y.size(); ++n) {
        const double lum = y.pixels[n], b = cb.pixels[n], r = cr.pixels[n];
        if (!(lum >= 0.0 && lum <= 1.0 && b >= 0.0 && b <= 1.0 && r >= 0.0 && r <= 1.0)) {
            throw std::domain_error("encode_source_color: channel value outside [0, 1] at atom " + std::to_string(n));
        }
        out.diag[n] = norm * cplx(lum, 0.5 * (b + r));
    }
    return out;
}

Propagation make_propagation(const wavegeom::SimGeometry& geom) {
    Propagation p;
    p.w = wavegeom::interlayer_matrix(geom);
    p.w_adj = p.w.adjoint();
    p.w1 = wavegeom::tx_propagation_vector(geom);
    p.num_layers = geom.num_layers;
    return p;
}

CMatrix cascade(const SimParameters& params, int k, const CMatrix& w) {
    CMatrix g = CMatrix::Identity(w.rows(), w.cols());
    for (int layer = 2; layer <= params.num_layers(); ++layer) {
        g = params.psi(k, layer).asDiagonal() * (w * g);
    }
    return g;
}

CVector apply_cascade(const SimParameters& params, int k, const CMatrix& w, const CVector& v) {
    CVector field = v;
    for (int layer = 2; layer <= params.num_layers(); ++layer) {
        field = params.psi(k, layer).cwiseProduct(w * field);
    }
    return field;
}

RVector combine(std::span<const CVector> x, CombiningMode mode) {
    if (x.empty()) throw std::invalid_argument("combine: no signals");
    const Eigen::Index m = x.front().size();
    for (const auto& v : x) {
        if (v.size() != m) throw std::invalid_argument("combine: signal lengths differ");
    }
    if (mode == CombiningMode::PreDetection) {
        CVector sum = CVector::Zero(m);
        for (const auto& v : x) sum += v;
        return sum.cwiseAbs2();
    }
    RVector power = RVector::Zero(m);
    for (const auto& v : x) power += v.cwiseAbs2();
    return power;
}

RVector temperature_softmax(const RVector& power, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature_softmax: temperature must be positive");
    const RVector z = power / temperature;
    const RVector e = (z.array() - z.maxCoeff()).exp().matrix();
    return e / e.sum();
}

double cross_entropy(const RVector& probs, int label) {
    if (label < 0 || label >= probs.size()) throw std::out_of_range("cross_entropy: label out of range");
    if (!(probs[label] > 0.0)) throw std::domain_error("cross_entropy: zero probability at label");
    return -std::log(probs[label]);
}

double softmax_cross_entropy(const RVector& power, double temperature, int label) {
    if (label < 0 || label >= power.size()) throw std::out_of_range("softmax_cross_entropy: label out of range");
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax_cross_entropy: temperature must be positive");
    const RVector z = power / temperature;
    const double zmax = z.maxCoeff();
    return zmax + std::log((z.array() - zmax).exp().sum()) - z[label];
}

int classify(const RVector& power) {
    if (power.size() == 0) throw std::invalid_argument("classify: empty power vector");
    int best = 0;
    for (int m = 1; m < power.size(); ++m) {
        if (power[m] > power[best]) best = m;
    }
    return best;
}

ForwardTrace forward(const SimParameters& params, std::span<const EntryLayer> entries,
                     const channel::ChannelRealization& chan, const Propagation& prop, CombiningMode mode,
                     double temperature, Rng& rng) {
    const int num_sims = params.num_sims();
    if (static_cast<int>(entries.size()) != num_sims || chan.num_sims() != num_sims) {
        throw std::invalid_argument("forward: entry layers, channels and SIM parameters disagree on K");
    }
    if (prop.num_layers != params.num_layers() || prop.w.rows() != params.atoms() || chan.cols() != params.atoms()) {
        throw std::invalid_argument("forward: geometry and parameters disagree on L or N");
    }

    const double amp = std::sqrt(chan.tx_power);
    ForwardTrace trace;
    trace.mode = mode;
    trace.temperature = temperature;
    trace.sims.resize(num_sims);
    std::vector<CVector> received(num_sims);
    for (int k = 0; k < num_sims; ++k) {
        if (entries[k].diag.size() != params.atoms()) throw std::invalid_argument("forward: entry layer size != N");
        SimTrace& st = trace.sims[k];
        st.output.reserve(params.num_layers());
        st.incident.reserve(params.trainable_layers());
        st.output.push_back(entries[k].diag.cwiseProduct(prop.w1));
        for (int layer = 2; layer <= params.num_layers(); ++layer) {
            st.incident.push_back(prop.w * st.output.back());
            st.output.push_back(params.psi(k, layer).cwiseProduct(st.incident.back()));
        }
        st.noise = channel::sample_noise(rng, chan.noise_power, chan.rows());
        st.x = amp * (chan.h[k] * st.output.back()) + st.noise;
        received[k] = st.x;
    }
    trace.power = combine(received, mode);
    trace.probs = temperature_softmax(trace.power, temperature);
    return trace;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
    const auto& p = ckpt.params;
    os << "emnn-checkpoint\n";
    os << "format_version 1\n";
    os << "K " << p.num_sims() << " L " << p.num_layers() << " N " << p.atoms() << '\n';
    os << "temperature " << fmt_double(ckpt.temperature) << '\n';
    auto block = [&](const char* name, auto getter) {
        os << name << '\n';
        for (int k = 0; k < p.num_sims(); ++k) {
            for (int layer = 2; layer <= p.num_layers(); ++layer) {
                const auto values = getter(k, layer);
                for (std::size_t n = 0; n < values.size(); ++n) {
                    if (n) os << ' ';
                    os << fmt_double(values[n]);
                }
                os << '\n';
            }
        }
    };
    block("alpha", [&](int k, int l) { return p.alpha(k, l); });
    block("theta", [&](int k, int l) { return p.theta(k, l); });
}

Checkpoint read_checkpoint(std::istream& is) {
    auto expect = [&](const char* word) {
        std::string tok;
        if (!(is >> tok) || tok != word) {
            throw std::runtime_error(std::string("checkpoint: expected '") + word + "', got '" + tok + "'");
        }
    };
    expect("emnn-checkpoint");
    expect("format_version");
    int version = 0;
    if (!(is >> version) || version != 1) throw std::runtime_error("checkpoint: unsupported format_version");
    int k = 0, l = 0, n = 0;
    expect("K");
    is >> k;
    expect("L");
    is >> l;
    expect("N");
    is >> n;
    if (!is || k < 1 || l < 2 || n < 1) throw std::runtime_error("checkpoint: bad K/L/N header");
    expect("temperature");
    std::string tok;
    is >> tok;
    Checkpoint ckpt{SimParameters(k, l, n), parse_double(tok)};

    auto read_block = [&](const char* name, std::vector<double>& dst) {
        expect(name);
        for (double& v : dst) {
            if (!(is >> tok)) throw std::runtime_error(std::string("checkpoint: truncated '") + name + "' block");
            v = parse_double(tok);
        }
    };
    read_block("alpha", ckpt.params.alpha_data());
    read_block("theta", ckpt.params.theta_data());
    ckpt.params.validate();
    if (!(ckpt.temperature > 0.0)) throw std::runtime_error("checkpoint: temperature must be positive");
    return ckpt;
}

}  // namespace emnn::model
