#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "emnn/random.hpp"
#include "emnn/types.hpp"
#include "emnn/wavegeom.hpp"

namespace emnn::channel {

double db_to_linear(double db);
// dBm to watts.
double dbm_to_watts(double dbm);

// Angles of one UAV link: arrival at the ground station, departure from the
// SIM output layer.
struct LinkAngles {
    wavegeom::ArrivalAngles grs;
    wavegeom::ArrivalAngles sim;
};

// mu ~ U[0, 2pi), beta ~ U[0, pi/2] for both ends of every link.
std::vector<LinkAngles> draw_link_angles(Rng& rng, int num_links);

/// Link budget and geometry of the UAV-to-ground channels, in linear units.
/// Conversion from dB/dBm happens when the experiment config is parsed.
struct ChannelConfig {
    double rician_factor = 1.9952623149688795;  // 3 dB
    double pathloss_ref = 3.1622776601683794e-4;  // -35 dB at 1 m
    double pathloss_exponent = 2.5;
    double distance = 100.0;  // m
    double noise_power = 3.981071705534969e-14;  // W (-104 dBm)
    double tx_power = 1e-2;  // W (10 dBm)
    std::vector<LinkAngles> links;  // one per SIM

    void validate() const;
};

// Omega = C0 * D^-rho.
double path_loss(const ChannelConfig& cfg);

// H_LoS = b_R b_S^H, with b_S built on the SIM output layer's atom grid.
CMatrix los_component(const wavegeom::ArrivalAngles& grs_angles, const wavegeom::ArrivalAngles& sim_angles,
                      const wavegeom::UpaLayout& grs, const wavegeom::SimGeometry& geom);

// i.i.d. CN(0, 1) entries, drawn column-major: real part then imaginary part.
CMatrix sample_nlos(Rng& rng, int rows, int cols);

// i.i.d. CN(0, noise_power) entries.
CVector sample_noise(Rng& rng, double noise_power, int size);

struct ChannelRealization {
    std::vector<CMatrix> h;  // one M x N matrix per SIM
    double path_loss = 0.0;
    double rician_factor = 0.0;
    double noise_power = 0.0;
    double tx_power = 0.0;
    std::uint64_t seed = 0;

    int num_sims() const { return static_cast<int>(h.size()); }
    int rows() const { return h.empty() ? 0 : static_cast<int>(h.front().rows()); }
    int cols() const { return h.empty() ? 0 : static_cast<int>(h.front().cols()); }
};

/// One quasi-static realization per SIM:
///
///     H^k = sqrt(Omega / (1 + Z)) (sqrt(Z) H_LoS^k + H_NLoS^k)
///
/// SIM k draws its scattering from the stream derive_seed(seed, {k}), so the
/// result does not depend on how many SIMs are realized or in what order.
ChannelRealization realize_channel(const ChannelConfig& cfg, const wavegeom::SimGeometry& geom,
                                   const wavegeom::UpaLayout& grs, std::uint64_t seed);

// Text dump: header line "emnn-channel 1", then "K M N", the scalars, and
// each matrix as M*N row-major "re im" lines at full precision.
void write_channel(std::ostream& os, const ChannelRealization& chan);
ChannelRealization read_channel(std::istream& is);

}  // namespace emnn::channel
