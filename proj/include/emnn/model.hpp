#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "emnn/channel.hpp"
#include "emnn/image.hpp"
#include "emnn/random.hpp"
#include "emnn/types.hpp"
#include "emnn/wavegeom.hpp"

namespace emnn::model {

enum class CombiningMode { PreDetection, PostDetection };

CombiningMode parse_combining(std::string_view s);  // "pre" | "post"
std::string_view to_string(CombiningMode mode);

/// Trainable amplitude/phase of layers 2..L of every SIM.
///
/// Storage is flat, SIM-major then layer then atom, so one SIM's coefficients
/// are a contiguous block (the per-UAV partition used when gradients are
/// handed back to each transmitter).
class SimParameters {
public:
    SimParameters() = default;
    SimParameters(int num_sims, int num_layers, int atoms);

    int num_sims() const { return num_sims_; }
    int num_layers() const { return num_layers_; }
    int atoms() const { return atoms_; }
    int trainable_layers() const { return num_layers_ - 1; }
    std::size_t size() const { return alpha_.size(); }

    // Offset of layer `layer` (2..L) of SIM k in the flat arrays.
    std::size_t offset(int k, int layer) const;

    std::span<double> alpha(int k, int layer) { return {alpha_.data() + offset(k, layer), std::size_t(atoms_)}; }
    std::span<const double> alpha(int k, int layer) const {
        return {alpha_.data() + offset(k, layer), std::size_t(atoms_)};
    }
    std::span<double> theta(int k, int layer) { return {theta_.data() + offset(k, layer), std::size_t(atoms_)}; }
    std::span<const double> theta(int k, int layer) const {
        return {theta_.data() + offset(k, layer), std::size_t(atoms_)};
    }

    std::vector<double>& alpha_data() { return alpha_; }
    const std::vector<double>& alpha_data() const { return alpha_; }
    std::vector<double>& theta_data() { return theta_; }
    const std::vector<double>& theta_data() const { return theta_; }

    // psi = alpha * exp(j theta) for one layer.
    CVector psi(int k, int layer) const;

    // Throws if any alpha is outside [0, 1] or any value is non-finite.
    void validate() const;

private:
    int num_sims_ = 0;
    int num_layers_ = 0;
    int atoms_ = 0;
    std::vector<double> alpha_;
    std::vector<double> theta_;
};

// Diagonal of the (non-trainable) source encoding layer.
struct EntryLayer {
    CVector diag;
};

// Phase encoding exp(j 2 pi p) with unit amplitude. Image rows/cols map onto
// atom rows/cols; pixel values must lie in [0, 1].
EntryLayer encode_source_gray(const Image& image);

// psi = (Y + j (Cb + Cr) / 2) / sqrt(2), so |psi| <= 1.
EntryLayer encode_source_color(const Image& y, const Image& cb, const Image& cr);

// Geometry-derived propagation operators shared by all SIMs.
struct Propagation {
    CMatrix w;
    CMatrix w_adj;
    CVector w1;
    int num_layers = 0;
};

Propagation make_propagation(const wavegeom::SimGeometry& geom);

// G = Psi_L W ... Psi_2 W, materialized. Training never calls this.
CMatrix cascade(const SimParameters& params, int k, const CMatrix& w);

// G v via matrix-vector products.
CVector apply_cascade(const SimParameters& params, int k, const CMatrix& w, const CVector& v);

struct SimTrace {
    // output[0] = Psi_1 w_1; output[i] = Psi_{i+1} incident[i-1] for i >= 1.
    std::vector<CVector> output;
    // incident[i] = W output[i], the field arriving at layer i + 2.
    std::vector<CVector> incident;
    CVector noise;
    CVector x;  // received vector including noise
};

struct ForwardTrace {
    std::vector<SimTrace> sims;
    RVector power;  // y-hat
    RVector probs;  // c
    double temperature = 1.0;
    CombiningMode mode = CombiningMode::PostDetection;
};

/// Runs every SIM for one sample:
///
///     x^k = sqrt(p_t) H^k G^k Psi_1^k w_1 + n^k
///
/// then combines and applies the temperature softmax. Noise is drawn from
/// `rng`, SIM by SIM, and skipped entirely when the noise power is zero.
ForwardTrace forward(const SimParameters& params, std::span<const EntryLayer> entries,
                     const channel::ChannelRealization& chan, const Propagation& prop, CombiningMode mode,
                     double temperature, Rng& rng);

// Pre: |sum_k x^k|^2, post: sum_k |x^k|^2, both elementwise.
RVector combine(std::span<const CVector> x, CombiningMode mode);

// exp(y/T) / sum exp(y/T) with max-subtraction.
RVector temperature_softmax(const RVector& power, double temperature);

// -log c[label].
double cross_entropy(const RVector& probs, int label);

// log-sum-exp form of cross_entropy(temperature_softmax(power, T), label);
// stays finite when the label probability underflows.
double softmax_cross_entropy(const RVector& power, double temperature, int label);

// Index of the largest entry; ties go to the lowest index.
int classify(const RVector& power);

/// Model checkpoint, plain text:
///
///     emnn-checkpoint
///     format_version 1
///     K <sims> L <layers> N <atoms>
///     temperature <T>
///     alpha
///     <one line per (k, layer), N values>
///     theta
///     <one line per (k, layer), N values>
///
/// Values use the shortest round-trip decimal form.
struct Checkpoint {
    SimParameters params;
    double temperature = 1.0;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

}  // namespace emnn::model
