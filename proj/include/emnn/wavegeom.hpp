#pragma once

#include <vector>

#include "emnn/types.hpp"

namespace emnn::wavegeom {

/// Physical layout of one stacked metasurface. All lengths in meters.
///
/// Meta-atoms are indexed row-major: atom n = r * n_col + c, where the row
/// index r runs along the local x-axis and the column index c along y. The
/// same ordering is used by the output-layer steering vector, so the
/// Kronecker structure of a planar array lines up with the atom indices.
struct SimGeometry {
    double wavelength = 1e-3;
    double atom_area = 1e-6;
    int n_row = 11;
    int n_col = 11;
    double atom_spacing = 1e-3;
    int num_layers = 4;
    double thickness = 1e-2;

    int atoms() const { return n_row * n_col; }
    double layer_gap() const { return thickness / (num_layers - 1); }

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

/// Uniform planar array of m_x * m_y elements with spacing d (meters).
struct UpaLayout {
    int m_x = 1;
    int m_y = 1;
    double spacing = 5e-4;

    int size() const { return m_x * m_y; }
    void validate() const;
};

// Azimuth in [0, 2pi), elevation in [0, pi/2].
struct ArrivalAngles {
    double azimuth = 0.0;
    double elevation = 0.0;
};

struct ElectricalAngles {
    double x = 0.0;
    double y = 0.0;
};

struct Point3 {
    double x, y, z;
};

double distance(const Point3& a, const Point3& b);

// Centered grid with pitch atom_spacing at z = (layer_index - 1) * layer_gap.
// layer_index is 1-based.
std::vector<Point3> atom_positions(const SimGeometry& geom, int layer_index);

/// Rayleigh-Sommerfeld coupling coefficient between two meta-atoms at
/// separation d:
///
///     w = (d_L S / d^2) (1/(2 pi) + d/(j lambda)) exp(j 2 pi d / lambda)
///
/// The prefactor is not dimensionless, so the formula is evaluated with every
/// length expressed in wavelengths (d_L/lambda, S/lambda^2, d/lambda). This
/// makes the coefficient independent of the unit system.
cplx diffraction_coefficient(const SimGeometry& geom, double d);

// W[n, n*] couples atom n* on one layer to atom n on the next. Identical for
// every layer pair since the layers share one layout.
CMatrix interlayer_matrix(const SimGeometry& geom);

// Feed antenna on the stack axis, one layer gap in front of layer 1.
CVector tx_propagation_vector(const SimGeometry& geom);

ElectricalAngles electrical_angles(const ArrivalAngles& angles, double spacing, double wavelength);

// b = v_x (x) v_y with v_x[i] = exp(j eta_x i), i = 0..m_x-1 (likewise y).
CVector steering_vector(const ElectricalAngles& eta, int m_x, int m_y);
CVector steering_vector(const ElectricalAngles& eta, const UpaLayout& layout);

}  // namespace emnn::wavegeom
