#include "emnn/wavegeom.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace emnn::wavegeom {

void SimGeometry::validate() const {
    if (!(wavelength > 0.0)) throw std::invalid_argument("geometry: wavelength must be positive");
    if (!(atom_area > 0.0)) throw std::invalid_argument("geometry: atom_area must be positive");
    if (n_row < 1 || n_col < 1) throw std::invalid_argument("geometry: atom grid must be at least 1x1");
    if (num_layers < 2) throw std::invalid_argument("geometry: need at least 2 layers");
    if (!(thickness > 0.0)) throw std::invalid_argument("geometry: thickness must be positive");
    if (!(atom_spacing > 0.0)) throw std::invalid_argument("geometry: atom_spacing must be positive");
}

void UpaLayout::validate() const {
    if (m_x < 1 || m_y < 1) throw std::invalid_argument("upa: element counts must be >= 1");
}

double distance(const Point3& a, const Point3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::vector<Point3> atom_positions(const SimGeometry& geom, int layer_index) {
    geom.validate();
    if (layer_index < 1 || layer_index > geom.num_layers) {
        throw std::out_of_range("atom_positions: layer_index " + std::to_string(layer_index) +
                                " outside 1.." + std::to_string(geom.num_layers));
    }
    const double z = (layer_index - 1) * geom.layer_gap();
    const double x0 = 0.5 * (geom.n_row - 1);
    const double y0 = 0.5 * (geom.n_col - 1);
    std::vector<Point3> out;
    out.reserve(geom.atoms());
    for (int r = 0; r < geom.n_row; ++r) {
        for (int c = 0; c < geom.n_col; ++c) {
            out.push_back({(r - x0) * geom.atom_spacing, (c - y0) * geom.atom_spacing, z});
        }
    }
    return out;
}

cplx diffraction_coefficient(const SimGeometry& geom, double d) {
    if (!(d > 0.0)) throw std::invalid_argument("diffraction_coefficient: distance must be positive");
    const double lambda = geom.wavelength;
    const double gap = geom.layer_gap() / lambda;
    const double area = geom.atom_area / (lambda * lambda);
    const double dist = d / lambda;
    const cplx bracket = 1.0 / (2.0 * kPi) + dist / kJ;
    return (gap * area / (dist * dist)) * bracket * std::exp(kJ * (2.0 * kPi * dist));
}

CMatrix interlayer_matrix(const SimGeometry& geom) {
    const auto src = atom_positions(geom, 1);
    const auto dst = atom_positions(geom, 2);
    const int n = geom.atoms();
    CMatrix w(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) w(i, j) = diffraction_coefficient(geom, distance(dst[i], src[j]));
    }
    return w;
}

CVector tx_propagation_vector(const SimGeometry& geom) {
    const auto atoms = atom_positions(geom, 1);
    const Point3 feed{0.0, 0.0, -geom.layer_gap()};
    CVector w(geom.atoms());
    for (int i = 0; i < geom.atoms(); ++i) w[i] = diffraction_coefficient(geom, distance(atoms[i], feed));
    return w;
}

ElectricalAngles electrical_angles(const ArrivalAngles& angles, double spacing, double wavelength) {
    const double scale = 2.0 * kPi * spacing / wavelength * std::sin(angles.elevation);
    return {scale * std::cos(angles.azimuth), scale * std::sin(angles.azimuth)};
}

CVector steering_vector(const ElectricalAngles& eta, int m_x, int m_y) {
    if (m_x < 1 || m_y < 1) throw std::invalid_argument("steering_vector: element counts must be >= 1");
    CVector b(m_x * m_y);
    for (int i = 0; i < m_x; ++i) {
        for (int k = 0; k < m_y; ++k) b[i * m_y + k] = std::exp(kJ * (eta.x * i + eta.y * k));
    }
    return b;
}

CVector steering_vector(const ElectricalAngles& eta, const UpaLayout& layout) {
    return steering_vector(eta, layout.m_x, layout.m_y);
}

}  // namespace emnn::wavegeom
