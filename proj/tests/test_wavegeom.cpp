#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "emnn/wavegeom.hpp"
#include "test_util.hpp"

using namespace emnn;
using namespace emnn::wavegeom;

namespace {

SimGeometry grid(int rows, int cols, int layers = 2, double thickness = 1e-3) {
    SimGeometry g;
    g.n_row = rows;
    g.n_col = cols;
    g.num_layers = layers;
    g.thickness = thickness;
    return g;
}

// Independent scalar evaluation of the coupling formula with every length in
// wavelengths. Shares no code with the library.
cplx coupling_oracle(double gap, double area, double dist, double wavelength) {
    const double gl = gap / wavelength;
    const double al = area / (wavelength * wavelength);
    const double dl = dist / wavelength;
    const cplx bracket = cplx(1.0 / (2.0 * std::acos(-1.0)), 0.0) + cplx(dl, 0.0) / cplx(0.0, 1.0);
    return (gl * al / (dl * dl)) * bracket * std::polar(1.0, 2.0 * std::acos(-1.0) * dl);
}

// Brute-force W: atoms laid out by hand, row index along x.
CMatrix interlayer_oracle(const SimGeometry& g) {
    const int n = g.n_row * g.n_col;
    CMatrix w(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            const double dx = (a / g.n_col - b / g.n_col) * g.atom_spacing;
            const double dy = (a % g.n_col - b % g.n_col) * g.atom_spacing;
            const double dz = g.layer_gap();
            w(a, b) = coupling_oracle(g.layer_gap(), g.atom_area, std::sqrt(dx * dx + dy * dy + dz * dz), g.wavelength);
        }
    }
    return w;
}

}  // namespace

TEST_CASE("geometry validation rejects broken layouts") {
    SimGeometry g;
    CHECK_NOTHROW(g.validate());
    g.num_layers = 1;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = SimGeometry{};
    g.wavelength = 0.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = SimGeometry{};
    g.n_row = 0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = SimGeometry{};
    g.atom_area = -1.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = SimGeometry{};
    g.thickness = 0.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    UpaLayout u{0, 2, 5e-4};
    CHECK_THROWS_AS(u.validate(), std::invalid_argument);
}

TEST_CASE("atom positions") {
    SUBCASE("single atom sits at the origin") {
        const auto p = atom_positions(grid(1, 1), 1);
        REQUIRE(p.size() == 1);
        CHECK(p[0].x == 0.0);
        CHECK(p[0].y == 0.0);
        CHECK(p[0].z == 0.0);
    }
    SUBCASE("2x2 grid nearest-neighbour distance equals the pitch") {
        const auto g = grid(2, 2);
        const auto p = atom_positions(g, 1);
        REQUIRE(p.size() == 4);
        for (std::size_t i = 0; i < p.size(); ++i) {
            double nearest = 1e9;
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (i != j) nearest = std::min(nearest, distance(p[i], p[j]));
            }
            CHECK(nearest == doctest::Approx(g.wavelength).epsilon(1e-12));
        }
    }
    SUBCASE("3x3 centroid is the grid centre and z follows the layer") {
        const auto g = grid(3, 3, 4, 3e-3);
        const auto p = atom_positions(g, 3);
        double cx = 0, cy = 0;
        for (const auto& q : p) {
            cx += q.x;
            cy += q.y;
            CHECK(q.z == doctest::Approx(2 * g.layer_gap()));
        }
        CHECK(std::abs(cx / 9) < 1e-18);
        CHECK(std::abs(cy / 9) < 1e-18);
    }
    SUBCASE("row-major with rows along x") {
        const auto p = atom_positions(grid(2, 3), 1);
        CHECK(p[1].x == doctest::Approx(p[0].x));
        CHECK(p[1].y > p[0].y);
        CHECK(p[3].x > p[0].x);
        CHECK(p[3].y == doctest::Approx(p[0].y));
    }
    SUBCASE("layer index out of range") {
        CHECK_THROWS_AS(atom_positions(grid(2, 2), 0), std::out_of_range);
        CHECK_THROWS_AS(atom_positions(grid(2, 2), 3), std::out_of_range);
    }
}

TEST_CASE("diffraction coefficient closed form") {
    SimGeometry g = grid(1, 1, 2, 1e-3);  // lambda = 1 mm, S = 1 mm^2, gap = 1 mm
    const cplx w = diffraction_coefficient(g, 1e-3);
    const double re = 1.0 / (2.0 * kPi);
    CHECK(std::abs(w.real() - re) <= 1e-12 * re);
    CHECK(std::abs(w.imag() + 1.0) <= 1e-12);
}

TEST_CASE("diffraction coefficient depends on distance only") {
    const auto g = grid(3, 3, 3, 2e-3);
    CHECK(diffraction_coefficient(g, 1.7e-3) == diffraction_coefficient(g, 1.7e-3));
    const auto p = atom_positions(g, 1);
    const auto q = atom_positions(g, 2);
    // Atoms 0 and 2 on the first layer are both one column step from atom 1 on the next.
    const double d0 = distance(p[0], q[1]);
    const double d2 = distance(p[2], q[1]);
    CHECK(d0 == d2);
    CHECK(diffraction_coefficient(g, d0) == diffraction_coefficient(g, d2));
}

TEST_CASE("diffraction coefficient magnitude decreases with distance") {
    const SimGeometry g;
    // Dense sweep from a hundredth of a wavelength to fifty wavelengths.
    double prev = std::abs(diffraction_coefficient(g, 1e-5));
    for (double d = 1.0001e-5; d < 5e-2; d *= 1.0005) {
        const double cur = std::abs(diffraction_coefficient(g, d));
        REQUIRE(cur < prev);
        prev = cur;
    }
    // |w|^2 = (gS)^2 d^-4 (1/4pi^2 + d^2) in wavelength units; check the shape.
    for (double d : {0.3e-3, 1e-3, 7.5e-3}) {
        const double gl = g.layer_gap() / g.wavelength;
        const double dl = d / g.wavelength;
        const double expect = gl * gl / std::pow(dl, 4) * (1.0 / (4 * kPi * kPi) + dl * dl);
        CHECK(std::norm(diffraction_coefficient(g, d)) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("diffraction coefficient rejects non-positive distance") {
    const SimGeometry g;
    CHECK_THROWS_AS(diffraction_coefficient(g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(diffraction_coefficient(g, -1e-3), std::invalid_argument);
}

TEST_CASE("interlayer matrix") {
    SUBCASE("single atom") {
        const auto g = grid(1, 1, 3, 2e-3);
        const CMatrix w = interlayer_matrix(g);
        REQUIRE(w.rows() == 1);
        CHECK(w(0, 0) == diffraction_coefficient(g, g.layer_gap()));
    }
    SUBCASE("3x3 element-wise oracle") {
        const auto g = grid(3, 3, 2, 1e-3);
        const CMatrix w = interlayer_matrix(g);
        for (int a = 0; a < 9; ++a) {
            for (int b = 0; b < 9; ++b) {
                const auto p = atom_positions(g, 1);
                const auto q = atom_positions(g, 2);
                CHECK(std::abs(w(a, b) - diffraction_coefficient(g, distance(p[b], q[a]))) < 1e-14);
            }
        }
        CHECK((w - interlayer_oracle(g)).norm() <= 1e-12 * w.norm());
    }
    SUBCASE("matches brute force on every grid up to 5x5 and is symmetric") {
        for (int r = 1; r <= 5; ++r) {
            for (int c = 1; c <= 5; ++c) {
                auto g = grid(r, c, 4, 1e-2);
                const CMatrix w = interlayer_matrix(g);
                CAPTURE(r);
                CAPTURE(c);
                CHECK((w - interlayer_oracle(g)).norm() <= 1e-12 * w.norm());
                CHECK((w - w.transpose()).norm() == 0.0);
            }
        }
    }
    SUBCASE("relabelling atoms permutes rows and columns consistently") {
        const auto g = grid(3, 4, 3, 4e-3);
        const CMatrix w = interlayer_matrix(g);
        Rng rng(7);
        std::vector<int> perm(12);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 11; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

        const auto p = atom_positions(g, 1);
        const auto q = atom_positions(g, 2);
        for (int a = 0; a < 12; ++a) {
            for (int b = 0; b < 12; ++b) {
                const cplx relabeled = diffraction_coefficient(g, distance(p[perm[b]], q[perm[a]]));
                CHECK(relabeled == w(perm[a], perm[b]));
            }
        }
    }
}

TEST_CASE("transmit propagation vector") {
    SUBCASE("single axial atom") {
        const auto g = grid(1, 1, 3, 2e-3);
        const CVector w1 = tx_propagation_vector(g);
        REQUIRE(w1.size() == 1);
        CHECK(w1[0] == diffraction_coefficient(g, g.layer_gap()));
    }
    SUBCASE("centre atom is strongest on an odd grid") {
        const SimGeometry g;
        const CVector w1 = tx_propagation_vector(g);
        const int centre = (g.n_row / 2) * g.n_col + g.n_col / 2;
        for (int n = 0; n < w1.size(); ++n) {
            if (n != centre) CHECK(std::abs(w1[n]) < std::abs(w1[centre]));
        }
    }
    SUBCASE("3x3 four-fold symmetry") {
        const auto g = grid(3, 3, 2, 1e-3);
        const CVector w1 = tx_propagation_vector(g);
        CHECK(w1[1] == w1[3]);
        CHECK(w1[3] == w1[5]);
        CHECK(w1[5] == w1[7]);
        CHECK(w1[0] == w1[2]);
        CHECK(w1[2] == w1[6]);
        CHECK(w1[6] == w1[8]);
    }
}

TEST_CASE("electrical angles") {
    const double lam = 1e-3;
    auto e = electrical_angles({1.3, 0.0}, lam / 2, lam);
    CHECK(e.x == 0.0);
    CHECK(e.y == 0.0);
    e = electrical_angles({0.0, kPi / 2}, lam / 2, lam);
    CHECK(e.x == doctest::Approx(kPi).epsilon(1e-15));
    CHECK(std::abs(e.y) < 1e-15);
    e = electrical_angles({kPi / 2, kPi / 2}, lam / 2, lam);
    CHECK(std::abs(e.x) < 1e-15);
    CHECK(e.y == doctest::Approx(kPi).epsilon(1e-15));
}

TEST_CASE("steering vector") {
    SUBCASE("zero phase progression gives all ones") {
        const CVector b = steering_vector({0.0, 0.0}, 5, 2);
        REQUIRE(b.size() == 10);
        for (int i = 0; i < 10; ++i) CHECK(b[i] == cplx(1.0, 0.0));
    }
    SUBCASE("two elements at pi") {
        const CVector b = steering_vector({kPi, 0.0}, 2, 1);
        CHECK(b[0] == cplx(1.0, 0.0));
        CHECK(std::abs(b[1] - cplx(-1.0, 0.0)) < 1e-15);
    }
    SUBCASE("Kronecker ordering: x index is the slow one") {
        const CVector b = steering_vector({0.3, 0.7}, 3, 4);
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 4; ++k) {
                CHECK(std::abs(b[i * 4 + k] - std::polar(1.0, 0.3 * i + 0.7 * k)) < 1e-14);
            }
        }
    }
    SUBCASE("unit modulus and squared norm M for random angles") {
        Rng rng(11);
        for (int t = 0; t < 200; ++t) {
            const int mx = 1 + static_cast<int>(rng.below(8));
            const int my = 1 + static_cast<int>(rng.below(8));
            const ElectricalAngles eta{rng.uniform(-10, 10), rng.uniform(-10, 10)};
            const CVector b = steering_vector(eta, UpaLayout{mx, my, 5e-4});
            for (int i = 0; i < b.size(); ++i) REQUIRE(std::abs(std::abs(b[i]) - 1.0) < 1e-14);
            CHECK(b.squaredNorm() == doctest::Approx(mx * my).epsilon(1e-13));
        }
    }
}
