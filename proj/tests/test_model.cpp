#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "emnn/model.hpp"
#include "test_util.hpp"

using namespace emnn;
using namespace emnn::model;
using emnn::testing::random_cmatrix;
using emnn::testing::random_cvector;
using emnn::testing::random_image;

namespace {

wavegeom::SimGeometry small_geom(int side, int layers) {
    wavegeom::SimGeometry g;
    g.n_row = side;
    g.n_col = side;
    g.num_layers = layers;
    g.thickness = 2e-3 * (layers - 1);
    return g;
}

channel::ChannelRealization random_channel(Rng& rng, int k, int m, int n, double noise) {
    channel::ChannelRealization c;
    for (int i = 0; i < k; ++i) c.h.push_back(random_cmatrix(rng, m, n));
    c.path_loss = 1.0;
    c.tx_power = 0.25;
    c.noise_power = noise;
    return c;
}

SimParameters random_params(Rng& rng, int k, int layers, int n) {
    SimParameters p(k, layers, n);
    for (double& a : p.alpha_data()) a = rng.uniform();
    for (double& t : p.theta_data()) t = rng.uniform(0, 2 * kPi);
    return p;
}

std::vector<EntryLayer> random_entries(Rng& rng, int k, int side) {
    std::vector<EntryLayer> e;
    for (int i = 0; i < k; ++i) e.push_back(encode_source_gray(random_image(rng, side, side)));
    return e;
}

}  // namespace

TEST_CASE("combining mode names") {
    CHECK(parse_combining("pre") == CombiningMode::PreDetection);
    CHECK(parse_combining("post") == CombiningMode::PostDetection);
    CHECK(to_string(CombiningMode::PreDetection) == "pre");
    CHECK_THROWS_AS(parse_combining("both"), std::invalid_argument);
}

TEST_CASE("parameter layout") {
    SimParameters p(2, 4, 5);
    CHECK(p.size() == 2 * 3 * 5);
    CHECK(p.offset(0, 2) == 0);
    CHECK(p.offset(0, 3) == 5);
    CHECK(p.offset(1, 2) == 15);
    CHECK_THROWS(p.offset(0, 1));
    CHECK_THROWS(p.offset(2, 2));
    p.alpha(1, 3)[2] = 0.25;
    p.theta(1, 3)[2] = kPi;
    CHECK(p.alpha_data()[20 + 2] == 0.25);
    const CVector psi = p.psi(1, 3);
    CHECK(std::abs(psi[2] - cplx(-0.25, 0.0)) < 1e-15);
    CHECK_NOTHROW(p.validate());
    p.alpha(0, 2)[0] = 1.5;
    CHECK_THROWS(p.validate());
}

TEST_CASE("grayscale source encoding") {
    SUBCASE("zero image is the identity") {
        const auto e = encode_source_gray(Image(3, 3, 0.0));
        CHECK(e.diag == CVector::Ones(9));
    }
    SUBCASE("half intensity flips the sign") {
        Image im(1, 2, 0.0);
        im.at(0, 1) = 0.5;
        const auto e = encode_source_gray(im);
        CHECK(std::abs(e.diag[1] - cplx(-1.0, 0.0)) < 1e-15);
    }
    SUBCASE("unit modulus for random images, atom order follows pixels") {
        Rng rng(4);
        const Image im = random_image(rng, 4, 5);
        const auto e = encode_source_gray(im);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 5; ++c) {
                const cplx v = e.diag[r * 5 + c];
                CHECK(std::abs(std::abs(v) - 1.0) < 1e-15);
                CHECK(std::abs(v - std::polar(1.0, 2 * kPi * im.at(r, c))) < 1e-15);
            }
        }
    }
    SUBCASE("out-of-range pixels are rejected") {
        Image im(2, 2, 0.0);
        im.at(1, 1) = 1.01;
        CHECK_THROWS_AS(encode_source_gray(im), std::domain_error);
        im.at(1, 1) = -0.01;
        CHECK_THROWS_AS(encode_source_gray(im), std::domain_error);
    }
}

TEST_CASE("colour source encoding") {
    const Image zero(2, 2, 0.0);
    const Image one(2, 2, 1.0);
    CHECK(encode_source_color(zero, zero, zero).diag.isZero(0.0));
    const auto e = encode_source_color(one, zero, zero);
    CHECK(e.diag[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(e.diag[0].imag() == 0.0);
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const auto f = encode_source_color(random_image(rng, 3, 3), random_image(rng, 3, 3), random_image(rng, 3, 3));
        for (int i = 0; i < 9; ++i) CHECK(std::abs(f.diag[i]) <= 1.0 + 1e-15);
    }
    CHECK(std::abs(encode_source_color(one, one, one).diag[0]) == doctest::Approx(1.0));
    Image bad = one;
    bad.at(0, 0) = 2.0;
    CHECK_THROWS_AS(encode_source_color(one, bad, zero), std::domain_error);
    CHECK_THROWS_AS(encode_source_color(one, Image(3, 3), zero), std::invalid_argument);
}

TEST_CASE("cascade") {
    Rng rng(10);
    SUBCASE("identity layers, L=2, give W") {
        const CMatrix w = random_cmatrix(rng, 4, 4);
        SimParameters p(1, 2, 4);
        CHECK((cascade(p, 0, w) - w).norm() == 0.0);
    }
    SUBCASE("linear in each amplitude") {
        const CMatrix w = random_cmatrix(rng, 4, 4);
        SimParameters p = random_params(rng, 1, 3, 4);
        const CMatrix g0 = cascade(p, 0, w);
        for (double& a : p.alpha(0, 3)) a *= 0.3;
        CHECK((cascade(p, 0, w) - 0.3 * g0).norm() <= 1e-14 * g0.norm());
    }
    SUBCASE("single atom, L=3, matches scalar hand computation") {
        for (int t = 0; t < 20; ++t) {
            const cplx w(rng.normal(), rng.normal());
            SimParameters p = random_params(rng, 1, 3, 1);
            const cplx psi2 = std::polar(p.alpha(0, 2)[0], p.theta(0, 2)[0]);
            const cplx psi3 = std::polar(p.alpha(0, 3)[0], p.theta(0, 3)[0]);
            const CMatrix g = cascade(p, 0, CMatrix::Constant(1, 1, w));
            CHECK(std::abs(g(0, 0) - psi3 * w * psi2 * w) < 1e-14);
        }
    }
    SUBCASE("matrix-vector application equals the explicit product, N <= 25") {
        for (int n = 1; n <= 25; n += 3) {
            for (int layers = 2; layers <= 5; ++layers) {
                const CMatrix w = random_cmatrix(rng, n, n);
                const SimParameters p = random_params(rng, 2, layers, n);
                const CVector v = random_cvector(rng, n);
                for (int k = 0; k < 2; ++k) {
                    const CVector explicit_gv = cascade(p, k, w) * v;
                    const CVector applied = apply_cascade(p, k, w, v);
                    CHECK((applied - explicit_gv).norm() <= 1e-10 * explicit_gv.norm());
                }
            }
        }
    }
}

TEST_CASE("trainable layers never amplify a field") {
    Rng rng(12);
    for (int t = 0; t < 200; ++t) {
        const SimParameters p = random_params(rng, 1, 2, 16);
        const CVector v = random_cvector(rng, 16);
        CHECK((p.psi(0, 2).array() * v.array()).matrix().norm() <= v.norm() * (1 + 1e-15));
    }
}

TEST_CASE("forward pass") {
    Rng rng(20);
    const auto geom = small_geom(3, 2);
    const Propagation prop = make_propagation(geom);

    SUBCASE("noise-free single SIM with identity layers matches dense arithmetic") {
        const auto chan = random_channel(rng, 1, 4, 9, 0.0);
        const SimParameters p(1, 2, 9);
        const auto entries = random_entries(rng, 1, 3);
        Rng noise(1);
        const auto tr = forward(p, entries, chan, prop, CombiningMode::PostDetection, 1.0, noise);
        const CMatrix w = wavegeom::interlayer_matrix(geom);
        const CVector w1 = wavegeom::tx_propagation_vector(geom);
        const CVector expect = std::sqrt(chan.tx_power) * chan.h[0] * w * (entries[0].diag.asDiagonal() * w1);
        CHECK((tr.sims[0].x - expect).norm() <= 1e-12 * expect.norm());
        CHECK(tr.power.isApprox(expect.cwiseAbs2(), 1e-12));
        CHECK(tr.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("a dark layer silences the SIM") {
        const auto g3 = small_geom(3, 3);
        const auto prop3 = make_propagation(g3);
        const auto chan = random_channel(rng, 2, 4, 9, 0.0);
        SimParameters p = random_params(rng, 2, 3, 9);
        for (double& a : p.alpha(1, 2)) a = 0.0;
        const auto entries = random_entries(rng, 2, 3);
        Rng noise(1);
        const auto tr = forward(p, entries, chan, prop3, CombiningMode::PreDetection, 1.0, noise);
        CHECK(tr.sims[1].x.isZero(0.0));
        CHECK(!tr.sims[0].x.isZero(0.0));
    }
    SUBCASE("deterministic for a fixed seed, noise included") {
        const auto chan = random_channel(rng, 2, 4, 9, 0.1);
        const SimParameters p = random_params(rng, 2, 2, 9);
        const auto entries = random_entries(rng, 2, 3);
        Rng a(5), b(5);
        const auto ta = forward(p, entries, chan, prop, CombiningMode::PostDetection, 2.0, a);
        const auto tb = forward(p, entries, chan, prop, CombiningMode::PostDetection, 2.0, b);
        CHECK(ta.power == tb.power);
        CHECK(ta.sims[1].noise == tb.sims[1].noise);
        CHECK(!ta.sims[1].noise.isZero(0.0));
    }
    SUBCASE("dimension mismatches are rejected") {
        const auto chan = random_channel(rng, 2, 4, 9, 0.0);
        const SimParameters p = random_params(rng, 2, 2, 9);
        const auto one_entry = random_entries(rng, 1, 3);
        Rng noise(1);
        CHECK_THROWS_AS(forward(p, one_entry, chan, prop, CombiningMode::PostDetection, 1.0, noise),
                        std::invalid_argument);
        const auto wrong_n = random_channel(rng, 2, 4, 16, 0.0);
        const auto entries = random_entries(rng, 2, 3);
        CHECK_THROWS_AS(forward(p, entries, wrong_n, prop, CombiningMode::PostDetection, 1.0, noise),
                        std::invalid_argument);
    }
}

TEST_CASE("combining") {
    Rng rng(30);
    const CVector x1 = random_cvector(rng, 5);
    SUBCASE("single SIM: both modes agree") {
        const std::vector<CVector> xs{x1};
        CHECK(combine(xs, CombiningMode::PreDetection) == combine(xs, CombiningMode::PostDetection));
        CHECK(combine(xs, CombiningMode::PostDetection).isApprox(RVector(x1.cwiseAbs2()), 1e-15));
    }
    SUBCASE("opposite signals cancel coherently but not incoherently") {
        const std::vector<CVector> xs{x1, -x1};
        CHECK(combine(xs, CombiningMode::PreDetection).isZero(0.0));
        CHECK(combine(xs, CombiningMode::PostDetection).isApprox(RVector(2.0 * x1.cwiseAbs2()), 1e-15));
    }
    SUBCASE("both are non-negative") {
        for (int t = 0; t < 50; ++t) {
            const std::vector<CVector> xs{random_cvector(rng, 5), random_cvector(rng, 5), random_cvector(rng, 5)};
            CHECK(combine(xs, CombiningMode::PreDetection).minCoeff() >= 0.0);
            CHECK(combine(xs, CombiningMode::PostDetection).minCoeff() >= 0.0);
        }
    }
    SUBCASE("no SIMs or ragged lengths are errors") {
        CHECK_THROWS_AS(combine(std::vector<CVector>{}, CombiningMode::PostDetection), std::invalid_argument);
        const std::vector<CVector> ragged{x1, random_cvector(rng, 4)};
        CHECK_THROWS_AS(combine(ragged, CombiningMode::PreDetection), std::invalid_argument);
    }
}

TEST_CASE("temperature softmax") {
    CHECK(temperature_softmax(RVector::Constant(10, 3.0), 0.7).isApprox(RVector::Constant(10, 0.1), 1e-15));
    RVector y(2);
    y << 1.0, 0.0;
    const RVector c = temperature_softmax(y, 1.0);
    const double e = std::exp(1.0);
    CHECK(c[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
    CHECK(c[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-14));
    CHECK(c[0] == doctest::Approx(0.7311).epsilon(1e-4));

    Rng rng(40);
    for (int t = 0; t < 300; ++t) {
        RVector p(10);
        for (int i = 0; i < 10; ++i) p[i] = std::pow(10.0, rng.uniform(-14, -6));
        const double temp = std::pow(10.0, rng.uniform(-16, -4));
        const RVector probs = temperature_softmax(p, temp);
        CHECK(std::abs(probs.sum() - 1.0) <= 1e-12);
        CHECK(probs.allFinite());
        CHECK(classify(probs) == classify(p));
    }
    CHECK_THROWS_AS(temperature_softmax(y, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(temperature_softmax(y, -1.0), std::invalid_argument);
}

TEST_CASE("cross entropy") {
    RVector onehot = RVector::Zero(4);
    onehot[2] = 1.0;
    CHECK(cross_entropy(onehot, 2) == 0.0);
    CHECK(cross_entropy(RVector::Constant(10, 0.1), 3) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
    RVector half(3);
    half << 0.25, 0.5, 0.25;
    CHECK(cross_entropy(half, 1) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK_THROWS(cross_entropy(half, 3));
    CHECK_THROWS(cross_entropy(onehot, 0));

    Rng rng(41);
    for (int t = 0; t < 100; ++t) {
        RVector p(10);
        for (int i = 0; i < 10; ++i) p[i] = rng.uniform();
        const double temp = rng.uniform(0.05, 2.0);
        const int label = static_cast<int>(rng.below(10));
        CHECK(softmax_cross_entropy(p, temp, label) ==
              doctest::Approx(cross_entropy(temperature_softmax(p, temp), label)).epsilon(1e-12));
    }
    RVector extreme(2);
    extreme << 1.0, 0.0;
    CHECK(softmax_cross_entropy(extreme, 1e-3, 1) == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("classify") {
    RVector y = RVector::Zero(10);
    y[6] = 1.0;
    CHECK(classify(y) == 6);
    CHECK(classify(RVector::Constant(10, 2.0)) == 0);
    Rng rng(42);
    for (int t = 0; t < 100; ++t) {
        RVector p(10);
        for (int i = 0; i < 10; ++i) p[i] = rng.uniform();
        CHECK(classify(p) == classify(RVector(p * rng.uniform(1e-12, 1e6))));
    }
}

TEST_CASE("checkpoint round trip") {
    Rng rng(50);
    Checkpoint ck{random_params(rng, 3, 4, 7), 3.3e-6};
    std::stringstream ss;
    write_checkpoint(ss, ck);
    const Checkpoint back = read_checkpoint(ss);
    CHECK(back.temperature == ck.temperature);
    CHECK(back.params.num_sims() == 3);
    CHECK(back.params.num_layers() == 4);
    CHECK(back.params.atoms() == 7);
    CHECK(back.params.alpha_data() == ck.params.alpha_data());
    CHECK(back.params.theta_data() == ck.params.theta_data());

    std::stringstream junk("emnn-checkpoint\nformat_version 9\n");
    CHECK_THROWS(read_checkpoint(junk));
    std::stringstream truncated(ss.str().substr(0, ss.str().size() / 2));
    CHECK_THROWS(read_checkpoint(truncated));
}
