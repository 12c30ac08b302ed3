#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <vector>

#include "shapegen/farfield.hpp"
#include "shapegen/geometry.hpp"

using namespace shapegen;
namespace ff = shapegen::farfield;
using namespace shapegen::geometry;
using ff::AdmissibleSet;
using ff::ShapeGenerator;
using ff::admissible_set;
using ff::c_const;
using ff::add_noise;

namespace {

// de-normalized integral I(xi) = values(xi) / C_{d,k}
std::vector<complexd> denorm(const ShapeGenerator& gen) {
    std::vector<complexd> I(gen.values.size());
    for (std::size_t e = 0; e < gen.values.size(); ++e)
        I[e] = gen.values[e] / c_const(gen.adm.d, gen.adm.entries[e].k);
    return I;
}

complexd box2_integral(double w, double h, double cx, double cy, double W1, double W2) {
    return ff::detail::box_axis_integral(W1, cx, w) * ff::detail::box_axis_integral(W2, cy, h);
}

bool bit_equal(const std::vector<complexd>& a, const std::vector<complexd>& b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(complexd)) == 0;
}

} // namespace

TEST_CASE("admissible set layout") {
    AdmissibleSet s = admissible_set(2, 2 * pi, 0.1, 1);
    REQUIRE(s.entries.size() == 9);
    // lexicographic, xi1 slowest
    CHECK(s.entries[0].xi[0] == -1);
    CHECK(s.entries[0].xi[1] == -1);
    CHECK(s.entries[1].xi[1] == 0);
    CHECK(s.entries[8].xi[0] == 1);

    const auto& e10 = s.entries[s.index_of({1, 0, 0})];
    CHECK(e10.k == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e10.xhat[0] == doctest::Approx(1.0));
    CHECK(e10.xhat[1] == 0.0);

    const auto& e00 = s.entries[s.index_of({0, 0, 0})];
    CHECK(e00.k == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(e00.xhat[0] == 1.0);

    // k * xhat reproduces (2*pi/a) * xi
    AdmissibleSet t = admissible_set(2, 3.7, 0.25, 4);
    for (const auto& e : t.entries) {
        if (e.xi[0] == 0 && e.xi[1] == 0) continue;
        for (int j = 0; j < 2; ++j)
            CHECK(e.k * e.xhat[j] == doctest::Approx(2 * pi / 3.7 * e.xi[j]).epsilon(1e-14));
    }

    CHECK(admissible_set(3, 1, 0.5, 19).entries.size() == 59319);

    CHECK_THROWS_AS(admissible_set(4, 1, 0.1, 1), config_error);
    CHECK_THROWS_AS(admissible_set(2, -1, 0.1, 1), config_error);
    CHECK_THROWS_AS(admissible_set(2, 1, 0.0, 1), config_error);
    CHECK_THROWS_AS(admissible_set(2, 1, 1.0, 1), config_error);
    CHECK_THROWS_AS(admissible_set(2, 1, 0.1, 0), config_error);
}

TEST_CASE("far-field constant") {
    complexd c2 = c_const(2, 0.7);
    CHECK(c2.real() == doctest::Approx(-0.141047395886939).epsilon(1e-12));
    CHECK(c2.imag() == doctest::Approx(-0.141047395886939).epsilon(1e-12));
    CHECK(std::abs(c_const(2, 3.1)) == doctest::Approx(1.0 / std::sqrt(8 * pi)).epsilon(1e-14));

    complexd c3 = c_const(3, 2 * pi);
    CHECK(c3.real() == doctest::Approx(-0.199471140200716).epsilon(1e-12));
    CHECK(std::abs(c3.imag()) < 1e-15);

    CHECK_THROWS_AS(c_const(2, 0.0), domain_error);
}

TEST_CASE("disk matches the Bessel closed form") {
    const double a = 4, R = 1;
    AdmissibleSet adm = admissible_set(2, a, 0.1, 8);
    ShapeGenerator gen = ff::farfield(make_disk(R), adm, {64, 16}); // 1024-gon
    auto I = denorm(gen);
    double num = 0, den = 0;
    for (const auto& e : adm.entries) {
        complexd exact(2 * pi * R * std::cyl_bessel_j(1, e.k * R) / e.k, 0);
        std::size_t idx = adm.index_of(e.xi);
        CHECK(std::abs(I[idx] - exact) < 1e-4);
        num += std::norm(I[idx] - exact);
        den += std::norm(exact);
    }
    CHECK(std::sqrt(num / den) < 1e-4);

    // sample value: xi=(1,0), k=pi/2, I = 2*pi*J1(pi/2)/(pi/2) = 4*J1(pi/2)
    complexd v = gen.values[adm.index_of({1, 0, 0})];
    double Iexact = 2 * pi * std::cyl_bessel_j(1, pi / 2) / (pi / 2);
    CHECK(Iexact == doctest::Approx(2.26729).epsilon(1e-4));
    complexd expect = c_const(2, pi / 2) * Iexact;
    CHECK(std::abs(v - expect) < 1e-4);
}

TEST_CASE("polygonized quadrature converges at second order") {
    const double a = 4, R = 1;
    AdmissibleSet adm = admissible_set(2, a, 0.1, 8);
    auto err = [&](int cells) {
        auto I = denorm(ff::farfield(make_disk(R), adm, {cells, 16}));
        double num = 0;
        for (const auto& e : adm.entries) {
            complexd exact(2 * pi * R * std::cyl_bessel_j(1, e.k * R) / e.k, 0);
            num += std::norm(I[adm.index_of(e.xi)] - exact);
        }
        return std::sqrt(num);
    };
    double e1 = err(32), e2 = err(64);
    CHECK(e2 < e1 / 3);
    CHECK(e2 > e1 / 16);
}

TEST_CASE("rectangle is exact up to roundoff") {
    const double a = 4;
    AdmissibleSet adm = admissible_set(2, a, 0.1, 5);
    ShapeSpec rect = make_rectangle(2, 1);
    auto I = denorm(ff::farfield(rect, adm, {64, 1}));

    // spec'd sample: xi=(1,0) -> 4/pi
    CHECK(std::abs(I[adm.index_of({1, 0, 0})] - complexd(4 / pi, 0)) < 1e-12);

    const double t = 2 * pi / a;
    for (const auto& e : adm.entries) {
        complexd exact;
        if (e.xi[0] == 0 && e.xi[1] == 0)
            exact = box2_integral(2, 1, 0, 0, e.k, 0); // k0 along e1
        else
            exact = box2_integral(2, 1, 0, 0, t * e.xi[0], t * e.xi[1]);
        CHECK(std::abs(I[adm.index_of(e.xi)] - exact) < 1e-12);
    }

    // off-center rectangle picks up the translation phase
    ShapeSpec rect2 = make_rectangle(1.5, 1, {0.3, -0.2});
    auto I2 = denorm(ff::farfield(rect2, adm, {64, 1}));
    for (const auto& e : adm.entries) {
        if (e.xi[0] == 0 && e.xi[1] == 0) continue;
        complexd exact = box2_integral(1.5, 1, 0.3, -0.2, t * e.xi[0], t * e.xi[1]);
        CHECK(std::abs(I2[adm.index_of(e.xi)] - exact) < 1e-12);
    }

    // modulus bound on the xi=0 integral
    CHECK(std::abs(I[adm.index_of({0, 0, 0})]) <= measure(rect) + 1e-12);
    CHECK(std::abs(I2[adm.index_of({0, 0, 0})]) <= measure(rect2) + 1e-12);
}

TEST_CASE("conjugate symmetry of de-normalized integrals") {
    AdmissibleSet adm = admissible_set(2, 6, 0.1, 6);
    auto I = denorm(ff::farfield(make_kite(1.2, 0.8), adm, {16, 8}));
    for (const auto& e : adm.entries) {
        if (e.xi[0] == 0 && e.xi[1] == 0) continue; // the k0 slot is self-paired, not symmetric
        std::array<int, 3> neg = {-e.xi[0], -e.xi[1], 0};
        complexd diff = I[adm.index_of(neg)] - std::conj(I[adm.index_of(e.xi)]);
        CHECK(std::abs(diff) < 1e-13 * (1 + std::abs(I[adm.index_of(e.xi)])));
    }

    AdmissibleSet adm3 = admissible_set(3, 2.4, 0.1, 4);
    auto I3 = denorm(ff::farfield(mannequin(1.7, 1.0), adm3, {32, 2}));
    for (const auto& e : adm3.entries) {
        if (e.xi[0] == 0 && e.xi[1] == 0 && e.xi[2] == 0) continue;
        std::array<int, 3> neg = {-e.xi[0], -e.xi[1], -e.xi[2]};
        complexd diff = I3[adm3.index_of(neg)] - std::conj(I3[adm3.index_of(e.xi)]);
        CHECK(std::abs(diff) < 1e-13 * (1 + std::abs(I3[adm3.index_of(e.xi)])));
    }
}

TEST_CASE("3d box closed form and column engine consistency") {
    AdmissibleSet adm = admissible_set(3, 4, 0.1, 3);
    ShapeSpec box = make_box(1.9, 1.2, 1.4, {0.2, -0.1, 0.3});
    auto I = denorm(ff::farfield(box, adm, {64, 2}));
    const double t = 2 * pi / 4.0;
    for (const auto& e : adm.entries) {
        complexd exact;
        if (e.xi[0] == 0 && e.xi[1] == 0 && e.xi[2] == 0)
            exact = ff::detail::box_axis_integral(e.k, 0.2, 1.9) * 1.2 * 1.4;
        else
            exact = ff::detail::box_axis_integral(t * e.xi[0], 0.2, 1.9) *
                    ff::detail::box_axis_integral(t * e.xi[1], -0.1, 1.2) *
                    ff::detail::box_axis_integral(t * e.xi[2], 0.3, 1.4);
        CHECK(std::abs(I[adm.index_of(e.xi)] - exact) < 1e-12);
    }

    // midpoint-column engine agrees with the exact product on boxes
    auto Icol = ff::detail::integrals_columns_3d(box, adm, 512);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < I.size(); ++i) {
        num += std::norm(Icol[i] - I[i]);
        den += std::norm(I[i]);
    }
    CHECK(std::sqrt(num / den) < 2e-2);
}

TEST_CASE("column engine matches the analytic ellipsoid transform") {
    AdmissibleSet adm = admissible_set(3, 4, 0.1, 6);
    ff::detail::RunSource src;
    src.ells.push_back({{0.1, -0.05, 0.2}, {0.7, 0.5, 0.3}});
    auto exact_at = [&](double W1, double W2, double W3) {
        const auto& e = src.ells[0];
        double kap = std::sqrt(W1 * W1 * e.s.x * e.s.x + W2 * W2 * e.s.y * e.s.y +
                               W3 * W3 * e.s.z * e.s.z);
        double vol = 4.0 / 3.0 * pi * e.s.x * e.s.y * e.s.z;
        double shape = kap < 1e-8 ? 1.0 : 3 * (std::sin(kap) - kap * std::cos(kap)) / (kap * kap * kap);
        double phase = -(W1 * e.c.x + W2 * e.c.y + W3 * e.c.z);
        return vol * shape * complexd(std::cos(phase), std::sin(phase));
    };
    auto err = [&](int G) {
        auto I = ff::detail::integrals_columns_3d(src, adm, G);
        const double t = 2 * pi / 4.0;
        double num = 0, den = 0;
        for (const auto& e : adm.entries) {
            complexd exact = (e.xi[0] == 0 && e.xi[1] == 0 && e.xi[2] == 0)
                                 ? exact_at(e.k, 0, 0)
                                 : exact_at(t * e.xi[0], t * e.xi[1], t * e.xi[2]);
            num += std::norm(I[adm.index_of(e.xi)] - exact);
            den += std::norm(exact);
        }
        return std::sqrt(num / den);
    };
    double e256 = err(256), e512 = err(512);
    CHECK(e512 < 1e-3);
    CHECK(e512 < e256 / 2.0); // between first and second order at the silhouette
}

TEST_CASE("noise model") {
    AdmissibleSet adm = admissible_set(2, 4, 0.1, 4);
    ShapeGenerator gen = ff::farfield(make_disk(1), adm, {16, 4});

    ShapeGenerator same = add_noise(gen, 0.0, 7);
    CHECK(bit_equal(same.values, gen.values));

    ShapeGenerator noisy = add_noise(gen, 0.01, 7);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < gen.values.size(); ++i) {
        num += std::norm(noisy.values[i] - gen.values[i]);
        den += std::norm(gen.values[i]);
    }
    CHECK(std::sqrt(num / den) == doctest::Approx(0.01).epsilon(1e-12));

    ShapeGenerator noisy2 = add_noise(gen, 0.01, 7);
    CHECK(bit_equal(noisy.values, noisy2.values));
    ShapeGenerator other = add_noise(gen, 0.01, 8);
    CHECK(!bit_equal(noisy.values, other.values));

    CHECK_THROWS_AS(add_noise(gen, -0.1, 1), config_error);
}

TEST_CASE("farfield validation") {
    AdmissibleSet adm2 = admissible_set(2, 2, 0.1, 2);
    CHECK_THROWS_AS(ff::farfield(make_disk(1.1), adm2, {16, 2}), domain_error); // escapes box
    CHECK_THROWS_AS(ff::farfield(make_disk(0.5), adm2, {8, 2}), config_error);  // cells < 16
    CHECK_THROWS_AS(ff::farfield(make_box(0.5, 0.5, 0.5), adm2, {16, 2}), domain_error);
}

TEST_CASE("farfield output is thread-count invariant") {
    int saved = util::thread_count_slot();
    AdmissibleSet adm = admissible_set(2, 6, 0.1, 6);
    util::set_threads(1);
    ShapeGenerator g1 = ff::farfield(make_kite(1.1, 0.9), adm, {16, 8});
    util::set_threads(4);
    ShapeGenerator g4 = ff::farfield(make_kite(1.1, 0.9), adm, {16, 8});
    CHECK(bit_equal(g1.values, g4.values));

    AdmissibleSet adm3 = admissible_set(3, 2.4, 0.1, 4);
    util::set_threads(1);
    ShapeGenerator m1 = ff::farfield(mannequin(1.7, 1.0), adm3, {16, 2});
    util::set_threads(4);
    ShapeGenerator m4 = ff::farfield(mannequin(1.7, 1.0), adm3, {16, 2});
    CHECK(bit_equal(m1.values, m4.values));
    util::set_threads(saved);
}
