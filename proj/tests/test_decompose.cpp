#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "platestruct/decompose.hpp"

#include <random>

using namespace plates;

namespace {

GridPtr square_grid(double delta, double h, int nz = 5) {
    static Skeleton s = skeleton_from_json_text(fixtures::square_json());
    return make_plate_grid(s, 0, delta, h, nz);
}

PolyField3 random_poly(std::mt19937& rng, int max_deg) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    PolyField3 f;
    for (int p1 = 0; p1 <= max_deg; ++p1)
        for (int p2 = 0; p2 + p1 <= max_deg; ++p2)
            for (int p3 = 0; p3 + p2 + p1 <= max_deg; ++p3)
                f.terms.push_back({Vec3(dist(rng), dist(rng), dist(rng)), p1, p2, p3});
    return f;
}

}  // namespace

TEST_CASE("fiber decomposition reproduces rigid displacements exactly") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    auto g = square_grid(0.1, 0.1);
    for (int t = 0; t < 5; ++t) {
        const Vec3 a(dist(rng), dist(rng), dist(rng)), b(dist(rng), dist(rng), dist(rng));
        auto u = sample_global_field(g, [&](const Vec3& p) { return Vec3(a + b.cross(p)); });
        const PlateDecomposition d = epd_fiber(u);
        const DisplacementSample3D res = epd_residual(u, d);
        CHECK(norm_L2sq(res) < 1e-26);
        CHECK(energy_E(elementary_sample(d)) < 1e-22);
        // The second component never has a normal part.
        for (int j = 0; j < g->nyn(); j += 5)
            for (int i = 0; i < g->nxn(); i += 5) CHECK(d.R.at(i, j).z() == 0.0);
    }
}

TEST_CASE("fiber decomposition of the pure bending field") {
    const double delta = 0.1;
    auto g = square_grid(delta, 1.0 / 20.0);
    auto u = sample_local_field(g, [](const Vec3& x) { return Vec3(-2.0 * x.x() * x.z(), 0.0, x.x() * x.x()); });
    const PlateDecomposition d = epd_fiber(u);
    for (int j = 0; j < g->nyn(); j += 3)
        for (int i = 0; i < g->nxn(); i += 3) {
            const double x1 = g->xs[static_cast<size_t>(i)];
            CHECK(std::abs(d.U.at(i, j).x()) < 1e-15);
            CHECK(d.U.at(i, j).z() == doctest::Approx(x1 * x1).epsilon(1e-13));
            CHECK(d.R.at(i, j).y() == doctest::Approx(-2.0 * x1).epsilon(1e-13));
            CHECK(std::abs(d.R.at(i, j).x()) < 1e-14);
        }
    // The field is its own elementary displacement.
    const DisplacementSample3D res = epd_residual(u, d);
    CHECK(norm_L2sq(res) < 1e-26);

    const auto rows = verify_plate_estimates(u);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].inequality_id == "2.2");
    CHECK(rows[0].ratio == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rows[1].inequality_id == "2.4");
    CHECK(rows[1].lhs < 1e-20);
}

TEST_CASE("transverse shear splits into the residual part") {
    const double delta = 0.1;
    auto g = square_grid(delta, 0.05);
    auto u = sample_local_field(g, [](const Vec3& x) { return Vec3(x.z(), 0.0, 0.0); });
    const PlateDecomposition d = epd_fiber(u);
    for (int j = 0; j < g->nyn(); j += 4)
        for (int i = 0; i < g->nxn(); i += 4) {
            CHECK(d.U.at(i, j).norm() < 1e-15);
            CHECK(d.R.at(i, j).y() == doctest::Approx(1.0).epsilon(1e-13));
        }
    const KLSplit kl = kl_split(u, d);
    // U3 = 0, so the Kirchhoff-Love part vanishes and the residual is u itself.
    CHECK(norm_L2sq(kl.kl) < 1e-26);
    const double vol = 2.0 * delta;
    CHECK(norm_dx3_L2sq(kl.residual) == doctest::Approx(vol).epsilon(1e-12));
    const auto rows = verify_plate_estimates(u);
    CHECK(rows[1].ratio == doctest::Approx((vol / 3.0 + vol) / (0.5 * vol)).epsilon(0.01));
}

TEST_CASE("estimate ratios stay bounded over random smooth fields") {
    std::mt19937 rng(23);
    for (double delta : {0.1, 0.05}) {
        auto g = square_grid(delta, delta / 4.0);
        for (int t = 0; t < 3; ++t) {
            PolyField3 f = random_poly(rng, 2);
            auto u = sample_global_field(g, [&](const Vec3& p) { return f.eval(p); });
            for (const auto& row : verify_plate_estimates(u)) {
                CHECK(row.ratio < 100.0);
                CHECK(row.ratio >= 0.0);
            }
        }
    }
}

TEST_CASE("unfolding is a bitwise relabeling with exact inverse") {
    std::mt19937 rng(31);
    auto g = square_grid(0.1, 0.1);
    for (int t = 0; t < 10; ++t) {
        PolyField3 f = random_poly(rng, 3);
        auto u = sample_global_field(g, [&](const Vec3& p) { return f.eval(p); });
        const UnfoldedSample tu = unfold(u);
        for (size_t n = 0; n < u.u.size(); n += 17) {
            CHECK(tu.u[n].x() == u.u[n].x());
            CHECK(tu.u[n].y() == u.u[n].y());
            CHECK(tu.u[n].z() == u.u[n].z());
        }
        const DisplacementSample3D back = fold(tu);
        bool identical = back.u.size() == u.u.size();
        for (size_t n = 0; n < u.u.size() && identical; ++n) identical = (back.u[n] == u.u[n]);
        CHECK(identical);

        // Reference-domain norm times delta matches the physical norm.
        CHECK(tu.delta * unfolded_norm_L2sq(tu) == doctest::Approx(norm_L2sq(u)).epsilon(1e-14));

        // Derivative transport: t3 quotient equals delta times the x3 quotient, bitwise.
        for (int k = 0; k + 1 < g->nzn(); ++k) {
            const Vec3 lhs = unfolded_t3_quotient(tu, 3, 4, k);
            const Vec3 rhs =
                tu.delta *
                Vec3((u.at(3, 4, k + 1) - u.at(3, 4, k)) /
                     (g->zs[static_cast<size_t>(k + 1)] - g->zs[static_cast<size_t>(k)]));
            CHECK(lhs.x() == rhs.x());
            CHECK(lhs.y() == rhs.y());
            CHECK(lhs.z() == rhs.z());
        }
    }
    // t3 runs over (-1, 1).
    auto u = sample_local_field(g, [](const Vec3& x) { return Vec3(x.z(), 0.0, 0.0); });
    const UnfoldedSample tu = unfold(u);
    CHECK(tu.t3(0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(tu.t3(g->nzn() - 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(tu.delta * unfolded_norm_L2sq(tu) == doctest::Approx(2.0 / 3.0 * 0.1 * 0.1 * 2.0 * 0.1).epsilon(1e-3));
}

TEST_CASE("ball decomposition averages constants and rigids faithfully") {
    const double delta = 0.1;
    auto g = square_grid(delta, delta / 8.0, 5);

    auto uc = sample_local_field(g, [](const Vec3&) { return Vec3(0.4, -0.3, 1.1); });
    const PlateDecomposition dc = epd_ball(uc);
    for (int j = 0; j < g->nyn(); j += 10)
        for (int i = 0; i < g->nxn(); i += 10) {
            CHECK((dc.U.at(i, j) - Vec3(0.4, -0.3, 1.1)).norm() < 1e-12);
            CHECK(dc.R.at(i, j).norm() < 1e-10);
        }

    const Vec3 a(0.2, -0.1, 0.3), b(-0.4, 0.25, 0.5);
    auto ur = sample_global_field(g, [&](const Vec3& p) { return Vec3(a + b.cross(p)); });
    const PlateDecomposition dr = epd_ball(ur);
    const int ic = g->nxn() / 2, jc = g->nyn() / 2;
    CHECK((dr.R.at(ic, jc) - b).norm() < 1e-10);
    CHECK((dr.R.at(0, 0) - b).norm() < 1e-10);  // boundary stencils recover it too
    const DisplacementSample3D res = epd_residual(ur, dr);
    CHECK(norm_L2sq(res) < 1e-20 * norm_L2sq(ur));
    CHECK(energy_E(elementary_sample(dr)) < 1e-18);
}

TEST_CASE("ball estimate stays bounded as the thickness halves") {
    std::mt19937 rng(47);
    PolyField3 f = random_poly(rng, 2);
    double ratios[2];
    const double deltas[2] = {0.1, 0.05};
    for (int t = 0; t < 2; ++t) {
        auto g = square_grid(deltas[t], deltas[t] / 8.0, 5);
        auto u = sample_global_field(g, [&](const Vec3& p) { return f.eval(p); });
        const auto rows = verify_plate_estimates(u);
        CHECK(rows[2].inequality_id == "2.16");
        ratios[t] = rows[2].ratio;
        CHECK(ratios[t] < 100.0);
    }
    CHECK(ratios[1] / ratios[0] < 3.0);
}

TEST_CASE("rigid fit recovers the generating rigid displacement") {
    auto g = square_grid(0.1, 0.1);
    const Vec3 a(0.3, 0.1, -0.2), b(0.7, -0.4, 0.9), x0(0.5, 0.5, 0.0);
    auto u = sample_global_field(g, [&](const Vec3& p) { return Vec3(a + b.cross(p)); });
    auto [fa, fb] = rigid_fit(u, nullptr, x0);
    CHECK((fb - b).norm() < 1e-12);
    CHECK((fa - (a + b.cross(x0))).norm() < 1e-12);

    auto tiny = [](const Vec3& p) { return p.x() < -5.0; };
    CHECK_THROWS_AS(rigid_fit(u, tiny, x0), CheckError);
}

TEST_CASE("structure estimates hold on the right-angle fixture") {
    Skeleton s = skeleton_from_json_text(fixtures::right_angle_json());
    std::mt19937 rng(59);
    for (double delta : {0.1, 0.05}) {
        auto g0 = make_plate_grid(s, 0, delta, delta / 2.0, 5);
        auto g1 = make_plate_grid(s, 1, delta, delta / 2.0, 5);
        PolyField3 f = random_poly(rng, 2);
        // Vanish on the clamped side y = 1 so the Korn bound applies.
        auto field = [&](const Vec3& p) { return Vec3((1.0 - p.y()) * f.eval(p)); };
        StructureSample ss;
        ss.skeleton = &s;
        ss.plates.push_back(sample_global_field(g0, field));
        ss.plates.push_back(sample_global_field(g1, field));
        const auto rows = verify_structure_estimates(ss);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].inequality_id == "3.1");
        CHECK(rows[0].ratio < 200.0);
        CHECK(rows[1].inequality_id == "3.2");
        CHECK(rows[1].ratio < 500.0);
    }
}

TEST_CASE("estimate csv rows carry the pinned columns") {
    auto g = square_grid(0.1, 0.025);
    auto u = sample_local_field(g, [](const Vec3& x) { return Vec3(x.z(), 0.0, 0.0); });
    const auto rows = verify_plate_estimates(u);
    const std::string path = "test_decompose_estimates.csv";
    write_estimate_csv(path, rows);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "inequality_id,delta,lhs,rhs_energy,ratio");
    int n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    CHECK(n == 3);
}
