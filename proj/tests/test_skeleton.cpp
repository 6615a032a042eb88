#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "platestruct/skeleton.hpp"

using namespace plates;

TEST_CASE("square skeleton loads and validates") {
    Skeleton s = skeleton_from_json_text(fixtures::square_json());
    CHECK(s.faces.size() == 1);
    CHECK(s.edges.size() == 4);
    CHECK(s.vertices.size() == 4);
    CHECK(s.faces[0].area() == doctest::Approx(1.0));
    auto rep = s.validate_hypotheses();
    CHECK(rep.h1_faces_connected);
    CHECK(rep.h2_vertex_fans_connected);
    CHECK(rep.h3_has_clamped_edge);
    CHECK(s.multi_face_vertices().empty());

    // No multi-face vertex: rho falls back to farthest-vertex distance + 1.
    const double r = s.rho(0, Vec2(0.5, 0.5));
    CHECK(r == doctest::Approx(std::sqrt(0.5) + 1.0));
}

TEST_CASE("unclamped square fails H3") {
    Skeleton s = skeleton_from_json_text(fixtures::square_json(false));
    auto rep = s.validate_hypotheses();
    CHECK(rep.h1_faces_connected);
    CHECK_FALSE(rep.h3_has_clamped_edge);
    CHECK_FALSE(rep.all());
}

TEST_CASE("right-angle pair: junction edge, vertices, rho") {
    Skeleton s = skeleton_from_json_text(fixtures::right_angle_json());
    CHECK(s.faces.size() == 2);
    auto rep = s.validate_hypotheses();
    CHECK(rep.all());

    auto je = s.junction_edges();
    REQUIRE(je.size() == 1);
    const Edge& e = s.edges[static_cast<size_t>(je[0])];
    CHECK(e.faces.size() == 2);
    CHECK(e.length() == doctest::Approx(1.0));

    // Multi-face vertices are the two ends of the shared edge.
    auto mfv = s.multi_face_vertices();
    CHECK(mfv.size() == 2);

    // rho = distance to the nearest shared-edge endpoint.
    CHECK(s.rho(0, Vec2(0.5, 0.0)) == doctest::Approx(0.5));
    CHECK(s.rho(0, Vec2(0.5, 0.4)) == doctest::Approx(std::sqrt(0.25 + 0.16)));
    CHECK(s.rho(1, Vec2(0.0, 1.0)) == doctest::Approx(1.0));

    // rho is 1-Lipschitz along a sampled segment.
    Vec2 p(0.1, 0.2), q(0.9, 0.7);
    const double lhs = std::abs(s.rho(0, p) - s.rho(0, q));
    CHECK(lhs <= (p - q).norm() + 1e-14);

    auto region = s.junction_region(je[0], 0.1);
    CHECK(region(Vec3(0.5, 0.05, 0.05)));      // near the shared edge
    CHECK_FALSE(region(Vec3(0.5, 0.3, 0.0)));  // outside eta0*delta = 0.2
    CHECK_FALSE(region(Vec3(-0.5, 0.0, 0.0))); // beyond the segment end
}

TEST_CASE("vertex-touching squares violate H2") {
    Skeleton s = skeleton_from_json_text(fixtures::vertex_touch_json());
    auto rep = s.validate_hypotheses();
    CHECK_FALSE(rep.h2_vertex_fans_connected);
}

TEST_CASE("T-junction and box corner validate") {
    Skeleton t = skeleton_from_json_text(fixtures::t_junction_json());
    CHECK(t.validate_hypotheses().all());
    CHECK(t.junction_edges().size() == 1);
    CHECK(t.edges[static_cast<size_t>(t.junction_edges()[0])].faces.size() == 3);

    Skeleton b = skeleton_from_json_text(fixtures::box_corner_json());
    CHECK(b.validate_hypotheses().all());
    CHECK(b.junction_edges().size() == 3);
    // The origin lies on all three faces.
    int at_origin = -1;
    for (size_t i = 0; i < b.vertices.size(); ++i)
        if (b.vertices[i].p.norm() < 1e-12) at_origin = static_cast<int>(i);
    REQUIRE(at_origin >= 0);
    CHECK(b.vertices[static_cast<size_t>(at_origin)].faces.size() == 3);
}

TEST_CASE("structural errors are rejected") {
    CHECK_THROWS_AS(skeleton_from_json_text(fixtures::non_planar_json()), StructuralError);
    CHECK_THROWS_AS(skeleton_from_json_text("{ not json"), StructuralError);
    // Frame that is not orthonormal.
    CHECK_THROWS_AS(skeleton_from_json_text(R"({
        "faces": [{"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
                   "origin": [0,0,0], "e1": [1,0,0], "e2": [0.7,0.7,0]}],
        "edges": [{"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": true}]
    })"),
                    StructuralError);
    // Edge not on the face boundary.
    CHECK_THROWS_AS(skeleton_from_json_text(R"({
        "faces": [{"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
                   "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]}],
        "edges": [{"a": [0.2,0.5,0], "b": [0.8,0.5,0], "faces": [0], "clamped": true}]
    })"),
                    StructuralError);
    // Polygon side left uncovered by the declared edges.
    CHECK_THROWS_AS(skeleton_from_json_text(R"({
        "faces": [{"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
                   "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]}],
        "edges": [{"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": true}]
    })"),
                    StructuralError);
}

TEST_CASE("coplanar pair loads with a junction edge") {
    Skeleton s = skeleton_from_json_text(fixtures::coplanar_pair_json());
    CHECK(s.validate_hypotheses().all());
    REQUIRE(s.junction_edges().size() == 1);
    const Edge& e = s.edges[static_cast<size_t>(s.junction_edges()[0])];
    CHECK(e.a.x() == doctest::Approx(1.0));
    CHECK(e.b.x() == doctest::Approx(1.0));
}
