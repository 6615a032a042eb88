#pragma once

#include "platestruct/common.hpp"

namespace plates {

// A planar polygonal face with its own orthonormal frame. Local coordinates are
// (x1, x2) in the span of (e1, e2) relative to origin; x3 runs along e3 = e1 x e2.
struct Face {
    int id = -1;
    std::vector<Vec3> vertices;  // polygon corners, counter-clockwise in the local frame
    Vec3 origin = Vec3::Zero();
    Vec3 e1 = Vec3::UnitX(), e2 = Vec3::UnitY(), e3 = Vec3::UnitZ();
    std::vector<Vec2> poly;  // cached local coordinates of the corners

    Vec2 to_local(const Vec3& p) const {
        const Vec3 d = p - origin;
        return Vec2(d.dot(e1), d.dot(e2));
    }
    double local_x3(const Vec3& p) const { return (p - origin).dot(e3); }
    Vec3 to_global(const Vec2& xhat, double x3 = 0.0) const { return origin + xhat.x() * e1 + xhat.y() * e2 + x3 * e3; }
    Vec3 local_vec_to_global(const Vec3& v) const { return v.x() * e1 + v.y() * e2 + v.z() * e3; }
    Vec3 global_vec_to_local(const Vec3& v) const { return Vec3(v.dot(e1), v.dot(e2), v.dot(e3)); }

    double area() const;
    double diameter() const;
    bool contains_local(const Vec2& p, double tol = 1e-12) const;
    double boundary_distance_local(const Vec2& p) const;
    // Bounding box of the polygon in local coordinates.
    void local_bbox(Vec2& lo, Vec2& hi) const;
};

struct Edge {
    Vec3 a = Vec3::Zero(), b = Vec3::Zero();
    std::vector<int> faces;  // ids of incident faces
    bool clamped = false;

    double length() const { return (b - a).norm(); }
    Vec3 dir() const { return (b - a).normalized(); }
    bool junction() const { return faces.size() >= 2; }
    double distance(const Vec3& p) const { return dist_point_segment(p, a, b); }
};

struct SkeletonVertex {
    Vec3 p = Vec3::Zero();
    std::vector<int> edges;  // incident edge indices
    std::vector<int> faces;  // faces whose closed boundary contains p
    bool multi_face = false;
};

struct HypothesesReport {
    bool h1_faces_connected = false;
    bool h2_vertex_fans_connected = false;
    bool h3_has_clamped_edge = false;
    std::string detail;
    bool all() const { return h1_faces_connected && h2_vertex_fans_connected && h3_has_clamped_edge; }
};

struct Skeleton {
    std::vector<Face> faces;
    std::vector<Edge> edges;
    std::vector<SkeletonVertex> vertices;
    double eta0 = 2.0;
    double delta0 = 0.25;

    // Multi-face vertex indices (junction corner set).
    std::vector<int> multi_face_vertices() const;

    HypothesesReport validate_hypotheses() const;

    // Distance from a point of a face (given in that face's local in-plane coordinates)
    // to the nearest multi-face vertex. If there is none, returns the distance to the
    // farthest skeleton vertex plus one, which keeps the weight positive and 1-Lipschitz.
    double rho(int face_id, const Vec2& xhat) const;
    double rho_point(const Vec3& p) const;

    // Predicate for the thickened neighborhood of an edge: dist(x, edge) < factor*eta0*delta.
    std::function<bool(const Vec3&)> junction_region(int edge_index, double delta, double factor = 1.0) const;

    const Face& face_by_id(int id) const;
    std::vector<int> junction_edges() const;
    std::vector<int> clamped_edges() const;
    // Edge indices that run along the boundary of the given face.
    std::vector<int> edges_of_face(int face_id) const;
};

Skeleton load_skeleton(const std::string& path);
Skeleton skeleton_from_json_text(const std::string& text);

}  // namespace plates
