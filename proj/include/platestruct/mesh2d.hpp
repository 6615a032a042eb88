#pragma once

#include "platestruct/skeleton.hpp"

#include <array>

namespace plates {

// Subdivision of a skeleton edge as arclength fractions in [0, 1], endpoints
// included. Intervals never exceed target_h; an end adjacent to a junction
// corner is split 4:2:1 so the three cells nearest the corner halve in size.
// Faces sharing the edge all mesh against the same list, which is what keeps
// their boundary nodes coincident.
std::vector<double> skeleton_edge_params(const Skeleton& sk, int edge_index, double target_h);

// True when boundary grading is wanted at the vertex: it lies on at least two
// faces whose planes are not parallel. The weight rho vanishes at every
// multi-face vertex, but a coplanar union stays regular and keeps its plain
// uniform mesh.
bool vertex_needs_grading(const Skeleton& sk, int vertex_index);

// Index of the skeleton vertex at a point, or -1.
int skeleton_vertex_at(const Skeleton& sk, const Vec3& p);

// Triangulation of one face in its local in-plane coordinates.
struct FaceMesh {
    int face_id = -1;
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> tris;       // corner node ids, CCW
    std::vector<std::array<int, 2>> edges;      // node pairs, smaller id first
    std::vector<std::array<int, 3>> tri_edges;  // edge k lies opposite corner k
    std::vector<std::array<int, 2>> edge_tris;  // incident triangles, -1 when boundary
    std::vector<int> node_skeleton_edge;        // covering skeleton edge, -1 elsewhere
    std::vector<int> node_skeleton_vertex;      // skeleton vertex at the node, -1 elsewhere
    std::vector<double> node_rho;

    bool node_on_skeleton_boundary(int n) const {
        return node_skeleton_edge[static_cast<size_t>(n)] >= 0 || node_skeleton_vertex[static_cast<size_t>(n)] >= 0;
    }
    bool edge_on_boundary(int e) const { return edge_tris[static_cast<size_t>(e)][1] < 0; }
    int edge_between(int a, int b) const;  // -1 when absent

    double tri_area(int t) const;
    Vec2 tri_centroid(int t) const;
    Vec2 edge_midpoint(int e) const;
    // Unit normal of a mesh edge, fixed by the (low id -> high id) direction so
    // both incident triangles see the same vector.
    Vec2 edge_normal(int e) const;
    double area() const;
    double max_edge_len() const;
    // Triangle containing p (barycentric coordinates >= -tol), or -1.
    int locate(const Vec2& p, std::array<double, 3>& bary, double tol = 1e-9) const;
};

// Positive areas, consistent adjacency, one or two triangles per edge, disk
// topology, boundary edges classified against the skeleton. Throws StructuralError.
void check_mesh(const FaceMesh& m);

FaceMesh mesh_face(const Skeleton& sk, int face_id, double target_h);

struct MeshNodeRef {
    int face_index = -1;  // position in Skeleton::faces
    int node = -1;
};

struct SkeletonMesh {
    const Skeleton* skeleton = nullptr;
    double target_h = 0.0;
    std::vector<FaceMesh> faces;  // aligned with Skeleton::faces
    // Groups of geometrically coincident boundary nodes from different faces.
    std::vector<std::vector<MeshNodeRef>> shared_nodes;

    const FaceMesh& by_face_id(int id) const;
};

SkeletonMesh build_skeleton_mesh(const Skeleton& sk, double target_h);

// Morley shape functions on a triangle: values at the corners plus normal
// derivatives at the edge midpoints. Coefficients are stored against monomials
// {1, X, Y, X^2, XY, Y^2} in coordinates centered at the centroid and scaled by
// the mean edge length.
struct MorleyBasis {
    Vec2 center = Vec2::Zero();
    double scale = 1.0;
    Eigen::Matrix<double, 6, 6> coef = Eigen::Matrix<double, 6, 6>::Zero();

    double value(int j, const Vec2& p) const;
    Vec2 gradient(int j, const Vec2& p) const;
    Eigen::Matrix2d hessian(int j) const;  // constant per shape function
};

// Dof order: value(a), value(b), value(c), then normal derivative at the
// midpoints of (b,c), (c,a), (a,b) against the supplied unit normals.
MorleyBasis morley_basis(const Vec2& a, const Vec2& b, const Vec2& c, const std::array<Vec2, 3>& midpoint_normals);

// Morley basis of one mesh triangle against the shared edge normals.
MorleyBasis tri_morley(const FaceMesh& m, int t);

// Gradients of the hat functions of (a, b, c), constant on the triangle.
std::array<Vec2, 3> p1_gradients(const Vec2& a, const Vec2& b, const Vec2& c);

// Edge midpoint rule, exact through quadratics.
struct TriQuadPoint {
    Vec2 p = Vec2::Zero();
    double w = 0.0;
};
std::array<TriQuadPoint, 3> tri_quadrature(const Vec2& a, const Vec2& b, const Vec2& c);

}  // namespace plates
