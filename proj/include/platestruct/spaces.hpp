#pragma once

#include "platestruct/mesh2d.hpp"

namespace plates {

// Scalar unknowns over a skeleton mesh, face by face: two piecewise-linear
// in-plane components per node (local frame), then the deflection as a Morley
// field (one value per node, one normal derivative per mesh edge).
struct SpaceLayout {
    struct FaceOffsets {
        int mem = 0, w = 0, rot = 0;
    };
    std::vector<FaceOffsets> face;
    int total = 0;

    int mem_dof(int f, int node, int comp) const { return face[static_cast<size_t>(f)].mem + 2 * node + comp; }
    int w_dof(int f, int node) const { return face[static_cast<size_t>(f)].w + node; }
    int rot_dof(int f, int edge) const { return face[static_cast<size_t>(f)].rot + edge; }
};

// Homogeneous rows c.x = 0 over a fixed number of columns.
struct LinearConstraints {
    int cols = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;

    void add_row(std::vector<std::pair<int, double>> row);
    // Largest |row . x| over all rows.
    double residual(const Eigen::VectorXd& x) const;
};

// Orthonormal basis of the nullspace. Columns touched by no row pass through
// as unit vectors; the touched block is resolved by a rank-revealing QR, so
// redundant rows are harmless.
struct NullspaceBasis {
    SpMat basis;
    int rank = 0;  // independent rows
    int dim() const { return static_cast<int>(basis.cols()); }
};
NullspaceBasis nullspace(const LinearConstraints& c);

// Mesh edge of one face, addressed by position in SkeletonMesh::faces.
struct MeshEdgeRef {
    int face_index = -1;
    int edge = -1;
};

using RhoWeight = std::function<double(int face_id, const Vec2& xhat)>;

struct SkeletonSpaces {
    SkeletonMesh mesh;
    SpaceLayout layout;

    std::vector<std::vector<char>> node_clamped;      // per face, per node
    std::vector<std::vector<int>> edge_skeleton_edge; // per face, per mesh edge; -1 off-boundary
    std::vector<std::vector<MeshEdgeRef>> shared_edges;  // coincident junction mesh edges

    LinearConstraints coupling;   // vector trace matching at shared nodes + clamped values
    NullspaceBasis clamped_space;

    SpMat gram_rho;       // membrane strain product + weighted deflection gradient product
    SpMat gram_membrane;  // membrane strain product alone

    bool mesh_edge_clamped(int face_index, int edge) const;
};

// Meshes every face, assembles the trace/clamping constraints and both Gram
// forms with the weight at quadrature points. The default weight is the
// skeleton distance-to-junction-corners function. The skeleton is referenced,
// not copied; it must outlive the returned object.
SkeletonSpaces build_spaces(const Skeleton& sk, double mesh_size, const RhoWeight& weight = {});

// Unknowns of a per-face rigid membrane (two translations and an in-plane
// rotation about the face origin) with free deflection dofs.
struct RigidLayout {
    struct FaceOffsets {
        int par = 0, w = 0, rot = 0;
    };
    std::vector<FaceOffsets> face;
    int total = 0;

    int par_dof(int f, int k) const { return face[static_cast<size_t>(f)].par + k; }
    int w_dof(int f, int node) const { return face[static_cast<size_t>(f)].w + node; }
    int rot_dof(int f, int edge) const { return face[static_cast<size_t>(f)].rot + edge; }
};

// Rigid-membrane parametrization shared by the inextensional space and the
// welded bending space: layout, embedding into the full layout, the weighted
// Gram in rigid coordinates and the trace/clamping rows.
struct RigidModel {
    RigidLayout layout;
    SpMat embed;      // rigid dofs -> full layout
    SpMat gram_rho;   // embed' * gram_rho * embed
    LinearConstraints continuity;
};
RigidModel rigid_model(const SkeletonSpaces& sp);

struct InextensionalSpace {
    RigidModel model;
    Eigen::MatrixXd basis;  // columns orthonormal in the weighted product
    int constraint_rank = 0;
    int dim() const { return static_cast<int>(basis.cols()); }
};
InextensionalSpace inextensional_basis(const SkeletonSpaces& sp);

// Subspace of the inextensional space whose per-face rotation field is
// single-valued across junction edges, zero on clamped edges and rigidly
// compatible at junction corners. rotation_map evaluates the rotation field
// at mesh nodes (three global components per node, faces concatenated).
struct LimitBendingSpace {
    RigidModel model;
    NullspaceBasis space;
    SpMat rotation_map;
    std::vector<int> rot_offset;  // per face, start of its nodal block

    int rotation_dof(int f, int node, int comp) const { return rot_offset[static_cast<size_t>(f)] + 3 * node + comp; }
};
LimitBendingSpace limit_inextensional_basis(const SkeletonSpaces& sp, const RigidModel& model);

// Weighted-Gram projection of a rigid-layout field onto the welded subspace.
Eigen::VectorXd project_limit(const LimitBendingSpace& lim, const Eigen::VectorXd& v);

// Value and rotation of a rigid-layout field at a junction corner, least-squares
// fitted from the first mesh chord of every junction edge through it.
struct VertexRigidMotion {
    Vec3 value = Vec3::Zero();
    Vec3 rotation = Vec3::Zero();
    double residual = 0.0;
};
VertexRigidMotion vertex_rigid_motion(const SkeletonSpaces& sp, const RigidLayout& lay, const Eigen::VectorXd& v,
                                      int vertex_index);

struct SplitResult {
    Eigen::VectorXd extensional;    // full layout
    Eigen::VectorXd inextensional;  // full layout
    Eigen::VectorXd coords;         // coordinates in the inextensional basis
};
// Weighted-orthogonal projection onto the inextensional space and its complement.
SplitResult split(const SkeletonSpaces& sp, const InextensionalSpace& din, const Eigen::VectorXd& u);

// Extreme generalized eigenvalues of the membrane form against the weighted
// form on the discrete extensional complement. contaminate > 0 appends that
// many inextensional directions to the probe space.
struct NormEquivalence {
    double c_min = 0.0, c_max = 0.0;
    int dim = 0;
};
NormEquivalence norm_equivalence_probe(const SkeletonSpaces& sp, const InextensionalSpace& din, int contaminate = 0);

// Nodal interpolation into the full layout: per-face local components of the
// displacement, and the in-plane gradient of the normal component for the
// edge normal-derivative dofs.
using LocalField = std::function<Vec3(int face_id, const Vec2& xhat)>;
using LocalGrad = std::function<Vec2(int face_id, const Vec2& xhat)>;
Eigen::VectorXd interpolate(const SkeletonSpaces& sp, const LocalField& u, const LocalGrad& grad3);

// Pointwise evaluation on one triangle, local components.
Vec3 eval_local(const SkeletonSpaces& sp, const Eigen::VectorXd& u, int face_index, int tri, const Vec2& p);
Vec2 eval_deflection_gradient(const SkeletonSpaces& sp, const Eigen::VectorXd& u, int face_index, int tri,
                              const Vec2& p);

// Largest absolute membrane strain component over all faces and triangles.
double max_membrane_strain(const SkeletonSpaces& sp, const Eigen::VectorXd& u);

// Coordinate text export: one "row col value" line per entry after a
// "rows cols nnz" header line.
void write_coo(const std::string& path, const SpMat& m);

}  // namespace plates
