#pragma once

#include "platestruct/decompose.hpp"
#include "platestruct/limit_solvers.hpp"

namespace plates {

inline int grid_cell_index(const PlateGrid3D& g, int i, int j, int k) {
    return (k * (g.nyn() - 1) + j) * (g.nxn() - 1) + i;
}

// Thickened multi-plate assembly with welded unknowns. Every face gets its own
// tensor grid; inside a junction slab the first incident plate owns the volume,
// later plates drop the cells buried there and hang their remaining nodes on
// the owner (coincident nodes snap to one unknown, the rest follow the owner
// field by trilinear interpolation). Clamped skeleton edges pin the whole
// lateral boundary above them.
struct Structure3DProblem {
    const Skeleton* skeleton = nullptr;
    Material material{1.0, 1.0};
    double delta = 0.0;
    std::vector<GridPtr> grids;
    std::vector<StitchGroup> stitching;
    std::vector<std::vector<uint8_t>> cell_owned;  // per plate, per (i,j,k) cell
    std::vector<std::vector<uint8_t>> clamped;     // per plate, per node

    // Optional prescribed boundary displacement (global components) for
    // verification fixtures; clamped edges stay pinned to zero on top of it.
    RegionPredicate prescribed_region;
    std::function<Vec3(const Vec3&)> prescribed_value;
};

// target_h = 0 picks delta / 2.
Structure3DProblem build_structure_problem(const Skeleton& sk, const Material& m, double delta,
                                           double target_h = 0.0, int nz = 5);

struct Solve3DResult {
    StructureSample u;
    int unknowns = 0;
    double residual = 0.0;         // relative algebraic residual
    double stiffness_energy = 0.0; // a(u, u)
    double load_work = 0.0;        // l(u)
    double energy_defect = 0.0;    // |a(u,u) - l(u)| / max(|a|, |l|, tiny)
    double stitch_error = 0.0;     // largest value mismatch across snapped nodes
};
Solve3DResult solve_3d(const Structure3DProblem& pb, const ForceModel& fm);

// Constant per-triangle fields of a reduced solution pair: membrane strain of
// the in-plane part, deflection hessian of the bending part.
struct LimitFieldTables {
    std::vector<std::vector<Mat2>> membrane;  // [face][tri]
    std::vector<std::vector<Mat2>> hessian;   // [face][tri]
    double poisson_factor = 0.0;              // lambda / (lambda + 2 mu)
};
LimitFieldTables limit_field_tables(const SkeletonSpaces& sp, const RigidLayout& rigid, const Eigen::VectorXd& u_e,
                                    const Eigen::VectorXd& u_i, const Material& m);

// L2(omega x (-1,1)) distances between the unfolded strains of a 3D sample and
// the reduced-model pattern, optionally skipping the junction bands
// {dist(x, J) < eta0 * delta}. ab compares the in-plane block, a3 and t33 the
// transverse rows against their thin-limit values; sigma_i3 is the plain norm
// of the transverse stress column and slope_ab the norm of the t3-slope of the
// in-plane strain block (a membrane response has none).
struct StrainDistances {
    double ab = 0.0;
    double a3 = 0.0;
    double t33 = 0.0;
    double sigma_i3 = 0.0;
    double slope_ab = 0.0;
};
StrainDistances strain_distances(const Skeleton& sk, const SkeletonSpaces& sp, const LimitFieldTables& tab,
                                 const StructureSample& u, const Material& m, bool exclude_junctions);

struct ConvergenceRow {
    double delta = 0.0;
    double energy = 0.0;
    double energy_over_delta = 0.0;
    double strain_distance_ab = 0.0;
    double strain_distance_a3 = 0.0;
    double strain_distance_33 = 0.0;
    double sigma_i3_norm = 0.0;
    double korn_ratio = 0.0;
    bool junction_excluded = true;

    // diagnostics kept out of the CSV
    double estimate_ratio = 0.0;  // structure decomposition bound
    double t3_slope_ab = 0.0;
    double solve_residual = 0.0;
    Eigen::VectorXd split_extensional;    // full layout
    Eigen::VectorXd split_inextensional;  // full layout, delta-scaled deflection part
};

struct ConvergenceRecord {
    std::vector<ConvergenceRow> rows;
    std::vector<std::string> failures;  // named trend violations
    bool pass() const { return failures.empty(); }
};

struct StudyOptions {
    std::vector<double> deltas{0.2, 0.1, 0.05};
    double limit_mesh = 0.125;
    double mesh_factor = 0.5;  // 3D in-plane target h = mesh_factor * delta
    int nz = 5;
    bool exclude_junctions = true;
    double slack = 1.10;       // allowed growth between consecutive distances
    double energy_band = 2.0;  // max/min bound on energy/delta
    double force_tol = 1e-8;
};

// Solves the reduced problems once on the fixed skeleton mesh, then the 3D
// problem per delta, and compares unfolded strains against the reduced fields.
// Trend violations are reported in the record, never thrown.
ConvergenceRecord convergence_study(const Skeleton& sk, const Material& m, const ForceModel& fm,
                                    const StudyOptions& opt = {});
void write_convergence_csv(const std::string& path, const ConvergenceRecord& rec);

// W = (1/delta)(V + rot(V) ^ x3 e3) per plate, blended to the vertex rigid
// motion inside the vertex balls and to the shared rod displacement along the
// junction edges, single-valued on the welded structure. v must lie in the
// span of the inextensional basis; per-face rotations may still jump across
// junctions, which is what the junction-excluded distances account for.
StructureSample recovery_sequence(const Skeleton& sk, const SkeletonSpaces& sp, const InextensionalSpace& din,
                                  const LimitBendingSpace& lim, const Eigen::VectorXd& v, double delta,
                                  double target_h = 0.0, int nz = 5);

// ab: distance of the unfolded in-plane strain block to -t3 * hessian(V3);
// k3: norm of the unfolded transverse strain rows.
struct RecoveryDistances {
    double ab = 0.0;
    double k3 = 0.0;
};
RecoveryDistances recovery_strain_distance(const Skeleton& sk, const SkeletonSpaces& sp, const LimitBendingSpace& lim,
                                           const Eigen::VectorXd& v, const StructureSample& w,
                                           bool exclude_junctions = true);

// P1 skeleton fields: global components at mesh nodes, one block per face.
using NodalField = std::vector<std::vector<Vec3>>;

NodalField nodal_field(const SkeletonSpaces& sp, const std::function<Vec3(int face_id, const Vec2&)>& f);
// Replaces v near the multi-face vertices by ball means (radius delta) and
// near the junction edges by transverse means, both switched in with the
// smooth cutoff; clamped vertices and edges use zero means instead.
NodalField test_sequence(const Skeleton& sk, const SkeletonSpaces& sp, const NodalField& v, double delta);
double nodal_h1_distance(const SkeletonSpaces& sp, const NodalField& a, const NodalField& b);
double nodal_sup_distance(const SkeletonSpaces& sp, const NodalField& a, const NodalField& b);

}  // namespace plates
