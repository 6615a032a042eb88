#pragma once

#include "platestruct/fields.hpp"
#include "platestruct/spaces.hpp"

namespace plates {

// Plane-stress coefficients of the two reduced plate problems. Constructible
// straight from the Lame pair; the direct constructor rejects ratios outside
// [0, 1), where the membrane coefficient blows up.
struct PlaneStress {
    double e = 1.0;
    double nu = 0.0;

    PlaneStress(double young, double ratio);
    PlaneStress(const Material& m) : PlaneStress(m.youngs(), m.poisson()) {}

    double membrane_coef() const { return e / (1.0 - nu * nu); }
    double shear_coef() const { return 0.5 * e / (1.0 + nu); }
    double bending_coef() const { return e / (3.0 * (1.0 - nu * nu)); }
    // lambda / (lambda + 2 mu), the factor of the residual thickness stretch.
    double transverse_ratio() const { return nu / (1.0 - nu); }
};

// Surface load density on one face, global components at a local point.
using SurfaceForce = std::function<Vec3(int face_id, const Vec2& xhat)>;

// Pair of surface loads driving the reduced problems: f_e works against the
// membrane solution, f_i against the bending solution. An empty function is a
// zero field. The thin structure sees the combination delta * f_i + f_e as a
// volume force.
struct ForceModel {
    SurfaceForce f_e;
    SurfaceForce f_i;

    Vec3 volume_force(int face_id, const Vec2& xhat, double delta) const;
};

// Membrane bilinear form on the full layout: plane-stress energy of the
// in-plane dofs, zero rows on deflection dofs. Symmetric.
SpMat assemble_membrane(const SkeletonSpaces& sp, const PlaneStress& ps);

// Bending bilinear form on the rigid layout: plate energy of the deflection
// hessians, zero rows on the in-plane parameters. Symmetric.
SpMat assemble_bending(const SkeletonSpaces& sp, const RigidLayout& rigid, const PlaneStress& ps);

// Load functionals by the same quadrature as the stiffness forms.
Eigen::VectorXd membrane_load(const SkeletonSpaces& sp, const SurfaceForce& f);
Eigen::VectorXd bending_load(const SkeletonSpaces& sp, const RigidLayout& rigid, const SurfaceForce& f);

// Admissibility of a membrane load: the per-face transverse component must
// vanish, and the load may do no work against the finite-dimensional part of
// the inextensional space that survives on the junction edges (the weighted
// complement of the members vanishing there). Violations are reported, never
// thrown.
struct ForceReport {
    std::vector<int> normal_faces;   // face ids with a transverse component
    double normal_sup = 0.0;
    Eigen::VectorXd functionals;     // load work against each complement member
    int worst_functional = -1;
    double work_sup = 0.0;           // largest inextensional work overall
    double scale = 1.0;
    double tol = 0.0;
    bool admissible = false;
};
ForceReport check_force_admissibility(const SkeletonSpaces& sp, const InextensionalSpace& din, const ForceModel& fm,
                                      double tol = 1e-8);

// Membrane solve on the clamped space with the inextensional directions
// projected out; the solution is orthogonal to them in the weighted product.
// Inadmissible loads throw CheckError naming the violated functional.
struct MembraneSolution {
    Eigen::VectorXd u;            // full layout
    double residual = 0.0;        // relative Galerkin residual
    double orthogonality = 0.0;   // largest weighted product against the inextensional basis
};
MembraneSolution solve_membrane(const SkeletonSpaces& sp, const InextensionalSpace& din, const SpMat& op,
                                const ForceModel& fm, double tol = 1e-8);

// Bending solve in the welded-basis coordinates. An empty basis is a trivial
// problem, reported through the flag with a zero solution.
struct BendingSolution {
    Eigen::VectorXd coords;       // welded-basis coordinates
    Eigen::VectorXd u;            // rigid layout
    double residual = 0.0;
    bool trivial = false;
};
BendingSolution solve_bending(const SkeletonSpaces& sp, const LimitBendingSpace& lim, const SpMat& op,
                              const ForceModel& fm);

// Stress limits at a triangle center for one thickness ordinate: the in-plane
// components are affine in t3, the transverse components vanish, and the
// thickness stretch balances the in-plane trace.
struct StressSample {
    int face_id = 0;
    int tri = 0;
    Vec2 center = Vec2::Zero();
    double t3 = 0.0;
    double s11 = 0.0;
    double s22 = 0.0;
    double s12 = 0.0;
    double du3_dt3 = 0.0;
};
std::vector<StressSample> limit_stress(const SkeletonSpaces& sp, const RigidLayout& rigid, const Eigen::VectorXd& u_e,
                                       const Eigen::VectorXd& u_i, const PlaneStress& ps,
                                       const std::vector<double>& t3_values);

// Both reduced solves plus the derived fields.
struct LimitSolution {
    MembraneSolution membrane;
    BendingSolution bending;
    Eigen::VectorXd rotation;           // nodal rotation field of the bending solution
    std::vector<StressSample> stress;   // sampled at t3 in {-1, 0, 1}
};
LimitSolution solve_limit(const SkeletonSpaces& sp, const InextensionalSpace& din, const LimitBendingSpace& lim,
                          const PlaneStress& ps, const ForceModel& fm, double tol = 1e-8);

// Per-face CSV export: solution_face<id>.csv with nodal membrane components
// (global frame), deflection and deflection gradient; stress_face<id>.csv with
// the centered stress samples at t3 in {-1, 0, 1}.
void export_limit_csv(const std::string& dir, const SkeletonSpaces& sp, const RigidLayout& rigid,
                      const Eigen::VectorXd& u_e, const Eigen::VectorXd& u_i, const PlaneStress& ps);

}  // namespace plates
