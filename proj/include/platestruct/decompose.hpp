#pragma once

#include "platestruct/fields.hpp"

namespace plates {

// Vector field over the in-plane nodes of a plate grid, local components.
struct MidsurfaceField {
    GridPtr grid;
    std::vector<Vec3> v;

    explicit MidsurfaceField(GridPtr g) : grid(std::move(g)), v(static_cast<size_t>(grid->nxn() * grid->nyn()), Vec3::Zero()) {}
    Vec3& at(int i, int j) { return v[static_cast<size_t>(j * grid->nxn() + i)]; }
    const Vec3& at(int i, int j) const { return v[static_cast<size_t>(j * grid->nxn() + i)]; }
};

// Nodewise in-plane derivative along axis 0 or 1; three-point stencil, exact on quadratics.
MidsurfaceField md_derivative(const MidsurfaceField& f, int axis);

// Midsurface integrals by cell-center quadrature over inside cells.
double md_norm_L2sq(const MidsurfaceField& f);
double md_grad_norm_L2sq(const MidsurfaceField& f);
double md_norm_H1sq(const MidsurfaceField& f);
// Sum over alpha of || d_alpha U - R ^ e_alpha ||^2 on the midsurface.
double md_shear_defect_L2sq(const MidsurfaceField& U, const MidsurfaceField& R);

// Elementary plate displacement components: U_e = U + R ^ (x3 e3).
struct PlateDecomposition {
    MidsurfaceField U, R;
};

// Fiber averages: U is the thickness mean, R the first-moment rotation; R3 = 0.
PlateDecomposition epd_fiber(const DisplacementSample3D& u);
// Ball averages over B(xhat, delta/2) after nearest-node extension; R3 is kept.
PlateDecomposition epd_ball(const DisplacementSample3D& u);

DisplacementSample3D elementary_sample(const PlateDecomposition& d);
DisplacementSample3D epd_residual(const DisplacementSample3D& u, const PlateDecomposition& d);

// Kirchhoff-Love part (U_1 - x3 d1 U_3, U_2 - x3 d2 U_3, U_3) and the remainder.
struct KLSplit {
    DisplacementSample3D kl;
    DisplacementSample3D residual;
};
KLSplit kl_split(const DisplacementSample3D& u, const PlateDecomposition& d);

// Integral of |d u / d x3|^2; the thickness-derivative part of the residual estimate.
double norm_dx3_L2sq(const DisplacementSample3D& u, const RegionPredicate& region = nullptr);

// Unfolding onto the reference thickness t3 in (-1,1). Values are shared bitwise with
// the physical sample; only the vertical coordinate is relabeled as t3 = x3 / delta.
struct UnfoldedSample {
    GridPtr grid;
    double delta = 0.0;
    std::vector<Vec3> u;

    double t3(int k) const { return grid->zs[static_cast<size_t>(k)] / delta; }
    const Vec3& at(int i, int j, int k) const { return u[static_cast<size_t>(grid->node_index(i, j, k))]; }
};

UnfoldedSample unfold(const DisplacementSample3D& u);
DisplacementSample3D fold(const UnfoldedSample& t);
// L2 norm squared over omega x (-1,1) with weights w_t3 = w_x3 / delta.
double unfolded_norm_L2sq(const UnfoldedSample& t);
// Difference quotient in t3 between planes k and k+1, computed as delta times the
// physical x3 quotient so the derivative transport identity holds exactly.
Vec3 unfolded_t3_quotient(const UnfoldedSample& t, int i, int j, int k);

// Least-squares rigid displacement a + b ^ (x - x0) fitted over used nodes whose global
// position satisfies the region; returns (a, b) in global components.
std::pair<Vec3, Vec3> rigid_fit(const DisplacementSample3D& u, const RegionPredicate& region, const Vec3& x0);

struct StructureDecomposition {
    std::vector<PlateDecomposition> plates;
};
StructureDecomposition structure_epd(const StructureSample& ss);

struct EstimateRow {
    std::string inequality_id;
    double delta = 0.0, lhs = 0.0, rhs_energy = 0.0, ratio = 0.0;
};

// Single-plate a-priori estimates for both decompositions and the residual split.
std::vector<EstimateRow> verify_plate_estimates(const DisplacementSample3D& u);
// Structure decomposition and Korn-type estimates; fields should vanish on the clamp.
std::vector<EstimateRow> verify_structure_estimates(const StructureSample& ss);
void write_estimate_csv(const std::string& path, const std::vector<EstimateRow>& rows);

}  // namespace plates
