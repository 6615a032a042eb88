#pragma once

#include "platestruct/skeleton.hpp"

#include <memory>

namespace plates {

// Homogeneous isotropic material, a_ijkl = lambda d_ij d_kl + mu (d_ik d_jl + d_il d_jk).
struct Material {
    double lambda = 1.0;
    double mu = 1.0;

    Material() = default;
    Material(double l, double m) : lambda(l), mu(m) {
        require(l > 0.0 && m > 0.0, "material: lambda and mu must be positive");
    }
    double youngs() const { return mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu); }
    double poisson() const { return lambda / (2.0 * (lambda + mu)); }
    Mat3 stress(const Mat3& strain) const {
        return lambda * strain.trace() * Mat3::Identity() + 2.0 * mu * strain;
    }
};

// Tensor-product grid over one thickened plate: local in-plane coordinates xs x ys
// covering the face polygon's bounding box, zs spanning (-delta, delta) with an odd
// node count so the midsurface is a grid plane. Near junction edges the in-plane
// spacing is graded to the through-thickness step so neighbor grids weld node-to-node.
struct PlateGrid3D {
    Face face;
    double delta = 0.0;
    std::vector<double> xs, ys, zs;
    std::vector<uint8_t> cell_inside;  // per in-plane cell, polygon membership

    int nxn() const { return static_cast<int>(xs.size()); }
    int nyn() const { return static_cast<int>(ys.size()); }
    int nzn() const { return static_cast<int>(zs.size()); }
    int node_count() const { return nxn() * nyn() * nzn(); }
    int node_index(int i, int j, int k) const { return (k * nyn() + j) * nxn() + i; }
    int cell_count() const { return (nxn() - 1) * (nyn() - 1) * (nzn() - 1); }
    int inplane_cell_index(int i, int j) const { return j * (nxn() - 1) + i; }
    bool cell_is_inside(int i, int j) const { return cell_inside[static_cast<size_t>(inplane_cell_index(i, j))] != 0; }

    Vec3 node_local(int i, int j, int k) const {
        return Vec3(xs[static_cast<size_t>(i)], ys[static_cast<size_t>(j)], zs[static_cast<size_t>(k)]);
    }
    Vec3 node_global(int i, int j, int k) const {
        return face.to_global(Vec2(xs[static_cast<size_t>(i)], ys[static_cast<size_t>(j)]), zs[static_cast<size_t>(k)]);
    }
    Vec3 cell_center_local(int i, int j, int k) const {
        return Vec3(0.5 * (xs[static_cast<size_t>(i)] + xs[static_cast<size_t>(i + 1)]),
                    0.5 * (ys[static_cast<size_t>(j)] + ys[static_cast<size_t>(j + 1)]),
                    0.5 * (zs[static_cast<size_t>(k)] + zs[static_cast<size_t>(k + 1)]));
    }
    Vec3 cell_center_global(int i, int j, int k) const {
        const Vec3 c = cell_center_local(i, j, k);
        return face.to_global(Vec2(c.x(), c.y()), c.z());
    }
    int mid_plane() const { return (nzn() - 1) / 2; }
    // A node is used when at least one adjacent in-plane cell lies inside the polygon.
    bool node_used(int i, int j) const {
        for (int dj = -1; dj <= 0; ++dj)
            for (int di = -1; di <= 0; ++di) {
                const int ci = i + di, cj = j + dj;
                if (ci >= 0 && cj >= 0 && ci < nxn() - 1 && cj < nyn() - 1 && cell_is_inside(ci, cj)) return true;
            }
        return false;
    }
};

using GridPtr = std::shared_ptr<const PlateGrid3D>;

GridPtr make_plate_grid(const Skeleton& s, int face_id, double delta, double target_h, int nz);

// Displacement values at grid nodes, stored as local-frame components.
struct DisplacementSample3D {
    GridPtr grid;
    std::vector<Vec3> u;

    explicit DisplacementSample3D(GridPtr g) : grid(std::move(g)), u(static_cast<size_t>(grid->node_count()), Vec3::Zero()) {}
    Vec3& at(int i, int j, int k) { return u[static_cast<size_t>(grid->node_index(i, j, k))]; }
    const Vec3& at(int i, int j, int k) const { return u[static_cast<size_t>(grid->node_index(i, j, k))]; }
    Vec3 global_at(int i, int j, int k) const { return grid->face.local_vec_to_global(at(i, j, k)); }
};

// Sample an analytic field given in global coordinates/components.
DisplacementSample3D sample_global_field(const GridPtr& grid, const std::function<Vec3(const Vec3&)>& f);
// Sample a field given in the face's local coordinates/components.
DisplacementSample3D sample_local_field(const GridPtr& grid, const std::function<Vec3(const Vec3&)>& f);

DisplacementSample3D sample_axpy(double a, const DisplacementSample3D& x, const DisplacementSample3D& y);

// Extension onto a grid padded in-plane by margin: a rigid displacement fitted on each
// boundary strip is continued outward and the remainder is reflected evenly, so rigid
// displacements extend exactly and the pad strain energy stays controlled.
DisplacementSample3D extend_sample(const DisplacementSample3D& s, double margin);

using RegionPredicate = std::function<bool(const Vec3&)>;  // global coordinates

// 2x2x2 Gauss strain evaluation per cell via trilinear shape functions.
struct StrainView {
    const DisplacementSample3D* sample;
    // Strains at the 8 Gauss points of cell (i,j,k), local-frame components; returns the
    // common quadrature weight (cell volume / 8).
    double cell_gauss(int i, int j, int k, std::array<Mat3, 8>& out) const;
    Mat3 at_cell_center(int i, int j, int k) const;
    // Full displacement gradients at the Gauss points.
    double cell_gauss_grad(int i, int j, int k, std::array<Mat3, 8>& out) const;
    Vec3 value_at_gauss(int i, int j, int k, int g) const;
};

inline StrainView strain(const DisplacementSample3D& s) { return StrainView{&s}; }

// E(u): integral of gamma_ij gamma_ij over the plate (cells inside the polygon,
// optionally restricted to cells whose center satisfies the region predicate).
double energy_E(const DisplacementSample3D& s, const RegionPredicate& region = nullptr);
// D(u): integral of the squared full gradient.
double energy_D(const DisplacementSample3D& s, const RegionPredicate& region = nullptr);
// L2 norm squared of the displacement.
double norm_L2sq(const DisplacementSample3D& s, const RegionPredicate& region = nullptr);

// Same quantities over a multi-plate structure sample. Cells whose center lies inside
// the plate volume of an earlier face are skipped so the union is measured once.
struct StructureSample {
    const Skeleton* skeleton = nullptr;
    std::vector<DisplacementSample3D> plates;
};
double structure_energy_E(const StructureSample& ss, const RegionPredicate& region = nullptr);
double structure_energy_D(const StructureSample& ss, const RegionPredicate& region = nullptr);
double structure_norm_L2sq(const StructureSample& ss, const RegionPredicate& region = nullptr);
// True if the global point lies strictly inside the thickened plate of the face.
bool point_inside_plate(const Face& f, double delta, const Vec3& global_point);

Mat3 stress_of(const Material& m, const Mat3& strain_tensor);

// Groups of coincident grid nodes across different plates.
struct StitchGroup {
    std::vector<std::pair<int, int>> members;  // (plate index, node index)
};
std::vector<StitchGroup> build_stitching(const std::vector<GridPtr>& grids, double tol);
// Largest discrepancy between global-frame values at stitched nodes.
double stitching_discrepancy(const StructureSample& ss, const std::vector<StitchGroup>& groups);

void export_sample_csv(const std::string& path, const StructureSample& ss);
void export_sample_csv(const std::string& path, const DisplacementSample3D& s);

}  // namespace plates
