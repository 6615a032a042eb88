#include "platestruct/limit_solvers.hpp"

#include <filesystem>

namespace plates {

namespace {

// Barycentric weights of the edge midpoints (a+b)/2, (b+c)/2, (c+a)/2, in the
// order tri_quadrature emits them.
constexpr double kMidBary[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};

struct TriStrains {
    // Membrane strain components of the six corner dofs (node-major, component-minor).
    double g11[6], g22[6], g12[6];
};

TriStrains membrane_strains(const std::array<Vec2, 3>& grad) {
    TriStrains s{};
    for (int k = 0; k < 3; ++k) {
        const int u1 = 2 * k, u2 = 2 * k + 1;
        s.g11[u1] = grad[static_cast<size_t>(k)].x();
        s.g22[u2] = grad[static_cast<size_t>(k)].y();
        s.g12[u1] = 0.5 * grad[static_cast<size_t>(k)].y();
        s.g12[u2] = 0.5 * grad[static_cast<size_t>(k)].x();
    }
    return s;
}

void tri_corners(const FaceMesh& fm, int t, Vec2& a, Vec2& b, Vec2& c) {
    const auto& tri = fm.tris[static_cast<size_t>(t)];
    a = fm.nodes[static_cast<size_t>(tri[0])];
    b = fm.nodes[static_cast<size_t>(tri[1])];
    c = fm.nodes[static_cast<size_t>(tri[2])];
}

Vec3 local_force(const Face& fc, const SurfaceForce& f, const Vec2& xhat) {
    if (!f) return Vec3::Zero();
    return fc.global_vec_to_local(f(fc.id, xhat));
}

// Work of a full-layout load vector against every column of the inextensional
// basis, plus orthonormal coordinates of the directions that survive on the
// junction edges (values at junction-edge nodes, all three components).
struct InextWork {
    Eigen::VectorXd work;
    Eigen::MatrixXd complement;  // columns orthonormal in the basis coordinates
};

bool node_on_junction(const Skeleton& sk, const FaceMesh& fm, int n) {
    const int se = fm.node_skeleton_edge[static_cast<size_t>(n)];
    if (se >= 0) return sk.edges[static_cast<size_t>(se)].junction();
    const int sv = fm.node_skeleton_vertex[static_cast<size_t>(n)];
    if (sv < 0) return false;
    for (int e : sk.vertices[static_cast<size_t>(sv)].edges)
        if (sk.edges[static_cast<size_t>(e)].junction()) return true;
    return false;
}

InextWork inextensional_work(const SkeletonSpaces& sp, const InextensionalSpace& din, const Eigen::VectorXd& b) {
    InextWork out;
    const Eigen::MatrixXd w = din.model.embed * din.basis;
    out.work = w.transpose() * b;

    std::vector<Triplet> trip;
    int rows = 0;
    const Skeleton& sk = *sp.mesh.skeleton;
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const Face& fc = sk.faces[fi];
        const int f = static_cast<int>(fi);
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            if (!node_on_junction(sk, fm, static_cast<int>(n))) continue;
            for (int g = 0; g < 3; ++g) {
                trip.emplace_back(rows, sp.layout.mem_dof(f, static_cast<int>(n), 0), fc.e1[g]);
                trip.emplace_back(rows, sp.layout.mem_dof(f, static_cast<int>(n), 1), fc.e2[g]);
                trip.emplace_back(rows, sp.layout.w_dof(f, static_cast<int>(n)), fc.e3[g]);
                ++rows;
            }
        }
    }
    if (rows == 0 || din.dim() == 0) {
        out.complement.resize(din.dim(), 0);
        return out;
    }
    SpMat values(rows, sp.layout.total);
    values.setFromTriplets(trip.begin(), trip.end());
    const Eigen::MatrixXd j = (values * w).transpose();  // basis coordinates x junction values
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j);
    qr.setThreshold(1e-9);
    const int rank = static_cast<int>(qr.rank());
    Eigen::MatrixXd q = qr.householderQ();
    out.complement = q.leftCols(rank);
    return out;
}

// Lifts basis-coordinate solves back through a dense factorization with one
// refinement pass; returns the relative residual.
template <typename Solve>
double refine(const Eigen::VectorXd& rhs, Eigen::VectorXd& x, const Solve& apply, const Solve& solve) {
    x = solve(rhs);
    const Eigen::VectorXd r = rhs - apply(x);
    x += solve(r);
    const double scale = std::max(rhs.norm(), 1e-300);
    return (rhs - apply(x)).norm() / scale;
}

}  // namespace

PlaneStress::PlaneStress(double young, double ratio) : e(young), nu(ratio) {
    require(young > 0.0, "plane stress: the Young modulus must be positive");
    require(ratio >= 0.0 && ratio < 1.0, "plane stress: the Poisson ratio must lie in [0, 1)");
}

Vec3 ForceModel::volume_force(int face_id, const Vec2& xhat, double delta) const {
    Vec3 v = Vec3::Zero();
    if (f_i) v += delta * f_i(face_id, xhat);
    if (f_e) v += f_e(face_id, xhat);
    return v;
}

SpMat assemble_membrane(const SkeletonSpaces& sp, const PlaneStress& ps) {
    const double kps = ps.membrane_coef();
    std::vector<Triplet> trip;
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const int f = static_cast<int>(fi);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            Vec2 a, b, c;
            tri_corners(fm, static_cast<int>(t), a, b, c);
            const TriStrains s = membrane_strains(p1_gradients(a, b, c));
            const double area = fm.tri_area(static_cast<int>(t));
            const auto& tt = fm.tris[t];
            int dof[6];
            for (int k = 0; k < 3; ++k) {
                dof[2 * k] = sp.layout.mem_dof(f, tt[static_cast<size_t>(k)], 0);
                dof[2 * k + 1] = sp.layout.mem_dof(f, tt[static_cast<size_t>(k)], 1);
            }
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    const double dev = s.g11[i] * s.g11[j] + s.g22[i] * s.g22[j] + 2.0 * s.g12[i] * s.g12[j];
                    const double tr = (s.g11[i] + s.g22[i]) * (s.g11[j] + s.g22[j]);
                    const double v = area * kps * ((1.0 - ps.nu) * dev + ps.nu * tr);
                    if (v != 0.0) trip.emplace_back(dof[i], dof[j], v);
                }
        }
    }
    SpMat m(sp.layout.total, sp.layout.total);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SpMat assemble_bending(const SkeletonSpaces& sp, const RigidLayout& rigid, const PlaneStress& ps) {
    const double kb = ps.bending_coef();
    std::vector<Triplet> trip;
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const int f = static_cast<int>(fi);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            const MorleyBasis mb = tri_morley(fm, static_cast<int>(t));
            const double area = fm.tri_area(static_cast<int>(t));
            const auto& tt = fm.tris[t];
            const auto& te = fm.tri_edges[t];
            const int dof[6] = {rigid.w_dof(f, tt[0]),   rigid.w_dof(f, tt[1]),   rigid.w_dof(f, tt[2]),
                                rigid.rot_dof(f, te[0]), rigid.rot_dof(f, te[1]), rigid.rot_dof(f, te[2])};
            Mat2 h[6];
            for (int j = 0; j < 6; ++j) h[j] = mb.hessian(j);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    const double full = (h[i].array() * h[j].array()).sum();
                    const double v = area * kb * ((1.0 - ps.nu) * full + ps.nu * h[i].trace() * h[j].trace());
                    if (v != 0.0) trip.emplace_back(dof[i], dof[j], v);
                }
        }
    }
    SpMat m(rigid.total, rigid.total);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

Eigen::VectorXd membrane_load(const SkeletonSpaces& sp, const SurfaceForce& f) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(sp.layout.total);
    if (!f) return b;
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const Face& fc = sp.mesh.skeleton->faces[fi];
        const int fx = static_cast<int>(fi);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            Vec2 a, bb, c;
            tri_corners(fm, static_cast<int>(t), a, bb, c);
            const MorleyBasis mb = tri_morley(fm, static_cast<int>(t));
            const auto& tt = fm.tris[t];
            const auto& te = fm.tri_edges[t];
            const auto quad = tri_quadrature(a, bb, c);
            for (size_t q = 0; q < 3; ++q) {
                const Vec3 fl = local_force(fc, f, quad[q].p);
                for (int k = 0; k < 3; ++k) {
                    const double phi = quad[q].w * kMidBary[q][k];
                    b[sp.layout.mem_dof(fx, tt[static_cast<size_t>(k)], 0)] += phi * fl.x();
                    b[sp.layout.mem_dof(fx, tt[static_cast<size_t>(k)], 1)] += phi * fl.y();
                    b[sp.layout.w_dof(fx, tt[static_cast<size_t>(k)])] += quad[q].w * mb.value(k, quad[q].p) * fl.z();
                }
                for (int k = 0; k < 3; ++k)
                    b[sp.layout.rot_dof(fx, te[static_cast<size_t>(k)])] +=
                        quad[q].w * mb.value(3 + k, quad[q].p) * fl.z();
            }
        }
    }
    return b;
}

Eigen::VectorXd bending_load(const SkeletonSpaces& sp, const RigidLayout& rigid, const SurfaceForce& f) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rigid.total);
    if (!f) return b;
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const Face& fc = sp.mesh.skeleton->faces[fi];
        const int fx = static_cast<int>(fi);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            Vec2 a, bb, c;
            tri_corners(fm, static_cast<int>(t), a, bb, c);
            const MorleyBasis mb = tri_morley(fm, static_cast<int>(t));
            const auto& tt = fm.tris[t];
            const auto& te = fm.tri_edges[t];
            const auto quad = tri_quadrature(a, bb, c);
            for (size_t q = 0; q < 3; ++q) {
                const Vec3 fl = local_force(fc, f, quad[q].p);
                b[rigid.par_dof(fx, 0)] += quad[q].w * fl.x();
                b[rigid.par_dof(fx, 1)] += quad[q].w * fl.y();
                b[rigid.par_dof(fx, 2)] += quad[q].w * (quad[q].p.x() * fl.y() - quad[q].p.y() * fl.x());
                for (int k = 0; k < 3; ++k) {
                    b[rigid.w_dof(fx, tt[static_cast<size_t>(k)])] += quad[q].w * mb.value(k, quad[q].p) * fl.z();
                    b[rigid.rot_dof(fx, te[static_cast<size_t>(k)])] +=
                        quad[q].w * mb.value(3 + k, quad[q].p) * fl.z();
                }
            }
        }
    }
    return b;
}

ForceReport check_force_admissibility(const SkeletonSpaces& sp, const InextensionalSpace& din, const ForceModel& fm,
                                      double tol) {
    ForceReport rep;
    rep.tol = tol;

    double f_sup = 0.0, area = 0.0;
    std::vector<double> face_normal(sp.mesh.faces.size(), 0.0);
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fmesh = sp.mesh.faces[fi];
        const Face& fc = sp.mesh.skeleton->faces[fi];
        area += fmesh.area();
        for (size_t t = 0; t < fmesh.tris.size(); ++t) {
            Vec2 a, b, c;
            tri_corners(fmesh, static_cast<int>(t), a, b, c);
            for (const auto& qp : tri_quadrature(a, b, c)) {
                const Vec3 fl = local_force(fc, fm.f_e, qp.p);
                f_sup = std::max(f_sup, fl.cwiseAbs().maxCoeff());
                face_normal[fi] = std::max(face_normal[fi], std::abs(fl.z()));
            }
        }
    }
    rep.scale = std::max(1.0, f_sup * area);
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        rep.normal_sup = std::max(rep.normal_sup, face_normal[fi]);
        if (face_normal[fi] > tol * rep.scale) rep.normal_faces.push_back(sp.mesh.faces[fi].face_id);
    }

    const Eigen::VectorXd b = membrane_load(sp, fm.f_e);
    const InextWork iw = inextensional_work(sp, din, b);
    rep.functionals = iw.complement.transpose() * iw.work;
    rep.work_sup = iw.work.size() ? iw.work.cwiseAbs().maxCoeff() : 0.0;
    if (rep.functionals.size()) {
        Eigen::Index worst = 0;
        rep.functionals.cwiseAbs().maxCoeff(&worst);
        rep.worst_functional = static_cast<int>(worst);
    }
    rep.admissible = rep.normal_faces.empty() && rep.work_sup <= tol * rep.scale;
    return rep;
}

MembraneSolution solve_membrane(const SkeletonSpaces& sp, const InextensionalSpace& din, const SpMat& op,
                                const ForceModel& fm, double tol) {
    const ForceReport rep = check_force_admissibility(sp, din, fm, tol);
    if (!rep.normal_faces.empty())
        throw CheckError("membrane load has a transverse component on face " +
                         std::to_string(rep.normal_faces.front()) + " (sup " + fmt_num(rep.normal_sup) +
                         "); the reduced membrane problem carries in-plane loads only");
    if (!rep.admissible) {
        std::string what = "membrane load does work against the inextensional space";
        if (rep.worst_functional >= 0 &&
            std::abs(rep.functionals[rep.worst_functional]) >= 0.5 * rep.work_sup)
            what = "membrane load does work against inextensional junction mode " +
                   std::to_string(rep.worst_functional) + " (value " +
                   fmt_num(rep.functionals[rep.worst_functional]) + ")";
        throw CheckError(what + "; the limit membrane problem has no solution for it");
    }

    const SpMat& z = sp.clamped_space.basis;
    const Eigen::VectorXd b = membrane_load(sp, fm.f_e);
    const Eigen::VectorXd br = z.transpose() * b;
    const SpMat ar = (SpMat(z.transpose()) * op * z).pruned();

    MembraneSolution sol;
    Eigen::VectorXd y;
    if (din.dim() == 0) {
        Eigen::SimplicialLLT<SpMat> llt(ar);
        require(llt.info() == Eigen::Success,
                "the membrane operator is not positive definite on the clamped space; the structure is not anchored");
        sol.residual = refine<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>(
            br, y, [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(ar * x); },
            [&](const Eigen::VectorXd& r) { return Eigen::VectorXd(llt.solve(r)); });
    } else {
        const Eigen::MatrixXd w = din.model.embed * din.basis;
        const Eigen::MatrixXd d = z.transpose() * (sp.gram_rho * w);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(d);
        const int m = static_cast<int>(d.rows()), k = static_cast<int>(d.cols());
        require(m > k, "the clamped space has no extensional directions");
        Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(m, m - k);
        sel.bottomRows(m - k).setIdentity();
        const Eigen::MatrixXd p = qr.householderQ() * sel;
        Eigen::MatrixXd kb = p.transpose() * (ar * p);
        kb = 0.5 * (kb + kb.transpose()).eval();
        Eigen::LLT<Eigen::MatrixXd> llt(kb);
        if (llt.info() != Eigen::Success)
            throw StructuralError(
                "the membrane operator is not positive definite on the extensional space; the structure is not "
                "anchored");
        sol.residual = refine<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>(
            br, y, [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(ar * x); },
            [&](const Eigen::VectorXd& r) { return Eigen::VectorXd(p * llt.solve(p.transpose() * r)); });
        sol.orthogonality = (d.transpose() * y).cwiseAbs().maxCoeff();
    }
    sol.u = z * y;
    return sol;
}

BendingSolution solve_bending(const SkeletonSpaces& sp, const LimitBendingSpace& lim, const SpMat& op,
                              const ForceModel& fm) {
    BendingSolution sol;
    sol.u = Eigen::VectorXd::Zero(lim.model.layout.total);
    if (lim.space.dim() == 0) {
        sol.trivial = true;
        return sol;
    }
    const SpMat& basis = lim.space.basis;
    const Eigen::VectorXd rb = basis.transpose() * bending_load(sp, lim.model.layout, fm.f_i);
    const SpMat k = (SpMat(basis.transpose()) * op * basis).pruned();

    const auto apply = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(k * x); };
    if (k.rows() > 200000) {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(k);
        cg.setTolerance(1e-13);
        sol.residual = refine<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>(
            rb, sol.coords, apply, [&](const Eigen::VectorXd& r) { return Eigen::VectorXd(cg.solve(r)); });
    } else {
        Eigen::SimplicialLLT<SpMat> llt(k);
        if (llt.info() != Eigen::Success)
            throw StructuralError("the welded bending operator is singular; the structure admits a bending mechanism");
        sol.residual = refine<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>>(
            rb, sol.coords, apply, [&](const Eigen::VectorXd& r) { return Eigen::VectorXd(llt.solve(r)); });
    }
    sol.u = basis * sol.coords;
    return sol;
}

std::vector<StressSample> limit_stress(const SkeletonSpaces& sp, const RigidLayout& rigid, const Eigen::VectorXd& u_e,
                                       const Eigen::VectorXd& u_i, const PlaneStress& ps,
                                       const std::vector<double>& t3_values) {
    require(u_e.size() == sp.layout.total, "limit stress: membrane solution has the wrong size");
    require(u_i.size() == rigid.total, "limit stress: bending solution has the wrong size");
    const double kps = ps.membrane_coef(), mu2 = 2.0 * ps.shear_coef(), r = ps.transverse_ratio();
    std::vector<StressSample> out;
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const int f = static_cast<int>(fi);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            Vec2 a, b, c;
            tri_corners(fm, static_cast<int>(t), a, b, c);
            const auto grad = p1_gradients(a, b, c);
            const auto& tt = fm.tris[t];
            const auto& te = fm.tri_edges[t];
            double g11 = 0.0, g22 = 0.0, g12 = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double u1 = u_e[sp.layout.mem_dof(f, tt[static_cast<size_t>(k)], 0)];
                const double u2 = u_e[sp.layout.mem_dof(f, tt[static_cast<size_t>(k)], 1)];
                g11 += u1 * grad[static_cast<size_t>(k)].x();
                g22 += u2 * grad[static_cast<size_t>(k)].y();
                g12 += 0.5 * (u1 * grad[static_cast<size_t>(k)].y() + u2 * grad[static_cast<size_t>(k)].x());
            }
            const MorleyBasis mb = tri_morley(fm, static_cast<int>(t));
            const double dofs[6] = {u_i[rigid.w_dof(f, tt[0])],   u_i[rigid.w_dof(f, tt[1])],
                                    u_i[rigid.w_dof(f, tt[2])],   u_i[rigid.rot_dof(f, te[0])],
                                    u_i[rigid.rot_dof(f, te[1])], u_i[rigid.rot_dof(f, te[2])]};
            Mat2 h = Mat2::Zero();
            for (int j = 0; j < 6; ++j) h += dofs[j] * mb.hessian(j);
            for (double t3 : t3_values) {
                StressSample s;
                s.face_id = fm.face_id;
                s.tri = static_cast<int>(t);
                s.center = fm.tri_centroid(static_cast<int>(t));
                s.t3 = t3;
                const double e11 = g11 - t3 * h(0, 0), e22 = g22 - t3 * h(1, 1), e12 = g12 - t3 * h(0, 1);
                s.s11 = kps * (e11 + ps.nu * e22);
                s.s22 = kps * (e22 + ps.nu * e11);
                s.s12 = mu2 * e12;
                s.du3_dt3 = r * (-g11 - g22 + t3 * (h(0, 0) + h(1, 1)));
                out.push_back(s);
            }
        }
    }
    return out;
}

LimitSolution solve_limit(const SkeletonSpaces& sp, const InextensionalSpace& din, const LimitBendingSpace& lim,
                          const PlaneStress& ps, const ForceModel& fm, double tol) {
    LimitSolution sol;
    sol.membrane = solve_membrane(sp, din, assemble_membrane(sp, ps), fm, tol);
    sol.bending = solve_bending(sp, lim, assemble_bending(sp, lim.model.layout, ps), fm);
    sol.rotation = lim.rotation_map * sol.bending.u;
    sol.stress = limit_stress(sp, lim.model.layout, sol.membrane.u, sol.bending.u, ps, {-1.0, 0.0, 1.0});
    return sol;
}

void export_limit_csv(const std::string& dir, const SkeletonSpaces& sp, const RigidLayout& rigid,
                      const Eigen::VectorXd& u_e, const Eigen::VectorXd& u_i, const PlaneStress& ps) {
    std::filesystem::create_directories(dir);
    const auto stress = limit_stress(sp, rigid, u_e, u_i, ps, {-1.0, 0.0, 1.0});
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        const Face& fc = sp.mesh.skeleton->faces[fi];
        const int f = static_cast<int>(fi);

        // Nodal deflection gradients, averaged over the incident triangles.
        std::vector<Vec2> dw(fm.nodes.size(), Vec2::Zero());
        std::vector<int> hits(fm.nodes.size(), 0);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            const MorleyBasis mb = tri_morley(fm, static_cast<int>(t));
            const auto& tt = fm.tris[t];
            const auto& te = fm.tri_edges[t];
            const double dofs[6] = {u_i[rigid.w_dof(f, tt[0])],   u_i[rigid.w_dof(f, tt[1])],
                                    u_i[rigid.w_dof(f, tt[2])],   u_i[rigid.rot_dof(f, te[0])],
                                    u_i[rigid.rot_dof(f, te[1])], u_i[rigid.rot_dof(f, te[2])]};
            for (int k = 0; k < 3; ++k) {
                Vec2 g = Vec2::Zero();
                for (int j = 0; j < 6; ++j) g += dofs[j] * mb.gradient(j, fm.nodes[static_cast<size_t>(tt[k])]);
                dw[static_cast<size_t>(tt[k])] += g;
                ++hits[static_cast<size_t>(tt[k])];
            }
        }

        CsvWriter sol_csv(dir + "/solution_face" + std::to_string(fm.face_id) + ".csv",
                          {"node", "x1", "x2", "ue_x", "ue_y", "ue_z", "ui3", "dui3_1", "dui3_2"});
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            const int nn = static_cast<int>(n);
            const Vec3 ue = fc.local_vec_to_global(Vec3(u_e[sp.layout.mem_dof(f, nn, 0)],
                                                        u_e[sp.layout.mem_dof(f, nn, 1)],
                                                        u_e[sp.layout.w_dof(f, nn)]));
            const Vec2 g = hits[n] ? Vec2(dw[n] / static_cast<double>(hits[n])) : Vec2(Vec2::Zero());
            sol_csv.row({CsvWriter::num(nn), CsvWriter::num(fm.nodes[n].x()), CsvWriter::num(fm.nodes[n].y()),
                         CsvWriter::num(ue.x()), CsvWriter::num(ue.y()), CsvWriter::num(ue.z()),
                         CsvWriter::num(u_i[rigid.w_dof(f, nn)]), CsvWriter::num(g.x()), CsvWriter::num(g.y())});
        }

        CsvWriter stress_csv(dir + "/stress_face" + std::to_string(fm.face_id) + ".csv",
                             {"tri", "x1", "x2", "t3", "s11", "s22", "s12", "du3_dt3"});
        for (const StressSample& s : stress) {
            if (s.face_id != fm.face_id) continue;
            stress_csv.row({CsvWriter::num(s.tri), CsvWriter::num(s.center.x()), CsvWriter::num(s.center.y()),
                            CsvWriter::num(s.t3), CsvWriter::num(s.s11), CsvWriter::num(s.s22),
                            CsvWriter::num(s.s12), CsvWriter::num(s.du3_dt3)});
        }
    }
}

}  // namespace plates
