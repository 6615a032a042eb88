#include "platestruct/reference3d.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace plates {

namespace {

constexpr double kGaussLo = 0.5 - 0.28867513459481288225;
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;

// 0 below 1, 1 above 2, C1 ramp in between.
double cutoff(double t) {
    const double s = std::clamp(t - 1.0, 0.0, 1.0);
    return s * s * (3.0 - 2.0 * s);
}

int interval_of(const std::vector<double>& xs, double x) {
    const int n = static_cast<int>(xs.size());
    int i = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
    return std::clamp(i, 0, n - 2);
}

Mat3 frame_of(const Face& f) {
    Mat3 r;
    r.col(0) = f.e1;
    r.col(1) = f.e2;
    r.col(2) = f.e3;
    return r;
}

std::unordered_map<int, int> face_index_by_id(const Skeleton& sk) {
    std::unordered_map<int, int> m;
    for (size_t i = 0; i < sk.faces.size(); ++i) m[sk.faces[i].id] = static_cast<int>(i);
    return m;
}

double structure_scale(const Skeleton& sk) {
    double d = 1.0;
    for (const Face& f : sk.faces) d = std::max(d, f.diameter());
    return d;
}

RegionPredicate junction_band(const Skeleton& sk, double delta, double factor) {
    std::vector<RegionPredicate> bands;
    for (int e : sk.junction_edges()) bands.push_back(sk.junction_region(e, delta, factor));
    return [bands](const Vec3& p) {
        for (const auto& b : bands)
            if (b(p)) return true;
        return false;
    };
}

using Mat24 = Eigen::Matrix<double, 24, 24>;

// Trilinear hex stiffness for a box cell, components in the plate frame. The
// isotropic law keeps the same coefficients in every frame, so each plate can
// be assembled locally and welded through frame changes.
Mat24 hex_stiffness(double hx, double hy, double hz, double lambda, double mu) {
    Mat24 k = Mat24::Zero();
    const double gp[2] = {kGaussLo, kGaussHi};
    const double w = hx * hy * hz / 8.0;
    Vec3 grad[8];
    for (int gz = 0; gz < 2; ++gz)
        for (int gy = 0; gy < 2; ++gy)
            for (int gx = 0; gx < 2; ++gx) {
                const double xi = gp[gx], et = gp[gy], ze = gp[gz];
                for (int c = 0; c < 8; ++c) {
                    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
                    const double sx = di ? xi : 1.0 - xi;
                    const double sy = dj ? et : 1.0 - et;
                    const double sz = dk ? ze : 1.0 - ze;
                    grad[c] = Vec3((di ? 1.0 : -1.0) * sy * sz / hx, sx * (dj ? 1.0 : -1.0) * sz / hy,
                                   sx * sy * (dk ? 1.0 : -1.0) / hz);
                }
                for (int a = 0; a < 8; ++a)
                    for (int b = 0; b < 8; ++b) {
                        const double dot = grad[a].dot(grad[b]);
                        for (int p = 0; p < 3; ++p)
                            for (int q = 0; q < 3; ++q) {
                                double v = lambda * grad[a][p] * grad[b][q] + mu * grad[a][q] * grad[b][p];
                                if (p == q) v += mu * dot;
                                k(3 * a + p, 3 * b + q) += w * v;
                            }
                    }
            }
    return k;
}

struct HexCache {
    double lambda = 0.0, mu = 0.0;
    std::map<std::array<double, 3>, Mat24> entries;

    const Mat24& get(double hx, double hy, double hz) {
        const std::array<double, 3> key{hx, hy, hz};
        auto it = entries.find(key);
        if (it == entries.end()) it = entries.emplace(key, hex_stiffness(hx, hy, hz, lambda, mu)).first;
        return it->second;
    }
};

// Shape values at the 8 Gauss points, independent of the cell dimensions.
std::array<std::array<double, 8>, 8> gauss_shape_values() {
    std::array<std::array<double, 8>, 8> nv{};
    const double gp[2] = {kGaussLo, kGaussHi};
    for (int g = 0; g < 8; ++g) {
        const double xi = gp[g & 1], et = gp[(g >> 1) & 1], ze = gp[(g >> 2) & 1];
        for (int c = 0; c < 8; ++c) {
            const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
            nv[static_cast<size_t>(g)][static_cast<size_t>(c)] =
                (di ? xi : 1.0 - xi) * (dj ? et : 1.0 - et) * (dk ? ze : 1.0 - ze);
        }
    }
    return nv;
}

// Every node's displacement written as an affine combination of the welded
// unknowns: u_local(node) = sum_t W_t * x[slot_t] + offset.
struct Expansion {
    std::vector<std::pair<int, Mat3>> terms;
    Vec3 offset = Vec3::Zero();
};

struct Weld {
    std::vector<std::vector<Expansion>> nodes;  // per plate, per node
    int cols = 0;
};

struct TrilinearPoint {
    std::array<int, 8> node{};
    std::array<double, 8> w{};
};

TrilinearPoint trilinear_stencil(const PlateGrid3D& g, const Vec3& local) {
    const int i = interval_of(g.xs, local.x());
    const int j = interval_of(g.ys, local.y());
    const int k = interval_of(g.zs, local.z());
    const auto frac = [](const std::vector<double>& xs, int a, double x) {
        const double h = xs[static_cast<size_t>(a + 1)] - xs[static_cast<size_t>(a)];
        return std::clamp((x - xs[static_cast<size_t>(a)]) / h, 0.0, 1.0);
    };
    const double tx = frac(g.xs, i, local.x()), ty = frac(g.ys, j, local.y()), tz = frac(g.zs, k, local.z());
    TrilinearPoint out;
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
        out.node[static_cast<size_t>(c)] = g.node_index(i + di, j + dj, k + dk);
        out.w[static_cast<size_t>(c)] =
            (di ? tx : 1.0 - tx) * (dj ? ty : 1.0 - ty) * (dk ? tz : 1.0 - tz);
    }
    return out;
}

Weld build_weld(const Structure3DProblem& pb) {
    const size_t np = pb.grids.size();
    std::vector<Mat3> frame(np);
    for (size_t p = 0; p < np; ++p) frame[p] = frame_of(pb.grids[p]->face);

    // nodes touching at least one owned cell carry stiffness
    std::vector<std::vector<uint8_t>> has_owned(np);
    for (size_t p = 0; p < np; ++p) {
        const PlateGrid3D& g = *pb.grids[p];
        has_owned[p].assign(static_cast<size_t>(g.node_count()), 0);
        for (int k = 0; k < g.nzn() - 1; ++k)
            for (int j = 0; j < g.nyn() - 1; ++j)
                for (int i = 0; i < g.nxn() - 1; ++i) {
                    if (!pb.cell_owned[p][static_cast<size_t>(grid_cell_index(g, i, j, k))]) continue;
                    for (int c = 0; c < 8; ++c)
                        has_owned[p][static_cast<size_t>(g.node_index(i + (c & 1), j + ((c >> 1) & 1),
                                                                      k + ((c >> 2) & 1)))] = 1;
                }
    }

    // snapped nodes follow the first member that carries stiffness
    const auto key = [](int p, int n) { return (static_cast<long long>(p) << 32) | static_cast<unsigned>(n); };
    std::unordered_map<long long, std::pair<int, int>> alias;
    for (const StitchGroup& grp : pb.stitching) {
        std::vector<std::pair<int, int>> mem = grp.members;
        std::sort(mem.begin(), mem.end());
        int root = -1;
        for (size_t m = 0; m < mem.size(); ++m)
            if (has_owned[static_cast<size_t>(mem[m].first)][static_cast<size_t>(mem[m].second)]) {
                root = static_cast<int>(m);
                break;
            }
        if (root < 0) continue;
        for (size_t m = 0; m < mem.size(); ++m)
            if (static_cast<int>(m) != root) alias[key(mem[m].first, mem[m].second)] = mem[static_cast<size_t>(root)];
    }

    enum class Kind : uint8_t { zero, fixed, master, alias, interp };
    std::vector<std::vector<Kind>> kind(np);
    std::vector<std::vector<int>> slot(np);

    Weld weld;
    weld.nodes.resize(np);
    const double x3_tol = 1.0 + 1e-9;

    for (size_t p = 0; p < np; ++p) {
        const PlateGrid3D& g = *pb.grids[p];
        const int nn = g.node_count();
        kind[p].assign(static_cast<size_t>(nn), Kind::zero);
        slot[p].assign(static_cast<size_t>(nn), -1);
        for (int k = 0; k < g.nzn(); ++k)
            for (int j = 0; j < g.nyn(); ++j)
                for (int i = 0; i < g.nxn(); ++i) {
                    const int n = g.node_index(i, j, k);
                    if (pb.clamped[p][static_cast<size_t>(n)]) {
                        kind[p][static_cast<size_t>(n)] = Kind::fixed;
                        continue;
                    }
                    const Vec3 x = g.node_global(i, j, k);
                    if (pb.prescribed_region && pb.prescribed_region(x)) {
                        kind[p][static_cast<size_t>(n)] = Kind::fixed;
                        continue;
                    }
                    if (alias.count(key(static_cast<int>(p), n))) {
                        kind[p][static_cast<size_t>(n)] = Kind::alias;
                        continue;
                    }
                    if (has_owned[p][static_cast<size_t>(n)]) {
                        kind[p][static_cast<size_t>(n)] = Kind::master;
                        slot[p][static_cast<size_t>(n)] = weld.cols++;
                        continue;
                    }
                    if (!g.node_used(i, j)) continue;
                    // buried in an earlier plate's slab: follow its field
                    for (size_t q = 0; q < p; ++q) {
                        const Face& fq = pb.grids[q]->face;
                        const Vec2 xh = fq.to_local(x);
                        if (!fq.contains_local(xh, 1e-9 * std::max(1.0, fq.diameter()))) continue;
                        if (std::abs(fq.local_x3(x)) > pb.delta * x3_tol) continue;
                        kind[p][static_cast<size_t>(n)] = Kind::interp;
                        break;
                    }
                }
    }

    for (size_t p = 0; p < np; ++p) {
        const PlateGrid3D& g = *pb.grids[p];
        const int nn = g.node_count();
        weld.nodes[p].resize(static_cast<size_t>(nn));
        for (int k = 0; k < g.nzn(); ++k)
            for (int j = 0; j < g.nyn(); ++j)
                for (int i = 0; i < g.nxn(); ++i) {
                    const int n = g.node_index(i, j, k);
                    Expansion& e = weld.nodes[p][static_cast<size_t>(n)];
                    switch (kind[p][static_cast<size_t>(n)]) {
                        case Kind::zero:
                            break;
                        case Kind::fixed: {
                            if (!pb.clamped[p][static_cast<size_t>(n)] && pb.prescribed_value)
                                e.offset = g.face.global_vec_to_local(pb.prescribed_value(g.node_global(i, j, k)));
                            break;
                        }
                        case Kind::master:
                            e.terms.emplace_back(slot[p][static_cast<size_t>(n)], Mat3::Identity());
                            break;
                        case Kind::alias: {
                            const auto [rp, rn] = alias.at(key(static_cast<int>(p), n));
                            const Mat3 rot = frame[p].transpose() * frame[static_cast<size_t>(rp)];
                            switch (kind[static_cast<size_t>(rp)][static_cast<size_t>(rn)]) {
                                case Kind::master:
                                    e.terms.emplace_back(slot[static_cast<size_t>(rp)][static_cast<size_t>(rn)], rot);
                                    break;
                                case Kind::fixed: {
                                    // root is prescribed (clamping propagates through groups)
                                    if (!pb.clamped[static_cast<size_t>(rp)][static_cast<size_t>(rn)] &&
                                        pb.prescribed_value) {
                                        const PlateGrid3D& gr = *pb.grids[static_cast<size_t>(rp)];
                                        const int ri = rn % gr.nxn();
                                        const int rj = (rn / gr.nxn()) % gr.nyn();
                                        const int rk = rn / (gr.nxn() * gr.nyn());
                                        const Vec3 pv = pb.prescribed_value(gr.node_global(ri, rj, rk));
                                        e.offset = rot * gr.face.global_vec_to_local(pv);
                                    }
                                    break;
                                }
                                default:
                                    break;
                            }
                            break;
                        }
                        case Kind::interp: {
                            const Vec3 x = g.node_global(i, j, k);
                            for (size_t q = 0; q < p; ++q) {
                                const PlateGrid3D& gq = *pb.grids[q];
                                const Vec2 xh = gq.face.to_local(x);
                                if (!gq.face.contains_local(xh, 1e-9 * std::max(1.0, gq.face.diameter()))) continue;
                                if (std::abs(gq.face.local_x3(x)) > pb.delta * x3_tol) continue;
                                const Mat3 rot = frame[p].transpose() * frame[q];
                                const Vec3 loc(xh.x(), xh.y(),
                                               std::clamp(gq.face.local_x3(x), -pb.delta, pb.delta));
                                const TrilinearPoint st = trilinear_stencil(gq, loc);
                                for (int c = 0; c < 8; ++c) {
                                    if (st.w[static_cast<size_t>(c)] == 0.0) continue;
                                    const Expansion& ec = weld.nodes[q][static_cast<size_t>(st.node[static_cast<size_t>(c)])];
                                    const Mat3 rw = st.w[static_cast<size_t>(c)] * rot;
                                    for (const auto& [cs, cw] : ec.terms) e.terms.emplace_back(cs, Mat3(rw * cw));
                                    e.offset += rw * ec.offset;
                                }
                                break;
                            }
                            break;
                        }
                    }
                }
    }
    return weld;
}

}  // namespace

Structure3DProblem build_structure_problem(const Skeleton& sk, const Material& m, double delta, double target_h,
                                           int nz) {
    require(delta > 0.0, "plate half-thickness must be positive");
    require(delta <= sk.delta0 * (1.0 + 1e-12), "delta exceeds the skeleton's admissible bound");
    if (target_h <= 0.0) target_h = 0.5 * delta;

    Structure3DProblem pb;
    pb.skeleton = &sk;
    pb.material = m;
    pb.delta = delta;
    for (const Face& f : sk.faces) pb.grids.push_back(make_plate_grid(sk, f.id, delta, target_h, nz));
    pb.stitching = build_stitching(pb.grids, 1e-9 * structure_scale(sk));

    pb.cell_owned.resize(pb.grids.size());
    for (size_t p = 0; p < pb.grids.size(); ++p) {
        const PlateGrid3D& g = *pb.grids[p];
        pb.cell_owned[p].assign(static_cast<size_t>(g.cell_count()), 0);
        for (int k = 0; k < g.nzn() - 1; ++k)
            for (int j = 0; j < g.nyn() - 1; ++j)
                for (int i = 0; i < g.nxn() - 1; ++i) {
                    if (!g.cell_is_inside(i, j)) continue;
                    const Vec3 c = g.cell_center_global(i, j, k);
                    bool owned = true;
                    for (size_t q = 0; q < p && owned; ++q)
                        if (point_inside_plate(pb.grids[q]->face, delta, c)) owned = false;
                    pb.cell_owned[p][static_cast<size_t>(grid_cell_index(g, i, j, k))] = owned ? 1 : 0;
                }
    }

    pb.clamped.resize(pb.grids.size());
    for (size_t p = 0; p < pb.grids.size(); ++p) {
        const PlateGrid3D& g = *pb.grids[p];
        pb.clamped[p].assign(static_cast<size_t>(g.node_count()), 0);
        std::vector<const Edge*> cl;
        for (const Edge& e : sk.edges)
            if (e.clamped && std::find(e.faces.begin(), e.faces.end(), g.face.id) != e.faces.end())
                cl.push_back(&e);
        if (cl.empty()) continue;
        const double tol = 1e-9 * std::max(1.0, g.face.diameter());
        for (int j = 0; j < g.nyn(); ++j)
            for (int i = 0; i < g.nxn(); ++i) {
                if (!g.node_used(i, j)) continue;
                const Vec3 base = g.face.to_global(Vec2(g.xs[static_cast<size_t>(i)], g.ys[static_cast<size_t>(j)]), 0.0);
                bool on = false;
                for (const Edge* e : cl)
                    if (e->distance(base) <= tol) {
                        on = true;
                        break;
                    }
                if (!on) continue;
                for (int k = 0; k < g.nzn(); ++k) pb.clamped[p][static_cast<size_t>(g.node_index(i, j, k))] = 1;
            }
    }
    // a snapped node pinned in one plate is pinned everywhere
    for (const StitchGroup& grp : pb.stitching) {
        bool any = false;
        for (const auto& [p, n] : grp.members)
            if (pb.clamped[static_cast<size_t>(p)][static_cast<size_t>(n)]) any = true;
        if (!any) continue;
        for (const auto& [p, n] : grp.members) pb.clamped[static_cast<size_t>(p)][static_cast<size_t>(n)] = 1;
    }
    return pb;
}

Solve3DResult solve_3d(const Structure3DProblem& pb, const ForceModel& fm) {
    require(pb.skeleton != nullptr && !pb.grids.empty(), "3D problem is empty");
    const Skeleton& sk = *pb.skeleton;
    const size_t np = pb.grids.size();

    bool pinned = static_cast<bool>(pb.prescribed_region);
    for (size_t p = 0; p < np && !pinned; ++p)
        for (uint8_t c : pb.clamped[p])
            if (c) {
                pinned = true;
                break;
            }
    require(pinned, "structure has no clamped boundary: the 3D problem is singular");

    const Weld weld = build_weld(pb);
    require(weld.cols > 0, "all nodes are constrained: nothing to solve");
    const int ncols = 3 * weld.cols;

    HexCache cache;
    cache.lambda = pb.material.lambda;
    cache.mu = pb.material.mu;
    const auto nval = gauss_shape_values();
    const double gp[2] = {kGaussLo, kGaussHi};

    std::vector<Triplet> trips;
    Eigen::VectorXd pt_b = Eigen::VectorXd::Zero(ncols);   // P' b
    Eigen::VectorXd pt_kg = Eigen::VectorXd::Zero(ncols);  // P' K g
    double gkg = 0.0, btg = 0.0;

    for (size_t p = 0; p < np; ++p) {
        const PlateGrid3D& g = *pb.grids[p];
        const Mat3 rt = frame_of(g.face).transpose();
        for (int k = 0; k < g.nzn() - 1; ++k)
            for (int j = 0; j < g.nyn() - 1; ++j)
                for (int i = 0; i < g.nxn() - 1; ++i) {
                    if (!pb.cell_owned[p][static_cast<size_t>(grid_cell_index(g, i, j, k))]) continue;
                    const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
                    const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
                    const double hz = g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)];
                    const Mat24& kc = cache.get(hx, hy, hz);

                    const Expansion* ex[8];
                    Vec3 off[8];
                    for (int c = 0; c < 8; ++c) {
                        const int n = g.node_index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                        ex[c] = &weld.nodes[p][static_cast<size_t>(n)];
                        off[c] = ex[c]->offset;
                    }

                    // volume force stacked over every plate containing the point
                    Eigen::Matrix<double, 24, 1> bc = Eigen::Matrix<double, 24, 1>::Zero();
                    const double wq = hx * hy * hz / 8.0;
                    for (int q8 = 0; q8 < 8; ++q8) {
                        const double xl = g.xs[static_cast<size_t>(i)] + hx * gp[q8 & 1];
                        const double yl = g.ys[static_cast<size_t>(j)] + hy * gp[(q8 >> 1) & 1];
                        const double zl = g.zs[static_cast<size_t>(k)] + hz * gp[(q8 >> 2) & 1];
                        const Vec3 xg = g.face.to_global(Vec2(xl, yl), zl);
                        Vec3 f = fm.volume_force(g.face.id, Vec2(xl, yl), pb.delta);
                        for (size_t q = 0; q < np; ++q) {
                            if (q == p) continue;
                            const Face& fq = pb.grids[q]->face;
                            if (!point_inside_plate(fq, pb.delta, xg)) continue;
                            f += fm.volume_force(fq.id, fq.to_local(xg), pb.delta);
                        }
                        if (f.squaredNorm() == 0.0) continue;
                        const Vec3 fl = rt * f;  // global -> local
                        for (int c = 0; c < 8; ++c)
                            bc.segment<3>(3 * c) += wq * nval[static_cast<size_t>(q8)][static_cast<size_t>(c)] * fl;
                    }

                    for (int a = 0; a < 8; ++a) {
                        const Vec3 ba = bc.segment<3>(3 * a);
                        for (const auto& [ca, wa] : ex[a]->terms) pt_b.segment<3>(3 * ca) += wa.transpose() * ba;
                        btg += ba.dot(off[a]);
                        for (int b = 0; b < 8; ++b) {
                            const Mat3 kab = kc.block<3, 3>(3 * a, 3 * b);
                            gkg += off[a].dot(kab * off[b]);
                            const Vec3 kob = kab * off[b];
                            for (const auto& [ca, wa] : ex[a]->terms) {
                                if (off[b].squaredNorm() != 0.0) pt_kg.segment<3>(3 * ca) += wa.transpose() * kob;
                                const Mat3 left = wa.transpose() * kab;
                                for (const auto& [cb, wb] : ex[b]->terms) {
                                    const Mat3 blk = left * wb;
                                    for (int r = 0; r < 3; ++r)
                                        for (int s = 0; s < 3; ++s)
                                            trips.emplace_back(3 * ca + r, 3 * cb + s, blk(r, s));
                                }
                            }
                        }
                    }
                }
    }

    SpMat kred(ncols, ncols);
    kred.setFromTriplets(trips.begin(), trips.end());
    trips.clear();
    trips.shrink_to_fit();
    const Eigen::VectorXd rhs = pt_b - pt_kg;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(ncols);
    if (ncols > 200000) {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(kred);
        cg.setTolerance(1e-12);
        cg.setMaxIterations(20000);
        x = cg.solve(rhs);
        require(cg.info() == Eigen::Success, "iterative 3D solve did not converge");
    } else {
        Eigen::SimplicialLLT<SpMat> llt(kred);
        require(llt.info() == Eigen::Success, "3D stiffness is not positive definite: check the clamping");
        x = llt.solve(rhs);
        x += llt.solve(Eigen::VectorXd(rhs - kred * x));
    }
    require(x.allFinite(), "3D solve produced non-finite values");

    Solve3DResult out;
    out.unknowns = ncols;
    const double rn = rhs.norm();
    out.residual = rn > 0.0 ? (rhs - kred * x).norm() / rn : (kred * x).norm();

    out.stiffness_energy = x.dot(kred * x) + 2.0 * x.dot(pt_kg) + gkg;
    out.load_work = pt_b.dot(x) + btg;
    out.energy_defect = std::abs(out.stiffness_energy - out.load_work) /
                        std::max({std::abs(out.stiffness_energy), std::abs(out.load_work), 1e-30});

    out.u.skeleton = &sk;
    for (size_t p = 0; p < np; ++p) {
        DisplacementSample3D s(pb.grids[p]);
        const int nn = pb.grids[p]->node_count();
        for (int n = 0; n < nn; ++n) {
            const Expansion& e = weld.nodes[p][static_cast<size_t>(n)];
            Vec3 v = e.offset;
            for (const auto& [c, w] : e.terms) v += w * x.segment<3>(3 * c);
            s.u[static_cast<size_t>(n)] = v;
        }
        out.u.plates.push_back(std::move(s));
    }
    out.stitch_error = stitching_discrepancy(out.u, pb.stitching);
    return out;
}

LimitFieldTables limit_field_tables(const SkeletonSpaces& sp, const RigidLayout& rigid, const Eigen::VectorXd& u_e,
                                    const Eigen::VectorXd& u_i, const Material& m) {
    LimitFieldTables tab;
    tab.poisson_factor = m.lambda / (m.lambda + 2.0 * m.mu);
    const int nf = static_cast<int>(sp.mesh.faces.size());
    tab.membrane.resize(static_cast<size_t>(nf));
    tab.hessian.resize(static_cast<size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(f)];
        tab.membrane[static_cast<size_t>(f)].resize(fm.tris.size(), Mat2::Zero());
        tab.hessian[static_cast<size_t>(f)].resize(fm.tris.size(), Mat2::Zero());
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            const auto& tt = fm.tris[t];
            const auto grads = p1_gradients(fm.nodes[static_cast<size_t>(tt[0])], fm.nodes[static_cast<size_t>(tt[1])],
                                            fm.nodes[static_cast<size_t>(tt[2])]);
            Mat2 jac = Mat2::Zero();
            for (int c = 0; c < 3; ++c) {
                const Vec2 gc = grads[static_cast<size_t>(c)];
                jac.row(0) += u_e[sp.layout.mem_dof(f, tt[static_cast<size_t>(c)], 0)] * gc.transpose();
                jac.row(1) += u_e[sp.layout.mem_dof(f, tt[static_cast<size_t>(c)], 1)] * gc.transpose();
            }
            tab.membrane[static_cast<size_t>(f)][t] = 0.5 * (jac + jac.transpose());

            const auto& te = fm.tri_edges[t];
            const MorleyBasis mb = tri_morley(fm, static_cast<int>(t));
            const double dofs[6] = {u_i[rigid.w_dof(f, tt[0])],   u_i[rigid.w_dof(f, tt[1])],
                                    u_i[rigid.w_dof(f, tt[2])],   u_i[rigid.rot_dof(f, te[0])],
                                    u_i[rigid.rot_dof(f, te[1])], u_i[rigid.rot_dof(f, te[2])]};
            Mat2 h = Mat2::Zero();
            for (int dj = 0; dj < 6; ++dj) h += dofs[dj] * mb.hessian(dj);
            tab.hessian[static_cast<size_t>(f)][t] = h;
        }
    }
    return tab;
}

StrainDistances strain_distances(const Skeleton& sk, const SkeletonSpaces& sp, const LimitFieldTables& tab,
                                 const StructureSample& u, const Material& m, bool exclude_junctions) {
    require(!u.plates.empty(), "strain distances: empty sample");
    const double delta = u.plates.front().grid->delta;
    const RegionPredicate band = exclude_junctions ? junction_band(sk, delta, 1.0) : RegionPredicate{};
    const double gp[2] = {kGaussLo, kGaussHi};

    double ab = 0.0, a3 = 0.0, t33 = 0.0, sig = 0.0, slope = 0.0;
    std::array<Mat3, 8> buf;

    for (size_t p = 0; p < u.plates.size(); ++p) {
        const DisplacementSample3D& s = u.plates[p];
        const PlateGrid3D& g = *s.grid;
        const StrainView sv{&s};
        const FaceMesh& fmesh = sp.mesh.faces[p];
        const int f = static_cast<int>(p);

        for (int j = 0; j < g.nyn() - 1; ++j)
            for (int i = 0; i < g.nxn() - 1; ++i) {
                if (!g.cell_is_inside(i, j)) continue;
                const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
                const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];

                int tri[4];
                bool have[4] = {false, false, false, false};
                Mat2 gm[4], gh[4];
                Vec2 xy[4];
                for (int q = 0; q < 4; ++q) {
                    xy[q] = Vec2(g.xs[static_cast<size_t>(i)] + hx * gp[q & 1],
                                 g.ys[static_cast<size_t>(j)] + hy * gp[(q >> 1) & 1]);
                    std::array<double, 3> bary;
                    int t = fmesh.locate(xy[q], bary, 1e-9);
                    if (t < 0) t = fmesh.locate(xy[q], bary, 1e-6);
                    if (t < 0) continue;
                    tri[q] = t;
                    have[q] = true;
                    gm[q] = tab.membrane[p][static_cast<size_t>(t)];
                    gh[q] = tab.hessian[p][static_cast<size_t>(t)];
                }

                // in-plane strain slope in t3, fitted per quadrature column
                Eigen::Matrix<double, 4, 3> st = Eigen::Matrix<double, 4, 3>::Zero();
                double stt[4] = {0.0, 0.0, 0.0, 0.0};
                double wcol = 0.0;

                for (int k = 0; k < g.nzn() - 1; ++k) {
                    const double hz = g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)];
                    const double w8 = sv.cell_gauss(i, j, k, buf);
                    wcol = hx * hy / 4.0;
                    for (int n = 0; n < 8; ++n) {
                        const int q = n & 3;
                        if (!have[q]) continue;
                        const double zl = g.zs[static_cast<size_t>(k)] + hz * gp[(n >> 2) & 1];
                        // exclusion is decided on the mid-surface so a base
                        // point keeps or drops its whole thickness fiber
                        if (band && band(g.face.to_global(xy[q], 0.0))) continue;
                        const double t3 = zl / delta;
                        const Mat3& ga = buf[static_cast<size_t>(n)];

                        const Mat2 target = gm[q] - t3 * gh[q];
                        const double d11 = ga(0, 0) - target(0, 0);
                        const double d22 = ga(1, 1) - target(1, 1);
                        const double d12 = ga(0, 1) - target(0, 1);
                        ab += w8 * (d11 * d11 + d22 * d22 + 2.0 * d12 * d12);
                        a3 += w8 * 2.0 * (ga(0, 2) * ga(0, 2) + ga(1, 2) * ga(1, 2));
                        const double d33 = ga(2, 2) + tab.poisson_factor * target.trace();
                        t33 += w8 * d33 * d33;

                        const Mat3 sgm = m.stress(ga);
                        sig += w8 * (sgm(0, 2) * sgm(0, 2) + sgm(1, 2) * sgm(1, 2) + sgm(2, 2) * sgm(2, 2));

                        st(q, 0) += w8 * t3 * ga(0, 0);
                        st(q, 1) += w8 * t3 * ga(1, 1);
                        st(q, 2) += w8 * t3 * ga(0, 1);
                        stt[q] += w8 * t3 * t3;
                    }
                }
                for (int q = 0; q < 4; ++q) {
                    if (stt[q] <= 0.0) continue;
                    const double s11 = st(q, 0) / stt[q], s22 = st(q, 1) / stt[q], s12 = st(q, 2) / stt[q];
                    slope += wcol * (s11 * s11 + s22 * s22 + 2.0 * s12 * s12);
                }
            }
    }

    StrainDistances out;
    out.ab = std::sqrt(ab / delta);
    out.a3 = std::sqrt(a3 / delta);
    out.t33 = std::sqrt(t33 / delta);
    out.sigma_i3 = std::sqrt(sig / delta);
    out.slope_ab = std::sqrt(slope);
    return out;
}

namespace {

Vec3 bilinear_mid(const MidsurfaceField& f, const Vec2& p) {
    const PlateGrid3D& g = *f.grid;
    const int i = interval_of(g.xs, p.x());
    const int j = interval_of(g.ys, p.y());
    const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
    const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
    const double tx = std::clamp((p.x() - g.xs[static_cast<size_t>(i)]) / hx, 0.0, 1.0);
    const double ty = std::clamp((p.y() - g.ys[static_cast<size_t>(j)]) / hy, 0.0, 1.0);
    return (1.0 - tx) * (1.0 - ty) * f.at(i, j) + tx * (1.0 - ty) * f.at(i + 1, j) +
           (1.0 - tx) * ty * f.at(i, j + 1) + tx * ty * f.at(i + 1, j + 1);
}

void check_trend(const std::vector<double>& v, const std::vector<double>& deltas, double slack,
                 const std::string& name, std::vector<std::string>& failures) {
    for (size_t k = 0; k + 1 < v.size(); ++k) {
        if (v[k + 1] <= slack * v[k] + 1e-14) continue;
        failures.push_back(name + " increased at delta=" + CsvWriter::num(deltas[k + 1]) + ": " +
                           CsvWriter::num(v[k]) + " -> " + CsvWriter::num(v[k + 1]));
    }
}

}  // namespace

ConvergenceRecord convergence_study(const Skeleton& sk, const Material& m, const ForceModel& fm,
                                    const StudyOptions& opt) {
    ConvergenceRecord rec;
    require(!opt.deltas.empty(), "convergence study: empty delta list");
    for (size_t k = 0; k + 1 < opt.deltas.size(); ++k)
        require(opt.deltas[k + 1] < opt.deltas[k], "delta list must be strictly decreasing");

    SkeletonSpaces sp = build_spaces(sk, opt.limit_mesh);
    const InextensionalSpace din = inextensional_basis(sp);
    const RigidModel model = rigid_model(sp);
    const LimitBendingSpace lim = limit_inextensional_basis(sp, model);
    const PlaneStress ps(m);
    const LimitSolution limit = solve_limit(sp, din, lim, ps, fm, opt.force_tol);
    const LimitFieldTables tab = limit_field_tables(sp, lim.model.layout, limit.membrane.u, limit.bending.u, m);

    const auto ids = face_index_by_id(sk);
    for (double delta : opt.deltas) {
        const Structure3DProblem pb = build_structure_problem(sk, m, delta, opt.mesh_factor * delta, opt.nz);
        const Solve3DResult res = solve_3d(pb, fm);

        ConvergenceRow row;
        row.delta = delta;
        row.junction_excluded = opt.exclude_junctions;
        row.solve_residual = res.residual;
        row.energy = structure_energy_E(res.u);
        row.energy_over_delta = row.energy / delta;

        const StrainDistances sd = strain_distances(sk, sp, tab, res.u, m, opt.exclude_junctions);
        row.strain_distance_ab = sd.ab;
        row.strain_distance_a3 = sd.a3;
        row.strain_distance_33 = sd.t33;
        row.sigma_i3_norm = sd.sigma_i3;
        row.t3_slope_ab = sd.slope_ab;

        const auto est = verify_structure_estimates(res.u);
        for (const auto& r : est) {
            if (r.inequality_id == "3.1") row.estimate_ratio = r.ratio;
            if (r.inequality_id == "3.2") row.korn_ratio = r.ratio;
        }

        // scaled midsurface split against the reduced spaces
        const StructureDecomposition dec = structure_epd(res.u);
        std::vector<MidsurfaceField> dx, dy;
        dx.reserve(dec.plates.size());
        dy.reserve(dec.plates.size());
        for (const auto& pd : dec.plates) {
            dx.push_back(md_derivative(pd.U, 0));
            dy.push_back(md_derivative(pd.U, 1));
        }
        const LocalField uf = [&](int face_id, const Vec2& xh) {
            return bilinear_mid(dec.plates[static_cast<size_t>(ids.at(face_id))].U, xh);
        };
        const LocalGrad gf = [&](int face_id, const Vec2& xh) {
            const size_t f = static_cast<size_t>(ids.at(face_id));
            return Vec2(bilinear_mid(dx[f], xh).z(), bilinear_mid(dy[f], xh).z());
        };
        const Eigen::VectorXd mid = interpolate(sp, uf, gf);
        const SplitResult split_r = split(sp, din, mid);
        row.split_extensional = split_r.extensional;
        row.split_inextensional = delta * split_r.inextensional;

        rec.rows.push_back(std::move(row));
    }

    if (rec.rows.size() < 2) {
        rec.failures.push_back("trend needs >= 2 deltas");
        return rec;
    }
    std::vector<double> ab, a3, t33, sig, eod;
    for (const auto& r : rec.rows) {
        ab.push_back(r.strain_distance_ab);
        a3.push_back(r.strain_distance_a3);
        t33.push_back(r.strain_distance_33);
        sig.push_back(r.sigma_i3_norm);
        eod.push_back(r.energy_over_delta);
    }
    check_trend(ab, opt.deltas, opt.slack, "strain_distance_ab", rec.failures);
    check_trend(a3, opt.deltas, opt.slack, "strain_distance_a3", rec.failures);
    check_trend(t33, opt.deltas, opt.slack, "strain_distance_33", rec.failures);
    check_trend(sig, opt.deltas, opt.slack, "sigma_i3_norm", rec.failures);

    // empirical inequality constants either decay (loads that leave the bound
    // slack) or saturate toward the constant from below; growth past the band
    // is the real failure
    const auto check_bounded = [&](auto get, const char* name) {
        double lo = std::numeric_limits<double>::max(), hi = 0.0;
        bool decreasing = true;
        for (size_t k = 0; k < rec.rows.size(); ++k) {
            const double v = get(rec.rows[k]);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            if (k > 0 && v > opt.slack * get(rec.rows[k - 1]) + 1e-14) decreasing = false;
        }
        if (decreasing) return;
        if (lo > 0.0 && hi / lo >= opt.energy_band)
            rec.failures.push_back(std::string(name) + " grows by " + CsvWriter::num(hi / lo) +
                                   " over the delta list");
    };
    check_bounded([](const ConvergenceRow& r) { return r.korn_ratio; }, "korn_ratio");
    check_bounded([](const ConvergenceRow& r) { return r.estimate_ratio; }, "estimate_ratio");

    double emax = 0.0, emin = std::numeric_limits<double>::max();
    for (const auto& r : rec.rows) {
        emax = std::max(emax, r.energy_over_delta);
        emin = std::min(emin, r.energy_over_delta);
    }
    if (emin > 0.0 && emax / emin >= opt.energy_band)
        rec.failures.push_back("energy/delta varies by " + CsvWriter::num(emax / emin) + " over the delta list");
    return rec;
}

void write_convergence_csv(const std::string& path, const ConvergenceRecord& rec) {
    CsvWriter w(path, {"delta", "energy", "energy_over_delta", "strain_distance_ab", "strain_distance_a3",
                       "strain_distance_33", "sigma_i3_norm", "korn_ratio", "junction_excluded"});
    for (const auto& r : rec.rows)
        w.row({CsvWriter::num(r.delta), CsvWriter::num(r.energy), CsvWriter::num(r.energy_over_delta),
               CsvWriter::num(r.strain_distance_ab), CsvWriter::num(r.strain_distance_a3),
               CsvWriter::num(r.strain_distance_33), CsvWriter::num(r.sigma_i3_norm), CsvWriter::num(r.korn_ratio),
               r.junction_excluded ? "1" : "0"});
}

namespace {

// Point evaluation of the welded bending field: displacement (global
// components) and nodal rotation field, with a nearest-node fallback for
// points that fall off the mesh by round-off.
struct BendingEvaluator {
    const Skeleton* sk = nullptr;
    const SkeletonSpaces* sp = nullptr;
    const LimitBendingSpace* lim = nullptr;
    Eigen::VectorXd full;
    Eigen::VectorXd rot;

    void eval(int f, const Vec2& p, Vec3& value, Vec3& rotation) const {
        const FaceMesh& fm = sp->mesh.faces[static_cast<size_t>(f)];
        const Face& face = sk->faces[static_cast<size_t>(f)];
        std::array<double, 3> bary;
        int t = fm.locate(p, bary, 1e-9);
        if (t < 0) t = fm.locate(p, bary, 1e-6);
        if (t >= 0) {
            value = face.local_vec_to_global(eval_local(*sp, full, f, t, p));
            rotation = Vec3::Zero();
            const auto& tt = fm.tris[static_cast<size_t>(t)];
            for (int c = 0; c < 3; ++c)
                for (int g = 0; g < 3; ++g)
                    rotation[g] += bary[static_cast<size_t>(c)] *
                                   rot[lim->rotation_dof(f, tt[static_cast<size_t>(c)], g)];
            return;
        }
        size_t best = 0;
        double bd = std::numeric_limits<double>::max();
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            const double d = (fm.nodes[n] - p).squaredNorm();
            if (d < bd) {
                bd = d;
                best = n;
            }
        }
        const int nb = static_cast<int>(best);
        value = face.local_vec_to_global(Vec3(full[sp->layout.mem_dof(f, nb, 0)], full[sp->layout.mem_dof(f, nb, 1)],
                                              full[sp->layout.w_dof(f, nb)]));
        for (int g = 0; g < 3; ++g) rotation[g] = rot[lim->rotation_dof(f, nb, g)];
    }
};

struct EdgeBlend {
    const Edge* edge = nullptr;
    std::vector<int> faces;          // face indices sharing the edge
    std::array<int, 2> vertex{-1, -1};
    Vec3 dir = Vec3::Zero();
    double len = 0.0;
};

}  // namespace

StructureSample recovery_sequence(const Skeleton& sk, const SkeletonSpaces& sp, const InextensionalSpace& din,
                                  const LimitBendingSpace& lim, const Eigen::VectorXd& v, double delta,
                                  double target_h, int nz) {
    require(v.size() == lim.model.layout.total, "recovery field has the wrong layout");
    const Eigen::VectorXd coef = din.basis.transpose() * (din.model.gram_rho * v);
    const Eigen::VectorXd res = v - din.basis * coef;
    const double vn = std::max(1.0, std::sqrt(v.dot(din.model.gram_rho * v)));
    const double defect = std::sqrt(std::max(0.0, res.dot(din.model.gram_rho * res))) / vn;
    if (defect > 1e-8)
        throw CheckError("recovery input is outside the inextensional space (span defect " + CsvWriter::num(defect) +
                         ")");

    if (target_h <= 0.0) target_h = 0.5 * delta;
    const double eta = sk.eta0 * delta;

    BendingEvaluator ev{&sk, &sp, &lim, lim.model.embed * v, lim.rotation_map * v};
    const auto ids = face_index_by_id(sk);

    // vertex rigid motions of the welded field
    std::unordered_map<int, VertexRigidMotion> vmotion;
    for (int vi : sk.multi_face_vertices()) vmotion[vi] = vertex_rigid_motion(sp, lim.model.layout, v, vi);

    std::vector<EdgeBlend> blends;
    for (int ei : sk.junction_edges()) {
        const Edge& e = sk.edges[static_cast<size_t>(ei)];
        EdgeBlend b;
        b.edge = &e;
        for (int fid : e.faces) b.faces.push_back(ids.at(fid));
        b.vertex[0] = skeleton_vertex_at(sk, e.a);
        b.vertex[1] = skeleton_vertex_at(sk, e.b);
        require(b.vertex[0] >= 0 && b.vertex[1] >= 0, "junction edge endpoint is not a skeleton vertex");
        b.dir = e.dir();
        b.len = e.length();
        blends.push_back(std::move(b));
    }

    // shared rod displacement along a junction edge, pinned to the vertex
    // motions near the endpoints so every incident plate sees one field
    const auto rod_at = [&](const EdgeBlend& b, double s, Vec3& value, Vec3& rotation) {
        const Vec3 xj = b.edge->a + s * b.dir;
        value = Vec3::Zero();
        rotation = Vec3::Zero();
        for (int f : b.faces) {
            Vec3 val, rm;
            ev.eval(f, sk.faces[static_cast<size_t>(f)].to_local(xj), val, rm);
            value += val;
            rotation += rm;
        }
        value /= static_cast<double>(b.faces.size());
        rotation /= static_cast<double>(b.faces.size());
        for (int end = 0; end < 2; ++end) {
            const VertexRigidMotion& vm = vmotion.at(b.vertex[static_cast<size_t>(end)]);
            const Vec3 a = sk.vertices[static_cast<size_t>(b.vertex[static_cast<size_t>(end)])].p;
            const double mt = cutoff(2.0 * (xj - a).norm() / eta);
            value = mt * value + (1.0 - mt) * (vm.value + vm.rotation.cross(xj - a));
            rotation = mt * rotation + (1.0 - mt) * vm.rotation;
        }
    };

    StructureSample out;
    out.skeleton = &sk;
    for (size_t p = 0; p < sk.faces.size(); ++p) {
        const Face& face = sk.faces[p];
        const GridPtr grid = make_plate_grid(sk, face.id, delta, target_h, nz);
        DisplacementSample3D s(grid);

        std::vector<int> verts;
        for (int vi : sk.multi_face_vertices()) {
            const auto& fl = sk.vertices[static_cast<size_t>(vi)].faces;
            if (std::find(fl.begin(), fl.end(), face.id) != fl.end()) verts.push_back(vi);
        }
        std::vector<const EdgeBlend*> edges;
        for (const EdgeBlend& b : blends)
            if (std::find(b.faces.begin(), b.faces.end(), static_cast<int>(p)) != b.faces.end())
                edges.push_back(&b);

        for (int j = 0; j < grid->nyn(); ++j)
            for (int i = 0; i < grid->nxn(); ++i) {
                const Vec2 xh(grid->xs[static_cast<size_t>(i)], grid->ys[static_cast<size_t>(j)]);
                Vec3 val, rm;
                ev.eval(static_cast<int>(p), xh, val, rm);
                const Vec3 base = face.to_global(xh, 0.0);
                for (int k = 0; k < grid->nzn(); ++k) {
                    const double x3 = grid->zs[static_cast<size_t>(k)];
                    const Vec3 x = base + x3 * face.e3;
                    Vec3 w = (val + rm.cross(x3 * face.e3)) / delta;
                    for (int vi : verts) {
                        const Vec3 a = sk.vertices[static_cast<size_t>(vi)].p;
                        const double mv = cutoff(2.0 * (x - a).norm() / eta);
                        if (mv >= 1.0) continue;
                        const VertexRigidMotion& vm = vmotion.at(vi);
                        const Vec3 ra = (vm.value + vm.rotation.cross(x - a)) / delta;
                        w = mv * w + (1.0 - mv) * ra;
                    }
                    for (const EdgeBlend* b : edges) {
                        const double d = b->edge->distance(base);
                        const double me = cutoff(2.0 * d / eta);
                        if (me >= 1.0) continue;
                        const double sarc = std::clamp((x - b->edge->a).dot(b->dir), 0.0, b->len);
                        Vec3 rv, rr;
                        rod_at(*b, sarc, rv, rr);
                        const Vec3 rod = (rv + rr.cross(x - (b->edge->a + sarc * b->dir))) / delta;
                        w = me * w + (1.0 - me) * rod;
                    }
                    s.at(i, j, k) = face.global_vec_to_local(w);
                }
            }
        out.plates.push_back(std::move(s));
    }
    return out;
}

RecoveryDistances recovery_strain_distance(const Skeleton& sk, const SkeletonSpaces& sp, const LimitBendingSpace& lim,
                                           const Eigen::VectorXd& v, const StructureSample& w,
                                           bool exclude_junctions) {
    require(!w.plates.empty(), "recovery distance: empty sample");
    const double delta = w.plates.front().grid->delta;
    const Eigen::VectorXd zero_mem = Eigen::VectorXd::Zero(sp.layout.total);
    const LimitFieldTables tab = limit_field_tables(sp, lim.model.layout, zero_mem, v, Material{1.0, 1.0});
    const RegionPredicate band = exclude_junctions ? junction_band(sk, delta, 1.0) : RegionPredicate{};
    const double gp[2] = {kGaussLo, kGaussHi};

    double ab = 0.0, k3 = 0.0;
    std::array<Mat3, 8> buf;
    for (size_t p = 0; p < w.plates.size(); ++p) {
        const DisplacementSample3D& s = w.plates[p];
        const PlateGrid3D& g = *s.grid;
        const StrainView sv{&s};
        const FaceMesh& fmesh = sp.mesh.faces[p];
        for (int j = 0; j < g.nyn() - 1; ++j)
            for (int i = 0; i < g.nxn() - 1; ++i) {
                if (!g.cell_is_inside(i, j)) continue;
                const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
                const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
                bool have[4] = {false, false, false, false};
                Mat2 gh[4];
                Vec2 xy[4];
                for (int q = 0; q < 4; ++q) {
                    xy[q] = Vec2(g.xs[static_cast<size_t>(i)] + hx * gp[q & 1],
                                 g.ys[static_cast<size_t>(j)] + hy * gp[(q >> 1) & 1]);
                    std::array<double, 3> bary;
                    int t = fmesh.locate(xy[q], bary, 1e-9);
                    if (t < 0) t = fmesh.locate(xy[q], bary, 1e-6);
                    if (t < 0) continue;
                    have[q] = true;
                    gh[q] = tab.hessian[p][static_cast<size_t>(t)];
                }
                for (int k = 0; k < g.nzn() - 1; ++k) {
                    const double hz = g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)];
                    const double w8 = sv.cell_gauss(i, j, k, buf);
                    for (int n = 0; n < 8; ++n) {
                        const int q = n & 3;
                        if (!have[q]) continue;
                        const double zl = g.zs[static_cast<size_t>(k)] + hz * gp[(n >> 2) & 1];
                        // the excluded band lives on the mid-surface: drop the
                        // whole thickness fiber over an excluded base point
                        if (band && band(g.face.to_global(xy[q], 0.0))) continue;
                        const double t3 = zl / delta;
                        const Mat3& ga = buf[static_cast<size_t>(n)];
                        const double d11 = ga(0, 0) + t3 * gh[q](0, 0);
                        const double d22 = ga(1, 1) + t3 * gh[q](1, 1);
                        const double d12 = ga(0, 1) + t3 * gh[q](0, 1);
                        ab += w8 * (d11 * d11 + d22 * d22 + 2.0 * d12 * d12);
                        k3 += w8 * (2.0 * (ga(0, 2) * ga(0, 2) + ga(1, 2) * ga(1, 2)) + ga(2, 2) * ga(2, 2));
                    }
                }
            }
    }
    RecoveryDistances out;
    out.ab = std::sqrt(ab / delta);
    out.k3 = std::sqrt(k3 / delta);
    return out;
}

namespace {

Vec3 nodal_eval(const SkeletonSpaces& sp, const NodalField& v, int f, const Vec2& p, bool* ok = nullptr) {
    const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(f)];
    std::array<double, 3> bary;
    int t = fm.locate(p, bary, 1e-9);
    if (t < 0) t = fm.locate(p, bary, 1e-6);
    if (ok) *ok = t >= 0;
    if (t < 0) return Vec3::Zero();
    const auto& tt = fm.tris[static_cast<size_t>(t)];
    Vec3 out = Vec3::Zero();
    for (int c = 0; c < 3; ++c)
        out += bary[static_cast<size_t>(c)] * v[static_cast<size_t>(f)][static_cast<size_t>(tt[static_cast<size_t>(c)])];
    return out;
}

const double kRadial5[5] = {0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155, 0.95308992296933200};
const double kRadialW5[5] = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444, 0.23931433524968324,
                             0.11846344252809454};

}  // namespace

NodalField nodal_field(const SkeletonSpaces& sp, const std::function<Vec3(int face_id, const Vec2&)>& f) {
    NodalField out(sp.mesh.faces.size());
    for (size_t fi = 0; fi < sp.mesh.faces.size(); ++fi) {
        const FaceMesh& fm = sp.mesh.faces[fi];
        out[fi].resize(fm.nodes.size());
        for (size_t n = 0; n < fm.nodes.size(); ++n) out[fi][n] = f(fm.face_id, fm.nodes[n]);
    }
    return out;
}

NodalField test_sequence(const Skeleton& sk, const SkeletonSpaces& sp, const NodalField& v, double delta) {
    require(v.size() == sp.mesh.faces.size(), "nodal field has the wrong face count");
    require(delta > 0.0, "delta must be positive");
    const double eta = sk.eta0 * delta;
    const auto ids = face_index_by_id(sk);

    NodalField g = v;

    // vertex cutoff toward ball means
    for (int vi : sk.multi_face_vertices()) {
        const SkeletonVertex& vert = sk.vertices[static_cast<size_t>(vi)];
        bool clamped_vertex = false;
        for (int ei : vert.edges)
            if (sk.edges[static_cast<size_t>(ei)].clamped) clamped_vertex = true;

        Vec3 mean = Vec3::Zero();
        if (!clamped_vertex) {
            int nf = 0;
            for (int fid : vert.faces) {
                const int f = ids.at(fid);
                const Face& face = sk.faces[static_cast<size_t>(f)];
                const Vec2 c = face.to_local(vert.p);
                Vec3 acc = Vec3::Zero();
                double wsum = 0.0;
                for (int ir = 0; ir < 5; ++ir) {
                    const double r = delta * kRadial5[ir];
                    for (int ia = 0; ia < 16; ++ia) {
                        const double ang = 2.0 * M_PI * (static_cast<double>(ia) + 0.5) / 16.0;
                        const Vec2 q = c + r * Vec2(std::cos(ang), std::sin(ang));
                        if (!face.contains_local(q, 1e-12)) continue;
                        bool ok = false;
                        const Vec3 val = nodal_eval(sp, v, f, q, &ok);
                        if (!ok) continue;
                        const double w = kRadialW5[ir] * r;
                        acc += w * val;
                        wsum += w;
                    }
                }
                if (wsum > 0.0) {
                    mean += acc / wsum;
                    ++nf;
                }
            }
            if (nf > 0) mean /= static_cast<double>(nf);
        }

        for (int fid : vert.faces) {
            const int f = ids.at(fid);
            const Face& face = sk.faces[static_cast<size_t>(f)];
            const Vec2 c = face.to_local(vert.p);
            const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(f)];
            for (size_t n = 0; n < fm.nodes.size(); ++n) {
                const double mt = cutoff((fm.nodes[n] - c).norm() / (2.0 * eta));
                if (mt >= 1.0) continue;
                g[static_cast<size_t>(f)][n] = mt * g[static_cast<size_t>(f)][n] + (1.0 - mt) * mean;
            }
        }
    }

    // edge cutoff toward transverse means of the vertex-stepped field
    const NodalField base = g;
    for (int ei : sk.junction_edges()) {
        const Edge& e = sk.edges[static_cast<size_t>(ei)];
        const Vec3 dir = e.dir();
        const double len = e.length();

        const auto edge_mean = [&](double s) {
            if (e.clamped) return Vec3(Vec3::Zero());
            const Vec3 xj = e.a + s * dir;
            Vec3 acc = Vec3::Zero();
            int nf = 0;
            for (int fid : e.faces) {
                const int f = ids.at(fid);
                const Face& face = sk.faces[static_cast<size_t>(f)];
                const Vec2 pj = face.to_local(xj);
                const Vec2 dl = (face.to_local(e.b) - face.to_local(e.a)).normalized();
                Vec2 perp(-dl.y(), dl.x());
                const Vec2 probe = face.to_local(0.5 * (e.a + e.b)) + (0.05 * delta) * perp;
                if (!face.contains_local(probe, 1e-12)) perp = -perp;
                Vec3 acc_f = Vec3::Zero();
                double wsum = 0.0;
                for (int iq = 0; iq < 5; ++iq) {
                    const Vec2 q = pj + (delta * kRadial5[iq]) * perp;
                    bool ok = false;
                    const Vec3 val = nodal_eval(sp, base, f, q, &ok);
                    if (!ok || !face.contains_local(q, 1e-9)) continue;
                    acc_f += kRadialW5[iq] * val;
                    wsum += kRadialW5[iq];
                }
                if (wsum <= 0.0) {
                    acc_f = nodal_eval(sp, base, f, pj);
                    wsum = 1.0;
                }
                acc += acc_f / wsum;
                ++nf;
            }
            return Vec3(acc / std::max(1, nf));
        };

        for (int fid : e.faces) {
            const int f = ids.at(fid);
            const Face& face = sk.faces[static_cast<size_t>(f)];
            const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(f)];
            for (size_t n = 0; n < fm.nodes.size(); ++n) {
                const Vec2 p = fm.nodes[n];
                const Vec3 p3 = face.to_global(p, 0.0);
                const double d = dist_point_segment(p3, e.a, e.b);
                const double mt = cutoff(d / eta);
                if (mt >= 1.0) continue;
                const double s = std::clamp((p3 - e.a).dot(dir), 0.0, len);
                g[static_cast<size_t>(f)][n] = mt * g[static_cast<size_t>(f)][n] + (1.0 - mt) * edge_mean(s);
            }
        }
    }
    return g;
}

double nodal_h1_distance(const SkeletonSpaces& sp, const NodalField& a, const NodalField& b) {
    require(a.size() == b.size() && a.size() == sp.mesh.faces.size(), "nodal field size mismatch");
    double acc = 0.0;
    for (size_t f = 0; f < a.size(); ++f) {
        const FaceMesh& fm = sp.mesh.faces[f];
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            const auto& tt = fm.tris[t];
            const double area = fm.tri_area(static_cast<int>(t));
            Vec3 d[3];
            for (int c = 0; c < 3; ++c)
                d[c] = a[f][static_cast<size_t>(tt[static_cast<size_t>(c)])] -
                       b[f][static_cast<size_t>(tt[static_cast<size_t>(c)])];
            for (int ci = 0; ci < 3; ++ci)
                for (int cj = 0; cj < 3; ++cj) acc += (ci == cj ? 2.0 : 1.0) * area / 12.0 * d[ci].dot(d[cj]);
            const auto grads = p1_gradients(fm.nodes[static_cast<size_t>(tt[0])], fm.nodes[static_cast<size_t>(tt[1])],
                                            fm.nodes[static_cast<size_t>(tt[2])]);
            Eigen::Matrix<double, 3, 2> jac = Eigen::Matrix<double, 3, 2>::Zero();
            for (int c = 0; c < 3; ++c) jac += d[c] * grads[static_cast<size_t>(c)].transpose();
            acc += area * jac.squaredNorm();
        }
    }
    return std::sqrt(acc);
}

double nodal_sup_distance(const SkeletonSpaces& sp, const NodalField& a, const NodalField& b) {
    require(a.size() == b.size() && a.size() == sp.mesh.faces.size(), "nodal field size mismatch");
    double sup = 0.0;
    for (size_t f = 0; f < a.size(); ++f)
        for (size_t n = 0; n < a[f].size(); ++n) sup = std::max(sup, (a[f][n] - b[f][n]).norm());
    return sup;
}

}  // namespace plates
