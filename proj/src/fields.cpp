#include "platestruct/fields.hpp"

#include <cmath>
#include <map>

namespace plates {

namespace {

// 1D node coordinates over [lo, hi]: required graded bands first, uniform fill with
// target spacing h in between. A grading (x0, dir) pins nodes x0 + k*step*dir for
// k = 0..half so thickness planes of a neighbor plate land on grid nodes.
std::vector<double> build_axis(double lo, double hi, double h, double step, int half,
                               const std::vector<std::pair<double, int>>& grads) {
    require(hi - lo > 1e-12, "plate grid: empty axis extent");
    std::vector<double> req = {lo, hi};
    for (const auto& [x0, dir] : grads) {
        for (int k = 0; k <= half; ++k) {
            const double v = x0 + dir * step * k;
            if (v > lo - 1e-12 && v < hi + 1e-12) req.push_back(std::clamp(v, lo, hi));
        }
    }
    std::sort(req.begin(), req.end());
    const double mtol = 1e-9 * (hi - lo);
    std::vector<double> anchors;
    for (double v : req)
        if (anchors.empty() || v - anchors.back() > mtol) anchors.push_back(v);
    if (hi - anchors.back() <= mtol) anchors.back() = hi;

    std::vector<double> out;
    for (size_t q = 0; q + 1 < anchors.size(); ++q) {
        const double a = anchors[q], b = anchors[q + 1], gap = b - a;
        const int n = std::max(1, static_cast<int>(std::lround(gap / h)));
        for (int t = 0; t < n; ++t) out.push_back(a + gap * t / n);
    }
    out.push_back(anchors.back());
    return out;
}

constexpr double kGaussLo = 0.5 - 0.28867513459481288225;  // 0.5 - 1/(2 sqrt 3)
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;

}  // namespace

GridPtr make_plate_grid(const Skeleton& s, int face_id, double delta, double target_h, int nz) {
    require(delta > 0.0 && target_h > 0.0, "plate grid: delta and mesh size must be positive");
    require(nz >= 3 && nz % 2 == 1, "plate grid: nz must be odd and at least 3");
    const Face& f = s.face_by_id(face_id);

    auto g = std::make_shared<PlateGrid3D>();
    g->face = f;
    g->delta = delta;

    g->zs.resize(static_cast<size_t>(nz));
    for (int k = 0; k < nz; ++k) g->zs[static_cast<size_t>(k)] = -delta + 2.0 * delta * k / (nz - 1);
    g->zs[static_cast<size_t>((nz - 1) / 2)] = 0.0;
    const double step = 2.0 * delta / (nz - 1);
    const int half = (nz - 1) / 2;

    Vec2 lo, hi;
    f.local_bbox(lo, hi);
    require(hi.x() - lo.x() > 2.0 * delta && hi.y() - lo.y() > 2.0 * delta,
            "plate grid: face extent must exceed twice the half-thickness");

    const double atol = 1e-9 * std::max(1.0, f.diameter());
    std::vector<std::pair<double, int>> gx, gy;
    for (int ei : s.edges_of_face(face_id)) {
        const Edge& e = s.edges[static_cast<size_t>(ei)];
        if (!e.junction()) continue;
        const Vec2 la = f.to_local(e.a), lb = f.to_local(e.b);
        const Vec2 mid = 0.5 * (la + lb);
        if (std::abs(la.x() - lb.x()) <= atol) {
            const double x0 = mid.x();
            for (int dir : {+1, -1})
                if (f.contains_local(Vec2(x0 + dir * 0.5 * delta, mid.y()), atol)) gx.emplace_back(x0, dir);
        } else if (std::abs(la.y() - lb.y()) <= atol) {
            const double y0 = mid.y();
            for (int dir : {+1, -1})
                if (f.contains_local(Vec2(mid.x(), y0 + dir * 0.5 * delta), atol)) gy.emplace_back(y0, dir);
        }
        // Edges oblique in the local frame get no grading; the reference mesh ties
        // such interfaces by interpolation instead.
    }
    g->xs = build_axis(lo.x(), hi.x(), target_h, step, half, gx);
    g->ys = build_axis(lo.y(), hi.y(), target_h, step, half, gy);

    const int ncx = g->nxn() - 1, ncy = g->nyn() - 1;
    g->cell_inside.assign(static_cast<size_t>(ncx * ncy), 0);
    for (int j = 0; j < ncy; ++j)
        for (int i = 0; i < ncx; ++i) {
            const Vec2 c00(g->xs[static_cast<size_t>(i)], g->ys[static_cast<size_t>(j)]);
            const Vec2 c11(g->xs[static_cast<size_t>(i + 1)], g->ys[static_cast<size_t>(j + 1)]);
            const Vec2 cc = 0.5 * (c00 + c11);
            const bool in = f.contains_local(c00, atol) && f.contains_local(c11, atol) &&
                            f.contains_local(Vec2(c00.x(), c11.y()), atol) &&
                            f.contains_local(Vec2(c11.x(), c00.y()), atol) && f.contains_local(cc, atol);
            g->cell_inside[static_cast<size_t>(g->inplane_cell_index(i, j))] = in ? 1 : 0;
        }
    return g;
}

DisplacementSample3D sample_global_field(const GridPtr& grid, const std::function<Vec3(const Vec3&)>& f) {
    DisplacementSample3D s(grid);
    for (int k = 0; k < grid->nzn(); ++k)
        for (int j = 0; j < grid->nyn(); ++j)
            for (int i = 0; i < grid->nxn(); ++i)
                s.at(i, j, k) = grid->face.global_vec_to_local(f(grid->node_global(i, j, k)));
    return s;
}

DisplacementSample3D sample_local_field(const GridPtr& grid, const std::function<Vec3(const Vec3&)>& f) {
    DisplacementSample3D s(grid);
    for (int k = 0; k < grid->nzn(); ++k)
        for (int j = 0; j < grid->nyn(); ++j)
            for (int i = 0; i < grid->nxn(); ++i)
                s.at(i, j, k) = f(grid->node_local(i, j, k));
    return s;
}

DisplacementSample3D sample_axpy(double a, const DisplacementSample3D& x, const DisplacementSample3D& y) {
    require(x.grid == y.grid, "sample_axpy: samples live on different grids");
    DisplacementSample3D out(x.grid);
    for (size_t n = 0; n < out.u.size(); ++n) out.u[n] = a * x.u[n] + y.u[n];
    return out;
}

namespace {

// Least-squares rigid displacement a + b ^ x over nodes of the strip of columns
// [q0, q1] along the given in-plane axis; local coordinates and components.
void fit_strip_rigid(const DisplacementSample3D& s, int axis, int q0, int q1, Vec3& a, Vec3& b) {
    const PlateGrid3D& g = *s.grid;
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
    for (int k = 0; k < g.nzn(); ++k)
        for (int j = 0; j < g.nyn(); ++j)
            for (int i = 0; i < g.nxn(); ++i) {
                const int q = (axis == 0) ? i : j;
                if (q < q0 || q > q1) continue;
                const Vec3 p = g.node_local(i, j, k);
                Eigen::Matrix<double, 3, 6> J;
                J.leftCols<3>() = Mat3::Identity();
                J.rightCols<3>() << 0.0, p.z(), -p.y(), -p.z(), 0.0, p.x(), p.y(), -p.x(), 0.0;
                A += J.transpose() * J;
                rhs += J.transpose() * s.at(i, j, k);
            }
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(A);
    require(lu.isInvertible(), "extend_sample: degenerate boundary strip");
    const Eigen::Matrix<double, 6, 1> sol = lu.solve(rhs);
    a = sol.head<3>();
    b = sol.tail<3>();
}

inline Vec3 eval_rigid(const Vec3& a, const Vec3& b, const Vec3& p) { return a + b.cross(p); }

// Pad one in-plane axis. A rigid displacement is fitted over each boundary strip and
// continued outward; the remainder is continued by even reflection. This keeps the
// extension continuous, reproduces rigid displacements exactly, and keeps the strain
// energy of the pad controlled by the strip energy.
DisplacementSample3D extend_axis(const DisplacementSample3D& s, double margin, int axis) {
    const PlateGrid3D& g = *s.grid;
    const std::vector<double>& cs = (axis == 0) ? g.xs : g.ys;
    const int n = static_cast<int>(cs.size());
    require(cs.back() - cs.front() >= margin, "extend_sample: margin exceeds the face extent");
    int klo = 1;
    while (cs[static_cast<size_t>(klo)] - cs.front() < margin && klo + 1 < n) ++klo;
    int khi = 1;
    while (cs.back() - cs[static_cast<size_t>(n - 1 - khi)] < margin && khi + 1 < n) ++khi;

    Vec3 a_lo, b_lo, a_hi, b_hi;
    fit_strip_rigid(s, axis, 0, klo, a_lo, b_lo);
    fit_strip_rigid(s, axis, n - 1 - khi, n - 1, a_hi, b_hi);

    std::vector<double> nc;
    nc.reserve(static_cast<size_t>(n + klo + khi));
    for (int k = klo; k >= 1; --k) nc.push_back(2.0 * cs.front() - cs[static_cast<size_t>(k)]);
    nc.insert(nc.end(), cs.begin(), cs.end());
    for (int k = 1; k <= khi; ++k) nc.push_back(2.0 * cs.back() - cs[static_cast<size_t>(n - 1 - k)]);

    auto ng = std::make_shared<PlateGrid3D>();
    ng->face = g.face;
    ng->delta = g.delta;
    ng->zs = g.zs;
    ng->xs = (axis == 0) ? nc : g.xs;
    ng->ys = (axis == 0) ? g.ys : nc;
    ng->cell_inside.assign(static_cast<size_t>((ng->nxn() - 1) * (ng->nyn() - 1)), 1);

    DisplacementSample3D out(ng);
    for (int k = 0; k < ng->nzn(); ++k)
        for (int j = 0; j < ng->nyn(); ++j)
            for (int i = 0; i < ng->nxn(); ++i) {
                const int q = (axis == 0) ? i : j;
                int sq = q - klo;
                int side = 0;
                if (sq < 0) {
                    sq = -sq;
                    side = -1;
                } else if (sq > n - 1) {
                    sq = 2 * (n - 1) - sq;
                    side = +1;
                }
                const Vec3 um = (axis == 0) ? s.at(sq, j, k) : s.at(i, sq, k);
                if (side == 0) {
                    out.at(i, j, k) = um;
                    continue;
                }
                const Vec3& a = (side < 0) ? a_lo : a_hi;
                const Vec3& b = (side < 0) ? b_lo : b_hi;
                const Vec3 p_out = ng->node_local(i, j, k);
                Vec3 p_mirror = p_out;
                p_mirror[axis] = (axis == 0) ? g.xs[static_cast<size_t>(sq)] : g.ys[static_cast<size_t>(sq)];
                out.at(i, j, k) = eval_rigid(a, b, p_out) + (um - eval_rigid(a, b, p_mirror));
            }
    return out;
}

}  // namespace

DisplacementSample3D extend_sample(const DisplacementSample3D& s, double margin) {
    require(margin > 0.0, "extend_sample: margin must be positive");
    return extend_axis(extend_axis(s, margin, 0), margin, 1);
}

double StrainView::cell_gauss_grad(int i, int j, int k, std::array<Mat3, 8>& out) const {
    const PlateGrid3D& g = *sample->grid;
    const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
    const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
    const double hz = g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)];
    Vec3 uc[8];
    for (int c = 0; c < 8; ++c) uc[c] = sample->at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));

    const double gp[2] = {kGaussLo, kGaussHi};
    int n = 0;
    for (int gz = 0; gz < 2; ++gz)
        for (int gy = 0; gy < 2; ++gy)
            for (int gx = 0; gx < 2; ++gx, ++n) {
                const double xi = gp[gx], et = gp[gy], ze = gp[gz];
                Mat3 grad = Mat3::Zero();
                for (int c = 0; c < 2 * 2 * 2; ++c) {
                    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
                    const double sx = di ? xi : 1.0 - xi;
                    const double sy = dj ? et : 1.0 - et;
                    const double sz = dk ? ze : 1.0 - ze;
                    const Vec3 dN((di ? 1.0 : -1.0) * sy * sz / hx, sx * (dj ? 1.0 : -1.0) * sz / hy,
                                  sx * sy * (dk ? 1.0 : -1.0) / hz);
                    grad += uc[c] * dN.transpose();
                }
                out[static_cast<size_t>(n)] = grad;
            }
    return hx * hy * hz / 8.0;
}

double StrainView::cell_gauss(int i, int j, int k, std::array<Mat3, 8>& out) const {
    const double w = cell_gauss_grad(i, j, k, out);
    for (auto& m : out) m = sym_part(m);
    return w;
}

Mat3 StrainView::at_cell_center(int i, int j, int k) const {
    const PlateGrid3D& g = *sample->grid;
    const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
    const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
    const double hz = g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)];
    Mat3 grad = Mat3::Zero();
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
        const Vec3 dN((di ? 1.0 : -1.0) * 0.25 / hx, (dj ? 1.0 : -1.0) * 0.25 / hy, (dk ? 1.0 : -1.0) * 0.25 / hz);
        grad += sample->at(i + di, j + dj, k + dk) * dN.transpose();
    }
    return sym_part(grad);
}

Vec3 StrainView::value_at_gauss(int i, int j, int k, int gidx) const {
    const double gp[2] = {kGaussLo, kGaussHi};
    const double xi = gp[gidx & 1], et = gp[(gidx >> 1) & 1], ze = gp[(gidx >> 2) & 1];
    Vec3 v = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
        const double w = (di ? xi : 1.0 - xi) * (dj ? et : 1.0 - et) * (dk ? ze : 1.0 - ze);
        v += w * sample->at(i + di, j + dj, k + dk);
    }
    return v;
}

namespace {

enum class CellQuantity { StrainSq, GradSq, ValueSq };

double integrate(const DisplacementSample3D& s, const RegionPredicate& region, CellQuantity what,
                 const std::function<bool(const Vec3&)>& skip = nullptr) {
    const PlateGrid3D& g = *s.grid;
    const StrainView sv{&s};
    std::array<Mat3, 8> buf;
    double acc = 0.0;
    for (int j = 0; j < g.nyn() - 1; ++j)
        for (int i = 0; i < g.nxn() - 1; ++i) {
            if (!g.cell_is_inside(i, j)) continue;
            for (int k = 0; k < g.nzn() - 1; ++k) {
                const Vec3 center = g.cell_center_global(i, j, k);
                if (region && !region(center)) continue;
                if (skip && skip(center)) continue;
                if (what == CellQuantity::ValueSq) {
                    const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
                    const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
                    const double hz = g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)];
                    const double w = hx * hy * hz / 8.0;
                    for (int q = 0; q < 8; ++q) acc += w * sv.value_at_gauss(i, j, k, q).squaredNorm();
                } else {
                    const double w = (what == CellQuantity::StrainSq) ? sv.cell_gauss(i, j, k, buf)
                                                                      : sv.cell_gauss_grad(i, j, k, buf);
                    for (const auto& m : buf) acc += w * m.squaredNorm();
                }
            }
        }
    return acc;
}

}  // namespace

double energy_E(const DisplacementSample3D& s, const RegionPredicate& region) {
    return integrate(s, region, CellQuantity::StrainSq);
}

double energy_D(const DisplacementSample3D& s, const RegionPredicate& region) {
    return integrate(s, region, CellQuantity::GradSq);
}

double norm_L2sq(const DisplacementSample3D& s, const RegionPredicate& region) {
    return integrate(s, region, CellQuantity::ValueSq);
}

bool point_inside_plate(const Face& f, double delta, const Vec3& global_point) {
    const double x3 = f.local_x3(global_point);
    if (std::abs(x3) >= delta * (1.0 - 1e-12)) return false;
    return f.contains_local(f.to_local(global_point), 1e-12 * std::max(1.0, f.diameter()));
}

namespace {

double structure_integrate(const StructureSample& ss, const RegionPredicate& region, CellQuantity what) {
    double acc = 0.0;
    for (size_t pi = 0; pi < ss.plates.size(); ++pi) {
        const auto& plate = ss.plates[pi];
        auto owned_earlier = [&](const Vec3& p) {
            for (size_t q = 0; q < pi; ++q) {
                const auto& og = *ss.plates[q].grid;
                if (point_inside_plate(og.face, og.delta, p)) return true;
            }
            return false;
        };
        acc += integrate(plate, region, what, ss.plates.size() > 1 ? owned_earlier : std::function<bool(const Vec3&)>());
    }
    return acc;
}

}  // namespace

double structure_energy_E(const StructureSample& ss, const RegionPredicate& region) {
    return structure_integrate(ss, region, CellQuantity::StrainSq);
}

double structure_energy_D(const StructureSample& ss, const RegionPredicate& region) {
    return structure_integrate(ss, region, CellQuantity::GradSq);
}

double structure_norm_L2sq(const StructureSample& ss, const RegionPredicate& region) {
    return structure_integrate(ss, region, CellQuantity::ValueSq);
}

Mat3 stress_of(const Material& m, const Mat3& strain_tensor) { return m.stress(strain_tensor); }

std::vector<StitchGroup> build_stitching(const std::vector<GridPtr>& grids, double tol) {
    PointMerger merger(tol);
    std::map<int, StitchGroup> by_point;
    for (size_t pi = 0; pi < grids.size(); ++pi) {
        const PlateGrid3D& g = *grids[pi];
        for (int k = 0; k < g.nzn(); ++k)
            for (int j = 0; j < g.nyn(); ++j)
                for (int i = 0; i < g.nxn(); ++i) {
                    if (!g.node_used(i, j)) continue;
                    const int id = merger.find_or_add(g.node_global(i, j, k));
                    by_point[id].members.emplace_back(static_cast<int>(pi), g.node_index(i, j, k));
                }
    }
    std::vector<StitchGroup> out;
    for (auto& [id, grp] : by_point) {
        bool cross = false;
        for (size_t m = 1; m < grp.members.size(); ++m)
            if (grp.members[m].first != grp.members[0].first) cross = true;
        if (cross) out.push_back(std::move(grp));
    }
    return out;
}

double stitching_discrepancy(const StructureSample& ss, const std::vector<StitchGroup>& groups) {
    double worst = 0.0;
    for (const auto& grp : groups) {
        for (size_t a = 0; a < grp.members.size(); ++a)
            for (size_t b = a + 1; b < grp.members.size(); ++b) {
                const auto& [pa, na] = grp.members[a];
                const auto& [pb, nb] = grp.members[b];
                const Vec3 va = ss.plates[static_cast<size_t>(pa)].grid->face.local_vec_to_global(
                    ss.plates[static_cast<size_t>(pa)].u[static_cast<size_t>(na)]);
                const Vec3 vb = ss.plates[static_cast<size_t>(pb)].grid->face.local_vec_to_global(
                    ss.plates[static_cast<size_t>(pb)].u[static_cast<size_t>(nb)]);
                worst = std::max(worst, (va - vb).norm());
            }
    }
    return worst;
}

namespace {

void write_plate_rows(CsvWriter& w, const DisplacementSample3D& s) {
    const PlateGrid3D& g = *s.grid;
    for (int k = 0; k < g.nzn(); ++k)
        for (int j = 0; j < g.nyn(); ++j)
            for (int i = 0; i < g.nxn(); ++i) {
                if (!g.node_used(i, j)) continue;
                const Vec3 p = g.node_global(i, j, k);
                const Vec3 u = s.global_at(i, j, k);
                w.row({CsvWriter::num(g.face.id), CsvWriter::num(i), CsvWriter::num(j), CsvWriter::num(k),
                       CsvWriter::num(p.x()), CsvWriter::num(p.y()), CsvWriter::num(p.z()), CsvWriter::num(u.x()),
                       CsvWriter::num(u.y()), CsvWriter::num(u.z())});
            }
}

}  // namespace

static const std::vector<std::string> kSampleHeader = {"face_id", "i", "j", "k", "x",
                                                       "y",       "z", "u1", "u2", "u3"};

void export_sample_csv(const std::string& path, const StructureSample& ss) {
    CsvWriter w(path, kSampleHeader);
    for (const auto& plate : ss.plates) write_plate_rows(w, plate);
}

void export_sample_csv(const std::string& path, const DisplacementSample3D& s) {
    CsvWriter w(path, kSampleHeader);
    write_plate_rows(w, s);
}

}  // namespace plates
