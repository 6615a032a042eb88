#include "platestruct/decompose.hpp"

#include <cmath>
#include <limits>

namespace plates {

namespace {

// Three-point derivative weights at x1 given neighbors at x1-hm and x1+hp.
inline void d3_weights(double hm, double hp, double& wl, double& wc, double& wr) {
    wl = -hp / (hm * (hm + hp));
    wc = (hp - hm) / (hm * hp);
    wr = hm / (hp * (hm + hp));
}

}  // namespace

MidsurfaceField md_derivative(const MidsurfaceField& f, int axis) {
    require(axis == 0 || axis == 1, "md_derivative: axis must be 0 or 1");
    const PlateGrid3D& g = *f.grid;
    const std::vector<double>& cs = (axis == 0) ? g.xs : g.ys;
    const int n = static_cast<int>(cs.size());
    require(n >= 3, "md_derivative: need at least three nodes along the axis");
    MidsurfaceField out(f.grid);
    for (int j = 0; j < g.nyn(); ++j)
        for (int i = 0; i < g.nxn(); ++i) {
            const int q = (axis == 0) ? i : j;
            // Clamp the stencil to the grid; one-sided at the rims, same order.
            const int c = std::min(std::max(q, 1), n - 2);
            const double hm = cs[static_cast<size_t>(c)] - cs[static_cast<size_t>(c - 1)];
            const double hp = cs[static_cast<size_t>(c + 1)] - cs[static_cast<size_t>(c)];
            double wl, wc, wr;
            d3_weights(hm, hp, wl, wc, wr);
            const double x = cs[static_cast<size_t>(q)];
            const double xc = cs[static_cast<size_t>(c)];
            // Derivative of the stencil quadratic evaluated at the node itself.
            const double t = x - xc;
            const double al = wl + t * 2.0 / (hm * (hm + hp));
            const double ac = wc - t * 2.0 / (hm * hp);
            const double ar = wr + t * 2.0 / (hp * (hm + hp));
            Vec3 fl, fc, fr;
            if (axis == 0) {
                fl = f.at(c - 1, j);
                fc = f.at(c, j);
                fr = f.at(c + 1, j);
            } else {
                fl = f.at(i, c - 1);
                fc = f.at(i, c);
                fr = f.at(i, c + 1);
            }
            out.at(i, j) = al * fl + ac * fc + ar * fr;
        }
    return out;
}

namespace {

template <class F>
double md_integrate(const PlateGrid3D& g, F&& center_value_sq) {
    double acc = 0.0;
    for (int j = 0; j < g.nyn() - 1; ++j)
        for (int i = 0; i < g.nxn() - 1; ++i) {
            if (!g.cell_is_inside(i, j)) continue;
            const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
            const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
            acc += hx * hy * center_value_sq(i, j, hx, hy);
        }
    return acc;
}

inline Vec3 cell_mean(const MidsurfaceField& f, int i, int j) {
    return 0.25 * (f.at(i, j) + f.at(i + 1, j) + f.at(i, j + 1) + f.at(i + 1, j + 1));
}

inline void cell_grad(const MidsurfaceField& f, int i, int j, double hx, double hy, Vec3& d1, Vec3& d2) {
    d1 = ((f.at(i + 1, j) + f.at(i + 1, j + 1)) - (f.at(i, j) + f.at(i, j + 1))) / (2.0 * hx);
    d2 = ((f.at(i, j + 1) + f.at(i + 1, j + 1)) - (f.at(i, j) + f.at(i + 1, j))) / (2.0 * hy);
}

}  // namespace

double md_norm_L2sq(const MidsurfaceField& f) {
    return md_integrate(*f.grid, [&](int i, int j, double, double) { return cell_mean(f, i, j).squaredNorm(); });
}

double md_grad_norm_L2sq(const MidsurfaceField& f) {
    return md_integrate(*f.grid, [&](int i, int j, double hx, double hy) {
        Vec3 d1, d2;
        cell_grad(f, i, j, hx, hy, d1, d2);
        return d1.squaredNorm() + d2.squaredNorm();
    });
}

double md_norm_H1sq(const MidsurfaceField& f) { return md_norm_L2sq(f) + md_grad_norm_L2sq(f); }

double md_shear_defect_L2sq(const MidsurfaceField& U, const MidsurfaceField& R) {
    require(U.grid == R.grid, "shear defect: fields live on different grids");
    return md_integrate(*U.grid, [&](int i, int j, double hx, double hy) {
        Vec3 d1, d2;
        cell_grad(U, i, j, hx, hy, d1, d2);
        const Vec3 r = cell_mean(R, i, j);
        const Vec3 def1 = d1 - Vec3(0.0, r.z(), -r.y());   // R ^ e1
        const Vec3 def2 = d2 - Vec3(-r.z(), 0.0, r.x());   // R ^ e2
        return def1.squaredNorm() + def2.squaredNorm();
    });
}

PlateDecomposition epd_fiber(const DisplacementSample3D& s) {
    const PlateGrid3D& g = *s.grid;
    const double delta = g.delta;
    const double hz = 2.0 * delta / (g.nzn() - 1);
    const std::vector<double> w = simpson_weights(g.nzn(), hz);
    PlateDecomposition d{MidsurfaceField(s.grid), MidsurfaceField(s.grid)};
    for (int j = 0; j < g.nyn(); ++j)
        for (int i = 0; i < g.nxn(); ++i) {
            Vec3 mean = Vec3::Zero();
            double m1 = 0.0, m2 = 0.0;  // first moments of u1, u2 against x3
            for (int k = 0; k < g.nzn(); ++k) {
                const Vec3& u = s.at(i, j, k);
                const double x3 = g.zs[static_cast<size_t>(k)];
                mean += w[static_cast<size_t>(k)] * u;
                m1 += w[static_cast<size_t>(k)] * x3 * u.x();
                m2 += w[static_cast<size_t>(k)] * x3 * u.y();
            }
            d.U.at(i, j) = mean / (2.0 * delta);
            const double c = 3.0 / (2.0 * delta * delta * delta);
            // e3 ^ u integrated against x3: components (-u2, u1, 0).
            d.R.at(i, j) = Vec3(-c * m2, c * m1, 0.0);
        }
    return d;
}

PlateDecomposition epd_ball(const DisplacementSample3D& s) {
    const double delta = s.grid->delta;
    const double r = 0.5 * delta;
    const DisplacementSample3D ext = extend_sample(s, 0.75 * delta);
    const PlateGrid3D& eg = *ext.grid;

    auto lower_bound_idx = [](const std::vector<double>& cs, double v) {
        return static_cast<int>(std::lower_bound(cs.begin(), cs.end(), v) - cs.begin());
    };

    PlateDecomposition d{MidsurfaceField(s.grid), MidsurfaceField(s.grid)};
    const PlateGrid3D& g = *s.grid;
    std::vector<Vec3> centers;
    std::vector<Vec3> values;
    std::vector<double> weights;
    for (int j = 0; j < g.nyn(); ++j)
        for (int i = 0; i < g.nxn(); ++i) {
            const Vec3 xh(g.xs[static_cast<size_t>(i)], g.ys[static_cast<size_t>(j)], 0.0);
            const int ilo = std::max(0, lower_bound_idx(eg.xs, xh.x() - r) - 1);
            const int ihi = std::min(eg.nxn() - 1, lower_bound_idx(eg.xs, xh.x() + r) + 1);
            const int jlo = std::max(0, lower_bound_idx(eg.ys, xh.y() - r) - 1);
            const int jhi = std::min(eg.nyn() - 1, lower_bound_idx(eg.ys, xh.y() + r) + 1);
            centers.clear();
            values.clear();
            weights.clear();
            double vol = 0.0;
            Vec3 mean = Vec3::Zero(), first = Vec3::Zero();
            for (int ck = 0; ck < eg.nzn() - 1; ++ck)
                for (int cj = jlo; cj < jhi; ++cj)
                    for (int ci = ilo; ci < ihi; ++ci) {
                        const Vec3 c = eg.cell_center_local(ci, cj, ck);
                        const Vec3 m = c - xh;
                        if (m.squaredNorm() >= r * r) continue;
                        const double w = (eg.xs[static_cast<size_t>(ci + 1)] - eg.xs[static_cast<size_t>(ci)]) *
                                         (eg.ys[static_cast<size_t>(cj + 1)] - eg.ys[static_cast<size_t>(cj)]) *
                                         (eg.zs[static_cast<size_t>(ck + 1)] - eg.zs[static_cast<size_t>(ck)]);
                        Vec3 uc = Vec3::Zero();
                        for (int n = 0; n < 8; ++n)
                            uc += ext.at(ci + (n & 1), cj + ((n >> 1) & 1), ck + ((n >> 2) & 1));
                        uc *= 0.125;
                        vol += w;
                        mean += w * uc;
                        first += w * m;
                        centers.push_back(m);
                        values.push_back(uc);
                        weights.push_back(w);
                    }
            require(vol > 0.0, "epd_ball: empty averaging stencil; refine the grid");
            mean /= vol;
            // Offsets about the stencil centroid so a lopsided stencil cannot feed a
            // constant displacement into the rotation. The rotation normalizer is the
            // discrete counterpart of 60 / (pi delta^5): the moment of the quadrature
            // cells themselves, which recovers rigid rotations exactly.
            const Vec3 centroid = first / vol;
            Vec3 moment = Vec3::Zero();
            Mat3 second = Mat3::Zero();
            for (size_t q = 0; q < centers.size(); ++q) {
                const Vec3 m = centers[q] - centroid;
                moment += weights[q] * m.cross(values[q]);
                second += weights[q] * m * m.transpose();
            }
            const Mat3 K = second.trace() * Mat3::Identity() - second;
            Eigen::FullPivLU<Mat3> lu(K);
            require(lu.isInvertible(), "epd_ball: degenerate averaging stencil; refine the grid");
            const Vec3 rot = lu.solve(moment);
            d.R.at(i, j) = rot;
            d.U.at(i, j) = mean - rot.cross(centroid);
        }
    return d;
}

DisplacementSample3D elementary_sample(const PlateDecomposition& d) {
    const PlateGrid3D& g = *d.U.grid;
    DisplacementSample3D out(d.U.grid);
    for (int k = 0; k < g.nzn(); ++k) {
        const double x3 = g.zs[static_cast<size_t>(k)];
        for (int j = 0; j < g.nyn(); ++j)
            for (int i = 0; i < g.nxn(); ++i) {
                const Vec3& r = d.R.at(i, j);
                out.at(i, j, k) = d.U.at(i, j) + x3 * Vec3(r.y(), -r.x(), 0.0);
            }
    }
    return out;
}

DisplacementSample3D epd_residual(const DisplacementSample3D& u, const PlateDecomposition& d) {
    return sample_axpy(-1.0, elementary_sample(d), u);
}

KLSplit kl_split(const DisplacementSample3D& u, const PlateDecomposition& d) {
    const PlateGrid3D& g = *u.grid;
    MidsurfaceField u3(d.U.grid);
    for (int j = 0; j < g.nyn(); ++j)
        for (int i = 0; i < g.nxn(); ++i) u3.at(i, j) = Vec3(d.U.at(i, j).z(), 0.0, 0.0);
    const MidsurfaceField d1 = md_derivative(u3, 0);
    const MidsurfaceField d2 = md_derivative(u3, 1);

    KLSplit out{DisplacementSample3D(u.grid), DisplacementSample3D(u.grid)};
    for (int k = 0; k < g.nzn(); ++k) {
        const double x3 = g.zs[static_cast<size_t>(k)];
        for (int j = 0; j < g.nyn(); ++j)
            for (int i = 0; i < g.nxn(); ++i) {
                const Vec3& U = d.U.at(i, j);
                const Vec3 kl(U.x() - x3 * d1.at(i, j).x(), U.y() - x3 * d2.at(i, j).x(), U.z());
                out.kl.at(i, j, k) = kl;
                out.residual.at(i, j, k) = u.at(i, j, k) - kl;
            }
    }
    return out;
}

double norm_dx3_L2sq(const DisplacementSample3D& u, const RegionPredicate& region) {
    const PlateGrid3D& g = *u.grid;
    const StrainView sv = strain(u);
    std::array<Mat3, 8> buf;
    double acc = 0.0;
    for (int j = 0; j < g.nyn() - 1; ++j)
        for (int i = 0; i < g.nxn() - 1; ++i) {
            if (!g.cell_is_inside(i, j)) continue;
            for (int k = 0; k < g.nzn() - 1; ++k) {
                if (region && !region(g.cell_center_global(i, j, k))) continue;
                const double w = sv.cell_gauss_grad(i, j, k, buf);
                for (const auto& m : buf) acc += w * m.col(2).squaredNorm();
            }
        }
    return acc;
}

UnfoldedSample unfold(const DisplacementSample3D& u) { return UnfoldedSample{u.grid, u.grid->delta, u.u}; }

DisplacementSample3D fold(const UnfoldedSample& t) {
    DisplacementSample3D out(t.grid);
    out.u = t.u;
    return out;
}

double unfolded_norm_L2sq(const UnfoldedSample& t) {
    DisplacementSample3D view = fold(t);
    const PlateGrid3D& g = *t.grid;
    const StrainView sv{&view};
    double acc = 0.0;
    for (int j = 0; j < g.nyn() - 1; ++j)
        for (int i = 0; i < g.nxn() - 1; ++i) {
            if (!g.cell_is_inside(i, j)) continue;
            for (int k = 0; k < g.nzn() - 1; ++k) {
                const double hx = g.xs[static_cast<size_t>(i + 1)] - g.xs[static_cast<size_t>(i)];
                const double hy = g.ys[static_cast<size_t>(j + 1)] - g.ys[static_cast<size_t>(j)];
                const double ht = (g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)]) / t.delta;
                const double w = hx * hy * ht / 8.0;
                for (int q = 0; q < 8; ++q) acc += w * sv.value_at_gauss(i, j, k, q).squaredNorm();
            }
        }
    return acc;
}

Vec3 unfolded_t3_quotient(const UnfoldedSample& t, int i, int j, int k) {
    const PlateGrid3D& g = *t.grid;
    const Vec3 dq = (t.at(i, j, k + 1) - t.at(i, j, k)) / (g.zs[static_cast<size_t>(k + 1)] - g.zs[static_cast<size_t>(k)]);
    return t.delta * dq;
}

std::pair<Vec3, Vec3> rigid_fit(const DisplacementSample3D& s, const RegionPredicate& region, const Vec3& x0) {
    const PlateGrid3D& g = *s.grid;
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    int count = 0;
    for (int k = 0; k < g.nzn(); ++k)
        for (int j = 0; j < g.nyn(); ++j)
            for (int i = 0; i < g.nxn(); ++i) {
                if (!g.node_used(i, j)) continue;
                const Vec3 p = g.node_global(i, j, k);
                if (region && !region(p)) continue;
                const Vec3 d = p - x0;
                Eigen::Matrix<double, 3, 6> J;
                J.leftCols<3>() = Mat3::Identity();
                // b ^ d written as a matrix in b.
                J.rightCols<3>() << 0.0, d.z(), -d.y(), -d.z(), 0.0, d.x(), d.y(), -d.x(), 0.0;
                const Vec3 ug = s.global_at(i, j, k);
                A += J.transpose() * J;
                b += J.transpose() * ug;
                ++count;
            }
    if (count < 4) throw CheckError("rigid_fit: region holds too few nodes");
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(A);
    if (lu.rank() < 6) throw CheckError("rigid_fit: degenerate node set");
    const Eigen::Matrix<double, 6, 1> sol = lu.solve(b);
    return {sol.head<3>(), sol.tail<3>()};
}

StructureDecomposition structure_epd(const StructureSample& ss) {
    StructureDecomposition out;
    out.plates.reserve(ss.plates.size());
    for (const auto& plate : ss.plates) out.plates.push_back(epd_fiber(plate));
    return out;
}

namespace {

double safe_ratio(double lhs, double rhs) {
    if (rhs > 1e-30) return lhs / rhs;
    return lhs <= 1e-24 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<EstimateRow> verify_plate_estimates(const DisplacementSample3D& u) {
    const double delta = u.grid->delta;
    const double rhs = energy_E(u);
    std::vector<EstimateRow> rows;

    {
        const PlateDecomposition d = epd_fiber(u);
        const DisplacementSample3D ue = elementary_sample(d);
        const DisplacementSample3D res = sample_axpy(-1.0, ue, u);
        const double lhs = energy_E(ue) + energy_D(res) + norm_L2sq(res) / (delta * delta);
        rows.push_back({"2.2", delta, lhs, rhs, safe_ratio(lhs, rhs)});

        const KLSplit kl = kl_split(u, d);
        const double lhs4 = norm_L2sq(kl.residual) / (delta * delta) + norm_dx3_L2sq(kl.residual);
        rows.push_back({"2.4", delta, lhs4, rhs, safe_ratio(lhs4, rhs)});
    }
    {
        const PlateDecomposition d = epd_ball(u);
        const DisplacementSample3D ue = elementary_sample(d);
        const DisplacementSample3D res = sample_axpy(-1.0, ue, u);
        const double lhs = delta * delta * delta * md_grad_norm_L2sq(d.R) +
                           delta * md_shear_defect_L2sq(d.U, d.R) + energy_E(ue) + energy_D(res) +
                           norm_L2sq(res) / (delta * delta);
        rows.push_back({"2.16", delta, lhs, rhs, safe_ratio(lhs, rhs)});
    }
    return rows;
}

std::vector<EstimateRow> verify_structure_estimates(const StructureSample& ss) {
    require(!ss.plates.empty(), "structure estimates: no plates");
    const double delta = ss.plates.front().grid->delta;
    const double rhs = structure_energy_E(ss);
    const StructureDecomposition sd = structure_epd(ss);

    double grad_terms = 0.0, ue_terms = 0.0, kn = 0.0;
    for (size_t p = 0; p < ss.plates.size(); ++p) {
        const PlateDecomposition& d = sd.plates[p];
        grad_terms += delta * delta * delta * md_grad_norm_L2sq(d.R) + delta * md_shear_defect_L2sq(d.U, d.R);
        const DisplacementSample3D ue = elementary_sample(d);
        const DisplacementSample3D res = sample_axpy(-1.0, ue, ss.plates[p]);
        ue_terms += energy_E(ue) + energy_D(res) + norm_L2sq(res) / (delta * delta);
        kn += delta * (md_norm_H1sq(d.R) + md_norm_H1sq(d.U));
    }
    std::vector<EstimateRow> rows;
    const double lhs1 = grad_terms + ue_terms;
    rows.push_back({"3.1", delta, lhs1, rhs, safe_ratio(lhs1, rhs)});

    const double korn_lhs = kn + structure_energy_D(ss) + structure_norm_L2sq(ss);
    const double lhs2 = delta * delta * korn_lhs;  // rhs bound carries 1/delta^2
    rows.push_back({"3.2", delta, lhs2, rhs, safe_ratio(lhs2, rhs)});
    return rows;
}

void write_estimate_csv(const std::string& path, const std::vector<EstimateRow>& rows) {
    CsvWriter w(path, {"inequality_id", "delta", "lhs", "rhs_energy", "ratio"});
    for (const auto& r : rows)
        w.row({r.inequality_id, CsvWriter::num(r.delta), CsvWriter::num(r.lhs), CsvWriter::num(r.rhs_energy),
               CsvWriter::num(r.ratio)});
}

}  // namespace plates
