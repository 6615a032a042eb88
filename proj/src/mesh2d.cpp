#include "platestruct/mesh2d.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace plates {

namespace {

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

std::pair<int, int> node_pair(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

double skeleton_merge_tol(const Skeleton& sk) {
    double min_len = std::numeric_limits<double>::infinity();
    for (const Edge& e : sk.edges) min_len = std::min(min_len, e.length());
    return 1e-7 * std::max(1.0, min_len);
}

struct LoopNode {
    Vec2 p = Vec2::Zero();
    int sk_edge = -1;
    int sk_vertex = -1;
};

struct SideCover {
    int edge_index = -1;
    double lo = 0.0, hi = 0.0;
    bool reversed = false;
};

std::vector<SideCover> side_covers(const Skeleton& sk, const Face& f, size_t side) {
    const size_t n = f.poly.size();
    const Vec3 A = f.vertices[side];
    const Vec3 B = f.vertices[(side + 1) % n];
    const Vec3 d = B - A;
    const double L = d.norm();
    const double tol = 1e-9 * std::max(1.0, L);
    std::vector<SideCover> covers;
    for (int ei : sk.edges_of_face(f.id)) {
        const Edge& e = sk.edges[static_cast<size_t>(ei)];
        const double ta = (e.a - A).dot(d) / (L * L);
        const double tb = (e.b - A).dot(d) / (L * L);
        if (((e.a - A) - ta * d).norm() > tol) continue;
        if (((e.b - A) - tb * d).norm() > tol) continue;
        const double lo = std::min(ta, tb), hi = std::max(ta, tb);
        if (hi < 1e-9 || lo > 1.0 - 1e-9) continue;  // lives on another collinear side
        covers.push_back({ei, lo, hi, ta > tb});
    }
    std::sort(covers.begin(), covers.end(), [](const SideCover& a, const SideCover& b) { return a.lo < b.lo; });
    double walked = 0.0;
    for (const SideCover& c : covers) {
        require(std::abs(c.lo - walked) <= 1e-7, "declared edges do not tile a side of face " + std::to_string(f.id));
        walked = c.hi;
    }
    require(std::abs(walked - 1.0) <= 1e-7, "declared edges do not tile a side of face " + std::to_string(f.id));
    return covers;
}

std::vector<LoopNode> boundary_loop(const Skeleton& sk, const Face& f, double target_h) {
    std::vector<LoopNode> loop;
    const size_t n = f.poly.size();
    for (size_t side = 0; side < n; ++side) {
        const Vec2 pA = f.poly[side];
        const Vec2 pB = f.poly[(side + 1) % n];
        for (const SideCover& c : side_covers(sk, f, side)) {
            const Edge& e = sk.edges[static_cast<size_t>(c.edge_index)];
            std::vector<double> q = skeleton_edge_params(sk, c.edge_index, target_h);
            if (c.reversed) {
                std::reverse(q.begin(), q.end());
                for (double& v : q) v = 1.0 - v;
            }
            for (size_t j = 0; j + 1 < q.size(); ++j) {  // the hi endpoint opens the next piece
                const double ts = c.lo + (c.hi - c.lo) * q[j];
                LoopNode ln;
                ln.p = pA + ts * (pB - pA);
                if (j == 0) {
                    ln.sk_vertex = skeleton_vertex_at(sk, c.reversed ? e.b : e.a);
                    require(ln.sk_vertex >= 0, "edge endpoint is not a skeleton vertex");
                } else {
                    ln.sk_edge = c.edge_index;
                }
                loop.push_back(ln);
            }
        }
    }
    require(loop.size() >= 3, "degenerate boundary of face " + std::to_string(f.id));
    return loop;
}

// Structured grid for a local-axis-aligned rectangle whose opposite sides carry
// identical subdivisions. Returns false when the boundary does not line up.
bool try_tensor_mesh(const Skeleton& sk, const Face& f, const std::vector<LoopNode>& loop, FaceMesh& m) {
    if (f.poly.size() != 4) return false;
    const double tol = 1e-9 * std::max(1.0, f.diameter());
    for (size_t i = 0; i < 4; ++i) {
        const Vec2 d = f.poly[(i + 1) % 4] - f.poly[i];
        if (std::abs(d.x()) > tol && std::abs(d.y()) > tol) return false;
    }
    Vec2 lo, hi;
    f.local_bbox(lo, hi);
    auto near = [&](double a, double b) { return std::abs(a - b) <= tol; };
    std::vector<double> bot, top, left, right;
    for (const LoopNode& ln : loop) {
        if (near(ln.p.y(), lo.y())) bot.push_back(ln.p.x());
        if (near(ln.p.y(), hi.y())) top.push_back(ln.p.x());
        if (near(ln.p.x(), lo.x())) left.push_back(ln.p.y());
        if (near(ln.p.x(), hi.x())) right.push_back(ln.p.y());
    }
    for (auto* v : {&bot, &top, &left, &right}) std::sort(v->begin(), v->end());
    if (bot.size() != top.size() || left.size() != right.size()) return false;
    for (size_t k = 0; k < bot.size(); ++k)
        if (!near(bot[k], top[k])) return false;
    for (size_t k = 0; k < left.size(); ++k)
        if (!near(left[k], right[k])) return false;

    const std::vector<double>& xs = bot;
    const std::vector<double>& ys = left;
    const int nx = static_cast<int>(xs.size());
    const int ny = static_cast<int>(ys.size());
    if (nx < 2 || ny < 2) return false;

    m.nodes.clear();
    m.tris.clear();
    m.node_skeleton_edge.assign(static_cast<size_t>(nx * ny), -1);
    m.node_skeleton_vertex.assign(static_cast<size_t>(nx * ny), -1);
    m.node_rho.clear();
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Vec2 p(xs[static_cast<size_t>(i)], ys[static_cast<size_t>(j)]);
            m.nodes.push_back(p);
            m.node_rho.push_back(sk.rho(f.id, p));
        }
    auto id = [&](int i, int j) { return j * nx + i; };
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            m.tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }

    auto find_idx = [&](const std::vector<double>& cs, double v) {
        for (size_t i = 0; i < cs.size(); ++i)
            if (near(cs[i], v)) return static_cast<int>(i);
        return -1;
    };
    for (const LoopNode& ln : loop) {
        const int i = find_idx(xs, ln.p.x());
        const int j = find_idx(ys, ln.p.y());
        require(i >= 0 && j >= 0, "boundary node fell off the structured grid");
        m.node_skeleton_edge[static_cast<size_t>(id(i, j))] = ln.sk_edge;
        m.node_skeleton_vertex[static_cast<size_t>(id(i, j))] = ln.sk_vertex;
    }
    return true;
}

bool point_in_tri_closed(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
    return cross2(b - a, p - a) >= -eps && cross2(c - b, p - b) >= -eps && cross2(a - c, p - c) >= -eps;
}

std::vector<std::array<int, 3>> ear_clip(const std::vector<Vec2>& pts, double diam) {
    const double atol = 1e-12 * std::max(1.0, diam * diam);
    std::vector<int> ring(pts.size());
    std::iota(ring.begin(), ring.end(), 0);
    std::vector<std::array<int, 3>> tris;
    while (ring.size() > 3) {
        int best = -1;
        double best_q = 0.0;
        const size_t r = ring.size();
        for (size_t i = 0; i < r; ++i) {
            const int ip = ring[(i + r - 1) % r];
            const int ic = ring[i];
            const int in = ring[(i + 1) % r];
            const Vec2 u = pts[static_cast<size_t>(ic)] - pts[static_cast<size_t>(ip)];
            const Vec2 v = pts[static_cast<size_t>(in)] - pts[static_cast<size_t>(ic)];
            const double cr = cross2(u, v);
            if (cr <= atol) continue;
            bool clear = true;
            for (int q : ring) {
                if (q == ip || q == ic || q == in) continue;
                if (point_in_tri_closed(pts[static_cast<size_t>(q)], pts[static_cast<size_t>(ip)],
                                        pts[static_cast<size_t>(ic)], pts[static_cast<size_t>(in)], atol)) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;
            const double qual = cr / (u.norm() * v.norm() + 1e-300);
            if (qual > best_q) {
                best_q = qual;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) throw StructuralError("cannot triangulate a face boundary");
        const size_t b = static_cast<size_t>(best);
        tris.push_back({ring[(b + r - 1) % r], ring[b], ring[(b + 1) % r]});
        ring.erase(ring.begin() + best);
    }
    const Vec2& a = pts[static_cast<size_t>(ring[0])];
    const Vec2& b2 = pts[static_cast<size_t>(ring[1])];
    const Vec2& c = pts[static_cast<size_t>(ring[2])];
    require(cross2(b2 - a, c - a) > atol, "cannot triangulate a face boundary");
    tris.push_back({ring[0], ring[1], ring[2]});
    return tris;
}

void refine_long_edges(FaceMesh& m, const Skeleton& sk, const Face& f,
                       const std::set<std::pair<int, int>>& boundary_edges, double limit) {
    for (int pass = 0; pass < 48; ++pass) {
        std::map<std::pair<int, int>, int> split;
        for (const auto& t : m.tris)
            for (int k = 0; k < 3; ++k) {
                const auto key = node_pair(t[static_cast<size_t>(k)], t[static_cast<size_t>((k + 1) % 3)]);
                if (boundary_edges.count(key) || split.count(key)) continue;
                const Vec2 pa = m.nodes[static_cast<size_t>(key.first)];
                const Vec2 pb = m.nodes[static_cast<size_t>(key.second)];
                if ((pb - pa).norm() <= limit) continue;
                const Vec2 mid = 0.5 * (pa + pb);
                split[key] = static_cast<int>(m.nodes.size());
                m.nodes.push_back(mid);
                m.node_skeleton_edge.push_back(-1);
                m.node_skeleton_vertex.push_back(-1);
                m.node_rho.push_back(sk.rho(f.id, mid));
            }
        if (split.empty()) return;

        auto mid_of = [&](int a, int b) {
            const auto it = split.find(node_pair(a, b));
            return it == split.end() ? -1 : it->second;
        };
        std::vector<std::array<int, 3>> out;
        out.reserve(m.tris.size() * 2);
        for (const auto& t : m.tris) {
            int v0 = t[0], v1 = t[1], v2 = t[2];
            int m01 = mid_of(v0, v1), m12 = mid_of(v1, v2), m20 = mid_of(v2, v0);
            const int count = (m01 >= 0) + (m12 >= 0) + (m20 >= 0);
            auto rotate = [&] {
                const int tv = v0;
                v0 = v1, v1 = v2, v2 = tv;
                const int tm = m01;
                m01 = m12, m12 = m20, m20 = tm;
            };
            if (count == 0) {
                out.push_back({v0, v1, v2});
            } else if (count == 3) {
                out.push_back({v0, m01, m20});
                out.push_back({m01, v1, m12});
                out.push_back({m20, m12, v2});
                out.push_back({m01, m12, m20});
            } else if (count == 1) {
                while (m01 < 0) rotate();
                out.push_back({v0, m01, v2});
                out.push_back({m01, v1, v2});
            } else {
                while (m20 >= 0) rotate();  // leave (v2, v0) as the unsplit edge
                out.push_back({m01, v1, m12});
                const Vec2 d1 = m.nodes[static_cast<size_t>(v0)] - m.nodes[static_cast<size_t>(m12)];
                const Vec2 d2 = m.nodes[static_cast<size_t>(m01)] - m.nodes[static_cast<size_t>(v2)];
                if (d1.norm() <= d2.norm()) {
                    out.push_back({v0, m01, m12});
                    out.push_back({v0, m12, v2});
                } else {
                    out.push_back({v0, m01, v2});
                    out.push_back({m01, m12, v2});
                }
            }
        }
        m.tris = std::move(out);
    }
    throw StructuralError("interior refinement of face " + std::to_string(m.face_id) + " did not settle");
}

double incircle(const Vec2& p, const Vec2& q, const Vec2& r, const Vec2& s) {
    Eigen::Matrix3d M;
    const Vec2 dp = p - s, dq = q - s, dr = r - s;
    M << dp.x(), dp.y(), dp.squaredNorm(), dq.x(), dq.y(), dq.squaredNorm(), dr.x(), dr.y(), dr.squaredNorm();
    return M.determinant();
}

// A chord between two boundary nodes must cross the interior, never hug the boundary.
bool chord_ok(const FaceMesh& m, const Face& f, int a, int b) {
    if (!m.node_on_skeleton_boundary(a) || !m.node_on_skeleton_boundary(b)) return true;
    const Vec2 mid = 0.5 * (m.nodes[static_cast<size_t>(a)] + m.nodes[static_cast<size_t>(b)]);
    return f.boundary_distance_local(mid) > 1e-7 * std::max(1.0, f.diameter());
}

void delaunay_flips(FaceMesh& m, const Face& f, const std::set<std::pair<int, int>>& boundary_edges, double limit) {
    const double d = std::max(1.0, f.diameter());
    const double eps = 1e-10 * d * d * d * d;
    const double atol = 1e-12 * d * d;
    for (int pass = 0; pass < 40; ++pass) {
        std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> inc;  // edge -> (tri, opposite corner)
        for (size_t t = 0; t < m.tris.size(); ++t)
            for (int k = 0; k < 3; ++k)
                inc[node_pair(m.tris[t][static_cast<size_t>((k + 1) % 3)], m.tris[t][static_cast<size_t>((k + 2) % 3)])]
                    .push_back({static_cast<int>(t), k});
        std::vector<char> dirty(m.tris.size(), 0);
        bool changed = false;
        for (const auto& [key, lst] : inc) {
            if (lst.size() != 2 || boundary_edges.count(key)) continue;
            const auto [t0, k0] = lst[0];
            const auto [t1, k1] = lst[1];
            if (dirty[static_cast<size_t>(t0)] || dirty[static_cast<size_t>(t1)]) continue;
            const auto& T0 = m.tris[static_cast<size_t>(t0)];
            const auto& T1 = m.tris[static_cast<size_t>(t1)];
            const int c = T0[static_cast<size_t>(k0)];
            const int dd = T1[static_cast<size_t>(k1)];
            if (incircle(m.nodes[static_cast<size_t>(T0[0])], m.nodes[static_cast<size_t>(T0[1])],
                         m.nodes[static_cast<size_t>(T0[2])], m.nodes[static_cast<size_t>(dd)]) <= eps)
                continue;
            const int a = T0[static_cast<size_t>((k0 + 1) % 3)];
            const int b = T0[static_cast<size_t>((k0 + 2) % 3)];
            const Vec2 pa = m.nodes[static_cast<size_t>(a)], pb = m.nodes[static_cast<size_t>(b)];
            const Vec2 pc = m.nodes[static_cast<size_t>(c)], pd = m.nodes[static_cast<size_t>(dd)];
            if (cross2(pd - pa, pc - pa) <= atol) continue;   // (a, d, c)
            if (cross2(pb - pd, pc - pd) <= atol) continue;   // (d, b, c)
            if ((pc - pd).norm() > limit) continue;           // keep the size bound
            if (!chord_ok(m, f, c, dd)) continue;
            m.tris[static_cast<size_t>(t0)] = {a, dd, c};
            m.tris[static_cast<size_t>(t1)] = {dd, b, c};
            dirty[static_cast<size_t>(t0)] = dirty[static_cast<size_t>(t1)] = 1;
            changed = true;
        }
        if (!changed) return;
    }
}

void smooth_interior(FaceMesh& m, int passes, double limit) {
    for (int pass = 0; pass < passes; ++pass) {
        std::vector<std::set<int>> nbrs(m.nodes.size());
        std::vector<std::vector<int>> node_tris(m.nodes.size());
        for (size_t t = 0; t < m.tris.size(); ++t)
            for (int k = 0; k < 3; ++k) {
                const int a = m.tris[t][static_cast<size_t>(k)];
                nbrs[static_cast<size_t>(a)].insert(m.tris[t][static_cast<size_t>((k + 1) % 3)]);
                nbrs[static_cast<size_t>(a)].insert(m.tris[t][static_cast<size_t>((k + 2) % 3)]);
                node_tris[static_cast<size_t>(a)].push_back(static_cast<int>(t));
            }
        for (size_t nd = 0; nd < m.nodes.size(); ++nd) {
            if (m.node_on_skeleton_boundary(static_cast<int>(nd)) || nbrs[nd].empty()) continue;
            Vec2 avg = Vec2::Zero();
            for (int q : nbrs[nd]) avg += m.nodes[static_cast<size_t>(q)];
            avg /= static_cast<double>(nbrs[nd].size());
            bool fits = true;
            for (int q : nbrs[nd])
                if ((avg - m.nodes[static_cast<size_t>(q)]).norm() > limit) {
                    fits = false;
                    break;
                }
            if (!fits) continue;
            const Vec2 old = m.nodes[nd];
            std::vector<double> before;
            for (int t : node_tris[nd]) before.push_back(m.tri_area(t));
            m.nodes[nd] = avg;
            bool ok = true;
            for (size_t k = 0; k < node_tris[nd].size(); ++k)
                if (m.tri_area(node_tris[nd][k]) <= 0.25 * before[k]) {
                    ok = false;
                    break;
                }
            if (!ok) m.nodes[nd] = old;
        }
    }
}

void finalize_mesh(FaceMesh& m) {
    m.edges.clear();
    m.tri_edges.assign(m.tris.size(), {-1, -1, -1});
    m.edge_tris.clear();
    std::map<std::pair<int, int>, int> eid;
    for (size_t t = 0; t < m.tris.size(); ++t)
        for (int k = 0; k < 3; ++k) {
            const auto key = node_pair(m.tris[t][static_cast<size_t>((k + 1) % 3)], m.tris[t][static_cast<size_t>((k + 2) % 3)]);
            auto it = eid.find(key);
            if (it == eid.end()) {
                it = eid.emplace(key, static_cast<int>(m.edges.size())).first;
                m.edges.push_back({key.first, key.second});
                m.edge_tris.push_back({-1, -1});
            }
            m.tri_edges[t][static_cast<size_t>(k)] = it->second;
            auto& et = m.edge_tris[static_cast<size_t>(it->second)];
            require(et[1] < 0, "mesh edge with more than two triangles");
            (et[0] < 0 ? et[0] : et[1]) = static_cast<int>(t);
        }
}

}  // namespace

int skeleton_vertex_at(const Skeleton& sk, const Vec3& p) {
    const double tol = skeleton_merge_tol(sk);
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < sk.vertices.size(); ++i) {
        const double d = (p - sk.vertices[i].p).norm();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return bd <= tol ? best : -1;
}

bool vertex_needs_grading(const Skeleton& sk, int vertex_index) {
    const SkeletonVertex& v = sk.vertices.at(static_cast<size_t>(vertex_index));
    if (!v.multi_face) return false;
    for (size_t i = 0; i < v.faces.size(); ++i)
        for (size_t j = i + 1; j < v.faces.size(); ++j) {
            const Vec3 ni = sk.face_by_id(v.faces[i]).e3;
            const Vec3 nj = sk.face_by_id(v.faces[j]).e3;
            if (ni.cross(nj).norm() > 1e-9) return true;
        }
    return false;
}

std::vector<double> skeleton_edge_params(const Skeleton& sk, int edge_index, double target_h) {
    require(target_h > 0.0, "mesh size must be positive");
    require(edge_index >= 0 && edge_index < static_cast<int>(sk.edges.size()), "edge index out of range");
    const Edge& e = sk.edges[static_cast<size_t>(edge_index)];
    int n = std::max(1, static_cast<int>(std::ceil(e.length() / target_h - 1e-9)));
    const int va = skeleton_vertex_at(sk, e.a);
    const int vb = skeleton_vertex_at(sk, e.b);
    const bool ga = va >= 0 && vertex_needs_grading(sk, va);
    const bool gb = vb >= 0 && vertex_needs_grading(sk, vb);
    if (ga && gb) n = std::max(n, 2);
    std::vector<double> t;
    for (int k = 0; k <= n; ++k) t.push_back(static_cast<double>(k) / n);
    const double d = 1.0 / n;
    if (ga) {
        t.push_back(d / 7.0);
        t.push_back(3.0 * d / 7.0);
    }
    if (gb) {
        t.push_back(1.0 - 3.0 * d / 7.0);
        t.push_back(1.0 - d / 7.0);
    }
    std::sort(t.begin(), t.end());
    return t;
}

int FaceMesh::edge_between(int a, int b) const {
    const auto key = node_pair(a, b);
    for (size_t e = 0; e < edges.size(); ++e)
        if (edges[e][0] == key.first && edges[e][1] == key.second) return static_cast<int>(e);
    return -1;
}

double FaceMesh::tri_area(int t) const {
    const auto& tr = tris[static_cast<size_t>(t)];
    const Vec2 a = nodes[static_cast<size_t>(tr[0])];
    return 0.5 * cross2(nodes[static_cast<size_t>(tr[1])] - a, nodes[static_cast<size_t>(tr[2])] - a);
}

Vec2 FaceMesh::tri_centroid(int t) const {
    const auto& tr = tris[static_cast<size_t>(t)];
    return (nodes[static_cast<size_t>(tr[0])] + nodes[static_cast<size_t>(tr[1])] + nodes[static_cast<size_t>(tr[2])]) / 3.0;
}

Vec2 FaceMesh::edge_midpoint(int e) const {
    const auto& ed = edges[static_cast<size_t>(e)];
    return 0.5 * (nodes[static_cast<size_t>(ed[0])] + nodes[static_cast<size_t>(ed[1])]);
}

Vec2 FaceMesh::edge_normal(int e) const {
    const auto& ed = edges[static_cast<size_t>(e)];
    const Vec2 t = (nodes[static_cast<size_t>(ed[1])] - nodes[static_cast<size_t>(ed[0])]).normalized();
    return Vec2(t.y(), -t.x());
}

double FaceMesh::area() const {
    double s = 0.0;
    for (size_t t = 0; t < tris.size(); ++t) s += tri_area(static_cast<int>(t));
    return s;
}

double FaceMesh::max_edge_len() const {
    double s = 0.0;
    for (const auto& ed : edges)
        s = std::max(s, (nodes[static_cast<size_t>(ed[1])] - nodes[static_cast<size_t>(ed[0])]).norm());
    return s;
}

int FaceMesh::locate(const Vec2& p, std::array<double, 3>& bary, double tol) const {
    for (size_t t = 0; t < tris.size(); ++t) {
        const auto& tr = tris[t];
        const Vec2 a = nodes[static_cast<size_t>(tr[0])];
        const Vec2 b = nodes[static_cast<size_t>(tr[1])];
        const Vec2 c = nodes[static_cast<size_t>(tr[2])];
        const double A2 = cross2(b - a, c - a);
        if (A2 <= 0.0) continue;
        const double l0 = cross2(b - p, c - p) / A2;
        const double l1 = cross2(c - p, a - p) / A2;
        const double l2 = 1.0 - l0 - l1;
        if (l0 >= -tol && l1 >= -tol && l2 >= -tol) {
            bary = {l0, l1, l2};
            return static_cast<int>(t);
        }
    }
    return -1;
}

void check_mesh(const FaceMesh& m) {
    const size_t nn = m.nodes.size();
    require(nn >= 3 && !m.tris.empty(), "mesh is empty");
    require(m.node_skeleton_edge.size() == nn && m.node_skeleton_vertex.size() == nn && m.node_rho.size() == nn,
            "mesh node tables are inconsistent");
    require(m.tri_edges.size() == m.tris.size() && m.edge_tris.size() == m.edges.size(),
            "mesh adjacency tables are inconsistent");
    std::vector<char> used(nn, 0);
    for (size_t t = 0; t < m.tris.size(); ++t) {
        const auto& tr = m.tris[t];
        for (int k = 0; k < 3; ++k) {
            require(tr[static_cast<size_t>(k)] >= 0 && tr[static_cast<size_t>(k)] < static_cast<int>(nn),
                    "triangle corner out of range");
            used[static_cast<size_t>(tr[static_cast<size_t>(k)])] = 1;
        }
        require(tr[0] != tr[1] && tr[1] != tr[2] && tr[2] != tr[0], "collapsed triangle");
        require(m.tri_area(static_cast<int>(t)) > 0.0, "triangle is not counter-clockwise");
        for (int k = 0; k < 3; ++k) {
            const int e = m.tri_edges[t][static_cast<size_t>(k)];
            require(e >= 0 && e < static_cast<int>(m.edges.size()), "triangle edge id out of range");
            const auto key = node_pair(tr[static_cast<size_t>((k + 1) % 3)], tr[static_cast<size_t>((k + 2) % 3)]);
            require(m.edges[static_cast<size_t>(e)][0] == key.first && m.edges[static_cast<size_t>(e)][1] == key.second,
                    "triangle edge table does not match the edge list");
        }
    }
    for (size_t nd = 0; nd < nn; ++nd) require(used[nd] != 0, "orphan mesh node");
    size_t boundary = 0;
    for (size_t e = 0; e < m.edges.size(); ++e) {
        const auto& et = m.edge_tris[e];
        require(et[0] >= 0, "edge without triangles");
        if (et[1] < 0) {
            ++boundary;
            for (int nd : m.edges[e])
                require(m.node_on_skeleton_boundary(nd), "boundary mesh edge is not on a skeleton edge");
        }
    }
    require(boundary >= 3, "mesh has no boundary");
    const long long euler = static_cast<long long>(nn) - static_cast<long long>(m.edges.size()) +
                            static_cast<long long>(m.tris.size());
    require(euler == 1, "mesh is not a topological disk");
}

FaceMesh mesh_face(const Skeleton& sk, int face_id, double target_h) {
    const Face& f = sk.face_by_id(face_id);
    const std::vector<LoopNode> loop = boundary_loop(sk, f, target_h);
    FaceMesh m;
    m.face_id = face_id;
    if (!try_tensor_mesh(sk, f, loop, m)) {
        for (const LoopNode& ln : loop) {
            m.nodes.push_back(ln.p);
            m.node_skeleton_edge.push_back(ln.sk_edge);
            m.node_skeleton_vertex.push_back(ln.sk_vertex);
            m.node_rho.push_back(sk.rho(face_id, ln.p));
        }
        std::vector<Vec2> pts = m.nodes;
        std::set<std::pair<int, int>> bedges;
        const int nb = static_cast<int>(loop.size());
        for (int j = 0; j < nb; ++j) bedges.insert(node_pair(j, (j + 1) % nb));
        const double limit = 1.05 * target_h;
        m.tris = ear_clip(pts, f.diameter());
        refine_long_edges(m, sk, f, bedges, limit);
        delaunay_flips(m, f, bedges, limit);
        smooth_interior(m, 2, limit);
        delaunay_flips(m, f, bedges, limit);
        smooth_interior(m, 2, limit);
        delaunay_flips(m, f, bedges, limit);
    }
    finalize_mesh(m);
    for (size_t e = 0; e < m.edges.size(); ++e)
        if (!m.edge_on_boundary(static_cast<int>(e)))
            require(chord_ok(m, f, m.edges[e][0], m.edges[e][1]), "interior mesh edge degenerated onto the boundary");
    check_mesh(m);
    return m;
}

const FaceMesh& SkeletonMesh::by_face_id(int id) const {
    for (const FaceMesh& m : faces)
        if (m.face_id == id) return m;
    throw StructuralError("no mesh for face id " + std::to_string(id));
}

SkeletonMesh build_skeleton_mesh(const Skeleton& sk, double target_h) {
    SkeletonMesh sm;
    sm.skeleton = &sk;
    sm.target_h = target_h;
    double scale = 1.0;
    for (const Face& f : sk.faces) scale = std::max(scale, f.diameter());
    for (const Face& f : sk.faces) sm.faces.push_back(mesh_face(sk, f.id, target_h));
    PointMerger merger(1e-9 * scale);
    std::vector<std::vector<MeshNodeRef>> groups;
    for (size_t fi = 0; fi < sm.faces.size(); ++fi) {
        const Face& f = sk.faces[fi];
        const FaceMesh& m = sm.faces[fi];
        for (size_t nd = 0; nd < m.nodes.size(); ++nd) {
            if (!m.node_on_skeleton_boundary(static_cast<int>(nd))) continue;
            const int gid = merger.find_or_add(f.to_global(m.nodes[nd]));
            if (gid >= static_cast<int>(groups.size())) groups.emplace_back();
            groups[static_cast<size_t>(gid)].push_back({static_cast<int>(fi), static_cast<int>(nd)});
        }
    }
    for (auto& g : groups)
        if (g.size() >= 2) sm.shared_nodes.push_back(std::move(g));
    return sm;
}

double MorleyBasis::value(int j, const Vec2& p) const {
    const Vec2 X = (p - center) / scale;
    Eigen::Matrix<double, 6, 1> r;
    r << 1.0, X.x(), X.y(), X.x() * X.x(), X.x() * X.y(), X.y() * X.y();
    return r.dot(coef.col(j));
}

Vec2 MorleyBasis::gradient(int j, const Vec2& p) const {
    const Vec2 X = (p - center) / scale;
    const auto c = coef.col(j);
    return Vec2(c(1) + 2.0 * c(3) * X.x() + c(4) * X.y(), c(2) + c(4) * X.x() + 2.0 * c(5) * X.y()) / scale;
}

Eigen::Matrix2d MorleyBasis::hessian(int j) const {
    const auto c = coef.col(j);
    Eigen::Matrix2d H;
    H << 2.0 * c(3), c(4), c(4), 2.0 * c(5);
    return H / (scale * scale);
}

MorleyBasis morley_basis(const Vec2& a, const Vec2& b, const Vec2& c, const std::array<Vec2, 3>& midpoint_normals) {
    MorleyBasis mb;
    mb.center = (a + b + c) / 3.0;
    mb.scale = ((b - a).norm() + (c - b).norm() + (a - c).norm()) / 3.0;
    require(mb.scale > 0.0, "degenerate triangle");
    auto val_row = [&](const Vec2& p) {
        const Vec2 X = (p - mb.center) / mb.scale;
        Eigen::Matrix<double, 1, 6> r;
        r << 1.0, X.x(), X.y(), X.x() * X.x(), X.x() * X.y(), X.y() * X.y();
        return r;
    };
    auto nder_row = [&](const Vec2& p, const Vec2& n) {
        const Vec2 X = (p - mb.center) / mb.scale;
        Eigen::Matrix<double, 1, 6> r;
        r << 0.0, n.x(), n.y(), 2.0 * X.x() * n.x(), X.x() * n.y() + X.y() * n.x(), 2.0 * X.y() * n.y();
        r /= mb.scale;
        return r;
    };
    Eigen::Matrix<double, 6, 6> M;
    M.row(0) = val_row(a);
    M.row(1) = val_row(b);
    M.row(2) = val_row(c);
    M.row(3) = nder_row(0.5 * (b + c), midpoint_normals[0]);
    M.row(4) = nder_row(0.5 * (c + a), midpoint_normals[1]);
    M.row(5) = nder_row(0.5 * (a + b), midpoint_normals[2]);
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(M);
    require(lu.isInvertible(), "Morley shape functions are singular on a degenerate triangle");
    mb.coef = lu.inverse();
    return mb;
}

MorleyBasis tri_morley(const FaceMesh& m, int t) {
    const auto& tri = m.tris[static_cast<size_t>(t)];
    const auto& te = m.tri_edges[static_cast<size_t>(t)];
    const std::array<Vec2, 3> normals = {m.edge_normal(te[0]), m.edge_normal(te[1]), m.edge_normal(te[2])};
    return morley_basis(m.nodes[static_cast<size_t>(tri[0])], m.nodes[static_cast<size_t>(tri[1])],
                        m.nodes[static_cast<size_t>(tri[2])], normals);
}

std::array<Vec2, 3> p1_gradients(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double A2 = cross2(b - a, c - a);
    require(A2 > 0.0, "triangle is not counter-clockwise");
    auto perp = [](const Vec2& v) { return Vec2(-v.y(), v.x()); };
    return {perp(c - b) / A2, perp(a - c) / A2, perp(b - a) / A2};
}

std::array<TriQuadPoint, 3> tri_quadrature(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double w = cross2(b - a, c - a) / 6.0;
    require(w > 0.0, "triangle is not counter-clockwise");
    return {{{0.5 * (a + b), w}, {0.5 * (b + c), w}, {0.5 * (c + a), w}}};
}

}  // namespace plates
