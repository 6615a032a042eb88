#include "platestruct/skeleton.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace plates {

namespace {

double dist_point_segment2(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double L2 = d.squaredNorm();
    if (L2 <= 0.0) return (p - a).norm();
    double t = (p - a).dot(d) / L2;
    t = std::min(1.0, std::max(0.0, t));
    return (p - (a + t * d)).norm();
}

bool segments_properly_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        const double v = (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
        return (v > 0) - (v < 0);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

Vec3 parse_vec3(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw StructuralError("expected a 3-vector for " + what);
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

double Face::area() const {
    double s = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        s += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * s;
}

double Face::diameter() const {
    double d = 0.0;
    for (size_t i = 0; i < vertices.size(); ++i)
        for (size_t j = i + 1; j < vertices.size(); ++j) d = std::max(d, (vertices[i] - vertices[j]).norm());
    return d;
}

bool Face::contains_local(const Vec2& p, double tol) const {
    const size_t n = poly.size();
    if (boundary_distance_local(p) <= tol) return true;
    bool inside = false;
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& vi = poly[i];
        const Vec2& vj = poly[j];
        const bool crosses = (vi.y() > p.y()) != (vj.y() > p.y());
        if (crosses) {
            const double xint = vj.x() + (p.y() - vj.y()) / (vi.y() - vj.y()) * (vi.x() - vj.x());
            if (p.x() < xint) inside = !inside;
        }
    }
    return inside;
}

double Face::boundary_distance_local(const Vec2& p) const {
    double d = std::numeric_limits<double>::infinity();
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) d = std::min(d, dist_point_segment2(p, poly[i], poly[(i + 1) % n]));
    return d;
}

void Face::local_bbox(Vec2& lo, Vec2& hi) const {
    lo = Vec2(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const Vec2& p : poly) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
}

std::vector<int> Skeleton::multi_face_vertices() const {
    std::vector<int> out;
    for (size_t i = 0; i < vertices.size(); ++i)
        if (vertices[i].multi_face) out.push_back(static_cast<int>(i));
    return out;
}

const Face& Skeleton::face_by_id(int id) const {
    for (const Face& f : faces)
        if (f.id == id) return f;
    throw StructuralError("unknown face id " + std::to_string(id));
}

std::vector<int> Skeleton::junction_edges() const {
    std::vector<int> out;
    for (size_t i = 0; i < edges.size(); ++i)
        if (edges[i].junction()) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> Skeleton::clamped_edges() const {
    std::vector<int> out;
    for (size_t i = 0; i < edges.size(); ++i)
        if (edges[i].clamped) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> Skeleton::edges_of_face(int face_id) const {
    std::vector<int> out;
    for (size_t i = 0; i < edges.size(); ++i) {
        const auto& fs = edges[i].faces;
        if (std::find(fs.begin(), fs.end(), face_id) != fs.end()) out.push_back(static_cast<int>(i));
    }
    return out;
}

HypothesesReport Skeleton::validate_hypotheses() const {
    HypothesesReport r;
    std::ostringstream detail;

    // H1: the face adjacency graph through shared edges is connected.
    if (faces.size() <= 1) {
        r.h1_faces_connected = true;
    } else {
        std::map<int, std::set<int>> adj;
        for (const Edge& e : edges)
            for (size_t i = 0; i < e.faces.size(); ++i)
                for (size_t j = i + 1; j < e.faces.size(); ++j) {
                    adj[e.faces[i]].insert(e.faces[j]);
                    adj[e.faces[j]].insert(e.faces[i]);
                }
        std::set<int> seen;
        std::queue<int> q;
        q.push(faces[0].id);
        seen.insert(faces[0].id);
        while (!q.empty()) {
            const int f = q.front();
            q.pop();
            for (int g : adj[f])
                if (seen.insert(g).second) q.push(g);
        }
        r.h1_faces_connected = seen.size() == faces.size();
        if (!r.h1_faces_connected) detail << "face adjacency graph is disconnected; ";
    }

    // H2: at every multi-face vertex, the incident faces are connected through
    // edges that contain that vertex.
    r.h2_vertex_fans_connected = true;
    for (size_t vi = 0; vi < vertices.size(); ++vi) {
        const SkeletonVertex& v = vertices[vi];
        if (!v.multi_face) continue;
        std::map<int, std::set<int>> adj;
        for (int ei : v.edges) {
            const Edge& e = edges[static_cast<size_t>(ei)];
            for (size_t i = 0; i < e.faces.size(); ++i)
                for (size_t j = i + 1; j < e.faces.size(); ++j) {
                    adj[e.faces[i]].insert(e.faces[j]);
                    adj[e.faces[j]].insert(e.faces[i]);
                }
        }
        std::set<int> seen;
        std::queue<int> q;
        q.push(v.faces[0]);
        seen.insert(v.faces[0]);
        while (!q.empty()) {
            const int f = q.front();
            q.pop();
            for (int g : adj[f])
                if (seen.insert(g).second) q.push(g);
        }
        if (seen.size() != v.faces.size()) {
            r.h2_vertex_fans_connected = false;
            detail << "vertex " << vi << " has a disconnected face fan; ";
        }
    }

    // H3: something is clamped.
    r.h3_has_clamped_edge = !clamped_edges().empty();
    if (!r.h3_has_clamped_edge) detail << "no clamped edge; ";

    r.detail = detail.str();
    return r;
}

double Skeleton::rho_point(const Vec3& p) const {
    const auto mfv = multi_face_vertices();
    if (mfv.empty()) {
        double far = 0.0;
        for (const SkeletonVertex& v : vertices) far = std::max(far, (p - v.p).norm());
        return far + 1.0;
    }
    double d = std::numeric_limits<double>::infinity();
    for (int vi : mfv) d = std::min(d, (p - vertices[static_cast<size_t>(vi)].p).norm());
    return d;
}

double Skeleton::rho(int face_id, const Vec2& xhat) const {
    return rho_point(face_by_id(face_id).to_global(xhat));
}

std::function<bool(const Vec3&)> Skeleton::junction_region(int edge_index, double delta, double factor) const {
    require(edge_index >= 0 && edge_index < static_cast<int>(edges.size()), "junction_region: edge index out of range");
    require(delta > 0.0, "junction_region: delta must be positive");
    const Edge e = edges[static_cast<size_t>(edge_index)];
    const double radius = factor * eta0 * delta;
    return [e, radius](const Vec3& x) { return e.distance(x) < radius; };
}

Skeleton skeleton_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& ex) {
        throw StructuralError(std::string("skeleton JSON parse error: ") + ex.what());
    }

    Skeleton s;
    s.eta0 = j.value("eta0", 2.0);
    s.delta0 = j.value("delta0", 0.25);
    require(s.eta0 > 0.0, "eta0 must be positive");
    require(s.delta0 > 0.0, "delta0 must be positive");

    require(j.contains("faces") && j["faces"].is_array() && !j["faces"].empty(), "skeleton needs a non-empty faces array");
    std::set<int> ids;
    for (const auto& jf : j["faces"]) {
        Face f;
        require(jf.contains("id"), "face without id");
        f.id = jf["id"].get<int>();
        require(ids.insert(f.id).second, "duplicate face id " + std::to_string(f.id));
        f.origin = parse_vec3(jf.at("origin"), "face origin");
        f.e1 = parse_vec3(jf.at("e1"), "face e1");
        f.e2 = parse_vec3(jf.at("e2"), "face e2");
        require(std::abs(f.e1.norm() - 1.0) <= 1e-12 && std::abs(f.e2.norm() - 1.0) <= 1e-12,
                "face " + std::to_string(f.id) + ": frame vectors must be unit length");
        require(std::abs(f.e1.dot(f.e2)) <= 1e-12, "face " + std::to_string(f.id) + ": e1 and e2 must be orthogonal");
        f.e3 = f.e1.cross(f.e2);

        require(jf.contains("vertices") && jf["vertices"].is_array() && jf["vertices"].size() >= 3,
                "face " + std::to_string(f.id) + " needs at least 3 vertices");
        for (const auto& jv : jf["vertices"]) f.vertices.push_back(parse_vec3(jv, "face vertex"));

        const double diam = [&] {
            double d = 0.0;
            for (size_t i = 0; i < f.vertices.size(); ++i)
                for (size_t k = i + 1; k < f.vertices.size(); ++k) d = std::max(d, (f.vertices[i] - f.vertices[k]).norm());
            return d;
        }();
        require(diam > 0.0, "face " + std::to_string(f.id) + " is degenerate");
        for (const Vec3& v : f.vertices) {
            require(std::abs(f.local_x3(v)) <= 1e-10 * diam,
                    "face " + std::to_string(f.id) + " is not planar in its declared frame");
            f.poly.push_back(f.to_local(v));
        }
        require(f.area() > 0.0, "face " + std::to_string(f.id) + ": polygon must be counter-clockwise in its frame");
        const size_t n = f.poly.size();
        for (size_t i = 0; i < n; ++i)
            for (size_t k = i + 1; k < n; ++k) {
                if (k == i + 1 || (i == 0 && k == n - 1)) continue;
                require(!segments_properly_intersect(f.poly[i], f.poly[(i + 1) % n], f.poly[k], f.poly[(k + 1) % n]),
                        "face " + std::to_string(f.id) + ": polygon is self-intersecting");
            }
        s.faces.push_back(std::move(f));
    }

    require(j.contains("edges") && j["edges"].is_array() && !j["edges"].empty(), "skeleton needs a non-empty edges array");
    double min_edge_len = std::numeric_limits<double>::infinity();
    for (const auto& je : j["edges"]) {
        Edge e;
        e.a = parse_vec3(je.at("a"), "edge endpoint a");
        e.b = parse_vec3(je.at("b"), "edge endpoint b");
        require(je.contains("faces") && je["faces"].is_array() && !je["faces"].empty(), "edge without incident faces");
        for (const auto& jf : je["faces"]) e.faces.push_back(jf.get<int>());
        e.clamped = je.value("clamped", false);
        require(e.length() > 0.0, "zero-length edge");
        min_edge_len = std::min(min_edge_len, e.length());
        for (int fid : e.faces) {
            const Face& f = s.face_by_id(fid);
            const Vec2 la = f.to_local(e.a), lb = f.to_local(e.b);
            require(std::abs(f.local_x3(e.a)) <= 1e-9 && std::abs(f.local_x3(e.b)) <= 1e-9,
                    "edge endpoints do not lie in the plane of face " + std::to_string(fid));
            const double tol = 1e-9 * std::max(1.0, f.diameter());
            require(f.boundary_distance_local(la) <= tol && f.boundary_distance_local(lb) <= tol &&
                        f.boundary_distance_local(0.5 * (la + lb)) <= tol,
                    "edge is not on the boundary of face " + std::to_string(fid));
        }
        s.edges.push_back(std::move(e));
    }

    // Every polygon side of every face must be covered exactly by the declared edges.
    for (const Face& f : s.faces) {
        const size_t n = f.poly.size();
        for (size_t i = 0; i < n; ++i) {
            const Vec3 A = f.vertices[i];
            const Vec3 B = f.vertices[(i + 1) % n];
            const Vec3 d = B - A;
            const double L = d.norm();
            std::vector<std::pair<double, double>> spans;
            for (const Edge& e : s.edges) {
                if (std::find(e.faces.begin(), e.faces.end(), f.id) == e.faces.end()) continue;
                const double ta = (e.a - A).dot(d) / (L * L);
                const double tb = (e.b - A).dot(d) / (L * L);
                const double offa = ((e.a - A) - ta * d).norm();
                const double offb = ((e.b - A) - tb * d).norm();
                const double tol = 1e-9 * std::max(1.0, L);
                if (offa > tol || offb > tol) continue;  // not on this side
                double lo = std::min(ta, tb), hi = std::max(ta, tb);
                if (hi < -1e-9 || lo > 1.0 + 1e-9) continue;
                require(lo >= -1e-9 && hi <= 1.0 + 1e-9,
                        "edge overhangs a polygon side of face " + std::to_string(f.id));
                spans.emplace_back(lo, hi);
            }
            std::sort(spans.begin(), spans.end());
            double covered = 0.0;
            for (const auto& sp : spans) {
                require(sp.first <= covered + 1e-9, "polygon side of face " + std::to_string(f.id) +
                                                        " is not fully covered by declared edges");
                require(sp.first >= covered - 1e-9, "overlapping edges on a polygon side of face " + std::to_string(f.id));
                covered = std::max(covered, sp.second);
            }
            require(covered >= 1.0 - 1e-9,
                    "polygon side of face " + std::to_string(f.id) + " is not fully covered by declared edges");
        }
    }

    // Vertices are the distinct edge endpoints.
    PointMerger merger(1e-7 * std::max(1.0, min_edge_len));
    for (size_t ei = 0; ei < s.edges.size(); ++ei) {
        for (const Vec3& p : {s.edges[ei].a, s.edges[ei].b}) {
            const int vid = merger.find_or_add(p);
            if (vid >= static_cast<int>(s.vertices.size())) {
                SkeletonVertex v;
                v.p = p;
                s.vertices.push_back(v);
            }
            auto& lst = s.vertices[static_cast<size_t>(vid)].edges;
            if (std::find(lst.begin(), lst.end(), static_cast<int>(ei)) == lst.end()) lst.push_back(static_cast<int>(ei));
        }
    }
    for (SkeletonVertex& v : s.vertices) {
        for (const Face& f : s.faces) {
            if (std::abs(f.local_x3(v.p)) > 1e-9) continue;
            const Vec2 lp = f.to_local(v.p);
            if (f.boundary_distance_local(lp) <= 1e-9 * std::max(1.0, f.diameter())) v.faces.push_back(f.id);
        }
        v.multi_face = v.faces.size() >= 2;
    }

    return s;
}

Skeleton load_skeleton(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open skeleton file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return skeleton_from_json_text(ss.str());
}

}  // namespace plates
