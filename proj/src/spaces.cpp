#include "platestruct/spaces.hpp"

#include <algorithm>

namespace plates {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 cross_matrix(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

int face_index_of(const SkeletonMesh& mesh, int face_id) {
    for (size_t i = 0; i < mesh.faces.size(); ++i)
        if (mesh.faces[i].face_id == face_id) return static_cast<int>(i);
    throw StructuralError("no mesh for face id " + std::to_string(face_id));
}

double identification_tol(const SkeletonMesh& mesh) {
    double diam = 1.0;
    for (const auto& f : mesh.skeleton->faces) diam = std::max(diam, f.diameter());
    return 1e-9 * diam;
}

// Linear form of one global displacement component at a mesh node, in the
// rigid parametrization (a1, a2, theta, w).
void rigid_value_form(const SkeletonSpaces& sp, const RigidLayout& lay, int f, int node, int comp, double scale,
                      std::vector<std::pair<int, double>>& row) {
    const Face& F = sp.mesh.skeleton->faces[static_cast<size_t>(f)];
    const Vec2 x = sp.mesh.faces[static_cast<size_t>(f)].nodes[static_cast<size_t>(node)];
    const double e1 = F.e1[comp], e2 = F.e2[comp], e3 = F.e3[comp];
    row.emplace_back(lay.par_dof(f, 0), scale * e1);
    row.emplace_back(lay.par_dof(f, 1), scale * e2);
    row.emplace_back(lay.par_dof(f, 2), scale * (-x.y() * e1 + x.x() * e2));
    row.emplace_back(lay.w_dof(f, node), scale * e3);
}

// Linear form of one global component of the rotation field at the midpoint
// of a mesh edge: in-plane part from the deflection gradient (chord slope
// along the edge, normal-derivative dof across it), drill part from theta.
void rotation_form(const SkeletonSpaces& sp, const RigidLayout& lay, int f, int edge, int comp, double scale,
                   std::vector<std::pair<int, double>>& row) {
    const Face& F = sp.mesh.skeleton->faces[static_cast<size_t>(f)];
    const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(f)];
    const int lo = fm.edges[static_cast<size_t>(edge)][0], hi = fm.edges[static_cast<size_t>(edge)][1];
    const Vec2 d = fm.nodes[static_cast<size_t>(hi)] - fm.nodes[static_cast<size_t>(lo)];
    const double len = d.norm();
    const Vec2 t = d / len;
    const Vec2 n(t.y(), -t.x());
    const double e1 = F.e1[comp], e2 = F.e2[comp], e3 = F.e3[comp];
    // grad w = t * (w_hi - w_lo)/len + n * r; rotation = (dw/dx2, -dw/dx1, theta)
    const double slope_coef = (e1 * t.y() - e2 * t.x()) / len;
    row.emplace_back(lay.w_dof(f, hi), scale * slope_coef);
    row.emplace_back(lay.w_dof(f, lo), -scale * slope_coef);
    row.emplace_back(lay.rot_dof(f, edge), scale * (e1 * n.y() - e2 * n.x()));
    row.emplace_back(lay.par_dof(f, 2), scale * e3);
}

// First mesh chord of a junction skeleton edge at one of its endpoint
// vertices, seen from the lowest-id incident face.
struct JunctionChord {
    int face_index = -1;
    int vertex_node = -1;
    int next_node = -1;
    double length = 0.0;
    Vec3 dir = Vec3::Zero();  // unit, away from the vertex
};

JunctionChord junction_chord(const SkeletonSpaces& sp, int skeleton_edge, int vertex_index) {
    const Skeleton& sk = *sp.mesh.skeleton;
    const Edge& J = sk.edges[static_cast<size_t>(skeleton_edge)];
    const int f = face_index_of(sp.mesh, *std::min_element(J.faces.begin(), J.faces.end()));
    const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(f)];

    JunctionChord out;
    out.face_index = f;
    for (size_t n = 0; n < fm.nodes.size(); ++n)
        if (fm.node_skeleton_vertex[n] == vertex_index) out.vertex_node = static_cast<int>(n);
    require(out.vertex_node >= 0, "junction vertex has no mesh node on face " + std::to_string(fm.face_id));

    for (size_t e = 0; e < fm.edges.size(); ++e) {
        if (sp.edge_skeleton_edge[static_cast<size_t>(f)][e] != skeleton_edge) continue;
        const auto& ab = fm.edges[e];
        if (ab[0] != out.vertex_node && ab[1] != out.vertex_node) continue;
        out.next_node = ab[0] == out.vertex_node ? ab[1] : ab[0];
        break;
    }
    require(out.next_node >= 0, "no mesh chord along junction edge " + std::to_string(skeleton_edge));

    const Face& F = sk.faces[static_cast<size_t>(f)];
    const Vec3 a = F.to_global(fm.nodes[static_cast<size_t>(out.vertex_node)]);
    const Vec3 b = F.to_global(fm.nodes[static_cast<size_t>(out.next_node)]);
    out.length = (b - a).norm();
    out.dir = (b - a) / out.length;
    return out;
}

std::vector<int> junction_edges_at_vertex(const Skeleton& sk, int v) {
    std::vector<int> out;
    for (int e : sk.vertices[static_cast<size_t>(v)].edges)
        if (sk.edges[static_cast<size_t>(e)].junction()) out.push_back(e);
    return out;
}

}  // namespace

void LinearConstraints::add_row(std::vector<std::pair<int, double>> row) {
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> merged;
    for (const auto& e : row) {
        require(e.first >= 0 && e.first < cols, "constraint column out of range");
        if (!merged.empty() && merged.back().first == e.first)
            merged.back().second += e.second;
        else
            merged.push_back(e);
    }
    std::erase_if(merged, [](const auto& e) { return std::abs(e.second) < 1e-13; });
    if (merged.empty()) return;  // cancelled out: the row is already implied
    rows.push_back(std::move(merged));
}

double LinearConstraints::residual(const Eigen::VectorXd& x) const {
    double worst = 0.0;
    for (const auto& row : rows) {
        double s = 0.0;
        for (const auto& e : row) s += e.second * x[e.first];
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

NullspaceBasis nullspace(const LinearConstraints& c) {
    std::vector<int> pos(static_cast<size_t>(c.cols), -1);
    std::vector<int> touched;
    for (const auto& row : c.rows)
        for (const auto& e : row)
            if (pos[static_cast<size_t>(e.first)] < 0) {
                pos[static_cast<size_t>(e.first)] = static_cast<int>(touched.size());
                touched.push_back(e.first);
            }

    const int nt = static_cast<int>(touched.size());
    const int m = static_cast<int>(c.rows.size());

    NullspaceBasis out;
    std::vector<Triplet> trip;
    int col = 0;
    for (int j = 0; j < c.cols; ++j)
        if (pos[static_cast<size_t>(j)] < 0) trip.emplace_back(j, col++, 1.0);

    if (nt > 0) {
        Eigen::MatrixXd ct = Eigen::MatrixXd::Zero(nt, m);
        for (int r = 0; r < m; ++r)
            for (const auto& e : c.rows[static_cast<size_t>(r)]) ct(pos[static_cast<size_t>(e.first)], r) = e.second;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ct);
        qr.setThreshold(1e-9);
        out.rank = static_cast<int>(qr.rank());
        const Eigen::MatrixXd q = qr.householderQ();
        for (int k = out.rank; k < nt; ++k, ++col)
            for (int i = 0; i < nt; ++i)
                if (std::abs(q(i, k)) > 0.0) trip.emplace_back(touched[static_cast<size_t>(i)], col, q(i, k));
    }

    out.basis.resize(c.cols, col);
    out.basis.setFromTriplets(trip.begin(), trip.end());
    return out;
}

bool SkeletonSpaces::mesh_edge_clamped(int face_index, int edge) const {
    const int se = edge_skeleton_edge[static_cast<size_t>(face_index)][static_cast<size_t>(edge)];
    return se >= 0 && mesh.skeleton->edges[static_cast<size_t>(se)].clamped;
}

SkeletonSpaces build_spaces(const Skeleton& sk, double mesh_size, const RhoWeight& weight) {
    SkeletonSpaces sp;
    sp.mesh = build_skeleton_mesh(sk, mesh_size);
    const auto& faces = sp.mesh.faces;
    const int nf = static_cast<int>(faces.size());

    sp.layout.face.resize(static_cast<size_t>(nf));
    int off = 0;
    for (int f = 0; f < nf; ++f) {
        auto& fo = sp.layout.face[static_cast<size_t>(f)];
        const int nn = static_cast<int>(faces[static_cast<size_t>(f)].nodes.size());
        const int ne = static_cast<int>(faces[static_cast<size_t>(f)].edges.size());
        fo.mem = off;
        off += 2 * nn;
        fo.w = off;
        off += nn;
        fo.rot = off;
        off += ne;
    }
    sp.layout.total = off;

    const Skeleton& skm = *sp.mesh.skeleton;

    sp.node_clamped.resize(static_cast<size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        auto& flags = sp.node_clamped[static_cast<size_t>(f)];
        flags.assign(fm.nodes.size(), 0);
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            const int se = fm.node_skeleton_edge[n];
            if (se >= 0 && skm.edges[static_cast<size_t>(se)].clamped) flags[n] = 1;
            const int sv = fm.node_skeleton_vertex[n];
            if (sv >= 0)
                for (int e : skm.vertices[static_cast<size_t>(sv)].edges)
                    if (skm.edges[static_cast<size_t>(e)].clamped) flags[n] = 1;
        }
    }

    const double tol = identification_tol(sp.mesh);
    sp.edge_skeleton_edge.resize(static_cast<size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        const Face& F = skm.faces[static_cast<size_t>(f)];
        auto& ids = sp.edge_skeleton_edge[static_cast<size_t>(f)];
        ids.assign(fm.edges.size(), -1);
        const std::vector<int> sides = skm.edges_of_face(fm.face_id);
        for (size_t e = 0; e < fm.edges.size(); ++e) {
            if (!fm.edge_on_boundary(static_cast<int>(e))) continue;
            const Vec3 mid = F.to_global(fm.edge_midpoint(static_cast<int>(e)));
            for (int se : sides)
                if (skm.edges[static_cast<size_t>(se)].distance(mid) <= tol) {
                    ids[e] = se;
                    break;
                }
            require(ids[e] >= 0, "boundary mesh edge off every skeleton edge of face " + std::to_string(fm.face_id));
        }
    }

    {
        PointMerger pm(tol);
        std::vector<std::vector<MeshEdgeRef>> groups;
        for (int f = 0; f < nf; ++f) {
            const FaceMesh& fm = faces[static_cast<size_t>(f)];
            const Face& F = skm.faces[static_cast<size_t>(f)];
            for (size_t e = 0; e < fm.edges.size(); ++e) {
                const int se = sp.edge_skeleton_edge[static_cast<size_t>(f)][e];
                if (se < 0 || !skm.edges[static_cast<size_t>(se)].junction()) continue;
                const int id = pm.find_or_add(F.to_global(fm.edge_midpoint(static_cast<int>(e))));
                if (id == static_cast<int>(groups.size())) groups.emplace_back();
                groups[static_cast<size_t>(id)].push_back({f, static_cast<int>(e)});
            }
        }
        for (auto& g : groups)
            if (g.size() >= 2) sp.shared_edges.push_back(std::move(g));
    }

    sp.coupling.cols = sp.layout.total;
    for (const auto& group : sp.mesh.shared_nodes) {
        const auto& r0 = group[0];
        const Face& F0 = skm.faces[static_cast<size_t>(r0.face_index)];
        for (size_t j = 1; j < group.size(); ++j) {
            const auto& rj = group[j];
            const Face& Fj = skm.faces[static_cast<size_t>(rj.face_index)];
            for (int g = 0; g < 3; ++g) {
                std::vector<std::pair<int, double>> row;
                row.emplace_back(sp.layout.mem_dof(r0.face_index, r0.node, 0), F0.e1[g]);
                row.emplace_back(sp.layout.mem_dof(r0.face_index, r0.node, 1), F0.e2[g]);
                row.emplace_back(sp.layout.w_dof(r0.face_index, r0.node), F0.e3[g]);
                row.emplace_back(sp.layout.mem_dof(rj.face_index, rj.node, 0), -Fj.e1[g]);
                row.emplace_back(sp.layout.mem_dof(rj.face_index, rj.node, 1), -Fj.e2[g]);
                row.emplace_back(sp.layout.w_dof(rj.face_index, rj.node), -Fj.e3[g]);
                sp.coupling.add_row(std::move(row));
            }
        }
    }
    for (int f = 0; f < nf; ++f)
        for (size_t n = 0; n < faces[static_cast<size_t>(f)].nodes.size(); ++n) {
            if (!sp.node_clamped[static_cast<size_t>(f)][n]) continue;
            sp.coupling.add_row({{sp.layout.mem_dof(f, static_cast<int>(n), 0), 1.0}});
            sp.coupling.add_row({{sp.layout.mem_dof(f, static_cast<int>(n), 1), 1.0}});
            sp.coupling.add_row({{sp.layout.w_dof(f, static_cast<int>(n)), 1.0}});
        }
    sp.clamped_space = nullspace(sp.coupling);

    std::vector<Triplet> trho, tmem;
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        const int face_id = fm.face_id;
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            const auto& tri = fm.tris[t];
            const Vec2 a = fm.nodes[static_cast<size_t>(tri[0])], b = fm.nodes[static_cast<size_t>(tri[1])],
                       c = fm.nodes[static_cast<size_t>(tri[2])];
            const auto grads = p1_gradients(a, b, c);
            const auto quad = tri_quadrature(a, b, c);
            const double area = quad[0].w + quad[1].w + quad[2].w;

            int mdof[6];
            double g11[6], g22[6], g12[6];
            for (int k = 0; k < 3; ++k)
                for (int cc = 0; cc < 2; ++cc) {
                    const int j = 2 * k + cc;
                    mdof[j] = sp.layout.mem_dof(f, tri[static_cast<size_t>(k)], cc);
                    const Vec2& gk = grads[static_cast<size_t>(k)];
                    g11[j] = cc == 0 ? gk.x() : 0.0;
                    g22[j] = cc == 1 ? gk.y() : 0.0;
                    g12[j] = 0.5 * (cc == 0 ? gk.y() : gk.x());
                }
            for (int j = 0; j < 6; ++j)
                for (int k = 0; k < 6; ++k) {
                    const double v = area * (g11[j] * g11[k] + g22[j] * g22[k] + 2.0 * g12[j] * g12[k]);
                    if (v == 0.0) continue;
                    tmem.emplace_back(mdof[j], mdof[k], v);
                    trho.emplace_back(mdof[j], mdof[k], v);
                }

            const auto& te = fm.tri_edges[t];
            const std::array<Vec2, 3> normals = {fm.edge_normal(te[0]), fm.edge_normal(te[1]), fm.edge_normal(te[2])};
            const MorleyBasis mb = morley_basis(a, b, c, normals);
            const int wdof[6] = {sp.layout.w_dof(f, tri[0]),   sp.layout.w_dof(f, tri[1]), sp.layout.w_dof(f, tri[2]),
                                 sp.layout.rot_dof(f, te[0]),  sp.layout.rot_dof(f, te[1]),
                                 sp.layout.rot_dof(f, te[2])};
            Mat6 dmat = Mat6::Zero();
            for (const auto& qp : quad) {
                const double r = weight ? weight(face_id, qp.p) : skm.rho(face_id, qp.p);
                Vec2 gq[6];
                for (int j = 0; j < 6; ++j) gq[j] = mb.gradient(j, qp.p);
                for (int j = 0; j < 6; ++j)
                    for (int k = 0; k < 6; ++k) dmat(j, k) += qp.w * r * gq[j].dot(gq[k]);
            }
            for (int j = 0; j < 6; ++j)
                for (int k = 0; k < 6; ++k)
                    if (dmat(j, k) != 0.0) trho.emplace_back(wdof[j], wdof[k], dmat(j, k));
        }
    }
    sp.gram_rho.resize(sp.layout.total, sp.layout.total);
    sp.gram_rho.setFromTriplets(trho.begin(), trho.end());
    sp.gram_membrane.resize(sp.layout.total, sp.layout.total);
    sp.gram_membrane.setFromTriplets(tmem.begin(), tmem.end());
    return sp;
}

RigidModel rigid_model(const SkeletonSpaces& sp) {
    RigidModel m;
    const auto& faces = sp.mesh.faces;
    const int nf = static_cast<int>(faces.size());

    m.layout.face.resize(static_cast<size_t>(nf));
    int off = 0;
    for (int f = 0; f < nf; ++f) {
        auto& fo = m.layout.face[static_cast<size_t>(f)];
        fo.par = off;
        off += 3;
        fo.w = off;
        off += static_cast<int>(faces[static_cast<size_t>(f)].nodes.size());
        fo.rot = off;
        off += static_cast<int>(faces[static_cast<size_t>(f)].edges.size());
    }
    m.layout.total = off;

    std::vector<Triplet> te;
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            const Vec2& x = fm.nodes[n];
            te.emplace_back(sp.layout.mem_dof(f, static_cast<int>(n), 0), m.layout.par_dof(f, 0), 1.0);
            te.emplace_back(sp.layout.mem_dof(f, static_cast<int>(n), 0), m.layout.par_dof(f, 2), -x.y());
            te.emplace_back(sp.layout.mem_dof(f, static_cast<int>(n), 1), m.layout.par_dof(f, 1), 1.0);
            te.emplace_back(sp.layout.mem_dof(f, static_cast<int>(n), 1), m.layout.par_dof(f, 2), x.x());
            te.emplace_back(sp.layout.w_dof(f, static_cast<int>(n)), m.layout.w_dof(f, static_cast<int>(n)), 1.0);
        }
        for (size_t e = 0; e < fm.edges.size(); ++e)
            te.emplace_back(sp.layout.rot_dof(f, static_cast<int>(e)), m.layout.rot_dof(f, static_cast<int>(e)), 1.0);
    }
    m.embed.resize(sp.layout.total, m.layout.total);
    m.embed.setFromTriplets(te.begin(), te.end());
    m.gram_rho = SpMat(m.embed.transpose()) * sp.gram_rho * m.embed;

    m.continuity.cols = m.layout.total;
    for (const auto& group : sp.mesh.shared_nodes) {
        const auto& r0 = group[0];
        for (size_t j = 1; j < group.size(); ++j) {
            const auto& rj = group[j];
            for (int g = 0; g < 3; ++g) {
                std::vector<std::pair<int, double>> row;
                rigid_value_form(sp, m.layout, r0.face_index, r0.node, g, 1.0, row);
                rigid_value_form(sp, m.layout, rj.face_index, rj.node, g, -1.0, row);
                m.continuity.add_row(std::move(row));
            }
        }
    }
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            if (!sp.node_clamped[static_cast<size_t>(f)][n]) continue;
            const Vec2& x = fm.nodes[n];
            m.continuity.add_row({{m.layout.par_dof(f, 0), 1.0}, {m.layout.par_dof(f, 2), -x.y()}});
            m.continuity.add_row({{m.layout.par_dof(f, 1), 1.0}, {m.layout.par_dof(f, 2), x.x()}});
            m.continuity.add_row({{m.layout.w_dof(f, static_cast<int>(n)), 1.0}});
        }
    }
    return m;
}

InextensionalSpace inextensional_basis(const SkeletonSpaces& sp) {
    InextensionalSpace s;
    s.model = rigid_model(sp);
    const NullspaceBasis ns = nullspace(s.model.continuity);
    s.constraint_rank = ns.rank;
    if (ns.dim() == 0) {
        s.basis.resize(s.model.layout.total, 0);
        return s;
    }
    const Eigen::MatrixXd k = Eigen::MatrixXd(ns.basis);
    Eigen::MatrixXd gram = k.transpose() * (s.model.gram_rho * k);
    gram = 0.5 * (gram + gram.transpose()).eval();
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    require(llt.info() == Eigen::Success,
            "weighted product is singular on the inextensional space; the structure is not anchored");
    Eigen::MatrixXd bt = k.transpose();
    llt.matrixL().solveInPlace(bt);
    s.basis = bt.transpose();
    return s;
}

LimitBendingSpace limit_inextensional_basis(const SkeletonSpaces& sp, const RigidModel& model) {
    LimitBendingSpace lim;
    lim.model = model;
    const Skeleton& skm = *sp.mesh.skeleton;
    const auto& faces = sp.mesh.faces;
    const int nf = static_cast<int>(faces.size());
    const RigidLayout& lay = model.layout;

    LinearConstraints c = model.continuity;

    // single-valued rotation across junction edges, matched at midpoints
    for (const auto& group : sp.shared_edges) {
        const auto& r0 = group[0];
        for (size_t j = 1; j < group.size(); ++j) {
            const auto& rj = group[j];
            for (int g = 0; g < 3; ++g) {
                std::vector<std::pair<int, double>> row;
                rotation_form(sp, lay, r0.face_index, r0.edge, g, 1.0, row);
                rotation_form(sp, lay, rj.face_index, rj.edge, g, -1.0, row);
                c.add_row(std::move(row));
            }
        }
    }

    // rotation clamp on supported edges
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        for (size_t e = 0; e < fm.edges.size(); ++e) {
            if (!sp.mesh_edge_clamped(f, static_cast<int>(e))) continue;
            const int lo = fm.edges[e][0], hi = fm.edges[e][1];
            const double len = (fm.nodes[static_cast<size_t>(hi)] - fm.nodes[static_cast<size_t>(lo)]).norm();
            c.add_row({{lay.w_dof(f, hi), 1.0 / len}, {lay.w_dof(f, lo), -1.0 / len}});
            c.add_row({{lay.rot_dof(f, static_cast<int>(e)), 1.0}});
            c.add_row({{lay.par_dof(f, 2), 1.0}});
        }
    }

    // rigid compatibility of the junction edges meeting at a corner: the
    // stacked system rotation x dir_J = chord_J must be consistent, so the
    // chord data is orthogonal to the left nullspace of the stacked matrix
    for (int v : skm.multi_face_vertices()) {
        const std::vector<int> jes = junction_edges_at_vertex(skm, v);
        if (jes.empty()) continue;
        const int kk = static_cast<int>(jes.size());
        std::vector<JunctionChord> chords;
        Eigen::MatrixXd ma = Eigen::MatrixXd::Zero(3 * kk, 3);
        for (int i = 0; i < kk; ++i) {
            chords.push_back(junction_chord(sp, jes[static_cast<size_t>(i)], v));
            ma.block<3, 3>(3 * i, 0) = -cross_matrix(chords.back().dir);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ma);
        qr.setThreshold(1e-9);
        const int rank = static_cast<int>(qr.rank());
        const Eigen::MatrixXd q = qr.householderQ();
        for (int z = rank; z < 3 * kk; ++z) {
            std::vector<std::pair<int, double>> row;
            for (int i = 0; i < kk; ++i) {
                const JunctionChord& ch = chords[static_cast<size_t>(i)];
                for (int g = 0; g < 3; ++g) {
                    const double zc = q(3 * i + g, z);
                    if (std::abs(zc) < 1e-14) continue;
                    rigid_value_form(sp, lay, ch.face_index, ch.next_node, g, zc / ch.length, row);
                    rigid_value_form(sp, lay, ch.face_index, ch.vertex_node, g, -zc / ch.length, row);
                }
            }
            c.add_row(std::move(row));
        }
    }

    lim.space = nullspace(c);

    // nodal rotation field: averaged deflection gradients plus the drill term
    lim.rot_offset.resize(static_cast<size_t>(nf));
    int roff = 0;
    for (int f = 0; f < nf; ++f) {
        lim.rot_offset[static_cast<size_t>(f)] = roff;
        roff += 3 * static_cast<int>(faces[static_cast<size_t>(f)].nodes.size());
    }
    std::vector<Triplet> tr;
    for (int f = 0; f < nf; ++f) {
        const FaceMesh& fm = faces[static_cast<size_t>(f)];
        const Face& F = skm.faces[static_cast<size_t>(f)];
        std::vector<std::vector<int>> incident(fm.nodes.size());
        for (size_t t = 0; t < fm.tris.size(); ++t)
            for (int k = 0; k < 3; ++k) incident[static_cast<size_t>(fm.tris[t][static_cast<size_t>(k)])].push_back(static_cast<int>(t));

        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            for (int g = 0; g < 3; ++g)
                tr.emplace_back(lim.rotation_dof(f, static_cast<int>(n), g), lay.par_dof(f, 2), F.e3[g]);
            const double wavg = 1.0 / static_cast<double>(incident[n].size());
            for (int t : incident[n]) {
                const auto& tri = fm.tris[static_cast<size_t>(t)];
                const auto& te = fm.tri_edges[static_cast<size_t>(t)];
                const std::array<Vec2, 3> normals = {fm.edge_normal(te[0]), fm.edge_normal(te[1]),
                                                     fm.edge_normal(te[2])};
                const MorleyBasis mb = morley_basis(fm.nodes[static_cast<size_t>(tri[0])],
                                                    fm.nodes[static_cast<size_t>(tri[1])],
                                                    fm.nodes[static_cast<size_t>(tri[2])], normals);
                const int dofs[6] = {lay.w_dof(f, tri[0]),  lay.w_dof(f, tri[1]),  lay.w_dof(f, tri[2]),
                                     lay.rot_dof(f, te[0]), lay.rot_dof(f, te[1]), lay.rot_dof(f, te[2])};
                for (int j = 0; j < 6; ++j) {
                    const Vec2 gj = mb.gradient(j, fm.nodes[n]);
                    for (int g = 0; g < 3; ++g) {
                        const double v = wavg * (F.e1[g] * gj.y() - F.e2[g] * gj.x());
                        if (v != 0.0) tr.emplace_back(lim.rotation_dof(f, static_cast<int>(n), g), dofs[j], v);
                    }
                }
            }
        }
    }
    lim.rotation_map.resize(roff, lay.total);
    lim.rotation_map.setFromTriplets(tr.begin(), tr.end());
    return lim;
}

Eigen::VectorXd project_limit(const LimitBendingSpace& lim, const Eigen::VectorXd& v) {
    const SpMat& z = lim.space.basis;
    const SpMat a = SpMat(z.transpose()) * lim.model.gram_rho * z;
    Eigen::SimplicialLLT<SpMat> llt(a);
    require(llt.info() == Eigen::Success, "weighted product is singular on the welded bending space");
    const Eigen::VectorXd rhs = SpMat(z.transpose()) * (lim.model.gram_rho * v);
    return z * llt.solve(rhs);
}

VertexRigidMotion vertex_rigid_motion(const SkeletonSpaces& sp, const RigidLayout& lay, const Eigen::VectorXd& v,
                                      int vertex_index) {
    const Skeleton& skm = *sp.mesh.skeleton;
    const std::vector<int> jes = junction_edges_at_vertex(skm, vertex_index);
    require(!jes.empty(), "vertex " + std::to_string(vertex_index) + " has no junction edges");

    auto value_at = [&](int f, int node) {
        const Face& F = skm.faces[static_cast<size_t>(f)];
        const Vec2& x = sp.mesh.faces[static_cast<size_t>(f)].nodes[static_cast<size_t>(node)];
        const double a1 = v[lay.par_dof(f, 0)], a2 = v[lay.par_dof(f, 1)], th = v[lay.par_dof(f, 2)];
        return (a1 - th * x.y()) * F.e1 + (a2 + th * x.x()) * F.e2 + v[lay.w_dof(f, node)] * F.e3;
    };

    const int kk = static_cast<int>(jes.size());
    Eigen::MatrixXd ma = Eigen::MatrixXd::Zero(3 * kk, 3);
    Eigen::VectorXd rhs(3 * kk);
    VertexRigidMotion out;
    for (int i = 0; i < kk; ++i) {
        const JunctionChord ch = junction_chord(sp, jes[static_cast<size_t>(i)], vertex_index);
        ma.block<3, 3>(3 * i, 0) = -cross_matrix(ch.dir);
        const Vec3 d = (value_at(ch.face_index, ch.next_node) - value_at(ch.face_index, ch.vertex_node)) / ch.length;
        rhs.segment<3>(3 * i) = d;
        if (i == 0) out.value = value_at(ch.face_index, ch.vertex_node);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ma);
    qr.setThreshold(1e-9);
    out.rotation = qr.solve(rhs);
    out.residual = (ma * out.rotation - rhs).norm();
    return out;
}

SplitResult split(const SkeletonSpaces& sp, const InextensionalSpace& din, const Eigen::VectorXd& u) {
    require(u.size() == sp.layout.total, "field size does not match the space layout");
    SplitResult out;
    out.coords = din.basis.transpose() * (SpMat(din.model.embed.transpose()) * (sp.gram_rho * u));
    out.inextensional = din.model.embed * (din.basis * out.coords);
    out.extensional = u - out.inextensional;
    return out;
}

NormEquivalence norm_equivalence_probe(const SkeletonSpaces& sp, const InextensionalSpace& din, int contaminate) {
    const SpMat& z = sp.clamped_space.basis;
    const Eigen::MatrixXd ae = Eigen::MatrixXd(SpMat(SpMat(z.transpose()) * sp.gram_membrane * z));
    const Eigen::MatrixXd ar = Eigen::MatrixXd(SpMat(SpMat(z.transpose()) * sp.gram_rho * z));
    const int kh = static_cast<int>(z.cols());

    Eigen::MatrixXd probe;
    Eigen::MatrixXd y;  // inextensional directions in the clamped-space coordinates
    if (din.dim() > 0) {
        const Eigen::MatrixXd w = din.model.embed * din.basis;
        y = SpMat(z.transpose()) * w;
        const Eigen::MatrixXd cmat = w.transpose() * (sp.gram_rho * z);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cmat.transpose());
        qr.setThreshold(1e-9);
        const int rank = static_cast<int>(qr.rank());
        const Eigen::MatrixXd q = qr.householderQ();
        probe = q.rightCols(kh - rank);
    } else {
        probe = Eigen::MatrixXd::Identity(kh, kh);
    }
    if (contaminate > 0) {
        require(din.dim() >= contaminate, "not enough inextensional directions to contaminate the probe");
        Eigen::MatrixXd wide(kh, probe.cols() + contaminate);
        wide << probe, y.leftCols(contaminate);
        probe = wide;
    }

    Eigen::MatrixXd be = probe.transpose() * ae * probe;
    Eigen::MatrixXd br = probe.transpose() * ar * probe;
    be = 0.5 * (be + be.transpose()).eval();
    br = 0.5 * (br + br.transpose()).eval();
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(be, br);
    require(es.info() == Eigen::Success, "norm equivalence eigenproblem failed");

    NormEquivalence out;
    out.dim = static_cast<int>(probe.cols());
    out.c_min = es.eigenvalues()(0);
    out.c_max = es.eigenvalues()(out.dim - 1);
    return out;
}

Eigen::VectorXd interpolate(const SkeletonSpaces& sp, const LocalField& u, const LocalGrad& grad3) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sp.layout.total);
    for (size_t f = 0; f < sp.mesh.faces.size(); ++f) {
        const FaceMesh& fm = sp.mesh.faces[f];
        const int fi = static_cast<int>(f);
        for (size_t n = 0; n < fm.nodes.size(); ++n) {
            const Vec3 val = u(fm.face_id, fm.nodes[n]);
            x[sp.layout.mem_dof(fi, static_cast<int>(n), 0)] = val.x();
            x[sp.layout.mem_dof(fi, static_cast<int>(n), 1)] = val.y();
            x[sp.layout.w_dof(fi, static_cast<int>(n))] = val.z();
        }
        for (size_t e = 0; e < fm.edges.size(); ++e)
            x[sp.layout.rot_dof(fi, static_cast<int>(e))] =
                grad3(fm.face_id, fm.edge_midpoint(static_cast<int>(e))).dot(fm.edge_normal(static_cast<int>(e)));
    }
    return x;
}

namespace {

std::array<double, 3> barycentric(const FaceMesh& fm, int t, const Vec2& p) {
    const auto& tri = fm.tris[static_cast<size_t>(t)];
    const Vec2 a = fm.nodes[static_cast<size_t>(tri[0])], b = fm.nodes[static_cast<size_t>(tri[1])],
               c = fm.nodes[static_cast<size_t>(tri[2])];
    Mat2 m;
    m.col(0) = b - a;
    m.col(1) = c - a;
    const Vec2 lam = m.inverse() * (p - a);
    return {1.0 - lam.x() - lam.y(), lam.x(), lam.y()};
}

}  // namespace

Vec3 eval_local(const SkeletonSpaces& sp, const Eigen::VectorXd& u, int face_index, int tri, const Vec2& p) {
    const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(face_index)];
    const auto& tt = fm.tris[static_cast<size_t>(tri)];
    const auto& te = fm.tri_edges[static_cast<size_t>(tri)];
    const auto lam = barycentric(fm, tri, p);
    Vec3 out = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
        out.x() += lam[static_cast<size_t>(k)] * u[sp.layout.mem_dof(face_index, tt[static_cast<size_t>(k)], 0)];
        out.y() += lam[static_cast<size_t>(k)] * u[sp.layout.mem_dof(face_index, tt[static_cast<size_t>(k)], 1)];
    }
    const MorleyBasis mb = tri_morley(fm, tri);
    const double dofs[6] = {u[sp.layout.w_dof(face_index, tt[0])],  u[sp.layout.w_dof(face_index, tt[1])],
                            u[sp.layout.w_dof(face_index, tt[2])],  u[sp.layout.rot_dof(face_index, te[0])],
                            u[sp.layout.rot_dof(face_index, te[1])], u[sp.layout.rot_dof(face_index, te[2])]};
    for (int j = 0; j < 6; ++j) out.z() += dofs[j] * mb.value(j, p);
    return out;
}

Vec2 eval_deflection_gradient(const SkeletonSpaces& sp, const Eigen::VectorXd& u, int face_index, int tri,
                              const Vec2& p) {
    const FaceMesh& fm = sp.mesh.faces[static_cast<size_t>(face_index)];
    const auto& tt = fm.tris[static_cast<size_t>(tri)];
    const auto& te = fm.tri_edges[static_cast<size_t>(tri)];
    const MorleyBasis mb = tri_morley(fm, tri);
    const double dofs[6] = {u[sp.layout.w_dof(face_index, tt[0])],  u[sp.layout.w_dof(face_index, tt[1])],
                            u[sp.layout.w_dof(face_index, tt[2])],  u[sp.layout.rot_dof(face_index, te[0])],
                            u[sp.layout.rot_dof(face_index, te[1])], u[sp.layout.rot_dof(face_index, te[2])]};
    Vec2 g = Vec2::Zero();
    for (int j = 0; j < 6; ++j) g += dofs[j] * mb.gradient(j, p);
    return g;
}

double max_membrane_strain(const SkeletonSpaces& sp, const Eigen::VectorXd& u) {
    double worst = 0.0;
    for (size_t f = 0; f < sp.mesh.faces.size(); ++f) {
        const FaceMesh& fm = sp.mesh.faces[f];
        const int fi = static_cast<int>(f);
        for (size_t t = 0; t < fm.tris.size(); ++t) {
            const auto& tri = fm.tris[t];
            const auto grads = p1_gradients(fm.nodes[static_cast<size_t>(tri[0])], fm.nodes[static_cast<size_t>(tri[1])],
                                            fm.nodes[static_cast<size_t>(tri[2])]);
            double s11 = 0.0, s22 = 0.0, s12 = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double u1 = u[sp.layout.mem_dof(fi, tri[static_cast<size_t>(k)], 0)];
                const double u2 = u[sp.layout.mem_dof(fi, tri[static_cast<size_t>(k)], 1)];
                const Vec2& g = grads[static_cast<size_t>(k)];
                s11 += u1 * g.x();
                s22 += u2 * g.y();
                s12 += 0.5 * (u1 * g.y() + u2 * g.x());
            }
            worst = std::max({worst, std::abs(s11), std::abs(s22), std::abs(s12)});
        }
    }
    return worst;
}

void write_coo(const std::string& path, const SpMat& m) {
    std::ofstream out(path);
    require(static_cast<bool>(out), "cannot open for writing: " + path);
    out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            out << it.row() << " " << it.col() << " " << fmt_num(it.value()) << "\n";
}

}  // namespace plates
