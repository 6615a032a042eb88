#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace plates {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Structural problems with inputs (bad files, bad geometry). CLI maps these to exit 2.
struct StructuralError : std::runtime_error {
    explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numeric check that failed (trend violated, solver residual too large). CLI maps to exit 1.
struct CheckError : std::runtime_error {
    explicit CheckError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw StructuralError(msg);
}

// C2 cutoff: 0 below 1, 1 above 2, quintic smoothstep in between. Max slope 15/8 < 2.
inline double cutoff_m(double t) {
    if (t <= 1.0) return 0.0;
    if (t >= 2.0) return 1.0;
    const double s = t - 1.0;
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

// Composite Simpson weights for n nodes (n odd, >= 3) with uniform spacing h.
inline std::vector<double> simpson_weights(int n, double h) {
    if (n < 3 || n % 2 == 0) throw StructuralError("simpson_weights: need an odd node count >= 3");
    std::vector<double> w(static_cast<size_t>(n), 0.0);
    for (int i = 0; i + 2 < n; i += 2) {
        w[static_cast<size_t>(i)] += h / 3.0;
        w[static_cast<size_t>(i + 1)] += 4.0 * h / 3.0;
        w[static_cast<size_t>(i + 2)] += h / 3.0;
    }
    return w;
}

inline Mat3 sym_part(const Mat3& g) { return 0.5 * (g + g.transpose()); }

inline double ddot(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

inline Vec3 cross(const Vec3& a, const Vec3& b) { return a.cross(b); }

inline double dist_point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 d = b - a;
    const double L2 = d.squaredNorm();
    if (L2 <= 0.0) return (p - a).norm();
    double t = (p - a).dot(d) / L2;
    t = std::min(1.0, std::max(0.0, t));
    return (p - (a + t * d)).norm();
}

// Shortest-format decimal that round-trips, for byte-stable CSV output.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw StructuralError("cannot open for writing: " + path);
        for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << "\n";
        ncols_ = header.size();
    }
    void row(const std::vector<std::string>& cells) {
        if (cells.size() != ncols_) throw StructuralError("csv row width mismatch");
        for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }
    static std::string num(double v) { return fmt_num(v); }
    static std::string num(int v) { return std::to_string(v); }

  private:
    std::ofstream out_;
    size_t ncols_ = 0;
};

// Merges 3D points that coincide within tol; used for junction stitching and mesh welds.
class PointMerger {
  public:
    explicit PointMerger(double tol) : tol_(tol) {
        if (tol <= 0.0) throw StructuralError("PointMerger: tolerance must be positive");
    }

    // Returns the id of the merged point, inserting if no existing point is within tol.
    int find_or_add(const Vec3& p) {
        const int found = find(p);
        if (found >= 0) return found;
        points_.push_back(p);
        const int id = static_cast<int>(points_.size()) - 1;
        buckets_[key_of(p)].push_back(id);
        return id;
    }

    int find(const Vec3& p) const {
        const Key k = key_of(p);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto it = buckets_.find(Key{k.x + dx, k.y + dy, k.z + dz});
                    if (it == buckets_.end()) continue;
                    for (int id : it->second)
                        if ((points_[static_cast<size_t>(id)] - p).norm() <= tol_) return id;
                }
        return -1;
    }

    const std::vector<Vec3>& points() const { return points_; }

  private:
    struct Key {
        int64_t x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        size_t operator()(const Key& k) const {
            uint64_t h = 1469598103934665603ull;
            for (uint64_t v : {static_cast<uint64_t>(k.x), static_cast<uint64_t>(k.y), static_cast<uint64_t>(k.z)}) {
                h ^= v + 0x9e3779b97f4a7c15ull;
                h *= 1099511628211ull;
            }
            return static_cast<size_t>(h);
        }
    };
    Key key_of(const Vec3& p) const {
        const double s = 1.0 / (2.0 * tol_);
        return Key{static_cast<int64_t>(std::floor(p.x() * s)), static_cast<int64_t>(std::floor(p.y() * s)),
                   static_cast<int64_t>(std::floor(p.z() * s))};
    }

    double tol_;
    std::vector<Vec3> points_;
    std::unordered_map<Key, std::vector<int>, KeyHash> buckets_;
};

// Vector-valued polynomial sum c * x1^p1 * x2^p2 * x3^p3; analytic test fields and force tables.
struct PolyField3 {
    struct Term {
        Vec3 coef;
        int p1 = 0, p2 = 0, p3 = 0;
    };
    std::vector<Term> terms;

    Vec3 eval(const Vec3& x) const {
        Vec3 v = Vec3::Zero();
        for (const auto& t : terms)
            v += t.coef * std::pow(x.x(), t.p1) * std::pow(x.y(), t.p2) * std::pow(x.z(), t.p3);
        return v;
    }
    Mat3 grad(const Vec3& x) const {  // grad(i,j) = d v_i / d x_j
        Mat3 g = Mat3::Zero();
        for (const auto& t : terms) {
            const double m1 = std::pow(x.x(), t.p1), m2 = std::pow(x.y(), t.p2), m3 = std::pow(x.z(), t.p3);
            if (t.p1 > 0) g.col(0) += t.coef * (t.p1 * std::pow(x.x(), t.p1 - 1) * m2 * m3);
            if (t.p2 > 0) g.col(1) += t.coef * (t.p2 * std::pow(x.y(), t.p2 - 1) * m1 * m3);
            if (t.p3 > 0) g.col(2) += t.coef * (t.p3 * std::pow(x.z(), t.p3 - 1) * m1 * m2);
        }
        return g;
    }
};

}  // namespace plates
