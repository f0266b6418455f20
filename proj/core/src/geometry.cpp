#include "ctgeo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ctgeo/errors.hpp"
#include "ctgeo/random.hpp"

namespace ctgeo {

bool ProjectionMatrix::is_valid() const {
    for (const auto& row : m_) {
        for (double e : row) {
            if (!std::isfinite(e)) {
                return false;
            }
        }
    }
    return !(m_[1][0] == 0.0 && m_[1][1] == 0.0 && m_[1][2] == 0.0);
}

void ProjectionMatrix::validate() const {
    if (!is_valid()) {
        throw InvalidParameter("projection matrix has non-finite entries or a zero bottom row");
    }
}

IntrinsicMatrix IntrinsicMatrix::canonical(double focal_px, double principal_px) {
    IntrinsicMatrix k;
    k.k = {{{focal_px, principal_px}, {0.0, 1.0}}};
    return k;
}

void IntrinsicMatrix::validate() const {
    if (!(k[0][0] > 0.0) || k[1][0] != 0.0 || k[1][1] != 1.0 || !std::isfinite(k[0][0]) ||
        !std::isfinite(k[0][1])) {
        throw InvalidParameter("intrinsic matrix is not of the form [[f, c], [0, 1]] with f > 0");
    }
}

ExtrinsicMatrix ExtrinsicMatrix::from_angle(double angle_rad, double tx, double ty) {
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    ExtrinsicMatrix e;
    e.r = {{{c, -s}, {s, c}}};
    e.t = {tx, ty};
    return e;
}

void ExtrinsicMatrix::validate() const {
    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double rrt = r[i][0] * r[j][0] + r[i][1] * r[j][1];
            err = std::max(err, std::abs(rrt - (i == j ? 1.0 : 0.0)));
        }
    }
    const double det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    if (!(err < 1e-10) || !(det > 0.0) || !std::isfinite(t[0]) || !std::isfinite(t[1])) {
        throw InvalidParameter("extrinsic rotation block is not a proper rotation");
    }
}

void Geometry::validate() const {
    if (matrices.empty()) {
        throw InvalidParameter("geometry needs at least one view");
    }
    if (n_det < 2) {
        throw InvalidParameter("geometry needs n_det >= 2, got " + std::to_string(n_det));
    }
    if (!(det_spacing > 0.0) || !std::isfinite(det_spacing)) {
        throw InvalidParameter("det_spacing must be positive");
    }
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        if (!matrices[i].is_valid()) {
            throw InvalidParameter("projection matrix of view " + std::to_string(i) +
                                   " is invalid");
        }
    }
}

MotionParams MotionParams::zeros(std::size_t n_views) {
    return {std::vector<double>(n_views, 0.0), std::vector<double>(n_views, 0.0),
            std::vector<double>(n_views, 0.0)};
}

void MotionParams::validate() const {
    if (tx.size() != alpha.size() || ty.size() != alpha.size()) {
        throw ShapeMismatch("motion parameter groups have different lengths");
    }
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (!std::isfinite(alpha[i]) || !std::isfinite(tx[i]) || !std::isfinite(ty[i])) {
            throw InvalidParameter("non-finite motion parameter at view " + std::to_string(i));
        }
    }
}

RigidMotion compose(const RigidMotion& a, const RigidMotion& b) {
    // M(a) * M(b) = [R_a R_b | R_a t_b + t_a]
    const double c = std::cos(a.alpha);
    const double s = std::sin(a.alpha);
    return {a.alpha + b.alpha, c * b.tx - s * b.ty + a.tx, s * b.tx + c * b.ty + a.ty};
}

RigidMotion inverse(const RigidMotion& m) {
    // [R | t]^-1 = [R^T | -R^T t]
    const double c = std::cos(m.alpha);
    const double s = std::sin(m.alpha);
    return {-m.alpha, -(c * m.tx + s * m.ty), -(-s * m.tx + c * m.ty)};
}

Mat3x3 rigid_matrix(double alpha, double tx, double ty) {
    const double c = std::cos(alpha);
    const double s = std::sin(alpha);
    return {{{c, -s, tx}, {s, c, ty}, {0.0, 0.0, 1.0}}};
}

ProjectionMatrix compose_projection(const IntrinsicMatrix& k, const ExtrinsicMatrix& e) {
    const Mat2x3 ext{{{e.r[0][0], e.r[0][1], e.t[0]}, {e.r[1][0], e.r[1][1], e.t[1]}}};
    Mat2x3 p{};
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            p[r][c] = k.k[r][0] * ext[0][c] + k.k[r][1] * ext[1][c];
        }
    }
    return ProjectionMatrix(p);
}

Geometry make_circular_geometry(int n_views, double sid, double sdd, int n_det,
                                double det_spacing) {
    if (n_views < 1) {
        throw InvalidParameter("n_views must be >= 1");
    }
    if (!(sid > 0.0)) {
        throw InvalidParameter("sid must be > 0");
    }
    if (!(sdd > sid)) {
        throw InvalidParameter("sdd must exceed sid");
    }
    if (n_det < 2) {
        throw InvalidParameter("n_det must be >= 2");
    }
    if (!(det_spacing > 0.0)) {
        throw InvalidParameter("det_spacing must be > 0");
    }

    const auto k = IntrinsicMatrix::canonical(sdd / det_spacing, 0.5 * (n_det - 1));
    Geometry g;
    g.n_det = n_det;
    g.det_spacing = det_spacing;
    g.matrices.reserve(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i) {
        const double beta = 2.0 * std::numbers::pi * i / n_views;
        g.matrices.push_back(compose_projection(k, ExtrinsicMatrix::from_angle(beta, 0.0, sid)));
    }
    return g;
}

Homogeneous1D project_point(const ProjectionMatrix& p, double x, double y) {
    return p.project(x, y);
}

double dehomogenize(double u, double v) {
    if (!(std::abs(v) > kDivEpsilon)) {
        throw DegenerateRay("dehomogenization with |v| = " + std::to_string(std::abs(v)) +
                            " <= 1e-9");
    }
    return u / v;
}

ProjectionMatrix apply_rigid_motion(const ProjectionMatrix& p, double alpha, double tx,
                                    double ty) {
    const Mat3x3 m = rigid_matrix(alpha, tx, ty);
    Mat2x3 out{};
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            out[r][c] = p(r, 0) * m[0][c] + p(r, 1) * m[1][c] + p(r, 2) * m[2][c];
        }
    }
    return ProjectionMatrix(out);
}

Geometry apply_motion(const Geometry& geom, const MotionParams& motion) {
    motion.validate();
    if (motion.n_views() != geom.n_views()) {
        throw ShapeMismatch("motion has " + std::to_string(motion.n_views()) +
                            " views, geometry has " + std::to_string(geom.n_views()));
    }
    Geometry out = geom;
    for (std::size_t i = 0; i < geom.n_views(); ++i) {
        out.matrices[i] =
            apply_rigid_motion(geom.matrices[i], motion.alpha[i], motion.tx[i], motion.ty[i]);
    }
    return out;
}

MotionParams invert(const MotionParams& motion) {
    motion.validate();
    MotionParams out = MotionParams::zeros(motion.n_views());
    for (std::size_t i = 0; i < motion.n_views(); ++i) {
        const RigidMotion inv = inverse({motion.alpha[i], motion.tx[i], motion.ty[i]});
        out.alpha[i] = inv.alpha;
        out.tx[i] = inv.tx;
        out.ty[i] = inv.ty;
    }
    return out;
}

MotionParams sample_random_motion(int n_views, double max_trans_mm, double max_rot_rad,
                                  std::uint64_t seed) {
    if (n_views < 0) {
        throw InvalidParameter("n_views must be >= 0");
    }
    if (!(max_trans_mm >= 0.0) || !(max_rot_rad >= 0.0)) {
        throw InvalidParameter("motion amplitudes must be >= 0");
    }
    MotionStreams streams(seed);
    MotionParams m = MotionParams::zeros(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i) {
        m.alpha[i] = (streams.alpha.uniform01() - 0.5) * max_rot_rad;
    }
    for (int i = 0; i < n_views; ++i) {
        m.tx[i] = (streams.tx.uniform01() - 0.5) * max_trans_mm;
    }
    for (int i = 0; i < n_views; ++i) {
        m.ty[i] = (streams.ty.uniform01() - 0.5) * max_trans_mm;
    }
    return m;
}

ViewParameters decompose_view(const ProjectionMatrix& p) {
    const double scale = std::hypot(p(1, 0), p(1, 1));
    if (!(scale > 0.0)) {
        throw InvalidParameter("projection matrix has no depth direction");
    }
    const double a00 = p(0, 0) / scale, a01 = p(0, 1) / scale, a02 = p(0, 2) / scale;
    const double a10 = p(1, 0) / scale, a11 = p(1, 1) / scale, a12 = p(1, 2) / scale;

    ViewParameters vp;
    vp.focal_px = a00 * a11 - a01 * a10;
    vp.principal_px = a00 * a10 + a01 * a11;
    vp.origin_depth = a12;
    // Source = null vector of P = row0 x row1.
    const double cx = a01 * a12 - a02 * a11;
    const double cy = a02 * a10 - a00 * a12;
    const double cw = a00 * a11 - a01 * a10;
    vp.source = {cx / cw, cy / cw};
    return vp;
}

} // namespace ctgeo
