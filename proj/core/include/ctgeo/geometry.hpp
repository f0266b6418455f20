#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ctgeo {

/// Dehomogenization guard, in units of v (mm of depth for circular geometries).
inline constexpr double kDivEpsilon = 1e-9;

/// Homogeneous 1D detector coordinate (u, v); the detector index is u / v.
struct Homogeneous1D {
    double u = 0.0;
    double v = 0.0;
};

using Mat2x3 = std::array<std::array<double, 3>, 2>;
using Mat3x3 = std::array<std::array<double, 3>, 3>;

/**
 * 2x3 fan-beam projection matrix mapping homogeneous image points (x, y, 1)
 * in mm to homogeneous detector coordinates (u, v).
 */
class ProjectionMatrix {
  public:
    ProjectionMatrix() = default;
    explicit ProjectionMatrix(const Mat2x3& rows) : m_(rows) {}

    double operator()(int r, int c) const { return m_[r][c]; }
    double& operator()(int r, int c) { return m_[r][c]; }

    const Mat2x3& rows() const { return m_; }

    /// Finite entries and a bottom row that is not identically zero.
    bool is_valid() const;
    /// Throws InvalidParameter when !is_valid().
    void validate() const;

    Homogeneous1D project(double x, double y) const {
        return {m_[0][0] * x + m_[0][1] * y + m_[0][2],
                m_[1][0] * x + m_[1][1] * y + m_[1][2]};
    }

    friend bool operator==(const ProjectionMatrix&, const ProjectionMatrix&) = default;

  private:
    Mat2x3 m_{};
};

/// Detector intrinsics. Canonical form is [[f, c], [0, 1]] with f = SDD /
/// detector spacing and c the principal point, both in detector pixels.
struct IntrinsicMatrix {
    std::array<std::array<double, 2>, 2> k{{{1.0, 0.0}, {0.0, 1.0}}};

    static IntrinsicMatrix canonical(double focal_px, double principal_px);
    /// f > 0 and the canonical bottom row.
    void validate() const;
};

/// Object pose [R | t]; t in mm.
struct ExtrinsicMatrix {
    std::array<std::array<double, 2>, 2> r{{{1.0, 0.0}, {0.0, 1.0}}};
    std::array<double, 2> t{0.0, 0.0};

    /// R = [[cos a, -sin a], [sin a, cos a]] (counterclockwise).
    static ExtrinsicMatrix from_angle(double angle_rad, double tx, double ty);
    /// R orthogonal with det +1 to 1e-10.
    void validate() const;
};

/// A full scan: one projection matrix per view plus the detector descriptor.
struct Geometry {
    std::vector<ProjectionMatrix> matrices;
    int n_det = 0;
    double det_spacing = 0.0; ///< mm

    std::size_t n_views() const { return matrices.size(); }
    void validate() const;

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Per-view rigid parameters; alpha in radians, translations in mm.
struct MotionParams {
    std::vector<double> alpha;
    std::vector<double> tx;
    std::vector<double> ty;

    static MotionParams zeros(std::size_t n_views);
    std::size_t n_views() const { return alpha.size(); }
    void validate() const;

    friend bool operator==(const MotionParams&, const MotionParams&) = default;
};

/// A single rigid transform, the element type of MotionParams.
struct RigidMotion {
    double alpha = 0.0;
    double tx = 0.0;
    double ty = 0.0;
};

/// Composition such that apply(apply(P, a), b) == apply(P, compose(a, b)).
RigidMotion compose(const RigidMotion& a, const RigidMotion& b);
RigidMotion inverse(const RigidMotion& m);

/// The homogeneous 3x3 matrix [[cos, -sin, tx], [sin, cos, ty], [0, 0, 1]].
Mat3x3 rigid_matrix(double alpha, double tx, double ty);

ProjectionMatrix compose_projection(const IntrinsicMatrix& k, const ExtrinsicMatrix& e);

/**
 * Full-circle fan-beam scan. View i uses E_i = [R(beta_i) | (0, sid)] with
 * beta_i = 2*pi*i/N and K = [[sdd/det_spacing, (n_det-1)/2], [0, 1]]. The
 * source sits at the camera origin looking along +y, so v is the depth of a
 * point in front of the source.
 */
Geometry make_circular_geometry(int n_views, double sid, double sdd, int n_det,
                                double det_spacing);

Homogeneous1D project_point(const ProjectionMatrix& p, double x, double y);

/// u / v; throws DegenerateRay when |v| <= kDivEpsilon.
double dehomogenize(double u, double v);

/// P * M(alpha, tx, ty).
ProjectionMatrix apply_rigid_motion(const ProjectionMatrix& p, double alpha, double tx,
                                    double ty);
inline ProjectionMatrix apply_rigid_motion(const ProjectionMatrix& p, const RigidMotion& m) {
    return apply_rigid_motion(p, m.alpha, m.tx, m.ty);
}

/// Per-view apply_rigid_motion; throws ShapeMismatch on a view-count mismatch.
Geometry apply_motion(const Geometry& geom, const MotionParams& motion);

/// Per-view inverse transforms: apply_motion(apply_motion(g, m), invert(m)) == g.
MotionParams invert(const MotionParams& motion);

/**
 * Uniform i.i.d. samples on [-max/2, max/2) for each parameter group,
 * reproducible from the seed alone (see random.hpp for the stream layout).
 */
MotionParams sample_random_motion(int n_views, double max_trans_mm, double max_rot_rad,
                                  std::uint64_t seed);

/**
 * Fan-beam parameters recovered from a matrix of the form lambda*K*[R|t]
 * (lambda > 0). Rigid motion (right multiplication) leaves focal_px and
 * principal_px unchanged.
 */
struct ViewParameters {
    double focal_px = 0.0;     ///< SDD / detector spacing
    double principal_px = 0.0; ///< detector index of the central ray
    double origin_depth = 0.0; ///< v-depth of the world origin, mm
    std::array<double, 2> source{0.0, 0.0}; ///< world position of the source, mm
};

ViewParameters decompose_view(const ProjectionMatrix& p);

} // namespace ctgeo
