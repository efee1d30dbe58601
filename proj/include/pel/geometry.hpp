#ifndef PEL_GEOMETRY_HPP
#define PEL_GEOMETRY_HPP

#include "pel/common.hpp"

#include <array>
#include <vector>

namespace pel {

/// Body configuration in the lab frame. Positions in mm; Tait-Bryan Z-Y'-X''
/// angles (yaw gamma, pitch beta, roll alpha) in radians, normalized to
/// (-pi, pi]. Negative pitch is nose-up.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    Pose() = default;
    Pose(double x_, double y_, double z_, double alpha_, double beta_, double gamma_)
        : x(x_), y(y_), z(z_), alpha(wrap_angle(alpha_)), beta(wrap_angle(beta_)), gamma(wrap_angle(gamma_)) {}

    static Pose from_degrees(double x_, double y_, double z_, double alpha_deg, double beta_deg,
                             double gamma_deg) {
        return Pose(x_, y_, z_, deg2rad(alpha_deg), deg2rad(beta_deg), deg2rad(gamma_deg));
    }

    Vec3 position() const { return Vec3(x, y, z); }
};

/// Body->lab rotation, R = Rz(gamma) * Ry(beta) * Rx(alpha).
Mat3 pose_rotation(const Pose& pose);

/// Mass properties. The center of mass sits com_offset_mm below the geometric
/// center along body -z''.
struct BodyParams {
    double mass_kg = 0.53;
    double com_offset_mm = 8.0;
    double gravity_mm_s2 = 9810.0;

    /// Weight in N (mass in kg, g in mm/s^2; energies stay in N*mm).
    double weight_newton() const { return mass_kg * gravity_mm_s2 * 1e-3; }

    void validate() const;
};

/// Shield shell shape centered at the body origin: an x''-z'' elliptical
/// profile extruded over a laterally flat middle with ellipsoidal end caps.
/// Implicitly (x/a)^2 + (z/c)^2 + ((|y| - flat)_+ / cap)^2 = 1 with
/// cap = semi_axis_y - flat_half_width. The kept surface is forward of the
/// widest cross-section (x'' >= 0), above the skirt crop plane
/// (z'' >= -skirt_depth, whose boundary is the sharp front edge), and split at
/// the midline with a small gap. flat_half_width = 0 recovers a pure
/// ellipsoid cap.
struct ShellParams {
    double semi_axis_x_mm = 90.0;
    double semi_axis_y_mm = 92.0;      // total half-width (flat + cap)
    double semi_axis_z_mm = 60.0;
    double flat_half_width_mm = 72.0;  // laterally flat middle
    double skirt_depth_mm = 45.0;      // crop plane below the equator
    double midline_gap_mm = 2.0;
    double resolution_mm = 2.0;  // target triangle edge length
    int edge_sections_per_half = 3;
    /// Target (deg) for within-cell normal spread; cells split until their
    /// spread fits, staying below the 5 deg sensor budget with margin.
    double cell_normal_budget_deg = 4.0;
    double cell_diameter_budget_mm = 45.0;

    double cap_half_width_mm() const { return semi_axis_y_mm - flat_half_width_mm; }
    void validate() const;
};

enum class ContactType { none, surface, edge };

const char* to_string(ContactType t);

/// One touch-sensing cell: a patch of triangles reported as a single contact
/// position (center) and direction (normal). Edge cells model the wire
/// sections on the sharp front edge; their normal is horizontal
/// (perpendicular to body z'' and to the rim tangent).
struct TouchCell {
    Vec3 center = Vec3::Zero();  // body frame, on the surface
    Vec3 normal = Vec3::Zero();  // body frame, unit, outward
    bool edge = false;
    int half = 0;  // +1 left (+y''), -1 right
};

struct ShellTriangle {
    std::array<int, 3> v{};
    Vec3 normal = Vec3::Zero();  // unit, outward, body frame
    int cell = -1;
    int half = 0;
};

struct ShellMesh {
    std::vector<Vec3> vertices;  // body frame, mm
    std::vector<ShellTriangle> triangles;
    std::vector<TouchCell> cells;
    std::vector<std::vector<int>> vertex_triangles;  // adjacency
    int edge_cell_count = 0;

    // Generating surface, kept so contact solves can refine on the analytic
    // shield: per-vertex (u, v) parameters and the vertex grid layout
    // (u sweeps laterally, y = semi_axis_y * sin u; v sweeps the profile).
    ShellParams params;
    std::vector<Eigen::Vector2d> vertex_uv;
    double grid_du_rad = 0.0;
    double grid_dv_rad = 0.0;
    int grid_nu = 0;
    int grid_nv = 0;

    /// Grid vertex nearest to surface parameters (u, v); skips vertices that
    /// lost all incident triangles to cropping.
    int nearest_vertex(double u, double v) const;

    Vec3 bbox_min() const;
    Vec3 bbox_max() const;

    /// Surface point and outward normal of the generating shield.
    Vec3 surface_point(double u, double v) const;
    Vec3 surface_normal_at(const Vec3& point_body) const;
};

ShellMesh shell_build(const ShellParams& params);

struct SurfaceHit {
    int cell = -1;
    int triangle = -1;
    Vec3 normal = Vec3::Zero();  // reported (cell) normal, body frame
    ContactType type = ContactType::none;
};

/// Resolve a body-frame point to its owning touch cell. The point must lie
/// within tolerance_mm of the surface or NoContactError is thrown. Ties
/// between edge and surface triangles break toward surface.
SurfaceHit surface_query(const ShellMesh& mesh, const Vec3& point_body, double tolerance_mm = 1.0);

/// Same resolution for a point known to be a mesh vertex (no search).
SurfaceHit surface_query_vertex(const ShellMesh& mesh, int vertex_index);

/// Distance from a point to a triangle (used by surface_query and tests).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace pel

#endif
