#ifndef PEL_LANDSCAPE_HPP
#define PEL_LANDSCAPE_HPP

#include "pel/geometry.hpp"

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pel {

/// Torsional-hinge plate obstacle. The hinge line runs along lab y at
/// x = 0, z = 0; the plate extends height_mm upward and deflects forward
/// (toward +x) only. Restoring torque about the hinge is k*theta + tau.
struct Beam {
    double hinge_y_mm = 0.0;  // lateral center of the plate
    double width_mm = 30.0;
    double height_mm = 200.0;
    double k_nmm_per_rad = 285.0;
    double tau_nmm = 91.0;

    double y_lo() const { return hinge_y_mm - 0.5 * width_mm; }
    double y_hi() const { return hinge_y_mm + 0.5 * width_mm; }
    double restoring_torque(double theta) const { return k_nmm_per_rad * theta + tau_nmm; }
    double elastic_energy(double theta) const {
        return 0.5 * k_nmm_per_rad * theta * theta + tau_nmm * theta;
    }
    void validate() const;
};

inline constexpr int kLeftBeam = 0;
inline constexpr int kRightBeam = 1;
inline constexpr double kMaxDeflectionRad = 89.0 * kPi / 180.0;
inline constexpr double kDeflectionTolRad = 1e-6;

/// Default beam pair: 130 mm gap symmetric to the midline, calibrated
/// stiffness/preload per side (left +y, right -y).
std::array<Beam, 2> default_beams(double gap_mm = 130.0);

/// Which feature pair carries the contact; decides the force direction.
/// Shell edge or surface against the plate face transmits along the plate
/// normal; the plate's side or top edge against the smooth shell transmits
/// along the shell normal.
enum class ContactRegime { plate_face, beam_edge, beam_tip };

struct DeflectionResult {
    bool contact = false;
    double theta_rad = 0.0;
    int vertex = -1;                  // binding mesh vertex (polish seed)
    Vec3 point_body = Vec3::Zero();   // contact point, body frame
    Vec3 point_lab = Vec3::Zero();    // contact point, lab frame
    double radius_mm = 0.0;           // hinge-to-contact distance (beam-point speed)
    double moment_arm_mm = 0.0;       // moment arm of the force line of action
    Vec3 force_dir_lab = Vec3::Zero();  // unit direction of the normal force on the robot
    ContactRegime regime = ContactRegime::plate_face;
    SurfaceHit hit;                   // owning cell / reported normal / type
};

/// Shell posed at a fixed orientation and lateral/vertical position; only the
/// fore-aft position varies. pose.x is ignored here and supplied per solve,
/// which makes x-sweeps and x-derivatives cheap.
class OrientedShell {
  public:
    OrientedShell(const ShellMesh& mesh, const Pose& pose, std::span<const Beam> beams);

    /// Signed clearance (mm) between the plate at deflection theta and the
    /// shell with the body at fore-aft position x. Negative means the plate
    /// would have to sweep through the shell; strictly increasing in theta.
    double clearance(int beam_index, double x, double theta) const;

    /// Largest forward deflection that keeps the beam in contact: the root of
    /// the clearance function, bracketed by bisection to kDeflectionTolRad and
    /// polished at the binding vertex. Throws InfeasiblePoseError if the shell
    /// penetrates the plate even at the 89 deg cap.
    DeflectionResult solve(int beam_index, double x) const;

    const ShellMesh& mesh() const { return *mesh_; }
    const Mat3& rotation() const { return rotation_; }

  private:
    struct Candidate {
        double x_off;  // lab x minus body x
        double z;      // lab z
        int vertex;
    };
    /// Exact contact on the generating ellipsoid cap: support-point tangency
    /// for face contact plus boundary-curve maxima (beam slab edges, skirt
    /// rim, crop planes) and the beam-tip reach circle. Overwrites the
    /// vertex-level result, including clearing contact near onset.
    void refine_contact(int beam_index, double x, DeflectionResult& r) const;

    const ShellMesh* mesh_;
    Mat3 rotation_;
    double y_offset_, z_offset_;
    std::vector<Beam> beams_;
    std::vector<std::vector<Candidate>> candidates_;  // per beam, inside the y slab
};

/// One-off deflection solve at a full pose.
DeflectionResult beam_deflection(const Pose& pose, const ShellMesh& mesh, const Beam& beam);

struct PoseEnergy {
    double pe = 0.0;          // N*mm, gauge-shifted
    double pe_gravity = 0.0;  // N*mm
    std::array<double, 2> pe_beam{0.0, 0.0};
    std::array<DeflectionResult, 2> beam;
};

using Vector6 = Eigen::Matrix<double, 6, 1>;

struct GradientResult {
    Vector6 d = Vector6::Zero();  // dPE/d{x,y,z,alpha,beta,gamma}
    std::array<bool, 6> one_sided{false, false, false, false, false, false};
};

/// Ground-truth landscape: shell + beam pair + mass properties + gravity
/// gauge. PE_G vanishes at (z = reference_z, alpha = beta = 0).
class LandscapeModel {
  public:
    LandscapeModel(std::shared_ptr<const ShellMesh> mesh, std::array<Beam, 2> beams,
                   BodyParams body, double reference_z_mm);

    double gravity_pe(const Pose& pose) const;
    PoseEnergy evaluate(const Pose& pose) const;
    double potential_energy(const Pose& pose) const { return evaluate(pose).pe; }

    /// Central differences with a 1e-4 unit step (mm / rad). Falls back to a
    /// one-sided difference, flagged per axis, when a perturbed pose is
    /// infeasible.
    GradientResult gradient_central_diff(const Pose& pose, double step = 1e-4) const;

    /// Conjugate gravity force/torque along {x, y, z, alpha, beta, gamma},
    /// i.e. -dPE_G/dq, analytic.
    Vector6 gravity_generalized_force(const Pose& pose) const;

    const ShellMesh& mesh() const { return *mesh_; }
    std::shared_ptr<const ShellMesh> mesh_ptr() const { return mesh_; }
    const std::array<Beam, 2>& beams() const { return beams_; }
    const BodyParams& body() const { return body_; }
    double reference_z() const { return reference_z_; }

  private:
    std::shared_ptr<const ShellMesh> mesh_;
    std::array<Beam, 2> beams_;
    BodyParams body_;
    double reference_z_;
};

/// Prebuilt contexts for sweeps where only x varies: the base orientation plus
/// the four alpha/beta-perturbed orientations used by the (x, alpha, beta)
/// gradient.
class TraversalEvaluator {
  public:
    TraversalEvaluator(const LandscapeModel& model, const Pose& pose_template, double step = 1e-4);

    PoseEnergy energy(double x) const;
    /// (dPE/dx, dPE/dalpha, dPE/dbeta) by central differences.
    Vec3 gradient_xab(double x, std::array<bool, 3>* one_sided = nullptr) const;
    const OrientedShell& base() const { return *base_; }
    const LandscapeModel& model() const { return *model_; }
    const Pose& pose_template() const { return pose_; }

  private:
    PoseEnergy energy_in(const OrientedShell& shell, const Pose& pose, double x) const;
    const LandscapeModel* model_;
    Pose pose_;
    double step_;
    std::unique_ptr<OrientedShell> base_, alpha_plus_, alpha_minus_, beta_plus_, beta_minus_;
};

struct GridAxes {
    std::vector<double> x_mm;
    std::vector<double> alpha_rad;
    std::vector<double> beta_rad;

    static std::vector<double> linspace_step(double lo, double hi, double step);
    std::size_t size() const { return x_mm.size() * alpha_rad.size() * beta_rad.size(); }
    void validate() const;
};

/// PE (and optionally its x/alpha/beta gradient) over an x-alpha-beta grid.
/// Infeasible nodes hold +inf. Flattening order: x outer, alpha, beta inner.
struct LandscapeGrid {
    GridAxes axes;
    std::vector<double> pe;
    std::vector<Vec3> grad;  // empty unless gradients were requested
    bool has_gradients = false;

    std::size_t index(std::size_t ix, std::size_t ia, std::size_t ib) const {
        return (ix * axes.alpha_rad.size() + ia) * axes.beta_rad.size() + ib;
    }
};

LandscapeGrid landscape_grid(const LandscapeModel& model, const GridAxes& axes, bool with_gradients,
                             double y_mm, double z_mm, double gamma_rad = 0.0);

/// True when the posed shell does not cross either vertical (undeflected)
/// plate. Exposed for the brute-force z-scan oracle.
bool rigid_collision_free(const LandscapeModel& model, const Pose& pose);

/// Rigid-beam geometric baseline: gravitational PE at the lowest collision-free
/// z at or above z_start, found by binary search to tol_mm. Returns nullopt if
/// no collision-free z exists up to z_start + search_range_mm.
std::optional<double> rigid_geometry_pe(const LandscapeModel& model, double x_mm, double alpha_rad,
                                        double beta_rad, double y_mm, double z_start_mm,
                                        double gamma_rad = 0.0, double search_range_mm = 400.0,
                                        double tol_mm = 0.1);

LandscapeGrid rigid_geometry_grid(const LandscapeModel& model, const GridAxes& axes, double y_mm,
                                  double z_start_mm, double gamma_rad = 0.0);

}  // namespace pel

#endif
