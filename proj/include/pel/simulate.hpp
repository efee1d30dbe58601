#ifndef PEL_SIMULATE_HPP
#define PEL_SIMULATE_HPP

#include "pel/csv.hpp"
#include "pel/landscape.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pel {

/// One quasi-static traversal: constant forward speed with prescribed
/// orientation, optional head oscillation, 50 Hz sensing.
struct TrialConfig {
    double alpha_deg = 0.0;
    double beta_deg = -25.0;
    double f_hz = 0.0;  // head oscillation frequency, one of {0, 0.5, 1, 2} in the protocol
    double mu = 0.3;
    bool noise = true;
    double force_sigma_n = 0.004;
    std::uint64_t seed = 0;
    double speed_mm_s = 20.0;
    double travel_mm = 500.0;
    double start_x_mm = -200.0;
    double y_mm = -6.0;
    double z_mm = 138.0;
    double gamma_deg = 0.0;
    double sample_rate_hz = 50.0;

    void validate() const;
    std::size_t sample_count() const;
    Pose pose_at(double x_mm) const;
};

struct HeadState {
    double delta_rad = 0.0;      // head-down flexion, in [0, 20 deg]
    double delta_dot_rad_s = 0.0;
};

/// delta(t) = 10 deg * (1 - cos(2 pi f t + phase)); identically zero for f = 0.
HeadState head_angle(double t_s, double f_hz, double phase_rad);

/// Uniform random phase in [0, 2 pi), modeling the randomized wait before motion.
double random_head_phase(std::mt19937_64& rng);

struct ContactWrench {
    Vec3 force_n = Vec3::Zero();     // total force on the robot, lab frame
    Vec3 normal_n = Vec3::Zero();    // normal component (along the plate normal)
    Vec3 friction_n = Vec3::Zero();  // tangential component
    double normal_magnitude_n = 0.0;
};

/// Quasi-static contact force at a solved deflection: |N| from the massless
/// beam torque balance (restoring torque over the contact moment arm), plus
/// Coulomb friction opposing the tangential relative surface velocity (body
/// translation + head-oscillation surface motion - beam contact-point motion).
/// Throws IllConditionedContactError when the moment arm is below 1 mm.
ContactWrench contact_wrench(const Beam& beam, const DeflectionResult& defl, double theta_dot_rad_s,
                             const Mat3& rotation, const Vec3& body_velocity_mm_s,
                             double head_delta_dot_rad_s, double mu);

/// Per-beam sensed contact values at one sample.
struct BeamSample {
    ContactType type = ContactType::none;
    double theta_rad = 0.0;
    Vec3 force_n = Vec3::Zero();     // sensed raw force on robot, lab frame
    Vec3 position_mm = Vec3::Zero(); // reported contact position, body frame
    Vec3 normal = Vec3::Zero();      // reported outward normal, body frame
};

struct TrialRecord {
    TrialConfig config;
    bool aborted = false;
    std::string abort_reason;
    std::size_t flagged_samples = 0;  // ill-conditioned contacts, not emitted

    std::vector<double> t_s, x_mm, head_rad;
    std::array<std::vector<double>, 2> theta_rad;
    std::array<std::vector<BeamSample>, 2> beam;
    // Totals (lab F_x; torques projected on body X''/Y''/Z'').
    std::vector<double> fx_n, t_alpha_nmm, t_beta_nmm, t_gamma_nmm;
    std::vector<double> n_fx_n, n_t_alpha_nmm, n_t_beta_nmm, n_t_gamma_nmm;
    // Model reference: the S2 identity -dPE/dq - F_G,q along x/alpha/beta.
    std::vector<double> model_fx_n, model_t_alpha_nmm, model_t_beta_nmm;

    std::size_t size() const { return t_s.size(); }
    DataTable to_table() const;
    /// Columns filtered by the filter stage (sensed and measured channels).
    static std::vector<std::string> filtered_columns();
};

TrialRecord run_trial(const TrialConfig& config, const LandscapeModel& model);

/// Systematic trial plan; enumeration order alpha -> beta -> f -> repetition.
struct SweepPlan {
    std::vector<double> alpha_deg;
    std::vector<double> beta_deg;
    std::vector<double> f_hz;
    int repetitions = 5;

    static SweepPlan paper_plan();
    std::size_t trial_count() const;
    /// Trial config at a plan index, seeded deterministically from the master seed.
    TrialConfig config_at(std::size_t index, const TrialConfig& base, std::uint64_t master_seed) const;
};

struct SweepResult {
    std::vector<TrialRecord> trials;  // plan order
    std::size_t aborted_count = 0;
};

SweepResult sweep(const SweepPlan& plan, const TrialConfig& base, std::uint64_t master_seed,
                  const LandscapeModel& model);

}  // namespace pel

#endif
