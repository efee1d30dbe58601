#include "pel/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace pel {

void TrialConfig::validate() const {
    if (!(speed_mm_s > 0)) throw InvalidParameterError("trial.speed_mm_s must be > 0");
    if (!(f_hz >= 0)) throw InvalidParameterError("trial.f_hz must be >= 0");
    if (!(mu >= 0) || !(mu < 1.5)) throw InvalidParameterError("trial.mu must be in [0, 1.5)");
    if (!(travel_mm > 0)) throw InvalidParameterError("trial.travel_mm must be > 0");
    if (!(sample_rate_hz > 0)) throw InvalidParameterError("trial.sample_rate_hz must be > 0");
    if (!(force_sigma_n >= 0)) throw InvalidParameterError("trial.force_sigma_n must be >= 0");
}

std::size_t TrialConfig::sample_count() const {
    return static_cast<std::size_t>(std::llround(travel_mm / speed_mm_s * sample_rate_hz)) + 1;
}

Pose TrialConfig::pose_at(double x) const {
    return Pose(x, y_mm, z_mm, deg2rad(alpha_deg), deg2rad(beta_deg), deg2rad(gamma_deg));
}

HeadState head_angle(double t_s, double f_hz, double phase_rad) {
    if (t_s < 0) throw InvalidParameterError("head_angle: t must be >= 0");
    HeadState h;
    if (f_hz <= 0.0) return h;
    const double amp = deg2rad(10.0);
    const double w = 2.0 * kPi * f_hz;
    h.delta_rad = amp * (1.0 - std::cos(w * t_s + phase_rad));
    h.delta_dot_rad_s = amp * w * std::sin(w * t_s + phase_rad);
    return h;
}

double random_head_phase(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
}

ContactWrench contact_wrench(const Beam& beam, const DeflectionResult& defl, double theta_dot_rad_s,
                             const Mat3& rotation, const Vec3& body_velocity_mm_s,
                             double head_delta_dot_rad_s, double mu) {
    if (!defl.contact) throw InvalidParameterError("contact_wrench: no contact");
    if (defl.moment_arm_mm < 1.0)
        throw IllConditionedContactError("contact_wrench: moment arm " +
                                         std::to_string(defl.moment_arm_mm) + " mm");
    const double theta = defl.theta_rad;
    const Vec3 n_front(std::cos(theta), 0.0, -std::sin(theta));  // plate normal, away from robot
    const Vec3 n_contact = defl.force_dir_lab;                   // unit, force on the robot
    ContactWrench w;
    w.normal_magnitude_n = beam.restoring_torque(theta) / defl.moment_arm_mm;
    w.normal_n = w.normal_magnitude_n * n_contact;

    if (mu > 0.0) {
        const Vec3 r = rotation * defl.point_body;  // contact offset from the geometric center
        const Vec3 head_axis = rotation.col(1);     // body y''; positive delta pitches the head down
        const Vec3 v_surface = body_velocity_mm_s + head_delta_dot_rad_s * head_axis.cross(r);
        const Vec3 v_beam = theta_dot_rad_s * defl.radius_mm * n_front;
        const Vec3 v_rel = v_surface - v_beam;
        const Vec3 v_t = v_rel - v_rel.dot(n_contact) * n_contact;
        const double vt_norm = v_t.norm();
        if (vt_norm > 1e-6) w.friction_n = -mu * w.normal_magnitude_n * v_t / vt_norm;
    }
    w.force_n = w.normal_n + w.friction_n;
    return w;
}

namespace {

struct Totals {
    double fx = 0, ta = 0, tb = 0, tg = 0;
    double nfx = 0, nta = 0, ntb = 0, ntg = 0;
};

Totals totals_from_samples(const std::array<BeamSample, 2>& s, const Mat3& rot) {
    Totals tot;
    Vec3 f_sum = Vec3::Zero(), t_sum = Vec3::Zero(), nf_sum = Vec3::Zero(), nt_sum = Vec3::Zero();
    for (const auto& b : s) {
        if (b.type == ContactType::none) continue;
        const Vec3 r = rot * b.position_mm;
        f_sum += b.force_n;
        t_sum += r.cross(b.force_n);
        const Vec3 n_lab = rot * b.normal;
        const Vec3 nf = b.force_n.dot(n_lab) * n_lab;
        nf_sum += nf;
        nt_sum += r.cross(nf);
    }
    tot.fx = f_sum.x();
    tot.ta = t_sum.dot(rot.col(0));
    tot.tb = t_sum.dot(rot.col(1));
    tot.tg = t_sum.dot(rot.col(2));
    tot.nfx = nf_sum.x();
    tot.nta = nt_sum.dot(rot.col(0));
    tot.ntb = nt_sum.dot(rot.col(1));
    tot.ntg = nt_sum.dot(rot.col(2));
    return tot;
}

}  // namespace

TrialRecord run_trial(const TrialConfig& config, const LandscapeModel& model) {
    config.validate();
    TrialRecord rec;
    rec.config = config;

    std::mt19937_64 rng(config.seed);
    const double phase = random_head_phase(rng);
    std::normal_distribution<double> noise(0.0, config.force_sigma_n);

    const Pose pose = config.pose_at(config.start_x_mm);
    const TraversalEvaluator eval(model, pose);
    const Mat3 rot = eval.base().rotation();
    const Vec3 body_velocity(config.speed_mm_s, 0.0, 0.0);
    const Vector6 f_gravity = model.gravity_generalized_force(pose);

    const std::size_t n = config.sample_count();
    const double dt = 1.0 / config.sample_rate_hz;
    std::array<double, 2> theta_prev{0.0, 0.0};

    for (std::size_t k = 0; k < n; ++k) {
        const double t = k * dt;
        const double x = config.start_x_mm + config.speed_mm_s * t;
        const HeadState head = head_angle(t, config.f_hz, phase);

        PoseEnergy energy;
        Vec3 grad;
        try {
            energy = eval.energy(x);
            grad = eval.gradient_xab(x);
        } catch (const InfeasiblePoseError& e) {
            rec.aborted = true;
            rec.abort_reason = std::string("infeasible pose at x = ") + format_double(x) + ": " + e.what();
            break;
        }

        std::array<BeamSample, 2> samples;
        for (int bi = 0; bi < 2; ++bi) {
            const DeflectionResult& defl = energy.beam[bi];
            BeamSample& s = samples[bi];
            if (!defl.contact) {
                theta_prev[bi] = 0.0;
                continue;
            }
            const double theta_dot = k == 0 ? 0.0 : (defl.theta_rad - theta_prev[bi]) / dt;
            theta_prev[bi] = defl.theta_rad;
            ContactWrench w;
            try {
                w = contact_wrench(model.beams()[bi], defl, theta_dot, rot, body_velocity,
                                   head.delta_dot_rad_s, config.mu);
            } catch (const IllConditionedContactError&) {
                ++rec.flagged_samples;
                continue;  // sample flagged, not emitted
            }
            s.type = defl.hit.type;
            s.theta_rad = defl.theta_rad;
            s.force_n = w.force_n;
            if (config.noise) {
                s.force_n += Vec3(noise(rng), noise(rng), noise(rng));
                const auto& cell = model.mesh().cells[defl.hit.cell];
                s.position_mm = cell.center;
                s.normal = cell.normal;
            } else {
                s.position_mm = defl.point_body;
                // Ideal normal report: opposite the transmitted force, in body
                // frame (the true contact normal for every contact regime).
                s.normal = rot.transpose() * (-defl.force_dir_lab);
            }
        }

        const Totals tot = totals_from_samples(samples, rot);
        rec.t_s.push_back(t);
        rec.x_mm.push_back(x);
        rec.head_rad.push_back(head.delta_rad);
        for (int bi = 0; bi < 2; ++bi) {
            rec.theta_rad[bi].push_back(energy.beam[bi].contact ? energy.beam[bi].theta_rad : 0.0);
            rec.beam[bi].push_back(samples[bi]);
        }
        rec.fx_n.push_back(tot.fx);
        rec.t_alpha_nmm.push_back(tot.ta);
        rec.t_beta_nmm.push_back(tot.tb);
        rec.t_gamma_nmm.push_back(tot.tg);
        rec.n_fx_n.push_back(tot.nfx);
        rec.n_t_alpha_nmm.push_back(tot.nta);
        rec.n_t_beta_nmm.push_back(tot.ntb);
        rec.n_t_gamma_nmm.push_back(tot.ntg);
        rec.model_fx_n.push_back(-grad[0] - f_gravity[0]);
        rec.model_t_alpha_nmm.push_back(-grad[1] - f_gravity[3]);
        rec.model_t_beta_nmm.push_back(-grad[2] - f_gravity[4]);
    }
    return rec;
}

DataTable TrialRecord::to_table() const {
    DataTable t;
    const std::size_t n = size();
    auto constant = [&](double v) { return std::vector<double>(n, v); };
    t.add_column("t_s", t_s);
    t.add_column("x_mm", x_mm);
    t.add_column("y_mm", constant(config.y_mm));
    t.add_column("z_mm", constant(config.z_mm));
    t.add_column("alpha_deg", constant(config.alpha_deg));
    t.add_column("beta_deg", constant(config.beta_deg));
    t.add_column("gamma_deg", constant(config.gamma_deg));
    std::vector<double> head(n);
    for (std::size_t i = 0; i < n; ++i) head[i] = rad2deg(head_rad[i]);
    t.add_column("head_deg", std::move(head));
    const char* side[2] = {"L", "R"};
    for (int bi = 0; bi < 2; ++bi) {
        std::vector<double> th(n);
        for (std::size_t i = 0; i < n; ++i) th[i] = rad2deg(theta_rad[bi][i]);
        t.add_column(std::string("theta_") + side[bi] + "_deg", std::move(th));
    }
    for (int bi = 0; bi < 2; ++bi) {
        const std::string p = std::string(side[bi]) + "_";
        std::vector<double> fx(n), fy(n), fz(n), px(n), py(n), pz(n), nx(n), ny(n), nz(n), ct(n);
        for (std::size_t i = 0; i < n; ++i) {
            const BeamSample& s = beam[bi][i];
            fx[i] = s.force_n.x();
            fy[i] = s.force_n.y();
            fz[i] = s.force_n.z();
            px[i] = s.position_mm.x();
            py[i] = s.position_mm.y();
            pz[i] = s.position_mm.z();
            nx[i] = s.normal.x();
            ny[i] = s.normal.y();
            nz[i] = s.normal.z();
            ct[i] = static_cast<double>(s.type);
        }
        t.add_column(p + "Fx_N", std::move(fx));
        t.add_column(p + "Fy_N", std::move(fy));
        t.add_column(p + "Fz_N", std::move(fz));
        t.add_column(p + "px_mm", std::move(px));
        t.add_column(p + "py_mm", std::move(py));
        t.add_column(p + "pz_mm", std::move(pz));
        t.add_column(p + "nx", std::move(nx));
        t.add_column(p + "ny", std::move(ny));
        t.add_column(p + "nz", std::move(nz));
        t.add_column(p + "contact_type", std::move(ct));
    }
    t.add_column("F_x_N", fx_n);
    t.add_column("T_alpha_Nmm", t_alpha_nmm);
    t.add_column("T_beta_Nmm", t_beta_nmm);
    t.add_column("T_gamma_Nmm", t_gamma_nmm);
    t.add_column("N_F_x_N", n_fx_n);
    t.add_column("N_T_alpha_Nmm", n_t_alpha_nmm);
    t.add_column("N_T_beta_Nmm", n_t_beta_nmm);
    t.add_column("N_T_gamma_Nmm", n_t_gamma_nmm);
    t.add_column("model_F_x_N", model_fx_n);
    t.add_column("model_T_alpha_Nmm", model_t_alpha_nmm);
    t.add_column("model_T_beta_Nmm", model_t_beta_nmm);
    return t;
}

std::vector<std::string> TrialRecord::filtered_columns() {
    std::vector<std::string> cols = {"head_deg", "theta_L_deg", "theta_R_deg",
                                     "F_x_N",   "T_alpha_Nmm", "T_beta_Nmm",  "T_gamma_Nmm",
                                     "N_F_x_N", "N_T_alpha_Nmm", "N_T_beta_Nmm", "N_T_gamma_Nmm"};
    for (const char* side : {"L", "R"})
        for (const char* ax : {"Fx_N", "Fy_N", "Fz_N"}) cols.push_back(std::string(side) + "_" + ax);
    return cols;
}

SweepPlan SweepPlan::paper_plan() {
    SweepPlan p;
    for (int a = 0; a <= 40; a += 5) p.alpha_deg.push_back(a);
    for (int b = -10; b >= -40; b -= 5) p.beta_deg.push_back(b);
    p.f_hz = {0.0, 0.5, 1.0, 2.0};
    p.repetitions = 5;
    return p;
}

std::size_t SweepPlan::trial_count() const {
    return alpha_deg.size() * beta_deg.size() * f_hz.size() * static_cast<std::size_t>(repetitions);
}

TrialConfig SweepPlan::config_at(std::size_t index, const TrialConfig& base, std::uint64_t master_seed) const {
    if (index >= trial_count()) throw InvalidParameterError("SweepPlan: index out of range");
    const std::size_t reps = static_cast<std::size_t>(repetitions);
    const std::size_t rep = index % reps;
    const std::size_t fi = (index / reps) % f_hz.size();
    const std::size_t bi = (index / (reps * f_hz.size())) % beta_deg.size();
    const std::size_t ai = index / (reps * f_hz.size() * beta_deg.size());
    TrialConfig c = base;
    c.alpha_deg = alpha_deg[ai];
    c.beta_deg = beta_deg[bi];
    c.f_hz = f_hz[fi];
    c.seed = derive_seed(master_seed, index);
    (void)rep;
    return c;
}

SweepResult sweep(const SweepPlan& plan, const TrialConfig& base, std::uint64_t master_seed,
                  const LandscapeModel& model) {
    SweepResult result;
    result.trials.resize(plan.trial_count());
    parallel_for(plan.trial_count(), [&](std::size_t i) {
        result.trials[i] = run_trial(plan.config_at(i, base, master_seed), model);
    });
    for (const auto& t : result.trials)
        if (t.aborted) ++result.aborted_count;
    return result;
}

}  // namespace pel
