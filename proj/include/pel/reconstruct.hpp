#ifndef PEL_RECONSTRUCT_HPP
#define PEL_RECONSTRUCT_HPP

#include "pel/landscape.hpp"
#include "pel/signal.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>

namespace pel {

enum class FieldSource { raw, normal, model };

const char* to_string(FieldSource s);
FieldSource field_source_from(const std::string& name);

/// Scattered samples of the negative-gradient field in unified x-alpha-beta
/// coordinates: bases carry x scaled by x_ratio, vectors carry the x component
/// scaled by 1/x_ratio, so base*vector products keep energy units.
struct VectorFieldSamples {
    Eigen::Matrix3Xd bases;
    Eigen::Matrix3Xd vectors;
    FieldSource source = FieldSource::raw;
    double x_ratio = 0.01;

    std::size_t size() const { return static_cast<std::size_t>(bases.cols()); }
};

/// Build the field samples from averaged trials: per valid grid point in
/// [x_min, x_max], take the chosen force/torque channels, add the analytic
/// gravity force/torque so the target is -grad PE, and unify the axes.
VectorFieldSamples assemble_samples(std::span<const AveragedTrial> trials, FieldSource source,
                                    const LandscapeModel& model, double x_min_mm = -100.0,
                                    double x_max_mm = 100.0, double x_ratio = 0.01);

/// Lloyd's k-means with k-means++ seeding (deterministic for a fixed seed).
/// Centers closer than reject_dist to any base are dropped from the returned
/// set; if k exceeds the number of distinct bases it is reduced (warning set).
Eigen::Matrix3Xd kmeans_centers(const Eigen::Matrix3Xd& bases, int k, std::uint64_t seed,
                                int max_iter = 100, double shift_tol = 1e-8,
                                double reject_dist = 1e-4, std::string* warning = nullptr);

/// Bandwidth heuristic: sigma = scale / (2 * median nearest-center spacing^2).
double default_sigma(const Eigen::Matrix3Xd& centers, double scale = 1.0);

struct RidgePolicy {
    double absolute = 0.0;  // used directly when > 0
    double scale = 1e-6;    // else lambda = scale * max squared column norm
};

/// Fitted meshless Helmholtz-Hodge decomposition: the sampled field is
/// approximated as -grad Phi + curl A with Phi = sum a_i phi_i and
/// A = sum phi_i b_i over Gaussian kernels phi_i = exp(-sigma r_i^2).
struct HhdModel {
    Eigen::Matrix3Xd centers;
    Eigen::VectorXd a;  // k scalar-potential coefficients
    Eigen::VectorXd b;  // 3k vector-potential coefficients
    double sigma = 1.0;
    double lambda = 0.0;
    double gauge = 0.0;
    double x_ratio = 0.01;
    FieldSource source = FieldSource::raw;
    std::uint64_t seed = 0;
    double residual_rms = 0.0;  // RMS of the training residual components

    struct Eval {
        double phi;
        Vec3 grad_phi;  // unified coordinates
    };
    Eval eval(const Vec3& point_unified) const;
    /// Full decomposition value -grad Phi + curl A at a point.
    Vec3 eval_field(const Vec3& point_unified) const;

    std::string to_json() const;
    static HhdModel from_json(const std::string& text);
};

/// Ridge-regularized least squares over the 3n x 4k design matrix of
/// [-grad phi_i | grad phi_i x e_j] blocks. Throws on a non-finite/degenerate
/// system with a condition diagnostic.
HhdModel hhd_fit(const VectorFieldSamples& samples, const Eigen::Matrix3Xd& centers, double sigma,
                 const RidgePolicy& ridge = {});

/// Phi and its gradient on an x-alpha-beta grid (gradient x component
/// converted back to per-mm through x_ratio). Gauge offset is applied.
LandscapeGrid reconstruct_landscape(const HhdModel& model, const GridAxes& axes);

/// Fix the model gauge so the reconstructed grid mean matches the reference
/// grid mean over their common finite nodes; both the model and the grid are
/// updated. Returns the applied shift.
double align_gauge(HhdModel& model, LandscapeGrid& reconstructed, const LandscapeGrid& reference);

}  // namespace pel

#endif
