#ifndef PEL_CONFIG_HPP
#define PEL_CONFIG_HPP

#include "pel/geometry.hpp"
#include "pel/landscape.hpp"
#include "pel/signal.hpp"
#include "pel/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pel {

struct ReconConfig {
    int k = 500;
    std::vector<std::string> sources = {"raw", "normal", "model"};
    double sigma_scale = 1.0;
    double lambda_scale = 1e-6;
    double x_min_mm = -100.0;
    double x_max_mm = 100.0;
    double x_ratio = 0.01;
    int kmeans_max_iter = 100;
    int repeats = 1;  // k-means seed repetitions for e_PE/e_grad spread
};

struct EvalGridConfig {
    double x_min_mm = -100.0, x_max_mm = 100.0, x_step_mm = 5.0;
    double alpha_min_deg = 0.0, alpha_max_deg = 40.0, alpha_step_deg = 2.5;
    double beta_min_deg = -40.0, beta_max_deg = -10.0, beta_step_deg = 2.5;
};

struct BeamConfig {
    double gap_mm = 130.0;
    double width_mm = 30.0;
    double height_mm = 200.0;
    double left_k_nmm_per_rad = 285.0;
    double left_tau_nmm = 91.0;
    double right_k_nmm_per_rad = 324.0;
    double right_tau_nmm = 77.0;
};

struct FilterConfig {
    int order = 6;
};

/// Full pipeline configuration; every default is either a paper-sourced value
/// or listed in the resolved config's "assumptions" section.
struct RunConfig {
    ShellParams shell;
    BeamConfig beam;
    BodyParams body;
    TrialConfig protocol;  // base trial; alpha/beta/f filled in from the plan
    SweepPlan plan = SweepPlan::paper_plan();
    FilterConfig filter;
    ResampleSpec average;
    ReconConfig recon;
    EvalGridConfig eval;
    std::uint64_t master_seed = 42;

    std::array<Beam, 2> beams() const;
    GridAxes eval_axes() const;
    void validate() const;

    /// Parse with json-pointer-style field paths in error messages.
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::string& path);
    /// Resolved round-trip including the auto-generated assumptions section.
    std::string to_json_text() const;
    std::uint64_t config_hash() const;
};

}  // namespace pel

#endif
