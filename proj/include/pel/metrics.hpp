#ifndef PEL_METRICS_HPP
#define PEL_METRICS_HPP

#include "pel/landscape.hpp"
#include "pel/signal.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pel {

struct TraversalWindow {
    double x_a = 0.0;  // attach: first frame with both beam angles above threshold
    double x_d = 0.0;  // detach: first frame where either beam angle attains its maximum
    std::size_t idx_a = 0;
    std::size_t idx_d = 0;
};

/// Segment a traversal from its beam-angle channels. Throws NoContactError if
/// no frame has both beams above the threshold (or the window degenerates).
TraversalWindow attach_detach(std::span<const double> x, std::span<const double> theta_left_rad,
                              std::span<const double> theta_right_rad,
                              double threshold_rad = deg2rad(3.0));

/// Window on an averaged trial's theta_L_deg / theta_R_deg channels,
/// restricted to its valid grid points.
TraversalWindow attach_detach(const AveragedTrial& trial, double threshold_rad = deg2rad(3.0));

/// Range-normalized series error over [i0, i1]:
/// mean |y - r| / (max r - min r) * 100. Throws on a constant reference.
double relative_error_series(std::span<const double> y, std::span<const double> r, std::size_t i0,
                             std::size_t i1);

struct FieldError {
    double e_pe = 0.0;    // percent
    double e_grad = 0.0;  // percent; NaN when either grid lacks gradients
};

/// Flattened-grid errors against a reference grid sharing the same axes.
/// PE is mean-aligned first (gauge), then range-normalized; gradients are
/// axis-unified (x component divided by x_ratio) and max-norm-normalized.
/// Nodes where either grid is non-finite are excluded.
FieldError relative_error_field(const LandscapeGrid& y, const LandscapeGrid& r, double x_ratio = 0.01);

struct Stats {
    double mean = 0.0;
    double stdev = 0.0;
    std::size_t n = 0;
    bool defined() const { return n > 0; }
};

Stats stats_of(std::span<const double> values);

/// Per-averaged-trial series errors for one (source, f) configuration.
struct TrialErrors {
    double alpha_deg = 0.0, beta_deg = 0.0;
    double e_x = 0.0, e_alpha = 0.0, e_beta = 0.0;  // percent
    double cv_fx = 0.0, cv_t_alpha = 0.0, cv_t_beta = 0.0;  // x-averaged repeat variability
};

struct ConfigResult {
    std::string source;  // raw | normal | model
    double f_hz = 0.0;
    std::vector<TrialErrors> trials;      // trials with a valid window
    std::size_t skipped_trials = 0;       // no attach window / degenerate normalization
    std::vector<double> e_pe_percent;     // one entry per reconstruction repeat
    std::vector<double> e_grad_percent;
};

struct ReportRow {
    std::string source;
    double f_hz = 0.0;
    std::size_t n_trials = 0;
    Stats e_x, e_alpha, e_beta, e_pe, e_grad;
    Stats cv_fx, cv_t_alpha, cv_t_beta;
};

struct Report {
    std::vector<ReportRow> rows;

    DataTable to_table() const;
    std::string to_text() const;
};

Report report_table(std::span<const ConfigResult> results);

}  // namespace pel

#endif
