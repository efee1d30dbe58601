#ifndef PEL_SIGNAL_HPP
#define PEL_SIGNAL_HPP

#include "pel/csv.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace pel {

struct Biquad {
    double b0, b1, b2;  // numerator (a0 = 1)
    double a1, a2;
};

/// Digital Butterworth low-pass as cascaded biquads (bilinear transform with
/// frequency prewarping, unit DC gain per section).
std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

/// Forward-backward ("filtfilt") application of the Butterworth low-pass:
/// squared magnitude response, zero net phase. Edges handled by odd-reflection
/// padding of 3*order samples with step steady-state initial conditions.
/// Requires series.size() > 3*order.
std::vector<double> zero_phase_filter(std::span<const double> series, int order, double cutoff_hz,
                                      double fs_hz);

/// Cutoff schedule keyed by the head oscillation frequency:
/// {0 -> 1.5 Hz, 0.5 -> 1.5 Hz, 1 -> 3 Hz, 2 -> 6 Hz} (= max(1.5, 3f)).
double cutoff_for_head_frequency(double f_hz);

/// Per-x-grid-point mean and standard deviation of every channel over the
/// repeated trials of one (alpha, beta, f) configuration.
struct AveragedTrial {
    double alpha_deg = 0.0, beta_deg = 0.0, f_hz = 0.0;
    std::vector<double> x_mm;            // resampling grid
    std::vector<std::string> channels;   // channel names, excluding x
    Eigen::MatrixXd mean;                // rows = grid points, cols = channels
    Eigen::MatrixXd stdev;
    std::vector<std::uint8_t> valid;     // 1 where every trial covered the grid point

    int find(const std::string& name) const;
    Eigen::VectorXd channel(const std::string& name) const;

    DataTable to_table() const;  // mean columns followed by _std columns, plus valid
    static AveragedTrial from_table(const DataTable& t, double alpha_deg, double beta_deg, double f_hz);
};

struct ResampleSpec {
    double x_min_mm = -100.0;
    double x_max_mm = 200.0;
    double x_step_mm = 1.0;
    std::string x_column = "x_mm";

    std::vector<double> grid() const;
};

/// Linear interpolation of each channel onto the x grid, then pointwise mean
/// and sample standard deviation over the trials. Grid points outside any
/// trial's x coverage are flagged invalid and excluded downstream.
AveragedTrial resample_average(std::span<const DataTable> trials, const ResampleSpec& spec,
                               double alpha_deg, double beta_deg, double f_hz);

}  // namespace pel

#endif
