#ifndef PEL_PIPELINE_HPP
#define PEL_PIPELINE_HPP

#include "pel/config.hpp"
#include "pel/metrics.hpp"
#include "pel/reconstruct.hpp"

#include <string>
#include <vector>

namespace pel {

enum class Stage { model, simulate, filter, reconstruct, evaluate, report };

const char* to_string(Stage s);
std::vector<Stage> parse_stages(const std::string& comma_list);

/// Executes the requested stages in order under out_dir, reading upstream
/// artifacts from disk and writing each stage's files plus a deterministic
/// manifest (wall-clock timings go to a separate timings.json). Rerunning with
/// the same config and seed rewrites byte-identical artifacts.
void run_pipeline(const RunConfig& config, const std::vector<Stage>& stages, const std::string& out_dir);

struct ExportOptions {
    std::string kind;              // landscape_slice | force_vs_x | error_bars
    std::string grid = "model";    // landscape_slice: model | rigid | recon
    std::string source = "model";  // recon grids / force_vs_x source filter
    double f_hz = 0.0;
    std::vector<double> x_mm = {-88.0, -48.0, -8.0};  // slice positions
    double alpha_deg = 0.0, beta_deg = -25.0;         // force_vs_x trial selector
};

void export_plotdata(const std::string& artifact_dir, const ExportOptions& options,
                     const std::string& out_path);

// Artifact naming shared by stages, tools and tests.
std::string trial_basename(std::size_t index);
std::string averaged_basename(double alpha_deg, double beta_deg, double f_hz);
std::string recon_model_name(const std::string& source, double f_hz, int repeat);
std::string recon_grid_name(const std::string& source, double f_hz);

DataTable grid_to_table(const LandscapeGrid& grid);
LandscapeGrid grid_from_table(const DataTable& table);

}  // namespace pel

#endif
