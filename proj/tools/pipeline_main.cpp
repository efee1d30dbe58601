#include "pel/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Potential energy landscape simulation and reconstruction pipeline"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Execute pipeline stages");
    std::string config_path;
    std::string stages_list = "model,simulate,filter,reconstruct,evaluate,report";
    std::string out_dir = "out";
    std::int64_t seed = -1;
    run->add_option("--config", config_path, "Run configuration JSON");
    run->add_option("--stages", stages_list, "Comma-separated stage list")->capture_default_str();
    run->add_option("--seed", seed, "Master seed override");
    run->add_option("--out", out_dir, "Artifact directory")->capture_default_str();

    auto* exp = app.add_subcommand("export", "Export plot-ready CSV from an artifact directory");
    pel::ExportOptions opts;
    std::string in_dir, out_file;
    exp->add_option("--kind", opts.kind, "landscape_slice | force_vs_x | error_bars")->required();
    exp->add_option("--in", in_dir, "Artifact directory")->required();
    exp->add_option("--out", out_file, "Output CSV path")->required();
    exp->add_option("--grid", opts.grid, "landscape_slice grid: model | rigid | recon");
    exp->add_option("--source", opts.source, "Recon source tag (raw | normal | model)");
    exp->add_option("--f", opts.f_hz, "Head oscillation frequency selector");
    exp->add_option("--x", opts.x_mm, "Slice x positions (mm)");
    exp->add_option("--alpha", opts.alpha_deg, "force_vs_x: trial roll (deg)");
    exp->add_option("--beta", opts.beta_deg, "force_vs_x: trial pitch (deg)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            pel::RunConfig config =
                config_path.empty() ? pel::RunConfig{} : pel::RunConfig::load(config_path);
            if (seed >= 0) config.master_seed = static_cast<std::uint64_t>(seed);
            pel::run_pipeline(config, pel::parse_stages(stages_list), out_dir);
            std::printf("artifacts written to %s\n", out_dir.c_str());
        } else if (exp->parsed()) {
            pel::export_plotdata(in_dir, opts, out_file);
            std::printf("exported %s\n", out_file.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
