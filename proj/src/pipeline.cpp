#include "pel/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

namespace pel {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Stage s) {
    switch (s) {
        case Stage::model: return "model";
        case Stage::simulate: return "simulate";
        case Stage::filter: return "filter";
        case Stage::reconstruct: return "reconstruct";
        case Stage::evaluate: return "evaluate";
        case Stage::report: return "report";
    }
    return "?";
}

std::vector<Stage> parse_stages(const std::string& comma_list) {
    std::vector<Stage> stages;
    std::stringstream ss(comma_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item == "model") stages.push_back(Stage::model);
        else if (item == "simulate") stages.push_back(Stage::simulate);
        else if (item == "filter") stages.push_back(Stage::filter);
        else if (item == "reconstruct") stages.push_back(Stage::reconstruct);
        else if (item == "evaluate") stages.push_back(Stage::evaluate);
        else if (item == "report") stages.push_back(Stage::report);
        else throw InvalidParameterError("unknown stage '" + item + "'");
    }
    if (stages.empty()) throw InvalidParameterError("no stages requested");
    return stages;
}

namespace {

std::string num_token(double v) {
    std::string s = format_double(v);
    return s;
}

void require_file(const fs::path& p, const char* needed_by) {
    if (!fs::exists(p))
        throw std::runtime_error(std::string("missing upstream artifact: ") + p.string() +
                                 " (required by the " + needed_by + " stage)");
}

}  // namespace

std::string trial_basename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "trial_%05zu", index);
    return buf;
}

std::string averaged_basename(double alpha_deg, double beta_deg, double f_hz) {
    return "avg_a" + num_token(alpha_deg) + "_b" + num_token(beta_deg) + "_f" + num_token(f_hz);
}

std::string recon_model_name(const std::string& source, double f_hz, int repeat) {
    std::string n = "model_" + source + "_f" + num_token(f_hz);
    if (repeat > 0) n += "_r" + std::to_string(repeat);
    return n + ".json";
}

std::string recon_grid_name(const std::string& source, double f_hz) {
    return "landscape_" + source + "_f" + num_token(f_hz) + ".csv";
}

DataTable grid_to_table(const LandscapeGrid& grid) {
    DataTable t;
    t.add_column("x_mm");
    t.add_column("alpha_deg");
    t.add_column("beta_deg");
    t.add_column("PE_Nmm");
    if (grid.has_gradients) {
        t.add_column("dPE_dx");
        t.add_column("dPE_dalpha");
        t.add_column("dPE_dbeta");
    }
    for (std::size_t ix = 0; ix < grid.axes.x_mm.size(); ++ix)
        for (std::size_t ia = 0; ia < grid.axes.alpha_rad.size(); ++ia)
            for (std::size_t ib = 0; ib < grid.axes.beta_rad.size(); ++ib) {
                const std::size_t idx = grid.index(ix, ia, ib);
                t.data[0].push_back(grid.axes.x_mm[ix]);
                t.data[1].push_back(rad2deg(grid.axes.alpha_rad[ia]));
                t.data[2].push_back(rad2deg(grid.axes.beta_rad[ib]));
                t.data[3].push_back(grid.pe[idx]);
                if (grid.has_gradients) {
                    t.data[4].push_back(grid.grad[idx].x());
                    t.data[5].push_back(grid.grad[idx].y());
                    t.data[6].push_back(grid.grad[idx].z());
                }
            }
    return t;
}

LandscapeGrid grid_from_table(const DataTable& t) {
    LandscapeGrid grid;
    auto unique_sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                v.end());
        return v;
    };
    grid.axes.x_mm = unique_sorted(t.col("x_mm"));
    for (double a : unique_sorted(t.col("alpha_deg"))) grid.axes.alpha_rad.push_back(deg2rad(a));
    for (double b : unique_sorted(t.col("beta_deg"))) grid.axes.beta_rad.push_back(deg2rad(b));
    grid.axes.validate();
    grid.has_gradients = t.has("dPE_dx");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    grid.pe.assign(grid.axes.size(), nan);
    if (grid.has_gradients) grid.grad.assign(grid.axes.size(), Vec3::Constant(nan));
    auto locate = [](const std::vector<double>& axis, double v) {
        const auto it = std::lower_bound(axis.begin(), axis.end(), v - 1e-9);
        if (it == axis.end() || std::abs(*it - v) > 1e-6)
            throw InvalidParameterError("grid_from_table: off-grid coordinate");
        return static_cast<std::size_t>(it - axis.begin());
    };
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const std::size_t ix = locate(grid.axes.x_mm, t.col("x_mm")[r]);
        const std::size_t ia = locate(grid.axes.alpha_rad, deg2rad(t.col("alpha_deg")[r]));
        const std::size_t ib = locate(grid.axes.beta_rad, deg2rad(t.col("beta_deg")[r]));
        const std::size_t idx = grid.index(ix, ia, ib);
        grid.pe[idx] = t.col("PE_Nmm")[r];
        if (grid.has_gradients)
            grid.grad[idx] = Vec3(t.col("dPE_dx")[r], t.col("dPE_dalpha")[r], t.col("dPE_dbeta")[r]);
    }
    return grid;
}

namespace {

struct PipelineContext {
    RunConfig config;
    fs::path out;
    std::shared_ptr<const ShellMesh> mesh;
    std::unique_ptr<LandscapeModel> model;

    const LandscapeModel& landscape() {
        if (!model) {
            mesh = std::make_shared<const ShellMesh>(shell_build(config.shell));
            model = std::make_unique<LandscapeModel>(mesh, config.beams(), config.body, config.protocol.z_mm);
        }
        return *model;
    }
};

void write_mesh_csvs(const ShellMesh& mesh, const fs::path& dir) {
    DataTable verts;
    verts.add_column("vertex_id");
    verts.add_column("x_mm");
    verts.add_column("y_mm");
    verts.add_column("z_mm");
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        verts.data[0].push_back(static_cast<double>(i));
        verts.data[1].push_back(mesh.vertices[i].x());
        verts.data[2].push_back(mesh.vertices[i].y());
        verts.data[3].push_back(mesh.vertices[i].z());
    }
    verts.write_csv((dir / "shell_vertices.csv").string());
    DataTable faces;
    for (const char* c : {"face_id", "v0", "v1", "v2", "cell_id", "edge"}) faces.add_column(c);
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& tri = mesh.triangles[i];
        faces.data[0].push_back(static_cast<double>(i));
        for (int k = 0; k < 3; ++k) faces.data[1 + k].push_back(tri.v[k]);
        faces.data[4].push_back(tri.cell);
        faces.data[5].push_back(mesh.cells[tri.cell].edge ? 1.0 : 0.0);
    }
    faces.write_csv((dir / "shell_faces.csv").string());
}

void stage_model(PipelineContext& ctx) {
    const auto& model = ctx.landscape();
    fs::create_directories(ctx.out / "mesh");
    fs::create_directories(ctx.out / "model");
    write_mesh_csvs(model.mesh(), ctx.out / "mesh");
    const GridAxes axes = ctx.config.eval_axes();
    const auto& proto = ctx.config.protocol;
    const LandscapeGrid truth =
        landscape_grid(model, axes, true, proto.y_mm, proto.z_mm, deg2rad(proto.gamma_deg));
    grid_to_table(truth).write_csv((ctx.out / "model" / "landscape_model.csv").string());
    const LandscapeGrid rigid =
        rigid_geometry_grid(model, axes, proto.y_mm, proto.z_mm, deg2rad(proto.gamma_deg));
    grid_to_table(rigid).write_csv((ctx.out / "model" / "landscape_rigid.csv").string());
}

void stage_simulate(PipelineContext& ctx) {
    const auto& model = ctx.landscape();
    fs::create_directories(ctx.out / "trials");
    const auto& plan = ctx.config.plan;
    const std::size_t n = plan.trial_count();
    std::vector<json> sidecars(n);
    parallel_for(n, [&](std::size_t i) {
        const TrialConfig tc = plan.config_at(i, ctx.config.protocol, ctx.config.master_seed);
        const TrialRecord rec = run_trial(tc, model);
        rec.to_table().write_csv((ctx.out / "trials" / (trial_basename(i) + ".csv")).string());
        json meta;
        meta["index"] = i;
        meta["alpha_deg"] = tc.alpha_deg;
        meta["beta_deg"] = tc.beta_deg;
        meta["f_hz"] = tc.f_hz;
        meta["mu"] = tc.mu;
        meta["noise"] = tc.noise;
        meta["force_sigma_n"] = tc.force_sigma_n;
        meta["seed"] = tc.seed;
        meta["speed_mm_s"] = tc.speed_mm_s;
        meta["travel_mm"] = tc.travel_mm;
        meta["start_x_mm"] = tc.start_x_mm;
        meta["y_mm"] = tc.y_mm;
        meta["z_mm"] = tc.z_mm;
        meta["gamma_deg"] = tc.gamma_deg;
        meta["sample_rate_hz"] = tc.sample_rate_hz;
        meta["aborted"] = rec.aborted;
        meta["abort_reason"] = rec.abort_reason;
        meta["flagged_samples"] = rec.flagged_samples;
        sidecars[i] = std::move(meta);
    });
    for (std::size_t i = 0; i < n; ++i)
        write_text_file((ctx.out / "trials" / (trial_basename(i) + ".json")).string(),
                        sidecars[i].dump(2) + "\n");
}

void stage_filter(PipelineContext& ctx) {
    fs::create_directories(ctx.out / "averaged");
    const auto& plan = ctx.config.plan;
    const auto filtered_cols = TrialRecord::filtered_columns();
    // Group plan indices by (alpha, beta, f); repetitions vary fastest.
    std::map<std::array<double, 3>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < plan.trial_count(); ++i) {
        const TrialConfig tc = plan.config_at(i, ctx.config.protocol, ctx.config.master_seed);
        groups[{tc.alpha_deg, tc.beta_deg, tc.f_hz}].push_back(i);
    }
    std::vector<std::pair<std::array<double, 3>, std::vector<std::size_t>>> group_list(groups.begin(),
                                                                                       groups.end());
    parallel_for(group_list.size(), [&](std::size_t gi) {
        const auto& [key, indices] = group_list[gi];
        const double cutoff = cutoff_for_head_frequency(key[2]);
        std::vector<DataTable> trials;
        for (std::size_t i : indices) {
            const fs::path csv = ctx.out / "trials" / (trial_basename(i) + ".csv");
            require_file(csv, "filter");
            const fs::path sidecar = ctx.out / "trials" / (trial_basename(i) + ".json");
            require_file(sidecar, "filter");
            const json meta = json::parse(read_text_file(sidecar.string()));
            if (meta.value("aborted", false)) continue;  // reported, sweep continues
            DataTable t = DataTable::read_csv(csv.string());
            for (const auto& name : filtered_cols) {
                auto& colv = t.col(name);
                colv = zero_phase_filter(colv, ctx.config.filter.order, cutoff,
                                         ctx.config.protocol.sample_rate_hz);
            }
            trials.push_back(std::move(t));
        }
        if (trials.empty()) return;
        const AveragedTrial avg = resample_average(trials, ctx.config.average, key[0], key[1], key[2]);
        avg.to_table().write_csv(
            (ctx.out / "averaged" / (averaged_basename(key[0], key[1], key[2]) + ".csv")).string());
    });
}

std::vector<AveragedTrial> load_averaged(PipelineContext& ctx, double f_hz, const char* stage) {
    std::vector<AveragedTrial> avgs;
    for (double a : ctx.config.plan.alpha_deg)
        for (double b : ctx.config.plan.beta_deg) {
            const fs::path p = ctx.out / "averaged" / (averaged_basename(a, b, f_hz) + ".csv");
            require_file(p, stage);
            avgs.push_back(AveragedTrial::from_table(DataTable::read_csv(p.string()), a, b, f_hz));
        }
    return avgs;
}

void stage_reconstruct(PipelineContext& ctx) {
    const auto& model = ctx.landscape();
    fs::create_directories(ctx.out / "recon");
    const fs::path truth_csv = ctx.out / "model" / "landscape_model.csv";
    require_file(truth_csv, "reconstruct");
    const LandscapeGrid truth = grid_from_table(DataTable::read_csv(truth_csv.string()));
    const GridAxes axes = ctx.config.eval_axes();
    for (const auto& source_name : ctx.config.recon.sources) {
        const FieldSource source = field_source_from(source_name);
        for (double f : ctx.config.plan.f_hz) {
            const auto avgs = load_averaged(ctx, f, "reconstruct");
            const VectorFieldSamples samples =
                assemble_samples(avgs, source, model, ctx.config.recon.x_min_mm,
                                 ctx.config.recon.x_max_mm, ctx.config.recon.x_ratio);
            for (int rep = 0; rep < ctx.config.recon.repeats; ++rep) {
                const std::uint64_t seed = derive_seed(
                    ctx.config.master_seed, fnv1a64(source_name + "/f" + num_token(f)) + rep);
                const Eigen::Matrix3Xd centers =
                    kmeans_centers(samples.bases, ctx.config.recon.k, seed,
                                   ctx.config.recon.kmeans_max_iter);
                const double sigma = default_sigma(centers, ctx.config.recon.sigma_scale);
                HhdModel hhd = hhd_fit(samples, centers, sigma,
                                       RidgePolicy{.absolute = 0.0, .scale = ctx.config.recon.lambda_scale});
                hhd.seed = seed;
                LandscapeGrid recon = reconstruct_landscape(hhd, axes);
                align_gauge(hhd, recon, truth);
                write_text_file((ctx.out / "recon" / recon_model_name(source_name, f, rep)).string(),
                                hhd.to_json() + "\n");
                if (rep == 0)
                    grid_to_table(recon).write_csv(
                        (ctx.out / "recon" / recon_grid_name(source_name, f)).string());
            }
        }
    }
}

// x-averaged repeat variability of one channel over the window: mean std
// normalized by the mean curve's range.
double channel_cv(const AveragedTrial& avg, const std::string& name, const TraversalWindow& w) {
    const int c = avg.find(name);
    if (c < 0) return 0.0;
    double acc = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t n = 0;
    for (std::size_t i = w.idx_a; i <= w.idx_d; ++i) {
        if (!avg.valid[i]) continue;
        acc += avg.stdev(i, c);
        lo = std::min(lo, avg.mean(i, c));
        hi = std::max(hi, avg.mean(i, c));
        ++n;
    }
    if (n == 0 || !(hi - lo > 0.0)) return 0.0;
    return acc / static_cast<double>(n) / (hi - lo);
}

void stage_evaluate(PipelineContext& ctx) {
    fs::create_directories(ctx.out / "eval");
    const fs::path truth_csv = ctx.out / "model" / "landscape_model.csv";
    require_file(truth_csv, "evaluate");
    const LandscapeGrid truth = grid_from_table(DataTable::read_csv(truth_csv.string()));
    const GridAxes axes = ctx.config.eval_axes();

    json summary;
    summary["results"] = json::array();
    for (const auto& source_name : ctx.config.recon.sources) {
        const FieldSource source = field_source_from(source_name);
        for (double f : ctx.config.plan.f_hz) {
            const auto avgs = load_averaged(ctx, f, "evaluate");
            json res;
            res["source"] = source_name;
            res["f_hz"] = f;
            DataTable per_trial;
            for (const char* c : {"alpha_deg", "beta_deg", "x_a_mm", "x_d_mm", "e_x", "e_alpha",
                                  "e_beta", "cv_Fx", "cv_T_alpha", "cv_T_beta"})
                per_trial.add_column(c);
            std::size_t skipped = 0;
            json trials_j = json::array();
            for (const auto& avg : avgs) {
                try {
                    const TraversalWindow w = attach_detach(avg);
                    const char* fx = source == FieldSource::normal ? "N_F_x_N" : "F_x_N";
                    const char* ta = source == FieldSource::normal ? "N_T_alpha_Nmm" : "T_alpha_Nmm";
                    const char* tb = source == FieldSource::normal ? "N_T_beta_Nmm" : "T_beta_Nmm";
                    auto vec = [&](const char* name) {
                        const Eigen::VectorXd v = avg.channel(name);
                        return std::vector<double>(v.data(), v.data() + v.size());
                    };
                    json tj;
                    tj["alpha_deg"] = avg.alpha_deg;
                    tj["beta_deg"] = avg.beta_deg;
                    tj["x_a"] = w.x_a;
                    tj["x_d"] = w.x_d;
                    tj["cv_fx"] = channel_cv(avg, "F_x_N", w);
                    tj["cv_ta"] = channel_cv(avg, "T_alpha_Nmm", w);
                    tj["cv_tb"] = channel_cv(avg, "T_beta_Nmm", w);
                    if (source != FieldSource::model) {
                        tj["e_x"] = relative_error_series(vec(fx), vec("model_F_x_N"), w.idx_a, w.idx_d);
                        tj["e_alpha"] =
                            relative_error_series(vec(ta), vec("model_T_alpha_Nmm"), w.idx_a, w.idx_d);
                        tj["e_beta"] =
                            relative_error_series(vec(tb), vec("model_T_beta_Nmm"), w.idx_a, w.idx_d);
                    }
                    trials_j.push_back(tj);
                    per_trial.col("alpha_deg").push_back(avg.alpha_deg);
                    per_trial.col("beta_deg").push_back(avg.beta_deg);
                    per_trial.col("x_a_mm").push_back(w.x_a);
                    per_trial.col("x_d_mm").push_back(w.x_d);
                    per_trial.col("e_x").push_back(tj.value("e_x", std::numeric_limits<double>::quiet_NaN()));
                    per_trial.col("e_alpha").push_back(
                        tj.value("e_alpha", std::numeric_limits<double>::quiet_NaN()));
                    per_trial.col("e_beta").push_back(
                        tj.value("e_beta", std::numeric_limits<double>::quiet_NaN()));
                    per_trial.col("cv_Fx").push_back(tj["cv_fx"].get<double>());
                    per_trial.col("cv_T_alpha").push_back(tj["cv_ta"].get<double>());
                    per_trial.col("cv_T_beta").push_back(tj["cv_tb"].get<double>());
                } catch (const NoContactError&) {
                    ++skipped;
                } catch (const InvalidParameterError&) {
                    ++skipped;  // degenerate normalization
                }
            }
            res["trials"] = trials_j;
            res["skipped"] = skipped;
            per_trial.write_csv(
                (ctx.out / "eval" / ("series_errors_" + source_name + "_f" + num_token(f) + ".csv"))
                    .string());

            json epe = json::array(), egrad = json::array();
            for (int rep = 0; rep < ctx.config.recon.repeats; ++rep) {
                const fs::path mp = ctx.out / "recon" / recon_model_name(source_name, f, rep);
                require_file(mp, "evaluate");
                HhdModel hhd = HhdModel::from_json(read_text_file(mp.string()));
                LandscapeGrid recon = reconstruct_landscape(hhd, axes);
                align_gauge(hhd, recon, truth);
                const FieldError fe = relative_error_field(recon, truth, hhd.x_ratio);
                epe.push_back(fe.e_pe);
                egrad.push_back(fe.e_grad);
            }
            res["e_pe_percent"] = epe;
            res["e_grad_percent"] = egrad;
            summary["results"].push_back(res);
        }
    }
    write_text_file((ctx.out / "eval" / "summary.json").string(), summary.dump(2) + "\n");
}

void stage_report(PipelineContext& ctx) {
    fs::create_directories(ctx.out / "report");
    const fs::path sj = ctx.out / "eval" / "summary.json";
    require_file(sj, "report");
    const json summary = json::parse(read_text_file(sj.string()));
    std::vector<ConfigResult> results;
    for (const auto& res : summary.at("results")) {
        ConfigResult cr;
        cr.source = res.at("source").get<std::string>();
        cr.f_hz = res.at("f_hz").get<double>();
        cr.skipped_trials = res.at("skipped").get<std::size_t>();
        for (const auto& tj : res.at("trials")) {
            if (!tj.contains("e_x")) continue;  // model source carries no series errors
            TrialErrors te;
            te.alpha_deg = tj.at("alpha_deg").get<double>();
            te.beta_deg = tj.at("beta_deg").get<double>();
            te.e_x = tj.at("e_x").get<double>();
            te.e_alpha = tj.at("e_alpha").get<double>();
            te.e_beta = tj.at("e_beta").get<double>();
            te.cv_fx = tj.at("cv_fx").get<double>();
            te.cv_t_alpha = tj.at("cv_ta").get<double>();
            te.cv_t_beta = tj.at("cv_tb").get<double>();
            cr.trials.push_back(te);
        }
        cr.e_pe_percent = res.at("e_pe_percent").get<std::vector<double>>();
        for (const auto& g : res.at("e_grad_percent"))
            if (g.is_number() && std::isfinite(g.get<double>()))
                cr.e_grad_percent.push_back(g.get<double>());
        results.push_back(cr);
    }
    const Report report = report_table(results);
    report.to_table().write_csv((ctx.out / "report" / "report.csv").string());
    write_text_file((ctx.out / "report" / "report.txt").string(), report.to_text());
}

void write_manifest(PipelineContext& ctx, const std::vector<std::pair<std::string, double>>& timings) {
    // Deterministic manifest: config hash, seed, sorted file hashes.
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(ctx.out)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name == "manifest.json" || name == "timings.json") continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    json manifest;
    manifest["config_hash"] = ctx.config.config_hash();
    manifest["master_seed"] = ctx.config.master_seed;
    json files_j = json::object();
    for (const auto& f : files) {
        const std::string rel = fs::relative(f, ctx.out).generic_string();
        files_j[rel] = fnv1a64(read_text_file(f.string()));
    }
    manifest["files"] = std::move(files_j);
    write_text_file((ctx.out / "manifest.json").string(), manifest.dump(2) + "\n");

    json tj;
    for (const auto& [stage, seconds] : timings) tj[stage] = seconds;
    write_text_file((ctx.out / "timings.json").string(), tj.dump(2) + "\n");
}

}  // namespace

void run_pipeline(const RunConfig& config, const std::vector<Stage>& stages, const std::string& out_dir) {
    config.validate();
    PipelineContext ctx;
    ctx.config = config;
    ctx.out = out_dir;
    fs::create_directories(ctx.out);
    write_text_file((ctx.out / "config.resolved.json").string(), config.to_json_text());

    std::vector<std::pair<std::string, double>> timings;
    for (Stage s : stages) {
        const auto t0 = std::chrono::steady_clock::now();
        switch (s) {
            case Stage::model: stage_model(ctx); break;
            case Stage::simulate: stage_simulate(ctx); break;
            case Stage::filter: stage_filter(ctx); break;
            case Stage::reconstruct: stage_reconstruct(ctx); break;
            case Stage::evaluate: stage_evaluate(ctx); break;
            case Stage::report: stage_report(ctx); break;
        }
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        timings.emplace_back(to_string(s), dt.count());
    }
    write_manifest(ctx, timings);
}

void export_plotdata(const std::string& artifact_dir, const ExportOptions& options,
                     const std::string& out_path) {
    const fs::path dir = artifact_dir;
    if (options.kind == "landscape_slice") {
        fs::path grid_path;
        if (options.grid == "model") grid_path = dir / "model" / "landscape_model.csv";
        else if (options.grid == "rigid") grid_path = dir / "model" / "landscape_rigid.csv";
        else if (options.grid == "recon")
            grid_path = dir / "recon" / recon_grid_name(options.source, options.f_hz);
        else throw InvalidParameterError("landscape_slice: unknown grid '" + options.grid + "'");
        require_file(grid_path, "export");
        const LandscapeGrid grid = grid_from_table(DataTable::read_csv(grid_path.string()));
        DataTable out;
        for (const char* c : {"x_mm", "alpha_deg", "beta_deg", "PE_Nmm"}) out.add_column(c);
        for (double x : options.x_mm) {
            const auto& xs = grid.axes.x_mm;
            if (x < xs.front() || x > xs.back())
                throw InvalidParameterError("landscape_slice: x outside the grid");
            std::size_t i1 = 0;
            while (i1 + 1 < xs.size() && xs[i1 + 1] < x) ++i1;
            const std::size_t i2 = std::min(i1 + 1, xs.size() - 1);
            const double w = i2 == i1 ? 0.0 : (x - xs[i1]) / (xs[i2] - xs[i1]);
            for (std::size_t ia = 0; ia < grid.axes.alpha_rad.size(); ++ia)
                for (std::size_t ib = 0; ib < grid.axes.beta_rad.size(); ++ib) {
                    const double pe1 = grid.pe[grid.index(i1, ia, ib)];
                    const double pe2 = grid.pe[grid.index(i2, ia, ib)];
                    out.col("x_mm").push_back(x);
                    out.col("alpha_deg").push_back(rad2deg(grid.axes.alpha_rad[ia]));
                    out.col("beta_deg").push_back(rad2deg(grid.axes.beta_rad[ib]));
                    out.col("PE_Nmm").push_back(pe1 + w * (pe2 - pe1));
                }
        }
        out.write_csv(out_path);
    } else if (options.kind == "force_vs_x") {
        const fs::path p =
            dir / "averaged" / (averaged_basename(options.alpha_deg, options.beta_deg, options.f_hz) + ".csv");
        require_file(p, "export");
        const AveragedTrial avg = AveragedTrial::from_table(DataTable::read_csv(p.string()),
                                                            options.alpha_deg, options.beta_deg,
                                                            options.f_hz);
        DataTable out;
        for (const char* c : {"x_mm", "source_id", "F_x_N", "T_alpha_Nmm", "T_beta_Nmm"}) out.add_column(c);
        const struct {
            double id;
            const char* fx;
            const char* ta;
            const char* tb;
        } sources[3] = {{0, "F_x_N", "T_alpha_Nmm", "T_beta_Nmm"},
                        {1, "N_F_x_N", "N_T_alpha_Nmm", "N_T_beta_Nmm"},
                        {2, "model_F_x_N", "model_T_alpha_Nmm", "model_T_beta_Nmm"}};
        for (const auto& s : sources) {
            const Eigen::VectorXd fx = avg.channel(s.fx), ta = avg.channel(s.ta), tb = avg.channel(s.tb);
            for (std::size_t i = 0; i < avg.x_mm.size(); ++i) {
                if (!avg.valid[i]) continue;
                out.col("x_mm").push_back(avg.x_mm[i]);
                out.col("source_id").push_back(s.id);
                out.col("F_x_N").push_back(fx[static_cast<Eigen::Index>(i)]);
                out.col("T_alpha_Nmm").push_back(ta[static_cast<Eigen::Index>(i)]);
                out.col("T_beta_Nmm").push_back(tb[static_cast<Eigen::Index>(i)]);
            }
        }
        out.write_csv(out_path);
    } else if (options.kind == "error_bars") {
        const fs::path p = dir / "report" / "report.csv";
        require_file(p, "export");
        const DataTable report = DataTable::read_csv(p.string());
        DataTable out;
        for (const char* c : {"source_id", "f_hz", "metric_id", "mean", "std"}) out.add_column(c);
        const char* metrics[] = {"e_x", "e_alpha", "e_beta", "e_PE", "e_grad"};
        for (std::size_t r = 0; r < report.rows(); ++r) {
            for (std::size_t m = 0; m < 5; ++m) {
                out.col("source_id").push_back(report.col("source_id")[r]);
                out.col("f_hz").push_back(report.col("f_hz")[r]);
                out.col("metric_id").push_back(static_cast<double>(m));
                out.col("mean").push_back(report.col(std::string(metrics[m]) + "_mean")[r]);
                out.col("std").push_back(report.col(std::string(metrics[m]) + "_std")[r]);
            }
        }
        out.write_csv(out_path);
    } else {
        throw InvalidParameterError("export: unknown kind '" + options.kind + "'");
    }
}

}  // namespace pel
