#include "pel/config.hpp"

#include "pel/csv.hpp"
#include "pel/reconstruct.hpp"

#include <json.hpp>

#include <cmath>

namespace pel {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw InvalidParameterError("config error at " + path + ": " + why);
}

const json* child(const json& j, const std::string& path, const char* key) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

void read_num(const json& j, const std::string& path, const char* key, double& target) {
    if (const json* c = child(j, path, key)) {
        if (!c->is_number()) fail(path + "/" + key, "expected a number");
        target = c->get<double>();
    }
}

void read_int(const json& j, const std::string& path, const char* key, int& target) {
    if (const json* c = child(j, path, key)) {
        if (!c->is_number_integer()) fail(path + "/" + key, "expected an integer");
        target = c->get<int>();
    }
}

void read_u64(const json& j, const std::string& path, const char* key, std::uint64_t& target) {
    if (const json* c = child(j, path, key)) {
        if (!c->is_number_unsigned() && !c->is_number_integer()) fail(path + "/" + key, "expected an integer");
        target = c->get<std::uint64_t>();
    }
}

void read_bool(const json& j, const std::string& path, const char* key, bool& target) {
    if (const json* c = child(j, path, key)) {
        if (!c->is_boolean()) fail(path + "/" + key, "expected a boolean");
        target = c->get<bool>();
    }
}

void read_num_list(const json& j, const std::string& path, const char* key, std::vector<double>& target) {
    if (const json* c = child(j, path, key)) {
        if (!c->is_array() || c->empty()) fail(path + "/" + key, "expected a nonempty array of numbers");
        target.clear();
        for (const auto& v : *c) {
            if (!v.is_number()) fail(path + "/" + key, "expected numbers");
            target.push_back(v.get<double>());
        }
    }
}

void read_str_list(const json& j, const std::string& path, const char* key, std::vector<std::string>& target) {
    if (const json* c = child(j, path, key)) {
        if (!c->is_array() || c->empty()) fail(path + "/" + key, "expected a nonempty array of strings");
        target.clear();
        for (const auto& v : *c) {
            if (!v.is_string()) fail(path + "/" + key, "expected strings");
            target.push_back(v.get<std::string>());
        }
    }
}

}  // namespace

std::array<Beam, 2> RunConfig::beams() const {
    std::array<Beam, 2> b;
    b[kLeftBeam] = Beam{.hinge_y_mm = 0.5 * beam.gap_mm + 0.5 * beam.width_mm,
                        .width_mm = beam.width_mm,
                        .height_mm = beam.height_mm,
                        .k_nmm_per_rad = beam.left_k_nmm_per_rad,
                        .tau_nmm = beam.left_tau_nmm};
    b[kRightBeam] = Beam{.hinge_y_mm = -0.5 * beam.gap_mm - 0.5 * beam.width_mm,
                         .width_mm = beam.width_mm,
                         .height_mm = beam.height_mm,
                         .k_nmm_per_rad = beam.right_k_nmm_per_rad,
                         .tau_nmm = beam.right_tau_nmm};
    return b;
}

GridAxes RunConfig::eval_axes() const {
    GridAxes axes;
    axes.x_mm = GridAxes::linspace_step(eval.x_min_mm, eval.x_max_mm, eval.x_step_mm);
    for (double a : GridAxes::linspace_step(eval.alpha_min_deg, eval.alpha_max_deg, eval.alpha_step_deg))
        axes.alpha_rad.push_back(deg2rad(a));
    for (double b : GridAxes::linspace_step(eval.beta_min_deg, eval.beta_max_deg, eval.beta_step_deg))
        axes.beta_rad.push_back(deg2rad(b));
    return axes;
}

void RunConfig::validate() const {
    shell.validate();
    body.validate();
    protocol.validate();
    for (const auto& b : beams()) b.validate();
    if (!(beam.gap_mm > 0)) throw InvalidParameterError("config error at /beams/gap_mm: must be > 0");
    if (plan.alpha_deg.empty() || plan.beta_deg.empty() || plan.f_hz.empty() || plan.repetitions < 1)
        throw InvalidParameterError("config error at /sweep: empty plan");
    if (filter.order < 2 || filter.order % 2)
        throw InvalidParameterError("config error at /filter/order: must be even >= 2");
    if (recon.k < 1) throw InvalidParameterError("config error at /reconstruction/k: must be >= 1");
    if (recon.repeats < 1) throw InvalidParameterError("config error at /reconstruction/repeats: must be >= 1");
    if (!(recon.x_ratio > 0)) throw InvalidParameterError("config error at /reconstruction/x_ratio: must be > 0");
    for (const auto& s : recon.sources) field_source_from(s);  // validates names
    eval_axes().validate();
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidParameterError(std::string("config error: invalid JSON: ") + e.what());
    }
    RunConfig c;
    if (const json* s = child(j, "/", "shell")) {
        read_num(*s, "/shell", "semi_axis_x_mm", c.shell.semi_axis_x_mm);
        read_num(*s, "/shell", "semi_axis_y_mm", c.shell.semi_axis_y_mm);
        read_num(*s, "/shell", "semi_axis_z_mm", c.shell.semi_axis_z_mm);
        read_num(*s, "/shell", "flat_half_width_mm", c.shell.flat_half_width_mm);
        read_num(*s, "/shell", "skirt_depth_mm", c.shell.skirt_depth_mm);
        read_num(*s, "/shell", "midline_gap_mm", c.shell.midline_gap_mm);
        read_num(*s, "/shell", "resolution_mm", c.shell.resolution_mm);
        read_int(*s, "/shell", "edge_sections_per_half", c.shell.edge_sections_per_half);
        read_num(*s, "/shell", "cell_normal_budget_deg", c.shell.cell_normal_budget_deg);
        read_num(*s, "/shell", "cell_diameter_budget_mm", c.shell.cell_diameter_budget_mm);
    }
    if (const json* b = child(j, "/", "beams")) {
        read_num(*b, "/beams", "gap_mm", c.beam.gap_mm);
        read_num(*b, "/beams", "width_mm", c.beam.width_mm);
        read_num(*b, "/beams", "height_mm", c.beam.height_mm);
        if (const json* l = child(*b, "/beams", "left")) {
            read_num(*l, "/beams/left", "k_nmm_per_rad", c.beam.left_k_nmm_per_rad);
            read_num(*l, "/beams/left", "tau_nmm", c.beam.left_tau_nmm);
        }
        if (const json* r = child(*b, "/beams", "right")) {
            read_num(*r, "/beams/right", "k_nmm_per_rad", c.beam.right_k_nmm_per_rad);
            read_num(*r, "/beams/right", "tau_nmm", c.beam.right_tau_nmm);
        }
    }
    if (const json* b = child(j, "/", "body")) {
        read_num(*b, "/body", "mass_kg", c.body.mass_kg);
        read_num(*b, "/body", "com_offset_mm", c.body.com_offset_mm);
        read_num(*b, "/body", "gravity_mm_s2", c.body.gravity_mm_s2);
    }
    if (const json* p = child(j, "/", "protocol")) {
        read_num(*p, "/protocol", "speed_mm_s", c.protocol.speed_mm_s);
        read_num(*p, "/protocol", "travel_mm", c.protocol.travel_mm);
        read_num(*p, "/protocol", "start_x_mm", c.protocol.start_x_mm);
        read_num(*p, "/protocol", "y_mm", c.protocol.y_mm);
        read_num(*p, "/protocol", "z_mm", c.protocol.z_mm);
        read_num(*p, "/protocol", "sample_rate_hz", c.protocol.sample_rate_hz);
        read_num(*p, "/protocol", "mu", c.protocol.mu);
        read_bool(*p, "/protocol", "noise", c.protocol.noise);
        read_num(*p, "/protocol", "force_sigma_n", c.protocol.force_sigma_n);
    }
    if (const json* s = child(j, "/", "sweep")) {
        read_num_list(*s, "/sweep", "alpha_deg", c.plan.alpha_deg);
        read_num_list(*s, "/sweep", "beta_deg", c.plan.beta_deg);
        read_num_list(*s, "/sweep", "f_hz", c.plan.f_hz);
        read_int(*s, "/sweep", "repetitions", c.plan.repetitions);
    }
    if (const json* f = child(j, "/", "filter")) read_int(*f, "/filter", "order", c.filter.order);
    if (const json* a = child(j, "/", "average")) {
        read_num(*a, "/average", "x_min_mm", c.average.x_min_mm);
        read_num(*a, "/average", "x_max_mm", c.average.x_max_mm);
        read_num(*a, "/average", "x_step_mm", c.average.x_step_mm);
    }
    if (const json* r = child(j, "/", "reconstruction")) {
        read_int(*r, "/reconstruction", "k", c.recon.k);
        read_str_list(*r, "/reconstruction", "sources", c.recon.sources);
        read_num(*r, "/reconstruction", "sigma_scale", c.recon.sigma_scale);
        read_num(*r, "/reconstruction", "lambda_scale", c.recon.lambda_scale);
        read_num(*r, "/reconstruction", "x_min_mm", c.recon.x_min_mm);
        read_num(*r, "/reconstruction", "x_max_mm", c.recon.x_max_mm);
        read_num(*r, "/reconstruction", "x_ratio", c.recon.x_ratio);
        read_int(*r, "/reconstruction", "kmeans_max_iter", c.recon.kmeans_max_iter);
        read_int(*r, "/reconstruction", "repeats", c.recon.repeats);
    }
    if (const json* e = child(j, "/", "evaluation")) {
        read_num(*e, "/evaluation", "x_min_mm", c.eval.x_min_mm);
        read_num(*e, "/evaluation", "x_max_mm", c.eval.x_max_mm);
        read_num(*e, "/evaluation", "x_step_mm", c.eval.x_step_mm);
        read_num(*e, "/evaluation", "alpha_min_deg", c.eval.alpha_min_deg);
        read_num(*e, "/evaluation", "alpha_max_deg", c.eval.alpha_max_deg);
        read_num(*e, "/evaluation", "alpha_step_deg", c.eval.alpha_step_deg);
        read_num(*e, "/evaluation", "beta_min_deg", c.eval.beta_min_deg);
        read_num(*e, "/evaluation", "beta_max_deg", c.eval.beta_max_deg);
        read_num(*e, "/evaluation", "beta_step_deg", c.eval.beta_step_deg);
    }
    read_u64(j, "/", "seed", c.master_seed);
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_json_text(read_text_file(path)); }

std::string RunConfig::to_json_text() const {
    json j;
    j["shell"] = {{"semi_axis_x_mm", shell.semi_axis_x_mm},
                  {"semi_axis_y_mm", shell.semi_axis_y_mm},
                  {"semi_axis_z_mm", shell.semi_axis_z_mm},
                  {"flat_half_width_mm", shell.flat_half_width_mm},
                  {"skirt_depth_mm", shell.skirt_depth_mm},
                  {"midline_gap_mm", shell.midline_gap_mm},
                  {"resolution_mm", shell.resolution_mm},
                  {"edge_sections_per_half", shell.edge_sections_per_half},
                  {"cell_normal_budget_deg", shell.cell_normal_budget_deg},
                  {"cell_diameter_budget_mm", shell.cell_diameter_budget_mm}};
    j["beams"] = {{"gap_mm", beam.gap_mm},
                  {"width_mm", beam.width_mm},
                  {"height_mm", beam.height_mm},
                  {"left", {{"k_nmm_per_rad", beam.left_k_nmm_per_rad}, {"tau_nmm", beam.left_tau_nmm}}},
                  {"right", {{"k_nmm_per_rad", beam.right_k_nmm_per_rad}, {"tau_nmm", beam.right_tau_nmm}}}};
    j["body"] = {{"mass_kg", body.mass_kg},
                 {"com_offset_mm", body.com_offset_mm},
                 {"gravity_mm_s2", body.gravity_mm_s2}};
    j["protocol"] = {{"speed_mm_s", protocol.speed_mm_s}, {"travel_mm", protocol.travel_mm},
                     {"start_x_mm", protocol.start_x_mm}, {"y_mm", protocol.y_mm},
                     {"z_mm", protocol.z_mm},             {"sample_rate_hz", protocol.sample_rate_hz},
                     {"mu", protocol.mu},                 {"noise", protocol.noise},
                     {"force_sigma_n", protocol.force_sigma_n}};
    j["sweep"] = {{"alpha_deg", plan.alpha_deg},
                  {"beta_deg", plan.beta_deg},
                  {"f_hz", plan.f_hz},
                  {"repetitions", plan.repetitions}};
    j["filter"] = {{"order", filter.order}};
    j["average"] = {{"x_min_mm", average.x_min_mm},
                    {"x_max_mm", average.x_max_mm},
                    {"x_step_mm", average.x_step_mm}};
    j["reconstruction"] = {{"k", recon.k},
                           {"sources", recon.sources},
                           {"sigma_scale", recon.sigma_scale},
                           {"lambda_scale", recon.lambda_scale},
                           {"x_min_mm", recon.x_min_mm},
                           {"x_max_mm", recon.x_max_mm},
                           {"x_ratio", recon.x_ratio},
                           {"kmeans_max_iter", recon.kmeans_max_iter},
                           {"repeats", recon.repeats}};
    j["evaluation"] = {{"x_min_mm", eval.x_min_mm},       {"x_max_mm", eval.x_max_mm},
                       {"x_step_mm", eval.x_step_mm},     {"alpha_min_deg", eval.alpha_min_deg},
                       {"alpha_max_deg", eval.alpha_max_deg}, {"alpha_step_deg", eval.alpha_step_deg},
                       {"beta_min_deg", eval.beta_min_deg},   {"beta_max_deg", eval.beta_max_deg},
                       {"beta_step_deg", eval.beta_step_deg}};
    j["seed"] = master_seed;
    j["assumptions"] = json::array({
        "shield profile (180 x 60 mm), flat middle width, cap width, skirt depth, midline gap, rear crop and mesh resolution are design assumptions, not measured values",
        "touch-cell partition is sized from surface curvature to meet the <25 mm position and <5 deg normal budgets",
        "friction coefficient mu = 0.3 is a plastic-on-acrylic ballpark; acceptance checks using it are sign/trend checks",
        "head oscillation acts kinematically as contact-point velocity about the body y'' axis through the origin",
        "sensor noise model: zero-mean Gaussian force noise per axis plus touch-cell quantization of contact position/normal",
        "reconstruction sigma = sigma_scale/(2*median nearest-center spacing^2); ridge lambda = lambda_scale*max design column norm^2",
        "rigid-geometry baseline searches z upward from the protocol height only",
    });
    return j.dump(2) + "\n";
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(to_json_text()); }

}  // namespace pel
