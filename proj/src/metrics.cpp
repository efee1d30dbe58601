#include "pel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pel {

TraversalWindow attach_detach(std::span<const double> x, std::span<const double> theta_left_rad,
                              std::span<const double> theta_right_rad, double threshold_rad) {
    const std::size_t n = x.size();
    if (n == 0 || theta_left_rad.size() != n || theta_right_rad.size() != n)
        throw InvalidParameterError("attach_detach: mismatched channel lengths");
    std::size_t idx_a = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (theta_left_rad[i] > threshold_rad && theta_right_rad[i] > threshold_rad) {
            idx_a = i;
            break;
        }
    }
    if (idx_a == n) throw NoContactError("attach_detach: beams never both exceed the attach threshold");

    auto first_argmax = [](std::span<const double> v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > v[best]) best = i;
        return best;  // first attainment: later equal values do not replace
    };
    const std::size_t idx_d = std::min(first_argmax(theta_left_rad), first_argmax(theta_right_rad));
    if (!(x[idx_a] < x[idx_d]))
        throw NoContactError("attach_detach: degenerate traversal window (x_a >= x_d)");
    return TraversalWindow{x[idx_a], x[idx_d], idx_a, idx_d};
}

TraversalWindow attach_detach(const AveragedTrial& trial, double threshold_rad) {
    const Eigen::VectorXd tl = trial.channel("theta_L_deg");
    const Eigen::VectorXd tr = trial.channel("theta_R_deg");
    std::vector<double> x, l, r;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < trial.x_mm.size(); ++i) {
        if (!trial.valid[i]) continue;
        rows.push_back(i);
        x.push_back(trial.x_mm[i]);
        l.push_back(deg2rad(tl[static_cast<Eigen::Index>(i)]));
        r.push_back(deg2rad(tr[static_cast<Eigen::Index>(i)]));
    }
    TraversalWindow w = attach_detach(x, l, r, threshold_rad);
    w.idx_a = rows[w.idx_a];
    w.idx_d = rows[w.idx_d];
    return w;
}

double relative_error_series(std::span<const double> y, std::span<const double> r, std::size_t i0,
                             std::size_t i1) {
    if (y.size() != r.size() || i1 >= y.size() || i0 > i1)
        throw InvalidParameterError("relative_error_series: bad window");
    double r_min = std::numeric_limits<double>::infinity();
    double r_max = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (std::size_t i = i0; i <= i1; ++i) {
        r_min = std::min(r_min, r[i]);
        r_max = std::max(r_max, r[i]);
        acc += std::abs(y[i] - r[i]);
    }
    const double range = r_max - r_min;
    if (!(range > 0.0))
        throw InvalidParameterError("relative_error_series: reference is constant on the window");
    return acc / static_cast<double>(i1 - i0 + 1) / range * 100.0;
}

FieldError relative_error_field(const LandscapeGrid& y, const LandscapeGrid& r, double x_ratio) {
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) > 1e-9) return false;
        return true;
    };
    if (!same(y.axes.x_mm, r.axes.x_mm) || !same(y.axes.alpha_rad, r.axes.alpha_rad) ||
        !same(y.axes.beta_rad, r.axes.beta_rad))
        throw InvalidParameterError("relative_error_field: grids have different axes");

    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < r.pe.size(); ++i)
        if (std::isfinite(y.pe[i]) && std::isfinite(r.pe[i])) nodes.push_back(i);
    if (nodes.empty()) throw InvalidParameterError("relative_error_field: no common finite nodes");

    double y_mean = 0.0, r_mean = 0.0;
    for (std::size_t i : nodes) {
        y_mean += y.pe[i];
        r_mean += r.pe[i];
    }
    y_mean /= static_cast<double>(nodes.size());
    r_mean /= static_cast<double>(nodes.size());
    const double shift = r_mean - y_mean;  // gauge alignment

    double r_min = std::numeric_limits<double>::infinity();
    double r_max = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (std::size_t i : nodes) {
        r_min = std::min(r_min, r.pe[i]);
        r_max = std::max(r_max, r.pe[i]);
        acc += std::abs(y.pe[i] + shift - r.pe[i]);
    }
    if (!(r_max - r_min > 0.0))
        throw InvalidParameterError("relative_error_field: reference grid is constant");

    FieldError e;
    e.e_pe = acc / static_cast<double>(nodes.size()) / (r_max - r_min) * 100.0;
    e.e_grad = std::numeric_limits<double>::quiet_NaN();
    if (y.has_gradients && r.has_gradients) {
        double diff_acc = 0.0;
        double norm_max = 0.0;
        std::size_t used = 0;
        for (std::size_t i : nodes) {
            const Vec3 gy(y.grad[i].x() / x_ratio, y.grad[i].y(), y.grad[i].z());
            const Vec3 gr(r.grad[i].x() / x_ratio, r.grad[i].y(), r.grad[i].z());
            if (!gy.allFinite() || !gr.allFinite()) continue;
            diff_acc += (gy - gr).norm();
            norm_max = std::max(norm_max, gr.norm());
            ++used;
        }
        if (used > 0 && norm_max > 0.0)
            e.e_grad = diff_acc / static_cast<double>(used) / norm_max * 100.0;
    }
    return e;
}

Stats stats_of(std::span<const double> values) {
    Stats s;
    s.n = values.size();
    if (s.n == 0) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
        double var = 0.0;
        for (double v : values) var += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(var / static_cast<double>(s.n - 1));
    }
    return s;
}

Report report_table(std::span<const ConfigResult> results) {
    if (results.empty()) throw InvalidParameterError("report_table: no results");
    Report report;
    for (const auto& cfg : results) {
        ReportRow row;
        row.source = cfg.source;
        row.f_hz = cfg.f_hz;
        row.n_trials = cfg.trials.size();
        std::vector<double> ex, ea, eb, cfx, cta, ctb;
        for (const auto& t : cfg.trials) {
            ex.push_back(t.e_x);
            ea.push_back(t.e_alpha);
            eb.push_back(t.e_beta);
            cfx.push_back(t.cv_fx);
            cta.push_back(t.cv_t_alpha);
            ctb.push_back(t.cv_t_beta);
        }
        row.e_x = stats_of(ex);
        row.e_alpha = stats_of(ea);
        row.e_beta = stats_of(eb);
        row.e_pe = stats_of(cfg.e_pe_percent);
        row.e_grad = stats_of(cfg.e_grad_percent);
        row.cv_fx = stats_of(cfx);
        row.cv_t_alpha = stats_of(cta);
        row.cv_t_beta = stats_of(ctb);
        report.rows.push_back(row);
    }
    return report;
}

DataTable Report::to_table() const {
    DataTable t;
    const char* names[] = {"e_x",  "e_alpha", "e_beta", "e_PE", "e_grad",
                           "cv_Fx", "cv_T_alpha", "cv_T_beta"};
    t.add_column("source_id");  // 0 raw, 1 normal, 2 model, 3 other
    t.add_column("f_hz");
    t.add_column("n_trials");
    for (const char* n : names) {
        t.add_column(std::string(n) + "_mean");
        t.add_column(std::string(n) + "_std");
    }
    auto source_id = [](const std::string& s) {
        if (s == "raw") return 0.0;
        if (s == "normal") return 1.0;
        if (s == "model") return 2.0;
        return 3.0;
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& row : rows) {
        const Stats* stats[] = {&row.e_x,  &row.e_alpha,    &row.e_beta,  &row.e_pe,
                                &row.e_grad, &row.cv_fx, &row.cv_t_alpha, &row.cv_t_beta};
        t.col("source_id").push_back(source_id(row.source));
        t.col("f_hz").push_back(row.f_hz);
        t.col("n_trials").push_back(static_cast<double>(row.n_trials));
        for (std::size_t i = 0; i < 8; ++i) {
            t.col(std::string(names[i]) + "_mean").push_back(stats[i]->defined() ? stats[i]->mean : nan);
            t.col(std::string(names[i]) + "_std").push_back(stats[i]->defined() ? stats[i]->stdev : nan);
        }
    }
    return t;
}

std::string Report::to_text() const {
    std::ostringstream out;
    auto cell = [](const Stats& s) {
        if (!s.defined()) return std::string("      -      ");
        char buf[40];
        std::snprintf(buf, sizeof buf, "%6.2f±%-5.2f", s.mean, s.stdev);
        return std::string(buf);
    };
    char head[160];
    std::snprintf(head, sizeof head, "%-8s %-6s %-4s %-13s %-13s %-13s %-13s %-13s\n", "source",
                  "f_Hz", "n", "e_x[%]", "e_alpha[%]", "e_beta[%]", "e_PE[%]", "e_grad[%]");
    out << head;
    for (const auto& row : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%-8s %-6.2g %-4zu %s %s %s %s %s\n", row.source.c_str(),
                      row.f_hz, row.n_trials, cell(row.e_x).c_str(), cell(row.e_alpha).c_str(),
                      cell(row.e_beta).c_str(), cell(row.e_pe).c_str(), cell(row.e_grad).c_str());
        out << line;
    }
    out << "\nrepeat variability (x-averaged std over range):\n";
    for (const auto& row : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%-8s %-6.2g cv_Fx %s cv_Ta %s cv_Tb %s\n", row.source.c_str(),
                      row.f_hz, cell(row.cv_fx).c_str(), cell(row.cv_t_alpha).c_str(),
                      cell(row.cv_t_beta).c_str());
        out << line;
    }
    return out.str();
}

}  // namespace pel
