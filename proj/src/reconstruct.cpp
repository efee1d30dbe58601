#include "pel/reconstruct.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace pel {

const char* to_string(FieldSource s) {
    switch (s) {
        case FieldSource::raw: return "raw";
        case FieldSource::normal: return "normal";
        case FieldSource::model: return "model";
    }
    return "raw";
}

FieldSource field_source_from(const std::string& name) {
    if (name == "raw") return FieldSource::raw;
    if (name == "normal") return FieldSource::normal;
    if (name == "model") return FieldSource::model;
    throw InvalidParameterError("unknown field source '" + name + "'");
}

VectorFieldSamples assemble_samples(std::span<const AveragedTrial> trials, FieldSource source,
                                    const LandscapeModel& model, double x_min_mm, double x_max_mm,
                                    double x_ratio) {
    if (trials.empty()) throw InvalidParameterError("assemble_samples: no averaged trials");
    const char* fx_name = source == FieldSource::raw      ? "F_x_N"
                          : source == FieldSource::normal ? "N_F_x_N"
                                                          : "model_F_x_N";
    const char* ta_name = source == FieldSource::raw      ? "T_alpha_Nmm"
                          : source == FieldSource::normal ? "N_T_alpha_Nmm"
                                                          : "model_T_alpha_Nmm";
    const char* tb_name = source == FieldSource::raw      ? "T_beta_Nmm"
                          : source == FieldSource::normal ? "N_T_beta_Nmm"
                                                          : "model_T_beta_Nmm";
    std::vector<Vec3> bases, vectors;
    for (const auto& trial : trials) {
        const Eigen::VectorXd fx = trial.channel(fx_name);
        const Eigen::VectorXd ta = trial.channel(ta_name);
        const Eigen::VectorXd tb = trial.channel(tb_name);
        const Eigen::VectorXd alpha = trial.channel("alpha_deg");
        const Eigen::VectorXd beta = trial.channel("beta_deg");
        const Eigen::VectorXd ymm = trial.channel("y_mm");
        const Eigen::VectorXd zmm = trial.channel("z_mm");
        for (std::size_t i = 0; i < trial.x_mm.size(); ++i) {
            const double x = trial.x_mm[i];
            if (x < x_min_mm || x > x_max_mm || !trial.valid[i]) continue;
            const auto ii = static_cast<Eigen::Index>(i);
            const double a_rad = deg2rad(alpha[ii]);
            const double b_rad = deg2rad(beta[ii]);
            const Pose pose(x, ymm[ii], zmm[ii], a_rad, b_rad, 0.0);
            const Vector6 fg = model.gravity_generalized_force(pose);
            bases.emplace_back(x_ratio * x, a_rad, b_rad);
            vectors.emplace_back((fx[ii] + fg[0]) / x_ratio, ta[ii] + fg[3], tb[ii] + fg[4]);
        }
    }
    if (bases.empty()) throw InvalidParameterError("assemble_samples: no samples in the x range");
    VectorFieldSamples out;
    out.source = source;
    out.x_ratio = x_ratio;
    out.bases.resize(3, static_cast<Eigen::Index>(bases.size()));
    out.vectors.resize(3, static_cast<Eigen::Index>(bases.size()));
    for (Eigen::Index i = 0; i < out.bases.cols(); ++i) {
        out.bases.col(i) = bases[i];
        out.vectors.col(i) = vectors[i];
    }
    return out;
}

Eigen::Matrix3Xd kmeans_centers(const Eigen::Matrix3Xd& bases, int k, std::uint64_t seed, int max_iter,
                                double shift_tol, double reject_dist, std::string* warning) {
    const Eigen::Index n = bases.cols();
    if (n == 0) throw InvalidParameterError("kmeans_centers: empty bases");
    if (k < 1) throw InvalidParameterError("kmeans_centers: k must be >= 1");

    // Count distinct bases; k cannot exceed them.
    std::set<std::array<double, 3>> distinct;
    for (Eigen::Index i = 0; i < n; ++i) distinct.insert({bases(0, i), bases(1, i), bases(2, i)});
    if (static_cast<std::size_t>(k) > distinct.size()) {
        k = static_cast<int>(distinct.size());
        if (warning) *warning = "k exceeds distinct bases; reduced to " + std::to_string(k);
    }

    std::mt19937_64 rng(seed);
    Eigen::Matrix3Xd centers(3, k);
    // k-means++ seeding.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    {
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        centers.col(0) = bases.col(pick(rng));
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = (bases.col(i) - centers.col(c - 1)).squaredNorm();
                d2[i] = std::min(d2[i], d);
                total += d2[i];
            }
            if (total <= 0.0) {
                centers.col(c) = bases.col(0);
                continue;
            }
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            Eigen::Index chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target <= 0.0) {
                    chosen = i;
                    break;
                }
            }
            centers.col(c) = bases.col(chosen);
        }
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            const auto ii = static_cast<Eigen::Index>(i);
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (int c = 0; c < k; ++c) {
                const double d = (bases.col(ii) - centers.col(c)).squaredNorm();
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            assign[i] = best_c;
        });
        Eigen::Matrix3Xd sums = Eigen::Matrix3Xd::Zero(3, k);
        std::vector<std::size_t> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.col(assign[i]) += bases.col(i);
            ++counts[assign[i]];
        }
        // Re-seed empty clusters at the point farthest from its center.
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            double worst = -1.0;
            Eigen::Index worst_i = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = (bases.col(i) - centers.col(assign[i])).squaredNorm();
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            sums.col(c) = bases.col(worst_i);
            counts[c] = 1;
            assign[worst_i] = c;
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            const Vec3 next = sums.col(c) / static_cast<double>(counts[c]);
            shift = std::max(shift, (next - centers.col(c)).norm());
            centers.col(c) = next;
        }
        if (shift < shift_tol) break;
    }

    // Singularity guard: drop centers that coincide with an input base.
    std::vector<Eigen::Index> keep;
    for (int c = 0; c < k; ++c) {
        double nearest = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i)
            nearest = std::min(nearest, (bases.col(i) - centers.col(c)).norm());
        if (nearest >= reject_dist) keep.push_back(c);
    }
    Eigen::Matrix3Xd kept(3, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) kept.col(static_cast<Eigen::Index>(i)) = centers.col(keep[i]);
    return kept;
}

double default_sigma(const Eigen::Matrix3Xd& centers, double scale) {
    const Eigen::Index k = centers.cols();
    if (k < 2) return scale / 2.0;
    std::vector<double> nearest(k, std::numeric_limits<double>::infinity());
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < k; ++j) {
            if (j == ii) continue;
            nearest[i] = std::min(nearest[i], (centers.col(ii) - centers.col(j)).norm());
        }
    });
    std::nth_element(nearest.begin(), nearest.begin() + k / 2, nearest.end());
    const double median = nearest[k / 2];
    if (!(median > 0.0)) throw InvalidParameterError("default_sigma: duplicate centers");
    return scale / (2.0 * median * median);
}

namespace {

// Fill 3 design-matrix rows for one (sample, center) pair. Column layout:
// [0, k) scalar-potential block, [k, 4k) vector-potential block (3 per center).
inline void fill_block(Eigen::Ref<Eigen::MatrixXd> panel, Eigen::Index row, Eigen::Index k,
                       Eigen::Index center, const Vec3& g) {
    panel(row + 0, center) = -g.x();
    panel(row + 1, center) = -g.y();
    panel(row + 2, center) = -g.z();
    const Eigen::Index c = k + 3 * center;
    // grad phi x e1, e2, e3
    panel(row + 0, c + 0) = 0.0;
    panel(row + 1, c + 0) = g.z();
    panel(row + 2, c + 0) = -g.y();
    panel(row + 0, c + 1) = -g.z();
    panel(row + 1, c + 1) = 0.0;
    panel(row + 2, c + 1) = g.x();
    panel(row + 0, c + 2) = g.y();
    panel(row + 1, c + 2) = -g.x();
    panel(row + 2, c + 2) = 0.0;
}

void fill_panel(const VectorFieldSamples& samples, const Eigen::Matrix3Xd& centers, double sigma,
                Eigen::Index s0, Eigen::Index s1, Eigen::MatrixXd& panel) {
    const Eigen::Index k = centers.cols();
    panel.resize(3 * (s1 - s0), 4 * k);
    parallel_for(static_cast<std::size_t>(s1 - s0), [&](std::size_t local) {
        const Eigen::Index s = s0 + static_cast<Eigen::Index>(local);
        const Vec3 p = samples.bases.col(s);
        const Eigen::Index row = 3 * static_cast<Eigen::Index>(local);
        for (Eigen::Index c = 0; c < k; ++c) {
            const Vec3 d = p - centers.col(c);
            const double phi = std::exp(-sigma * d.squaredNorm());
            const Vec3 g = -2.0 * sigma * phi * d;  // grad phi
            fill_block(panel, row, k, c, g);
        }
    });
}

}  // namespace

HhdModel hhd_fit(const VectorFieldSamples& samples, const Eigen::Matrix3Xd& centers, double sigma,
                 const RidgePolicy& ridge) {
    if (centers.cols() < 1) throw InvalidParameterError("hhd_fit: need at least one center");
    if (!(sigma > 0)) throw InvalidParameterError("hhd_fit: sigma must be > 0");
    const Eigen::Index n = samples.bases.cols();
    if (n == 0) throw InvalidParameterError("hhd_fit: empty samples");
    const Eigen::Index k = centers.cols();
    const Eigen::Index m = 4 * k;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    double y_sq = 0.0;

    const Eigen::Index chunk = std::max<Eigen::Index>(1, (1 << 21) / std::max<Eigen::Index>(1, m));
    Eigen::MatrixXd panel;
    for (Eigen::Index s0 = 0; s0 < n; s0 += chunk) {
        const Eigen::Index s1 = std::min(n, s0 + chunk);
        fill_panel(samples, centers, sigma, s0, s1, panel);
        Eigen::VectorXd y(3 * (s1 - s0));
        for (Eigen::Index s = s0; s < s1; ++s) y.segment(3 * (s - s0), 3) = samples.vectors.col(s);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(panel.transpose());
        rhs.noalias() += panel.transpose() * y;
        y_sq += y.squaredNorm();
    }
    gram = gram.selfadjointView<Eigen::Lower>();

    const double max_col_sq = gram.diagonal().maxCoeff();
    if (!std::isfinite(max_col_sq) || max_col_sq <= 0.0)
        throw std::runtime_error("hhd_fit: degenerate design matrix (max column norm " +
                                 std::to_string(max_col_sq) + ")");
    const double lambda = ridge.absolute > 0.0 ? ridge.absolute : ridge.scale * max_col_sq;
    gram.diagonal().array() += lambda;

    Eigen::LDLT<Eigen::Ref<Eigen::MatrixXd>> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw std::runtime_error("hhd_fit: normal equations not positive definite after ridge "
                                 "(lambda = " + std::to_string(lambda) + ")");
    const Eigen::VectorXd coeff = ldlt.solve(rhs);
    if (!coeff.allFinite()) throw std::runtime_error("hhd_fit: non-finite solution");

    HhdModel model;
    model.centers = centers;
    model.sigma = sigma;
    model.lambda = lambda;
    model.x_ratio = samples.x_ratio;
    model.source = samples.source;
    model.a = coeff.head(k);
    model.b = coeff.tail(3 * k);

    // Training residual by a second pass (avoids cancellation in the
    // quadratic-form shortcut).
    double res_sq = 0.0;
    for (Eigen::Index s0 = 0; s0 < n; s0 += chunk) {
        const Eigen::Index s1 = std::min(n, s0 + chunk);
        fill_panel(samples, centers, sigma, s0, s1, panel);
        Eigen::VectorXd y(3 * (s1 - s0));
        for (Eigen::Index s = s0; s < s1; ++s) y.segment(3 * (s - s0), 3) = samples.vectors.col(s);
        res_sq += (panel * coeff - y).squaredNorm();
    }
    model.residual_rms = std::sqrt(res_sq / static_cast<double>(3 * n));
    return model;
}

HhdModel::Eval HhdModel::eval(const Vec3& point_unified) const {
    Eval out{gauge, Vec3::Zero()};
    for (Eigen::Index c = 0; c < centers.cols(); ++c) {
        const Vec3 d = point_unified - centers.col(c);
        const double phi = std::exp(-sigma * d.squaredNorm());
        out.phi += a[c] * phi;
        out.grad_phi += a[c] * (-2.0 * sigma * phi) * d;
    }
    return out;
}

Vec3 HhdModel::eval_field(const Vec3& point_unified) const {
    Vec3 f = Vec3::Zero();
    for (Eigen::Index c = 0; c < centers.cols(); ++c) {
        const Vec3 d = point_unified - centers.col(c);
        const double phi = std::exp(-sigma * d.squaredNorm());
        const Vec3 g = -2.0 * sigma * phi * d;
        f += -a[c] * g + g.cross(Vec3(b[3 * c], b[3 * c + 1], b[3 * c + 2]));
    }
    return f;
}

std::string HhdModel::to_json() const {
    nlohmann::json j;
    j["schema"] = "hhd-model-v1";
    j["source"] = to_string(source);
    j["seed"] = seed;
    j["x_ratio"] = x_ratio;
    j["sigma"] = sigma;
    j["lambda"] = lambda;
    j["gauge"] = gauge;
    j["residual_rms"] = residual_rms;
    nlohmann::json centers_j = nlohmann::json::array();
    for (Eigen::Index c = 0; c < centers.cols(); ++c)
        centers_j.push_back({centers(0, c), centers(1, c), centers(2, c)});
    j["centers"] = std::move(centers_j);
    j["a"] = std::vector<double>(a.data(), a.data() + a.size());
    j["b"] = std::vector<double>(b.data(), b.data() + b.size());
    return j.dump(1);
}

HhdModel HhdModel::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("schema", "") != "hhd-model-v1")
        throw InvalidParameterError("HhdModel: unexpected schema");
    HhdModel m;
    m.source = field_source_from(j.at("source").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.x_ratio = j.at("x_ratio").get<double>();
    m.sigma = j.at("sigma").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.gauge = j.at("gauge").get<double>();
    m.residual_rms = j.at("residual_rms").get<double>();
    const auto& centers_j = j.at("centers");
    m.centers.resize(3, static_cast<Eigen::Index>(centers_j.size()));
    for (Eigen::Index c = 0; c < m.centers.cols(); ++c)
        for (int r = 0; r < 3; ++r) m.centers(r, c) = centers_j[c][r].get<double>();
    const auto av = j.at("a").get<std::vector<double>>();
    const auto bv = j.at("b").get<std::vector<double>>();
    if (av.size() != static_cast<std::size_t>(m.centers.cols()) || bv.size() != 3 * av.size())
        throw InvalidParameterError("HhdModel: coefficient sizes do not match centers");
    m.a = Eigen::Map<const Eigen::VectorXd>(av.data(), static_cast<Eigen::Index>(av.size()));
    m.b = Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()));
    return m;
}

LandscapeGrid reconstruct_landscape(const HhdModel& model, const GridAxes& axes) {
    axes.validate();
    LandscapeGrid grid;
    grid.axes = axes;
    grid.has_gradients = true;
    grid.pe.assign(axes.size(), 0.0);
    grid.grad.assign(axes.size(), Vec3::Zero());
    const std::size_t n_ab = axes.alpha_rad.size() * axes.beta_rad.size();
    parallel_for(n_ab, [&](std::size_t j) {
        const std::size_t ia = j / axes.beta_rad.size();
        const std::size_t ib = j % axes.beta_rad.size();
        for (std::size_t ix = 0; ix < axes.x_mm.size(); ++ix) {
            const Vec3 p(model.x_ratio * axes.x_mm[ix], axes.alpha_rad[ia], axes.beta_rad[ib]);
            const auto e = model.eval(p);
            const std::size_t idx = grid.index(ix, ia, ib);
            grid.pe[idx] = e.phi;
            grid.grad[idx] = Vec3(e.grad_phi.x() * model.x_ratio, e.grad_phi.y(), e.grad_phi.z());
        }
    });
    return grid;
}

double align_gauge(HhdModel& model, LandscapeGrid& reconstructed, const LandscapeGrid& reference) {
    if (reconstructed.pe.size() != reference.pe.size())
        throw InvalidParameterError("align_gauge: grid size mismatch");
    double sum_rec = 0.0, sum_ref = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < reference.pe.size(); ++i) {
        if (!std::isfinite(reference.pe[i]) || !std::isfinite(reconstructed.pe[i])) continue;
        sum_rec += reconstructed.pe[i];
        sum_ref += reference.pe[i];
        ++count;
    }
    if (count == 0) throw InvalidParameterError("align_gauge: no common finite nodes");
    const double shift = (sum_ref - sum_rec) / static_cast<double>(count);
    model.gauge += shift;
    for (double& v : reconstructed.pe) v += shift;
    return shift;
}

}  // namespace pel
