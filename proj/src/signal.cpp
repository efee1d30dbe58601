#include "pel/signal.hpp"

#include "pel/common.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace pel {

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
    if (order < 2 || order % 2 != 0) throw InvalidParameterError("butterworth_lowpass: order must be even >= 2");
    if (!(cutoff_hz > 0) || !(fs_hz > 0) || cutoff_hz >= 0.5 * fs_hz)
        throw InvalidParameterError("butterworth_lowpass: need 0 < cutoff < fs/2");
    const double warped = std::tan(kPi * cutoff_hz / fs_hz);
    std::vector<Biquad> sections;
    sections.reserve(order / 2);
    for (int k = 0; k < order / 2; ++k) {
        // Conjugate analog prototype pole pair on the unit circle, left half plane.
        const double phi = kPi * (2.0 * k + 1.0) / (2.0 * order) + 0.5 * kPi;
        const std::complex<double> p = warped * std::complex<double>(std::cos(phi), std::sin(phi));
        const std::complex<double> zp = (1.0 + p) / (1.0 - p);  // bilinear transform
        Biquad s;
        s.a1 = -2.0 * zp.real();
        s.a2 = std::norm(zp);
        const double g = (1.0 + s.a1 + s.a2) / 4.0;  // zeros at z = -1, DC gain 1
        s.b0 = g;
        s.b1 = 2.0 * g;
        s.b2 = g;
        sections.push_back(s);
    }
    return sections;
}

namespace {

// Direct form II transposed with initial state set to the step steady-state
// scaled by the first input sample (filtfilt transient suppression).
void biquad_filter_inplace(const Biquad& s, std::vector<double>& x) {
    const double zi1 = (s.b1 - s.a1) + (s.b2 - s.a2);
    const double zi2 = s.b2 - s.a2;
    double s1 = zi1 * x.front();
    double s2 = zi2 * x.front();
    for (double& v : x) {
        const double u = v;
        const double y = s.b0 * u + s1;
        s1 = s.b1 * u - s.a1 * y + s2;
        s2 = s.b2 * u - s.a2 * y;
        v = y;
    }
}

}  // namespace

std::vector<double> zero_phase_filter(std::span<const double> series, int order, double cutoff_hz,
                                      double fs_hz) {
    const auto sections = butterworth_lowpass(order, cutoff_hz, fs_hz);
    const std::size_t n = series.size();
    const std::size_t pad = static_cast<std::size_t>(3 * order);
    if (n <= pad)
        throw InvalidParameterError("zero_phase_filter: series length must exceed 3x filter order");

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * series[0] - series[pad - i]);
    ext.insert(ext.end(), series.begin(), series.end());
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * series[n - 1] - series[n - 2 - i]);

    for (const auto& s : sections) biquad_filter_inplace(s, ext);
    std::reverse(ext.begin(), ext.end());
    for (const auto& s : sections) biquad_filter_inplace(s, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

double cutoff_for_head_frequency(double f_hz) {
    if (f_hz < 0) throw InvalidParameterError("cutoff_for_head_frequency: f must be >= 0");
    return std::max(1.5, 3.0 * f_hz);
}

int AveragedTrial::find(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i] == name) return static_cast<int>(i);
    return -1;
}

Eigen::VectorXd AveragedTrial::channel(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw InvalidParameterError("AveragedTrial: no channel '" + name + "'");
    return mean.col(i);
}

DataTable AveragedTrial::to_table() const {
    DataTable t;
    t.add_column("x_mm", x_mm);
    const std::size_t n = x_mm.size();
    for (std::size_t c = 0; c < channels.size(); ++c) {
        std::vector<double> m(n), s(n);
        for (std::size_t r = 0; r < n; ++r) {
            m[r] = mean(r, c);
            s[r] = stdev(r, c);
        }
        t.add_column(channels[c], std::move(m));
        t.add_column(channels[c] + "_std", std::move(s));
    }
    std::vector<double> v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = valid[r];
    t.add_column("valid", std::move(v));
    return t;
}

AveragedTrial AveragedTrial::from_table(const DataTable& t, double alpha_deg, double beta_deg, double f_hz) {
    AveragedTrial a;
    a.alpha_deg = alpha_deg;
    a.beta_deg = beta_deg;
    a.f_hz = f_hz;
    a.x_mm = t.col("x_mm");
    const std::size_t n = a.x_mm.size();
    for (const auto& name : t.columns) {
        if (name == "x_mm" || name == "valid") continue;
        if (name.size() > 4 && name.ends_with("_std")) continue;
        a.channels.push_back(name);
    }
    a.mean.resize(n, a.channels.size());
    a.stdev.resize(n, a.channels.size());
    for (std::size_t c = 0; c < a.channels.size(); ++c) {
        const auto& m = t.col(a.channels[c]);
        const auto& s = t.col(a.channels[c] + "_std");
        for (std::size_t r = 0; r < n; ++r) {
            a.mean(r, c) = m[r];
            a.stdev(r, c) = s[r];
        }
    }
    a.valid.resize(n);
    const auto& v = t.col("valid");
    for (std::size_t r = 0; r < n; ++r) a.valid[r] = v[r] != 0.0;
    return a;
}

std::vector<double> ResampleSpec::grid() const {
    if (!(x_step_mm > 0) || x_max_mm < x_min_mm) throw InvalidParameterError("ResampleSpec: bad grid");
    std::vector<double> g;
    const int n = static_cast<int>(std::round((x_max_mm - x_min_mm) / x_step_mm));
    g.reserve(n + 1);
    for (int i = 0; i <= n; ++i) g.push_back(x_min_mm + i * x_step_mm);
    return g;
}

AveragedTrial resample_average(std::span<const DataTable> trials, const ResampleSpec& spec,
                               double alpha_deg, double beta_deg, double f_hz) {
    if (trials.empty()) throw InvalidParameterError("resample_average: no trials");
    AveragedTrial out;
    out.alpha_deg = alpha_deg;
    out.beta_deg = beta_deg;
    out.f_hz = f_hz;
    out.x_mm = spec.grid();
    for (const auto& name : trials.front().columns)
        if (name != spec.x_column) out.channels.push_back(name);
    for (const auto& t : trials) {
        if (t.columns != trials.front().columns)
            throw InvalidParameterError("resample_average: trials have mismatched schemas");
        if (t.rows() < 2) throw InvalidParameterError("resample_average: trial too short");
    }

    const std::size_t n = out.x_mm.size();
    const std::size_t nc = out.channels.size();
    const std::size_t nt = trials.size();
    out.mean = Eigen::MatrixXd::Zero(n, nc);
    out.stdev = Eigen::MatrixXd::Zero(n, nc);
    out.valid.assign(n, 1);

    // values[trial] holds the interpolated channel matrix of one trial.
    std::vector<Eigen::MatrixXd> values(nt, Eigen::MatrixXd::Zero(n, nc));
    for (std::size_t ti = 0; ti < nt; ++ti) {
        const auto& t = trials[ti];
        const auto& x = t.col(spec.x_column);
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1]))
                throw InvalidParameterError("resample_average: trial x must be strictly increasing");
        std::size_t seg = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const double xg = out.x_mm[r];
            if (xg < x.front() || xg > x.back()) {
                out.valid[r] = 0;
                continue;
            }
            while (seg + 2 < x.size() && x[seg + 1] < xg) ++seg;
            const double w = (xg - x[seg]) / (x[seg + 1] - x[seg]);
            for (std::size_t c = 0; c < nc; ++c) {
                const auto& ch = t.col(out.channels[c]);
                values[ti](r, c) = ch[seg] + w * (ch[seg + 1] - ch[seg]);
            }
        }
    }

    for (std::size_t r = 0; r < n; ++r) {
        if (!out.valid[r]) continue;
        for (std::size_t c = 0; c < nc; ++c) {
            double m = 0.0;
            for (std::size_t ti = 0; ti < nt; ++ti) m += values[ti](r, c);
            m /= static_cast<double>(nt);
            double var = 0.0;
            for (std::size_t ti = 0; ti < nt; ++ti) {
                const double d = values[ti](r, c) - m;
                var += d * d;
            }
            out.mean(r, c) = m;
            out.stdev(r, c) = nt > 1 ? std::sqrt(var / static_cast<double>(nt - 1)) : 0.0;
        }
    }
    return out;
}

}  // namespace pel
