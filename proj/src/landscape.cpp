#include "pel/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pel {

void Beam::validate() const {
    if (!(width_mm > 0) || !(height_mm > 0)) throw InvalidParameterError("beam plate dimensions must be > 0");
    if (!(k_nmm_per_rad > 0)) throw InvalidParameterError("beam.k must be > 0");
    if (!(tau_nmm >= 0)) throw InvalidParameterError("beam.tau must be >= 0");
}

std::array<Beam, 2> default_beams(double gap_mm) {
    std::array<Beam, 2> beams;
    beams[kLeftBeam] = Beam{.hinge_y_mm = 0.5 * gap_mm + 15.0, .k_nmm_per_rad = 285.0, .tau_nmm = 91.0};
    beams[kRightBeam] = Beam{.hinge_y_mm = -0.5 * gap_mm - 15.0, .k_nmm_per_rad = 324.0, .tau_nmm = 77.0};
    return beams;
}

OrientedShell::OrientedShell(const ShellMesh& mesh, const Pose& pose, std::span<const Beam> beams)
    : mesh_(&mesh), rotation_(pose_rotation(pose)), y_offset_(pose.y), z_offset_(pose.z),
      beams_(beams.begin(), beams.end()) {
    for (const auto& b : beams_) b.validate();
    candidates_.resize(beams_.size());
    for (int i = 0; i < static_cast<int>(mesh.vertices.size()); ++i) {
        if (i < static_cast<int>(mesh.vertex_triangles.size()) && mesh.vertex_triangles[i].empty())
            continue;  // cropped away
        const Vec3 q = rotation_ * mesh.vertices[i];
        const double y = q.y() + y_offset_;
        const double z = q.z() + z_offset_;
        for (std::size_t bi = 0; bi < beams_.size(); ++bi) {
            if (y >= beams_[bi].y_lo() && y <= beams_[bi].y_hi())
                candidates_[bi].push_back(Candidate{q.x(), z, i});
        }
    }
}

double OrientedShell::clearance(int beam_index, double x, double theta) const {
    const auto& beam = beams_.at(beam_index);
    const double st = std::sin(theta), ct = std::cos(theta);
    double c = std::numeric_limits<double>::infinity();
    for (const auto& cand : candidates_[beam_index]) {
        const double px = cand.x_off + x;
        if (px <= 0.0) continue;  // behind the hinge plane, unreachable by a forward-only plate
        if (px * px + cand.z * cand.z > beam.height_mm * beam.height_mm) continue;
        c = std::min(c, cand.z * st - px * ct);
    }
    return c;
}

DeflectionResult OrientedShell::solve(int beam_index, double x) const {
    DeflectionResult r;
    const auto& beam = beams_.at(beam_index);
    if (clearance(beam_index, x, 0.0) < 0.0) {
        double lo = 0.0;
        double hi = kMaxDeflectionRad;
        if (clearance(beam_index, x, hi) < 0.0)
            throw InfeasiblePoseError("beam_deflection: shell penetrates the plate even at the 89 deg cap");
        while (hi - lo > kDeflectionTolRad) {
            const double mid = 0.5 * (lo + hi);
            (clearance(beam_index, x, mid) < 0.0 ? lo : hi) = mid;
        }
        // The clearance minimizer at the upper bracket is the binding vertex;
        // its required angle is the exact root of its (z sin - x cos) term.
        const double st = std::sin(hi), ct = std::cos(hi);
        double best = std::numeric_limits<double>::infinity();
        const Candidate* binding = nullptr;
        for (const auto& cand : candidates_[beam_index]) {
            const double px = cand.x_off + x;
            if (px <= 0.0) continue;
            if (px * px + cand.z * cand.z > beam.height_mm * beam.height_mm) continue;
            const double c = cand.z * st - px * ct;
            if (c < best) {
                best = c;
                binding = &cand;
            }
        }
        if (binding != nullptr) {
            const double px = binding->x_off + x;
            r.contact = true;
            r.theta_rad = std::atan2(px, binding->z);
            r.vertex = binding->vertex;
            r.point_body = mesh_->vertices[binding->vertex];
            r.point_lab = Vec3(px, (rotation_ * r.point_body).y() + y_offset_, binding->z);
            r.radius_mm = std::hypot(px, binding->z);
            r.moment_arm_mm = r.radius_mm;
            r.force_dir_lab = Vec3(-std::cos(r.theta_rad), 0.0, std::sin(r.theta_rad));
            r.regime = ContactRegime::plate_face;
            r.hit = surface_query_vertex(*mesh_, binding->vertex);
        }
    }
    // Refine on the analytic cap when the mesh carries its generating
    // surface: vertex sampling localizes tangency- and edge-sliding contact
    // only to mesh resolution, which is too coarse for the torque arm, for
    // smooth x/alpha/beta derivatives of theta, and for contact onset.
    if (mesh_->vertex_uv.size() == mesh_->vertices.size() && mesh_->grid_du_rad > 0)
        refine_contact(beam_index, x, r);
    return r;
}

void OrientedShell::refine_contact(int beam_index, double x, DeflectionResult& r) const {
    const auto& beam = beams_[beam_index];
    const auto& sp = mesh_->params;
    const double a = sp.semi_axis_x_mm, c = sp.semi_axis_z_mm;
    const double yf = sp.flat_half_width_mm, bc = sp.cap_half_width_mm();
    const double y_half = sp.semi_axis_y_mm;
    const double skirt_z = -sp.skirt_depth_mm;
    const double half_gap = 0.5 * sp.midline_gap_mm;
    const Vec3 t_off(x, y_offset_, z_offset_);
    const double plate_h = beam.height_mm;
    const double max_ext = std::max({a, y_half, c});

    // Quick rejects: body entirely behind the hinge plane or out of reach.
    if (t_off.x() + max_ext <= 0.0 || std::hypot(t_off.x(), t_off.z()) - max_ext > plate_h) {
        r = DeflectionResult{};
        return;
    }

    auto lab_of = [&](const Vec3& p) { return Vec3(rotation_ * p + t_off); };
    auto feasible = [&](const Vec3& p, const Vec3& q) {
        if (p.x() < -1e-9) return false;
        if (p.z() < skirt_z - 1e-9) return false;
        if (std::abs(p.y()) < half_gap - 1e-9) return false;
        if (q.y() < beam.y_lo() - 1e-9 || q.y() > beam.y_hi() + 1e-9) return false;
        if (q.x() <= 0.0) return false;
        if (q.x() * q.x() + q.z() * q.z() > plate_h * plate_h + 1e-6) return false;
        return true;
    };

    struct Best {
        double phi = -1.0;
        Vec3 p = Vec3::Zero();  // body frame
        Vec3 q = Vec3::Zero();  // lab frame
    } best;
    auto consider = [&](const Vec3& p, const Vec3& q) {
        if (!feasible(p, q)) return;
        const double phi = std::atan2(q.x(), q.z());
        if (phi > best.phi) best = {phi, p, q};
    };

    // (1) Unconstrained support tangency toward the plate normal. The shield
    // support in a body direction n is sqrt((a n1)^2+(cap n2)^2+(c n3)^2) +
    // flat*|n2|; the face-contact point is unique unless n2 ~ 0 (then the
    // tangency segment runs laterally and the slab-edge curves carry it).
    auto support = [&](double th) {
        const Vec3 nb = rotation_.transpose() * Vec3(std::cos(th), 0.0, -std::sin(th));
        const Vec3 core(a * nb.x(), bc * nb.y(), c * nb.z());
        return core.norm() + yf * std::abs(nb.y()) + t_off.dot(Vec3(std::cos(th), 0.0, -std::sin(th)));
    };
    if (support(0.0) <= 0.0) {
        r = DeflectionResult{};
        return;
    }
    {
        double lo = 0.0, hi = 0.5 * kPi;
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (lo + hi);
            (support(mid) > 0.0 ? lo : hi) = mid;
        }
        const double th = 0.5 * (lo + hi);
        const Vec3 nb = rotation_.transpose() * Vec3(std::cos(th), 0.0, -std::sin(th));
        if (std::abs(nb.y()) > 1e-9) {
            const Vec3 core(a * a * nb.x(), bc * bc * nb.y(), c * c * nb.z());
            const double h_core = Vec3(a * nb.x(), bc * nb.y(), c * nb.z()).norm();
            Vec3 p = core / h_core;
            p.y() += (nb.y() > 0 ? yf : -yf);
            consider(p, lab_of(p));
        }
    }

    // Dense-sample-plus-bracket maximizer for a boundary curve; the sampler
    // returns the body point for a parameter or false outside the piece.
    auto curve_max = [&](double t_lo, double t_hi, bool periodic, auto&& at) {
        const int n0 = 96;
        double best_t = 0.0, best_phi = -1.0;
        Vec3 p;
        for (int i = 0; i < n0; ++i) {
            const double t = t_lo + (t_hi - t_lo) * (periodic ? i / double(n0) : i / double(n0 - 1));
            if (!at(t, p)) continue;
            const Vec3 q = lab_of(p);
            if (!feasible(p, q)) continue;
            const double phi = std::atan2(q.x(), q.z());
            if (phi > best_phi) {
                best_phi = phi;
                best_t = t;
            }
        }
        if (best_phi < 0.0) return;
        // A local bracket search can lift the sampled maximum only by the
        // sample-spacing correction; skip when hopelessly behind.
        if (best_phi < best.phi - 0.05) return;
        double width = (t_hi - t_lo) / n0;
        for (int level = 0; level < 24; ++level) {
            for (int i = -4; i <= 4; ++i) {
                double t = best_t + width * i / 4.0;
                if (periodic) {
                    if (t < t_lo) t += t_hi - t_lo;
                    if (t > t_hi) t -= t_hi - t_lo;
                } else {
                    t = std::clamp(t, t_lo, t_hi);
                }
                if (!at(t, p)) continue;
                const Vec3 q = lab_of(p);
                if (!feasible(p, q)) continue;
                const double phi = std::atan2(q.x(), q.z());
                if (phi > best_phi) {
                    best_phi = phi;
                    best_t = t;
                }
            }
            width /= 3.0;
        }
        if (at(best_t, p)) consider(p, lab_of(p));
    };

    // Lab-y interval reachable by body points with y in [py_lo, py_hi] and
    // free (x, z); used to skip curves that cannot enter the beam slab.
    const double qy_xz_span = std::abs(rotation_(1, 0)) * a + std::abs(rotation_(1, 2)) * c;
    auto slab_reachable = [&](double py_lo, double py_hi) {
        const double r11_lo = std::min(rotation_(1, 1) * py_lo, rotation_(1, 1) * py_hi);
        const double r11_hi = std::max(rotation_(1, 1) * py_lo, rotation_(1, 1) * py_hi);
        const double lo = t_off.y() + r11_lo - qy_xz_span;
        const double hi = t_off.y() + r11_hi + qy_xz_span;
        return hi >= beam.y_lo() && lo <= beam.y_hi();
    };

    // Plane cuts n_b . p = e: on the flat piece a v-parametrized curve (or,
    // for laterally blind planes, y-segments at the profile roots) and a
    // sphere circle on each cap.
    auto plane_curves = [&](const Vec3& n_b, double e) {
        if (yf > 0.0) {
            if (std::abs(n_b.y()) > 1e-9) {
                const double y_span = (std::abs(n_b.x()) * a + std::abs(n_b.z()) * c) / std::abs(n_b.y());
                const double cy = e / n_b.y();
                if (slab_reachable(std::max(-yf, cy - y_span), std::min(yf, cy + y_span))) {
                    curve_max(-0.5 * kPi, 0.5 * kPi, false, [&](double v, Vec3& p) {
                        const double xw = a * std::cos(v), zw = c * std::sin(v);
                        const double y = (e - n_b.x() * xw - n_b.z() * zw) / n_b.y();
                        if (std::abs(y) > yf + 1e-12) return false;
                        p = Vec3(xw, y, zw);
                        return true;
                    });
                }
            } else if (slab_reachable(-yf, yf)) {
                // Profile roots of n1 a cos v + n3 c sin v = e, each a lateral
                // segment across the flat piece (e.g. the skirt rim and the
                // rear top edge).
                const double amp = std::hypot(n_b.x() * a, n_b.z() * c);
                if (amp > 1e-12 && std::abs(e) <= amp) {
                    const double base = std::atan2(n_b.z() * c, n_b.x() * a);
                    const double off = std::acos(std::clamp(e / amp, -1.0, 1.0));
                    for (double v : {base + off, base - off}) {
                        if (v < -0.5 * kPi - 1e-12 || v > 0.5 * kPi + 1e-12) continue;
                        const double xw = a * std::cos(v), zw = c * std::sin(v);
                        curve_max(-yf, yf, false, [&](double y, Vec3& p) {
                            p = Vec3(xw, y, zw);
                            return true;
                        });
                    }
                }
            }
        }
        for (double side : {1.0, -1.0}) {
            if (bc <= 0.0) break;
            if (!slab_reachable(side > 0 ? yf : -y_half, side > 0 ? y_half : -yf)) continue;
            const Vec3 w(a * n_b.x(), bc * n_b.y(), c * n_b.z());
            const double wn = w.norm();
            const double dd = e - n_b.y() * side * yf;
            if (wn < 1e-14 || std::abs(dd) > wn) continue;
            const Vec3 w_hat = w / wn;
            const Vec3 center = (dd / wn) * w_hat;
            const double rho = std::sqrt(std::max(0.0, 1.0 - (dd / wn) * (dd / wn)));
            Vec3 e1 = std::abs(w_hat.z()) < 0.9 ? w_hat.cross(Vec3::UnitZ()) : w_hat.cross(Vec3::UnitX());
            e1.normalize();
            const Vec3 e2 = w_hat.cross(e1);
            curve_max(0.0, 2.0 * kPi, true, [&](double psi, Vec3& p) {
                const Vec3 s = center + rho * (std::cos(psi) * e1 + std::sin(psi) * e2);
                if (side * s.y() < -1e-12) return false;  // wrong cap side
                p = Vec3(a * s.x(), side * yf + bc * s.y(), c * s.z());
                return true;
            });
        }
    };
    const Vec3 slab_n = rotation_.transpose() * Vec3::UnitY();
    plane_curves(slab_n, beam.y_lo() - t_off.y());
    plane_curves(slab_n, beam.y_hi() - t_off.y());
    plane_curves(Vec3::UnitZ(), skirt_z);   // skirt rim (sharp front edge)
    plane_curves(Vec3::UnitX(), 0.0);       // rear crop at the widest cross-section
    plane_curves(Vec3::UnitY(), half_gap);  // midline gap edges
    plane_curves(Vec3::UnitY(), -half_gap);

    // (3) Beam-tip reach: every point of the tip line at polar angle omega has
    // required angle omega; find the largest omega whose line still meets the
    // kept surface inside the slab.
    {
        const Vec3 d_hat = rotation_.transpose() * Vec3::UnitY();
        auto tip_hit = [&](double omega, Vec3* p_out, Vec3* q_out) {
            const Vec3 l0(plate_h * std::sin(omega), 0.0, plate_h * std::cos(omega));
            const Vec3 p0 = rotation_.transpose() * (l0 - t_off);
            // flat piece then each cap; all are quadratics in the line parameter
            for (int piece = 0; piece < 3; ++piece) {
                const double side = piece == 1 ? 1.0 : -1.0;
                double qa, qb, qc;
                if (piece == 0) {
                    qa = (d_hat.x() / a) * (d_hat.x() / a) + (d_hat.z() / c) * (d_hat.z() / c);
                    qb = 2.0 * (p0.x() * d_hat.x() / (a * a) + p0.z() * d_hat.z() / (c * c));
                    qc = (p0.x() / a) * (p0.x() / a) + (p0.z() / c) * (p0.z() / c) - 1.0;
                } else {
                    if (bc <= 0.0) continue;
                    const Vec3 g0((p0.x()) / a, (p0.y() - side * yf) / bc, (p0.z()) / c);
                    const Vec3 g1(d_hat.x() / a, d_hat.y() / bc, d_hat.z() / c);
                    qa = g1.squaredNorm();
                    qb = 2.0 * g0.dot(g1);
                    qc = g0.squaredNorm() - 1.0;
                }
                if (qa < 1e-16) continue;
                const double disc = qb * qb - 4.0 * qa * qc;
                if (disc < 0.0) continue;
                const double sq = std::sqrt(disc);
                for (double tt : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
                    const Vec3 p = p0 + tt * d_hat;
                    if (piece == 0 && std::abs(p.y()) > yf + 1e-12) continue;
                    if (piece != 0 && side * (p.y() - side * yf) < -1e-12) continue;
                    const Vec3 q = l0 + tt * Vec3::UnitY();
                    if (!feasible(p, q)) continue;
                    if (p_out) *p_out = p;
                    if (q_out) *q_out = q;
                    return true;
                }
            }
            return false;
        };
        const int n0 = 96;
        int best_i = -1;
        for (int i = 0; i < n0; ++i)
            if (tip_hit(0.5 * kPi * i / (n0 - 1), nullptr, nullptr)) best_i = i;
        if (best_i >= 0) {
            double lo = 0.5 * kPi * best_i / (n0 - 1);
            double hi = std::min(0.5 * kPi, lo + 0.5 * kPi / (n0 - 1));
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (tip_hit(mid, nullptr, nullptr) ? lo : hi) = mid;
            }
            Vec3 p, q;
            if (tip_hit(lo, &p, &q)) consider(p, q);
        }
    }

    if (best.phi < 0.0) {
        r = DeflectionResult{};
        return;
    }
    if (best.phi > kMaxDeflectionRad)
        throw InfeasiblePoseError("beam_deflection: refined contact exceeds the 89 deg cap");

    // Degenerate line contact: when roll (and yaw) vanish, flat-piece points
    // share (q_x, q_z) for every y, so the maximizer's lateral position is
    // arbitrary. Center it on the feasible segment (uniform line-load center
    // of pressure); this is face contact, not edge sliding.
    if (std::abs(rotation_(0, 1)) + std::abs(rotation_(2, 1)) < 1e-12 &&
        std::abs(best.p.y()) < yf - 1e-9) {
        const double lo = std::max(-yf, beam.y_lo() - t_off.y());
        const double hi = std::min(yf, beam.y_hi() - t_off.y());
        if (hi > lo) {
            best.p.y() = 0.5 * (lo + hi);
            best.q = lab_of(best.p);
        }
    }

    r.contact = true;
    r.theta_rad = best.phi;
    r.point_body = best.p;
    r.point_lab = best.q;
    r.radius_mm = std::hypot(best.q.x(), best.q.z());
    const double u_star = std::asin(std::clamp(best.p.y() / y_half, -1.0, 1.0));
    const double v_star = std::atan2(best.p.z() / c, best.p.x() / a);
    r.vertex = mesh_->nearest_vertex(u_star, v_star);
    r.hit = surface_query_vertex(*mesh_, r.vertex);

    // Transmitted force direction from the active feature pair. Edge-sliding
    // and tip contact push along the shell normal; a sharp shell edge on the
    // plate face pushes along the plate normal; edge-on-edge is perpendicular
    // to both tangents. The direction is continuous across regime switches.
    const bool on_rim = best.p.z() <= skirt_z + 1e-6;
    const bool on_xcrop = best.p.x() <= 1e-6;
    const bool on_midline = std::abs(best.p.y()) <= half_gap + 1e-6;
    const bool shell_sharp = on_rim || on_xcrop || on_midline;
    const bool beam_side = best.q.y() <= beam.y_lo() + 1e-6 || best.q.y() >= beam.y_hi() - 1e-6;
    const bool beam_tip = r.radius_mm >= plate_h - 1e-5;
    const Vec3 n_shell_lab = rotation_ * mesh_->surface_normal_at(best.p);
    if (beam_side || beam_tip) {
        r.regime = beam_tip ? ContactRegime::beam_tip : ContactRegime::beam_edge;
        Vec3 dir = -n_shell_lab;
        if (shell_sharp) {
            const Vec3 n_plane = on_rim ? Vec3::UnitZ() : (on_xcrop ? Vec3::UnitX() : Vec3::UnitY());
            const Vec3 t_shell = rotation_ * (rotation_.transpose() * n_shell_lab).cross(n_plane);
            const Vec3 t_beam =
                beam_tip ? Vec3(0.0, 1.0, 0.0) : Vec3(std::sin(best.phi), 0.0, std::cos(best.phi));
            const Vec3 cr = t_shell.cross(t_beam);
            if (cr.norm() > 1e-9) dir = cr.normalized();
        }
        if (dir.dot(n_shell_lab) > 0.0) dir = -dir;
        r.force_dir_lab = dir;
    } else {
        r.regime = ContactRegime::plate_face;
        r.force_dir_lab = Vec3(-std::cos(best.phi), 0.0, std::sin(best.phi));
    }
    r.moment_arm_mm = std::abs(best.q.z() * r.force_dir_lab.x() - best.q.x() * r.force_dir_lab.z());
}

DeflectionResult beam_deflection(const Pose& pose, const ShellMesh& mesh, const Beam& beam) {
    const OrientedShell shell(mesh, pose, std::span<const Beam>(&beam, 1));
    return shell.solve(0, pose.x);
}

LandscapeModel::LandscapeModel(std::shared_ptr<const ShellMesh> mesh, std::array<Beam, 2> beams,
                               BodyParams body, double reference_z_mm)
    : mesh_(std::move(mesh)), beams_(beams), body_(body), reference_z_(reference_z_mm) {
    body_.validate();
    for (const auto& b : beams_) b.validate();
    if (!mesh_ || mesh_->triangles.empty()) throw InvalidParameterError("LandscapeModel: empty mesh");
}

double LandscapeModel::gravity_pe(const Pose& pose) const {
    const double w = body_.weight_newton();
    const double h = body_.com_offset_mm;
    return w * ((pose.z - h * std::cos(pose.alpha) * std::cos(pose.beta)) - (reference_z_ - h));
}

PoseEnergy LandscapeModel::evaluate(const Pose& pose) const {
    const OrientedShell shell(*mesh_, pose, beams_);
    PoseEnergy e;
    e.pe_gravity = gravity_pe(pose);
    e.pe = e.pe_gravity;
    for (int bi = 0; bi < 2; ++bi) {
        e.beam[bi] = shell.solve(bi, pose.x);
        e.pe_beam[bi] = beams_[bi].elastic_energy(e.beam[bi].theta_rad);
        e.pe += e.pe_beam[bi];
    }
    return e;
}

GradientResult LandscapeModel::gradient_central_diff(const Pose& pose, double step) const {
    GradientResult g;
    auto perturbed = [&](int axis, double s) {
        Pose p = pose;
        switch (axis) {
            case 0: p.x += s; break;
            case 1: p.y += s; break;
            case 2: p.z += s; break;
            case 3: p.alpha += s; break;
            case 4: p.beta += s; break;
            case 5: p.gamma += s; break;
        }
        return p;
    };
    const double base = potential_energy(pose);
    for (int axis = 0; axis < 6; ++axis) {
        bool ok_plus = true, ok_minus = true;
        double f_plus = 0.0, f_minus = 0.0;
        try {
            f_plus = potential_energy(perturbed(axis, step));
        } catch (const InfeasiblePoseError&) {
            ok_plus = false;
        }
        try {
            f_minus = potential_energy(perturbed(axis, -step));
        } catch (const InfeasiblePoseError&) {
            ok_minus = false;
        }
        if (ok_plus && ok_minus) {
            g.d[axis] = (f_plus - f_minus) / (2.0 * step);
        } else if (ok_plus) {
            g.d[axis] = (f_plus - base) / step;
            g.one_sided[axis] = true;
        } else if (ok_minus) {
            g.d[axis] = (base - f_minus) / step;
            g.one_sided[axis] = true;
        } else {
            throw InfeasiblePoseError("gradient_central_diff: both perturbed poses infeasible on axis " +
                                      std::to_string(axis));
        }
    }
    return g;
}

Vector6 LandscapeModel::gravity_generalized_force(const Pose& pose) const {
    const double w = body_.weight_newton();
    const double h = body_.com_offset_mm;
    Vector6 f = Vector6::Zero();
    f[2] = -w;  // -dPE_G/dz
    f[3] = -w * h * std::sin(pose.alpha) * std::cos(pose.beta);
    f[4] = -w * h * std::cos(pose.alpha) * std::sin(pose.beta);
    return f;
}

TraversalEvaluator::TraversalEvaluator(const LandscapeModel& model, const Pose& pose_template, double step)
    : model_(&model), pose_(pose_template), step_(step) {
    auto oriented = [&](double dalpha, double dbeta) {
        Pose p = pose_;
        p.alpha += dalpha;
        p.beta += dbeta;
        return std::make_unique<OrientedShell>(model.mesh(), p, model.beams());
    };
    base_ = oriented(0.0, 0.0);
    alpha_plus_ = oriented(step, 0.0);
    alpha_minus_ = oriented(-step, 0.0);
    beta_plus_ = oriented(0.0, step);
    beta_minus_ = oriented(0.0, -step);
}

PoseEnergy TraversalEvaluator::energy_in(const OrientedShell& shell, const Pose& pose, double x) const {
    PoseEnergy e;
    Pose p = pose;
    p.x = x;
    e.pe_gravity = model_->gravity_pe(p);
    e.pe = e.pe_gravity;
    for (int bi = 0; bi < 2; ++bi) {
        e.beam[bi] = shell.solve(bi, x);
        e.pe_beam[bi] = model_->beams()[bi].elastic_energy(e.beam[bi].theta_rad);
        e.pe += e.pe_beam[bi];
    }
    return e;
}

PoseEnergy TraversalEvaluator::energy(double x) const { return energy_in(*base_, pose_, x); }

Vec3 TraversalEvaluator::gradient_xab(double x, std::array<bool, 3>* one_sided) const {
    if (one_sided) one_sided->fill(false);
    Vec3 g;
    struct Probe {
        const OrientedShell* shell;
        Pose pose;
        double x;
    };
    Pose ap = pose_, am = pose_, bp = pose_, bm = pose_;
    ap.alpha += step_;
    am.alpha -= step_;
    bp.beta += step_;
    bm.beta -= step_;
    const std::array<std::array<Probe, 2>, 3> probes{{
        {{{base_.get(), pose_, x + step_}, {base_.get(), pose_, x - step_}}},
        {{{alpha_plus_.get(), ap, x}, {alpha_minus_.get(), am, x}}},
        {{{beta_plus_.get(), bp, x}, {beta_minus_.get(), bm, x}}},
    }};
    double base_pe = std::numeric_limits<double>::quiet_NaN();
    for (int axis = 0; axis < 3; ++axis) {
        bool ok_plus = true, ok_minus = true;
        double f_plus = 0.0, f_minus = 0.0;
        try {
            f_plus = energy_in(*probes[axis][0].shell, probes[axis][0].pose, probes[axis][0].x).pe;
        } catch (const InfeasiblePoseError&) {
            ok_plus = false;
        }
        try {
            f_minus = energy_in(*probes[axis][1].shell, probes[axis][1].pose, probes[axis][1].x).pe;
        } catch (const InfeasiblePoseError&) {
            ok_minus = false;
        }
        if (ok_plus && ok_minus) {
            g[axis] = (f_plus - f_minus) / (2.0 * step_);
            continue;
        }
        if (std::isnan(base_pe)) base_pe = energy(x).pe;
        if (ok_plus) {
            g[axis] = (f_plus - base_pe) / step_;
        } else if (ok_minus) {
            g[axis] = (base_pe - f_minus) / step_;
        } else {
            throw InfeasiblePoseError("gradient_xab: both perturbed poses infeasible");
        }
        if (one_sided) (*one_sided)[axis] = true;
    }
    return g;
}

std::vector<double> GridAxes::linspace_step(double lo, double hi, double step) {
    if (!(step > 0) || hi < lo) throw InvalidParameterError("linspace_step: bad range");
    std::vector<double> v;
    const int n = static_cast<int>(std::round((hi - lo) / step));
    v.reserve(n + 1);
    for (int i = 0; i <= n; ++i) v.push_back(lo + i * step);
    return v;
}

void GridAxes::validate() const {
    auto increasing = [](const std::vector<double>& v) {
        if (v.empty()) return false;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] > v[i - 1])) return false;
        return true;
    };
    if (!increasing(x_mm) || !increasing(alpha_rad) || !increasing(beta_rad))
        throw InvalidParameterError("grid axes must be nonempty and strictly increasing");
}

LandscapeGrid landscape_grid(const LandscapeModel& model, const GridAxes& axes, bool with_gradients,
                             double y_mm, double z_mm, double gamma_rad) {
    axes.validate();
    LandscapeGrid grid;
    grid.axes = axes;
    grid.has_gradients = with_gradients;
    grid.pe.assign(axes.size(), 0.0);
    if (with_gradients) grid.grad.assign(axes.size(), Vec3::Zero());

    const std::size_t n_ab = axes.alpha_rad.size() * axes.beta_rad.size();
    parallel_for(n_ab, [&](std::size_t j) {
        const std::size_t ia = j / axes.beta_rad.size();
        const std::size_t ib = j % axes.beta_rad.size();
        const Pose pose(0.0, y_mm, z_mm, axes.alpha_rad[ia], axes.beta_rad[ib], gamma_rad);
        const TraversalEvaluator eval(model, pose);
        for (std::size_t ix = 0; ix < axes.x_mm.size(); ++ix) {
            const std::size_t idx = grid.index(ix, ia, ib);
            try {
                grid.pe[idx] = eval.energy(axes.x_mm[ix]).pe;
                if (with_gradients) grid.grad[idx] = eval.gradient_xab(axes.x_mm[ix]);
            } catch (const InfeasiblePoseError&) {
                grid.pe[idx] = std::numeric_limits<double>::infinity();
                if (with_gradients) grid.grad[idx] = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
            }
        }
    });
    return grid;
}

bool rigid_collision_free(const LandscapeModel& model, const Pose& pose) {
    const Mat3 rot = pose_rotation(pose);
    const auto& mesh = model.mesh();
    std::vector<Vec3> lab(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) lab[i] = rot * mesh.vertices[i] + pose.position();
    for (const auto& tri : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const Vec3& p0 = lab[tri.v[e]];
            const Vec3& p1 = lab[tri.v[(e + 1) % 3]];
            if ((p0.x() > 0.0) == (p1.x() > 0.0)) continue;
            const double t = -p0.x() / (p1.x() - p0.x());
            const double y = p0.y() + t * (p1.y() - p0.y());
            const double z = p0.z() + t * (p1.z() - p0.z());
            for (const auto& beam : model.beams()) {
                if (y >= beam.y_lo() && y <= beam.y_hi() && z <= beam.height_mm) return false;
            }
        }
    }
    return true;
}

std::optional<double> rigid_geometry_pe(const LandscapeModel& model, double x_mm, double alpha_rad,
                                        double beta_rad, double y_mm, double z_start_mm, double gamma_rad,
                                        double search_range_mm, double tol_mm) {
    auto free_at = [&](double z) {
        return rigid_collision_free(model, Pose(x_mm, y_mm, z, alpha_rad, beta_rad, gamma_rad));
    };
    auto pe_at = [&](double z) {
        return model.gravity_pe(Pose(x_mm, y_mm, z, alpha_rad, beta_rad, gamma_rad));
    };
    if (free_at(z_start_mm)) return pe_at(z_start_mm);
    double lo = z_start_mm;  // colliding
    double hi = z_start_mm;
    bool found = false;
    for (double step = 25.0; hi < z_start_mm + search_range_mm; ) {
        hi = std::min(hi + step, z_start_mm + search_range_mm);
        if (free_at(hi)) {
            found = true;
            break;
        }
        lo = hi;
    }
    if (!found) return std::nullopt;
    while (hi - lo > tol_mm) {
        const double mid = 0.5 * (lo + hi);
        (free_at(mid) ? hi : lo) = mid;
    }
    return pe_at(hi);
}

LandscapeGrid rigid_geometry_grid(const LandscapeModel& model, const GridAxes& axes, double y_mm,
                                  double z_start_mm, double gamma_rad) {
    axes.validate();
    LandscapeGrid grid;
    grid.axes = axes;
    grid.pe.assign(axes.size(), 0.0);
    parallel_for(axes.size(), [&](std::size_t idx) {
        const std::size_t ib = idx % axes.beta_rad.size();
        const std::size_t ia = (idx / axes.beta_rad.size()) % axes.alpha_rad.size();
        const std::size_t ix = idx / (axes.beta_rad.size() * axes.alpha_rad.size());
        const auto pe = rigid_geometry_pe(model, axes.x_mm[ix], axes.alpha_rad[ia], axes.beta_rad[ib],
                                          y_mm, z_start_mm, gamma_rad);
        grid.pe[idx] = pe ? *pe : std::numeric_limits<double>::infinity();
    });
    return grid;
}

}  // namespace pel
