#include "pel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pel {

Mat3 pose_rotation(const Pose& pose) {
    if (!std::isfinite(pose.alpha) || !std::isfinite(pose.beta) || !std::isfinite(pose.gamma))
        throw InvalidParameterError("pose_rotation: non-finite angles");
    const double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
    const double cb = std::cos(pose.beta), sb = std::sin(pose.beta);
    const double cg = std::cos(pose.gamma), sg = std::sin(pose.gamma);
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
    ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
    rz << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
    return rz * ry * rx;
}

void BodyParams::validate() const {
    if (!(mass_kg > 0)) throw InvalidParameterError("body.mass_kg must be > 0");
    if (!(com_offset_mm >= 0)) throw InvalidParameterError("body.com_offset_mm must be >= 0");
    if (!(gravity_mm_s2 > 0)) throw InvalidParameterError("body.gravity_mm_s2 must be > 0");
}

void ShellParams::validate() const {
    if (!(semi_axis_x_mm > 0) || !(semi_axis_y_mm > 0) || !(semi_axis_z_mm > 0))
        throw InvalidParameterError("shell semi-axes must be > 0");
    if (!(flat_half_width_mm >= 0) || flat_half_width_mm >= semi_axis_y_mm)
        throw InvalidParameterError("shell.flat_half_width_mm must be in [0, semi_axis_y)");
    if (!(skirt_depth_mm >= 0) || skirt_depth_mm >= semi_axis_z_mm)
        throw InvalidParameterError("shell.skirt_depth_mm must be in [0, semi_axis_z)");
    if (!(midline_gap_mm >= 0) || midline_gap_mm >= semi_axis_y_mm)
        throw InvalidParameterError("shell.midline_gap_mm out of range");
    if (!(resolution_mm > 0)) throw InvalidParameterError("shell.resolution_mm must be > 0");
    if (edge_sections_per_half < 1) throw InvalidParameterError("shell.edge_sections_per_half must be >= 1");
    if (!(cell_normal_budget_deg > 0) || cell_normal_budget_deg > 5.0)
        throw InvalidParameterError("shell.cell_normal_budget_deg must be in (0, 5]");
    if (!(cell_diameter_budget_mm > 0) || cell_diameter_budget_mm > 50.0)
        throw InvalidParameterError("shell.cell_diameter_budget_mm must be in (0, 50]");
}

const char* to_string(ContactType t) {
    switch (t) {
        case ContactType::none: return "none";
        case ContactType::surface: return "surface";
        case ContactType::edge: return "edge";
    }
    return "none";
}

namespace {

// Lateral cross-section scale: 1 over the flat middle, elliptical falloff on
// the end caps.
double lateral_scale(const ShellParams& p, double y) {
    const double overhang = std::abs(y) - p.flat_half_width_mm;
    if (overhang <= 0.0) return 1.0;
    const double f = overhang / p.cap_half_width_mm();
    return f >= 1.0 ? 0.0 : std::sqrt(1.0 - f * f);
}

}  // namespace

Vec3 ShellMesh::surface_point(double u, double v) const {
    const double y = params.semi_axis_y_mm * std::sin(u);
    const double m = lateral_scale(params, y);
    return Vec3(params.semi_axis_x_mm * m * std::cos(v), y, params.semi_axis_z_mm * m * std::sin(v));
}

Vec3 ShellMesh::surface_normal_at(const Vec3& p) const {
    const double a = params.semi_axis_x_mm, c = params.semi_axis_z_mm;
    const double cap = params.cap_half_width_mm();
    const double overhang = std::abs(p.y()) - params.flat_half_width_mm;
    Vec3 n(2.0 * p.x() / (a * a), 0.0, 2.0 * p.z() / (c * c));
    if (overhang > 0.0) n.y() = 2.0 * overhang * (p.y() > 0 ? 1.0 : -1.0) / (cap * cap);
    const double len = n.norm();
    if (len < 1e-14) return Vec3(0.0, p.y() > 0 ? 1.0 : -1.0, 0.0);  // side tip
    return n / len;
}

int ShellMesh::nearest_vertex(double u, double v) const {
    if (grid_nu == 0) throw InvalidParameterError("nearest_vertex: mesh has no grid layout");
    const int i0 = std::clamp(static_cast<int>(std::lround((u + 0.5 * kPi) / grid_du_rad)), 0, grid_nu);
    const int j0 = std::clamp(static_cast<int>(std::lround((v + 0.5 * kPi) / grid_dv_rad)), 0, grid_nv);
    auto vertex_id = [&](int i, int j) {
        if (i <= 0) return static_cast<int>(vertices.size()) - 2;       // right tip
        if (i >= grid_nu) return static_cast<int>(vertices.size()) - 1;  // left tip
        return (i - 1) * (grid_nv + 1) + j;
    };
    // Spiral out over grid offsets until a vertex with surviving triangles is
    // found (crops remove rows near the midline gap and below the skirt).
    for (int radius = 0; radius <= std::max(grid_nu, grid_nv); ++radius) {
        for (int dj = -radius; dj <= radius; ++dj) {
            for (int di = -radius; di <= radius; ++di) {
                if (std::max(std::abs(di), std::abs(dj)) != radius) continue;
                const int i = i0 + di, j = j0 + dj;
                if (i < 0 || i > grid_nu || j < 0 || j > grid_nv) continue;
                const int id = vertex_id(i, j);
                if (!vertex_triangles[id].empty()) return id;
            }
        }
    }
    throw NoContactError("nearest_vertex: no triangulated vertex found");
}

Vec3 ShellMesh::bbox_min() const {
    Vec3 m = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (const auto& tri : triangles)
        for (int k = 0; k < 3; ++k) m = m.cwiseMin(vertices[tri.v[k]]);
    return m;
}

Vec3 ShellMesh::bbox_max() const {
    Vec3 m = Vec3::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& tri : triangles)
        for (int k = 0; k < 3; ++k) m = m.cwiseMax(vertices[tri.v[k]]);
    return m;
}

namespace {

// Rim tangent lies in the crop plane (z constant), so the edge-rule normal is
// horizontal, perpendicular to both the tangent and body z''.
Vec3 rim_edge_normal(const ShellParams& p, const Vec3& rim_point) {
    const double dy = 1e-4;
    auto rim_x = [&](double y) {
        const double m = lateral_scale(p, y);
        const double zr = p.skirt_depth_mm / (p.semi_axis_z_mm * std::max(m, 1e-12));
        if (zr >= 1.0) return 0.0;
        return p.semi_axis_x_mm * m * std::sqrt(1.0 - zr * zr);
    };
    const Vec3 t(rim_x(rim_point.y() + dy) - rim_x(rim_point.y() - dy), 2.0 * dy, 0.0);
    Vec3 n(t.y(), -t.x(), 0.0);
    n.normalize();
    if (n.x() < 0) n = -n;  // outward is forward on the kept (x >= 0) surface
    return n;
}

}  // namespace

ShellMesh shell_build(const ShellParams& params) {
    params.validate();
    const double a = params.semi_axis_x_mm;
    const double y_half = params.semi_axis_y_mm;
    const double c = params.semi_axis_z_mm;
    const double half_gap = 0.5 * params.midline_gap_mm;
    const double skirt_z = -params.skirt_depth_mm;

    // Grid sizing from the target edge length; nu kept even so the u-grid is
    // mirror-symmetric about u = 0. u sweeps laterally (y = y_half sin u), v
    // sweeps the full front profile.
    int nu = static_cast<int>(std::ceil(kPi * y_half / params.resolution_mm));
    if (nu % 2) ++nu;
    int nv = static_cast<int>(std::ceil(kPi * std::max(a, c) / params.resolution_mm));
    nv = std::max(nv, 8);

    ShellMesh mesh;
    mesh.params = params;
    mesh.grid_du_rad = kPi / nu;
    mesh.grid_dv_rad = kPi / nv;
    mesh.grid_nu = nu;
    mesh.grid_nv = nv;

    // Interior rows i = 1..nu-1 hold nv+1 vertices each; the side tips
    // (u = -pi/2, +pi/2) are welded single vertices appended at the end.
    for (int i = 1; i < nu; ++i) {
        const double u = -0.5 * kPi + kPi * i / nu;
        for (int j = 0; j <= nv; ++j) {
            const double v = -0.5 * kPi + kPi * j / nv;
            mesh.vertices.push_back(mesh.surface_point(u, v));
            mesh.vertex_uv.emplace_back(u, v);
        }
    }
    const int tip_right = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(Vec3(0.0, -y_half, 0.0));
    mesh.vertex_uv.emplace_back(-0.5 * kPi, 0.0);
    const int tip_left = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(Vec3(0.0, y_half, 0.0));
    mesh.vertex_uv.emplace_back(0.5 * kPi, 0.0);

    auto vid = [&](int i, int j) { return (i - 1) * (nv + 1) + j; };
    auto keep_centroid = [&](const Vec3& g) { return std::abs(g.y()) >= half_gap && g.z() >= skirt_z; };

    std::vector<Eigen::Vector2d> tri_uv;  // centroid parameters per kept triangle
    auto add_triangle = [&](int i0, int i1, int i2, double u_c, double v_c) {
        const Vec3& p0 = mesh.vertices[i0];
        const Vec3& p1 = mesh.vertices[i1];
        const Vec3& p2 = mesh.vertices[i2];
        const Vec3 g = (p0 + p1 + p2) / 3.0;
        if (!keep_centroid(g)) return;
        Vec3 n = (p1 - p0).cross(p2 - p0);
        const double len = n.norm();
        if (len < 1e-12) return;
        n /= len;
        ShellTriangle tri;
        tri.v = {i0, i1, i2};
        if (n.dot(mesh.surface_normal_at(g)) < 0) {
            std::swap(tri.v[1], tri.v[2]);
            n = -n;
        }
        tri.normal = n;
        tri.half = g.y() > 0 ? +1 : -1;
        mesh.triangles.push_back(tri);
        tri_uv.emplace_back(u_c, v_c);
    };

    for (int i = 1; i + 1 < nu; ++i) {
        const double u0 = -0.5 * kPi + kPi * i / nu;
        const double u1 = -0.5 * kPi + kPi * (i + 1) / nu;
        for (int j = 0; j < nv; ++j) {
            const double v0 = -0.5 * kPi + kPi * j / nv;
            const double v1 = -0.5 * kPi + kPi * (j + 1) / nv;
            add_triangle(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), (2 * u0 + u1) / 3.0,
                         (2 * v0 + v1) / 3.0);
            add_triangle(vid(i, j), vid(i + 1, j + 1), vid(i, j + 1), (2 * u0 + u1) / 3.0,
                         (v0 + 2 * v1) / 3.0);
        }
    }
    for (int j = 0; j < nv; ++j) {  // tip fans
        const double v_c = -0.5 * kPi + kPi * (j + 0.5) / nv;
        add_triangle(tip_right, vid(1, j), vid(1, j + 1), -0.5 * kPi + 0.5 * mesh.grid_du_rad, v_c);
        add_triangle(tip_left, vid(nu - 1, j + 1), vid(nu - 1, j), 0.5 * kPi - 0.5 * mesh.grid_du_rad, v_c);
    }

    // Edge band: triangles hugging the skirt crop boundary over the rim's
    // lateral extent form the sharp front edge, split into equal-arc sections
    // per half (the rim bends backward near its lateral ends, so arc length,
    // not y, keeps sections within the snap budget).
    const double band_z = skirt_z + 1.5 * params.resolution_mm;
    const double rim_y_max = [&] {
        const double need = params.skirt_depth_mm / c;  // cross-section must reach the crop plane
        if (need >= 1.0) return 0.0;
        return params.flat_half_width_mm + params.cap_half_width_mm() * std::sqrt(1.0 - need * need);
    }();
    auto rim_x_at = [&](double y) {
        const double m = lateral_scale(params, y);
        const double zr = params.skirt_depth_mm / (c * std::max(m, 1e-12));
        if (zr >= 1.0) return 0.0;
        return a * m * std::sqrt(1.0 - zr * zr);
    };
    const int n_arc = 512;
    std::vector<double> arc_y(n_arc + 1), arc_s(n_arc + 1, 0.0);
    for (int i = 0; i <= n_arc; ++i) arc_y[i] = half_gap + (rim_y_max - half_gap) * i / n_arc;
    for (int i = 1; i <= n_arc; ++i)
        arc_s[i] = arc_s[i - 1] + std::hypot(arc_y[i] - arc_y[i - 1], rim_x_at(arc_y[i]) - rim_x_at(arc_y[i - 1]));
    auto y_of_arc = [&](double s_target) {
        const auto it = std::lower_bound(arc_s.begin(), arc_s.end(), s_target);
        const int i = std::clamp(static_cast<int>(it - arc_s.begin()), 1, n_arc);
        const double w = (s_target - arc_s[i - 1]) / std::max(arc_s[i] - arc_s[i - 1], 1e-12);
        return arc_y[i - 1] + (arc_y[i] - arc_y[i - 1]) * w;
    };

    std::vector<int> tri_cell(mesh.triangles.size(), -1);
    mesh.edge_cell_count = 2 * params.edge_sections_per_half;
    mesh.cells.resize(mesh.edge_cell_count);
    const double arc_total = arc_s.back();
    for (int half = 0; half < 2; ++half) {
        for (int s = 0; s < params.edge_sections_per_half; ++s) {
            TouchCell cell;
            cell.edge = true;
            cell.half = half == 0 ? +1 : -1;
            const double y_mid =
                y_of_arc(arc_total * (s + 0.5) / params.edge_sections_per_half) * (half == 0 ? 1.0 : -1.0);
            cell.center = Vec3(rim_x_at(std::abs(y_mid)), y_mid, skirt_z);
            cell.normal = rim_edge_normal(params, cell.center);
            mesh.cells[half * params.edge_sections_per_half + s] = cell;
        }
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec3 g = (mesh.vertices[tri.v[0]] + mesh.vertices[tri.v[1]] + mesh.vertices[tri.v[2]]) / 3.0;
        if (g.z() > band_z || std::abs(g.y()) > rim_y_max) continue;
        const int half = g.y() > 0 ? 0 : 1;
        int nearest = half * params.edge_sections_per_half;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (int s = 0; s < params.edge_sections_per_half; ++s) {
            const int id = half * params.edge_sections_per_half + s;
            const double d = (g - mesh.cells[id].center).norm();
            if (d < nearest_d) {
                nearest_d = d;
                nearest = id;
            }
        }
        tri_cell[t] = nearest;
    }

    // Surface cells: recursive quadtree over (u, v) per half, split until the
    // cell diameter and normal spread fit their budgets.
    const double spread_budget = std::cos(deg2rad(params.cell_normal_budget_deg));
    auto cell_ok = [&](const std::vector<int>& tris) {
        Vec3 nsum = Vec3::Zero();
        for (int t : tris) {
            const auto& tri = mesh.triangles[t];
            const double area = 0.5 * (mesh.vertices[tri.v[1]] - mesh.vertices[tri.v[0]])
                                          .cross(mesh.vertices[tri.v[2]] - mesh.vertices[tri.v[0]])
                                          .norm();
            nsum += area * tri.normal;
        }
        nsum.normalize();
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
        for (int t : tris) {
            if (mesh.triangles[t].normal.dot(nsum) < spread_budget) return false;
            for (int k = 0; k < 3; ++k) {
                lo = lo.cwiseMin(mesh.vertices[mesh.triangles[t].v[k]]);
                hi = hi.cwiseMax(mesh.vertices[mesh.triangles[t].v[k]]);
            }
        }
        return (hi - lo).norm() <= params.cell_diameter_budget_mm;
    };

    struct Task {
        std::vector<int> tris;
        double u_lo, u_hi, v_lo, v_hi;
        int depth;
    };
    std::vector<Task> stack;
    for (int half = 0; half < 2; ++half) {
        Task root;
        root.u_lo = half == 0 ? 0.0 : -0.5 * kPi;
        root.u_hi = half == 0 ? 0.5 * kPi : 0.0;
        root.v_lo = -0.5 * kPi;
        root.v_hi = 0.5 * kPi;
        root.depth = 0;
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            if (tri_cell[t] >= 0) continue;
            if ((mesh.triangles[t].half > 0) != (half == 0)) continue;
            root.tris.push_back(static_cast<int>(t));
        }
        stack.push_back(std::move(root));
    }
    while (!stack.empty()) {
        Task task = std::move(stack.back());
        stack.pop_back();
        if (task.tris.empty()) continue;
        if (task.depth >= 14 || cell_ok(task.tris)) {
            TouchCell cell;
            cell.edge = false;
            Vec3 nsum = Vec3::Zero();
            double u_sum = 0.0, v_sum = 0.0, w_sum = 0.0;
            for (int t : task.tris) {
                const auto& tri = mesh.triangles[t];
                const double area = 0.5 * (mesh.vertices[tri.v[1]] - mesh.vertices[tri.v[0]])
                                              .cross(mesh.vertices[tri.v[2]] - mesh.vertices[tri.v[0]])
                                              .norm();
                nsum += area * tri.normal;
                u_sum += area * tri_uv[t].x();
                v_sum += area * tri_uv[t].y();
                w_sum += area;
            }
            cell.normal = nsum.normalized();
            cell.center = mesh.surface_point(u_sum / w_sum, v_sum / w_sum);
            cell.half = mesh.triangles[task.tris.front()].half;
            const int id = static_cast<int>(mesh.cells.size());
            mesh.cells.push_back(cell);
            for (int t : task.tris) tri_cell[t] = id;
            continue;
        }
        const double u_mid = 0.5 * (task.u_lo + task.u_hi);
        const double v_mid = 0.5 * (task.v_lo + task.v_hi);
        std::array<Task, 4> children;
        for (int k = 0; k < 4; ++k) {
            children[k].u_lo = (k & 1) ? u_mid : task.u_lo;
            children[k].u_hi = (k & 1) ? task.u_hi : u_mid;
            children[k].v_lo = (k & 2) ? v_mid : task.v_lo;
            children[k].v_hi = (k & 2) ? task.v_hi : v_mid;
            children[k].depth = task.depth + 1;
        }
        for (int t : task.tris) {
            const int k = (tri_uv[t].x() >= u_mid ? 1 : 0) + (tri_uv[t].y() >= v_mid ? 2 : 0);
            children[k].tris.push_back(t);
        }
        for (auto& ch : children) stack.push_back(std::move(ch));
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) mesh.triangles[t].cell = tri_cell[t];

    mesh.vertex_triangles.resize(mesh.vertices.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
        for (int k = 0; k < 3; ++k) mesh.vertex_triangles[mesh.triangles[t].v[k]].push_back(static_cast<int>(t));

    return mesh;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Ericson, Real-Time Collision Detection, closest point on triangle.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return (p - a).norm();
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return (p - b).norm();
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double t = d1 / (d1 - d3);
        return (p - (a + t * ab)).norm();
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return (p - c).norm();
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double t = d2 / (d2 - d6);
        return (p - (a + t * ac)).norm();
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + t * (c - b))).norm();
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return (p - (a + v * ab + w * ac)).norm();
}

namespace {

SurfaceHit hit_from_triangle(const ShellMesh& mesh, int tri_index) {
    const auto& tri = mesh.triangles[tri_index];
    const auto& cell = mesh.cells[tri.cell];
    SurfaceHit hit;
    hit.cell = tri.cell;
    hit.triangle = tri_index;
    hit.normal = cell.normal;
    hit.type = cell.edge ? ContactType::edge : ContactType::surface;
    return hit;
}

}  // namespace

SurfaceHit surface_query(const ShellMesh& mesh, const Vec3& point_body, double tolerance_mm) {
    double best = std::numeric_limits<double>::infinity();
    int best_tri = -1;
    bool best_edge = true;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double d = point_triangle_distance(point_body, mesh.vertices[tri.v[0]],
                                                 mesh.vertices[tri.v[1]], mesh.vertices[tri.v[2]]);
        const bool edge = mesh.cells[tri.cell].edge;
        // Ties break toward surface classification.
        if (d < best - 1e-9 || (d < best + 1e-9 && best_edge && !edge)) {
            best = std::min(best, d);
            best_tri = static_cast<int>(t);
            best_edge = edge;
        }
    }
    if (best_tri < 0 || best > tolerance_mm)
        throw NoContactError("surface_query: point is " + std::to_string(best) +
                             " mm from the shell (tolerance " + std::to_string(tolerance_mm) + " mm)");
    return hit_from_triangle(mesh, best_tri);
}

SurfaceHit surface_query_vertex(const ShellMesh& mesh, int vertex_index) {
    const auto& tris = mesh.vertex_triangles.at(vertex_index);
    if (tris.empty()) throw NoContactError("surface_query_vertex: vertex has no incident triangles");
    int chosen = tris.front();
    for (int t : tris) {
        if (!mesh.cells[mesh.triangles[t].cell].edge) {
            chosen = t;
            break;
        }
    }
    return hit_from_triangle(mesh, chosen);
}

}  // namespace pel
