#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "shapegen/core.hpp"

namespace shapegen::geometry {

struct Vec2 {
    double x = 0, y = 0;
};
struct Vec3 {
    double x = 0, y = 0, z = 0;
};

// Parameter meaning per kind:
//   Disk            {R}                       d=2
//   Rectangle       {w, h}                    d=2, axis-aligned
//   Box             {ex, ey, ez}              d=3, edge lengths
//   Kite            {b1, b2}                  d=2, b1,b2 in [0.5, 1.8]
//   Apple           {b1}                      d=2, b1 in [1, 2]
//   RoundedTriangle {b2}                      d=2, b2 in [0.5, 1.5]
//   MultiDomain     {}  + components          >=2, pairwise disjoint
//   Mannequin       {height, relative_weight} d=3
enum class ShapeKind { Disk, Rectangle, Box, Kite, Apple, RoundedTriangle, MultiDomain, Mannequin };

struct ShapeSpec {
    ShapeKind kind = ShapeKind::Disk;
    std::vector<double> params;
    std::vector<double> center;          // dim() entries
    std::vector<ShapeSpec> components;   // MultiDomain only

    int dim() const {
        switch (kind) {
            case ShapeKind::Box:
            case ShapeKind::Mannequin: return 3;
            case ShapeKind::MultiDomain:
                return components.empty() ? 2 : components.front().dim();
            default: return 2;
        }
    }
};

inline std::string kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::Disk: return "Disk";
        case ShapeKind::Rectangle: return "Rectangle";
        case ShapeKind::Box: return "Box";
        case ShapeKind::Kite: return "Kite";
        case ShapeKind::Apple: return "Apple";
        case ShapeKind::RoundedTriangle: return "RoundedTriangle";
        case ShapeKind::MultiDomain: return "MultiDomain";
        case ShapeKind::Mannequin: return "Mannequin";
    }
    return "?";
}

inline ShapeKind kind_from_name(const std::string& s) {
    for (ShapeKind k : {ShapeKind::Disk, ShapeKind::Rectangle, ShapeKind::Box, ShapeKind::Kite,
                        ShapeKind::Apple, ShapeKind::RoundedTriangle, ShapeKind::MultiDomain,
                        ShapeKind::Mannequin})
        if (kind_name(k) == s) return k;
    throw config_error("unknown shape kind: " + s);
}

struct BBox {
    std::vector<double> lo, hi; // dim() entries each
};

struct Ellipsoid {
    Vec3 c;  // center
    Vec3 s;  // semi-axes
};

// Six-part ellipsoid body: head, torso, two arms, two legs. Proportions are
// fixed sevenths-and-a-half of the height (head 1/7.5, torso 3/7.5, legs
// 3.5/7.5); lateral semi-axes scale with cbrt(relative_weight) so volume
// scales linearly with it. Parts overlap on purpose (arms/legs meet the
// torso), the shape is their union. z runs over [-H/2, H/2] exactly.
inline std::vector<Ellipsoid> mannequin_parts(const ShapeSpec& spec) {
    if (spec.kind != ShapeKind::Mannequin) throw domain_error("mannequin_parts: wrong kind");
    const double H = spec.params.at(0), rw = spec.params.at(1);
    const double u = H / 7.5;
    const double c = std::cbrt(rw);
    const double cx = spec.center.at(0), cy = spec.center.at(1), cz = spec.center.at(2);
    const double z0 = cz - H / 2; // feet level
    std::vector<Ellipsoid> parts;
    parts.push_back({{cx + 0.55 * u * c, cy, z0 + 1.85 * u}, {0.55 * u * c, 0.55 * u * c, 1.85 * u}});
    parts.push_back({{cx - 0.55 * u * c, cy, z0 + 1.85 * u}, {0.55 * u * c, 0.55 * u * c, 1.85 * u}});
    parts.push_back({{cx, cy, z0 + 5.0 * u}, {0.90 * u * c, 0.60 * u * c, 1.60 * u}});
    parts.push_back({{cx + 1.10 * u * c, cy, z0 + 5.2 * u}, {0.42 * u * c, 0.42 * u * c, 1.00 * u}});
    parts.push_back({{cx - 1.10 * u * c, cy, z0 + 5.2 * u}, {0.42 * u * c, 0.42 * u * c, 1.00 * u}});
    parts.push_back({{cx, cy, z0 + 7.0 * u}, {0.42 * u * c, 0.42 * u * c, 0.50 * u}});
    return parts;
}

// Parametric boundary at t (2D kinds only).
inline Vec2 boundary_point(const ShapeSpec& spec, double t) {
    const double cx = spec.center.at(0), cy = spec.center.at(1);
    switch (spec.kind) {
        case ShapeKind::Disk: {
            double R = spec.params.at(0);
            return {cx + R * std::cos(t), cy + R * std::sin(t)};
        }
        case ShapeKind::Kite: {
            double b1 = spec.params.at(0), b2 = spec.params.at(1);
            return {cx + b1 * (std::cos(t) + 0.65 * std::cos(2 * t) - 0.65),
                    cy + 1.5 * b2 * std::sin(t)};
        }
        case ShapeKind::Apple: {
            double b1 = spec.params.at(0);
            double r = b1 * (0.5 + 0.4 * std::cos(t) + 0.1 * std::sin(2 * t)) / (1 + 0.7 * std::cos(t));
            return {cx + r * std::cos(t), cy + r * std::sin(t)};
        }
        case ShapeKind::RoundedTriangle: {
            double b2 = spec.params.at(0);
            double r = b2 * (1 + 0.15 * std::cos(3 * t));
            return {cx + r * std::cos(t), cy + r * std::sin(t)};
        }
        default: throw domain_error("boundary_point: not a parametric 2D kind");
    }
}

// n samples at t = 2*pi*j/n for parametric kinds; Rectangle gets its 4
// corners in counterclockwise order (n ignored there).
inline std::vector<Vec2> boundary_polyline(const ShapeSpec& spec, int n) {
    if (spec.kind == ShapeKind::Rectangle) {
        double cx = spec.center.at(0), cy = spec.center.at(1);
        double hw = spec.params.at(0) / 2, hh = spec.params.at(1) / 2;
        return {{cx - hw, cy - hh}, {cx + hw, cy - hh}, {cx + hw, cy + hh}, {cx - hw, cy + hh}};
    }
    if (spec.kind == ShapeKind::Box || spec.kind == ShapeKind::Mannequin ||
        spec.kind == ShapeKind::MultiDomain)
        throw domain_error("boundary_polyline: unsupported kind " + kind_name(spec.kind));
    if (n < 3) throw config_error("boundary_polyline: n < 3");
    std::vector<Vec2> pts(n);
    for (int j = 0; j < n; ++j) pts[j] = boundary_point(spec, 2 * pi * j / n);
    return pts;
}

struct BoxBoundary {
    std::array<Vec3, 8> corners;
    std::array<std::array<int, 4>, 6> faces; // corner indices per face
};

inline BoxBoundary box_boundary(const ShapeSpec& spec) {
    if (spec.kind != ShapeKind::Box) throw domain_error("box_boundary: wrong kind");
    double cx = spec.center.at(0), cy = spec.center.at(1), cz = spec.center.at(2);
    double hx = spec.params.at(0) / 2, hy = spec.params.at(1) / 2, hz = spec.params.at(2) / 2;
    BoxBoundary b;
    for (int i = 0; i < 8; ++i)
        b.corners[i] = {cx + ((i & 1) ? hx : -hx), cy + ((i & 2) ? hy : -hy),
                        cz + ((i & 4) ? hz : -hz)};
    b.faces = {{{0, 2, 3, 1},   // z = lo
                {4, 5, 7, 6},   // z = hi
                {0, 1, 5, 4},   // y = lo
                {2, 6, 7, 3},   // y = hi
                {0, 4, 6, 2},   // x = lo
                {1, 3, 7, 5}}}; // x = hi
    return b;
}

inline BBox bounding_box(const ShapeSpec& spec) {
    switch (spec.kind) {
        case ShapeKind::Disk: {
            double R = spec.params.at(0);
            return {{spec.center[0] - R, spec.center[1] - R},
                    {spec.center[0] + R, spec.center[1] + R}};
        }
        case ShapeKind::Rectangle:
        case ShapeKind::Box: {
            BBox b{spec.center, spec.center};
            for (size_t i = 0; i < spec.params.size(); ++i) {
                b.lo[i] -= spec.params[i] / 2;
                b.hi[i] += spec.params[i] / 2;
            }
            return b;
        }
        case ShapeKind::Kite:
        case ShapeKind::Apple:
        case ShapeKind::RoundedTriangle: {
            auto pts = boundary_polyline(spec, 8192);
            BBox b{{pts[0].x, pts[0].y}, {pts[0].x, pts[0].y}};
            for (const auto& p : pts) {
                b.lo[0] = std::min(b.lo[0], p.x);
                b.lo[1] = std::min(b.lo[1], p.y);
                b.hi[0] = std::max(b.hi[0], p.x);
                b.hi[1] = std::max(b.hi[1], p.y);
            }
            return b;
        }
        case ShapeKind::Mannequin: {
            auto parts = mannequin_parts(spec);
            BBox b{{parts[0].c.x, parts[0].c.y, parts[0].c.z},
                   {parts[0].c.x, parts[0].c.y, parts[0].c.z}};
            for (const auto& e : parts) {
                const double lo[3] = {e.c.x - e.s.x, e.c.y - e.s.y, e.c.z - e.s.z};
                const double hi[3] = {e.c.x + e.s.x, e.c.y + e.s.y, e.c.z + e.s.z};
                for (int i = 0; i < 3; ++i) {
                    b.lo[i] = std::min(b.lo[i], lo[i]);
                    b.hi[i] = std::max(b.hi[i], hi[i]);
                }
            }
            return b;
        }
        case ShapeKind::MultiDomain: {
            BBox b = bounding_box(spec.components.at(0));
            for (size_t c = 1; c < spec.components.size(); ++c) {
                BBox bc = bounding_box(spec.components[c]);
                for (size_t i = 0; i < b.lo.size(); ++i) {
                    b.lo[i] = std::min(b.lo[i], bc.lo[i]);
                    b.hi[i] = std::max(b.hi[i], bc.hi[i]);
                }
            }
            return b;
        }
    }
    throw domain_error("bounding_box: unhandled kind");
}

inline void validate(const ShapeSpec& spec) {
    auto need = [&](size_t n) {
        if (spec.params.size() != n)
            throw config_error(kind_name(spec.kind) + ": expected " + std::to_string(n) +
                               " params, got " + std::to_string(spec.params.size()));
    };
    if (spec.kind != ShapeKind::MultiDomain && (int)spec.center.size() != spec.dim())
        throw domain_error(kind_name(spec.kind) + ": center dimension mismatch");
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    switch (spec.kind) {
        case ShapeKind::Disk:
            need(1);
            if (spec.params[0] <= 0) throw domain_error("Disk: R must be positive");
            break;
        case ShapeKind::Rectangle:
            need(2);
            if (spec.params[0] <= 0 || spec.params[1] <= 0)
                throw domain_error("Rectangle: sides must be positive");
            break;
        case ShapeKind::Box:
            need(3);
            for (double e : spec.params)
                if (e <= 0) throw domain_error("Box: edges must be positive");
            break;
        case ShapeKind::Kite:
            need(2);
            if (!in(spec.params[0], 0.5, 1.8) || !in(spec.params[1], 0.5, 1.8))
                throw domain_error("Kite: (b1, b2) outside [0.5, 1.8]^2");
            break;
        case ShapeKind::Apple:
            need(1);
            if (!in(spec.params[0], 1.0, 2.0)) throw domain_error("Apple: b1 outside [1, 2]");
            break;
        case ShapeKind::RoundedTriangle:
            need(1);
            if (!in(spec.params[0], 0.5, 1.5))
                throw domain_error("RoundedTriangle: b2 outside [0.5, 1.5]");
            break;
        case ShapeKind::Mannequin:
            need(2);
            if (!in(spec.params[0], 1.4, 2.0))
                throw domain_error("Mannequin: height outside [1.4, 2.0]");
            if (!in(spec.params[1], 0.5, 1.5))
                throw domain_error("Mannequin: relative_weight outside [0.5, 1.5]");
            break;
        case ShapeKind::MultiDomain: {
            if (spec.components.size() < 2)
                throw domain_error("MultiDomain: needs >= 2 components");
            int d = spec.components.front().dim();
            for (const auto& c : spec.components) {
                if (c.dim() != d) throw domain_error("MultiDomain: mixed dimensions");
                if (c.kind == ShapeKind::MultiDomain)
                    throw domain_error("MultiDomain: no nesting");
                validate(c);
            }
            // disjointness via bounding boxes (conservative: touching or
            // overlapping boxes are rejected even if the shapes are disjoint)
            for (size_t i = 0; i < spec.components.size(); ++i)
                for (size_t j = i + 1; j < spec.components.size(); ++j) {
                    BBox a = bounding_box(spec.components[i]);
                    BBox b = bounding_box(spec.components[j]);
                    bool separated = false;
                    for (int ax = 0; ax < d; ++ax)
                        if (a.hi[ax] < b.lo[ax] || b.hi[ax] < a.lo[ax]) separated = true;
                    if (!separated)
                        throw domain_error("MultiDomain: components " + std::to_string(i) + " and " +
                                           std::to_string(j) + " have overlapping bounding boxes");
                }
            break;
        }
    }
}

inline ShapeSpec make_disk(double R, Vec2 c = {}) {
    ShapeSpec s{ShapeKind::Disk, {R}, {c.x, c.y}, {}};
    validate(s);
    return s;
}
inline ShapeSpec make_rectangle(double w, double h, Vec2 c = {}) {
    ShapeSpec s{ShapeKind::Rectangle, {w, h}, {c.x, c.y}, {}};
    validate(s);
    return s;
}
inline ShapeSpec make_box(double ex, double ey, double ez, Vec3 c = {}) {
    ShapeSpec s{ShapeKind::Box, {ex, ey, ez}, {c.x, c.y, c.z}, {}};
    validate(s);
    return s;
}
inline ShapeSpec make_kite(double b1, double b2, Vec2 c = {}) {
    ShapeSpec s{ShapeKind::Kite, {b1, b2}, {c.x, c.y}, {}};
    validate(s);
    return s;
}
inline ShapeSpec make_apple(double b1, Vec2 c = {}) {
    ShapeSpec s{ShapeKind::Apple, {b1}, {c.x, c.y}, {}};
    validate(s);
    return s;
}
inline ShapeSpec make_rounded_triangle(double b2, Vec2 c = {}) {
    ShapeSpec s{ShapeKind::RoundedTriangle, {b2}, {c.x, c.y}, {}};
    validate(s);
    return s;
}
inline ShapeSpec make_multidomain(std::vector<ShapeSpec> comps) {
    ShapeSpec s{ShapeKind::MultiDomain, {}, {}, std::move(comps)};
    validate(s);
    return s;
}
inline ShapeSpec mannequin(double height, double relative_weight) {
    ShapeSpec s{ShapeKind::Mannequin, {height, relative_weight}, {0, 0, 0}, {}};
    validate(s);
    return s;
}

// Winding-number point-in-polygon (nonzero rule). Closed polyline implied.
inline bool point_in_polygon(const std::vector<Vec2>& poly, double px, double py) {
    int wn = 0;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        double left = (b.x - a.x) * (py - a.y) - (px - a.x) * (b.y - a.y);
        if (a.y <= py) {
            if (b.y > py && left > 0) ++wn;
        } else {
            if (b.y <= py && left < 0) --wn;
        }
    }
    return wn != 0;
}

namespace detail {

// Memoized 4096-point boundary polylines for parametric interior tests.
inline std::shared_ptr<const std::vector<Vec2>> cached_polyline(const ShapeSpec& spec) {
    static std::mutex mu;
    static std::unordered_map<std::string, std::shared_ptr<const std::vector<Vec2>>> memo;
    char buf[64];
    std::string key = kind_name(spec.kind);
    for (double v : spec.params) {
        std::snprintf(buf, sizeof buf, ":%a", v);
        key += buf;
    }
    for (double v : spec.center) {
        std::snprintf(buf, sizeof buf, ":%a", v);
        key += buf;
    }
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
    }
    auto poly = std::make_shared<const std::vector<Vec2>>(boundary_polyline(spec, 4096));
    std::lock_guard<std::mutex> lock(mu);
    return memo.emplace(key, std::move(poly)).first->second;
}

} // namespace detail

// Closed-set convention: analytic kinds return 1 on the boundary; parametric
// kinds are decided by winding number against the cached 4096-point polyline
// (only reliable a small distance away from the true boundary).
inline bool indicator(const ShapeSpec& spec, const std::vector<double>& x) {
    if ((int)x.size() != spec.dim()) throw domain_error("indicator: dimension mismatch");
    switch (spec.kind) {
        case ShapeKind::Disk: {
            double dx = x[0] - spec.center[0], dy = x[1] - spec.center[1];
            double R = spec.params[0];
            return dx * dx + dy * dy <= R * R;
        }
        case ShapeKind::Rectangle:
            return std::abs(x[0] - spec.center[0]) <= spec.params[0] / 2 &&
                   std::abs(x[1] - spec.center[1]) <= spec.params[1] / 2;
        case ShapeKind::Box:
            return std::abs(x[0] - spec.center[0]) <= spec.params[0] / 2 &&
                   std::abs(x[1] - spec.center[1]) <= spec.params[1] / 2 &&
                   std::abs(x[2] - spec.center[2]) <= spec.params[2] / 2;
        case ShapeKind::Kite:
        case ShapeKind::Apple:
        case ShapeKind::RoundedTriangle:
            return point_in_polygon(*detail::cached_polyline(spec), x[0], x[1]);
        case ShapeKind::Mannequin: {
            for (const auto& e : mannequin_parts(spec)) {
                double qx = (x[0] - e.c.x) / e.s.x;
                double qy = (x[1] - e.c.y) / e.s.y;
                double qz = (x[2] - e.c.z) / e.s.z;
                if (qx * qx + qy * qy + qz * qz <= 1.0) return true;
            }
            return false;
        }
        case ShapeKind::MultiDomain:
            for (const auto& c : spec.components)
                if (indicator(c, x)) return true;
            return false;
    }
    throw domain_error("indicator: unhandled kind");
}

inline double polygon_area(const std::vector<Vec2>& poly) {
    double s = 0;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return s / 2;
}

// Sorts (start, end) pairs in place and merges overlaps into out. Returns the
// merged count.
inline int merge_intervals(double* raw, int m, double* out) {
    if (m == 0) return 0;
    for (int i = 1; i < m; ++i) { // insertion sort by start
        double a = raw[2 * i], b = raw[2 * i + 1];
        int j = i - 1;
        while (j >= 0 && raw[2 * j] > a) {
            raw[2 * j + 2] = raw[2 * j];
            raw[2 * j + 3] = raw[2 * j + 1];
            --j;
        }
        raw[2 * j + 2] = a;
        raw[2 * j + 3] = b;
    }
    int k = 0;
    out[0] = raw[0];
    out[1] = raw[1];
    for (int i = 1; i < m; ++i) {
        if (raw[2 * i] <= out[2 * k + 1]) {
            out[2 * k + 1] = std::max(out[2 * k + 1], raw[2 * i + 1]);
        } else {
            ++k;
            out[2 * k] = raw[2 * i];
            out[2 * k + 1] = raw[2 * i + 1];
        }
    }
    return k + 1;
}

// Merged z-intervals of the ellipsoid union over the vertical line (x, y).
// Returns interval count; out holds (z0, z1) pairs, capacity >= parts.size().
inline int column_runs(const std::vector<Ellipsoid>& parts, double x, double y, double* out) {
    double raw[2 * 16];
    int m = 0;
    for (const auto& e : parts) {
        double qx = (x - e.c.x) / e.s.x;
        double qy = (y - e.c.y) / e.s.y;
        double q = 1.0 - qx * qx - qy * qy;
        if (q <= 0) continue;
        double half = e.s.z * std::sqrt(q);
        raw[2 * m] = e.c.z - half;
        raw[2 * m + 1] = e.c.z + half;
        ++m;
    }
    return merge_intervals(raw, m, out);
}

// Area (d=2) or volume (d=3). Analytic where possible; parametric kinds use
// the shoelace sum over a dense polyline (spectrally accurate for these
// smooth curves); the mannequin union integrates merged column runs on a
// 2048^2 midpoint grid over its own bounding box.
inline double measure(const ShapeSpec& spec) {
    switch (spec.kind) {
        case ShapeKind::Disk: return pi * spec.params[0] * spec.params[0];
        case ShapeKind::Rectangle: return spec.params[0] * spec.params[1];
        case ShapeKind::Box: return spec.params[0] * spec.params[1] * spec.params[2];
        case ShapeKind::Kite:
        case ShapeKind::Apple:
        case ShapeKind::RoundedTriangle:
            return std::abs(polygon_area(boundary_polyline(spec, 65536)));
        case ShapeKind::MultiDomain: {
            double s = 0;
            for (const auto& c : spec.components) s += measure(c);
            return s;
        }
        case ShapeKind::Mannequin: {
            auto parts = mannequin_parts(spec);
            BBox b = bounding_box(spec);
            const int G = 2048;
            const double hx = (b.hi[0] - b.lo[0]) / G, hy = (b.hi[1] - b.lo[1]) / G;
            double runs[2 * 16];
            double vol = 0;
            for (int i = 0; i < G; ++i) {
                double x = b.lo[0] + (i + 0.5) * hx;
                double col = 0;
                for (int j = 0; j < G; ++j) {
                    double y = b.lo[1] + (j + 0.5) * hy;
                    int m = column_runs(parts, x, y, runs);
                    for (int r = 0; r < m; ++r) col += runs[2 * r + 1] - runs[2 * r];
                }
                vol += col;
            }
            return vol * hx * hy;
        }
    }
    throw domain_error("measure: unhandled kind");
}

// Shift so the bounding box is centered at the origin (components of a union
// move together).
inline ShapeSpec centered(const ShapeSpec& spec) {
    BBox b = bounding_box(spec);
    ShapeSpec out = spec;
    std::vector<double> shift(b.lo.size());
    for (size_t i = 0; i < b.lo.size(); ++i) shift[i] = -(b.lo[i] + b.hi[i]) / 2;
    if (out.kind == ShapeKind::MultiDomain) {
        for (auto& c : out.components)
            for (size_t i = 0; i < shift.size(); ++i) c.center[i] += shift[i];
    } else {
        for (size_t i = 0; i < shift.size(); ++i) out.center[i] += shift[i];
    }
    return out;
}

inline void require_support_in_box(const ShapeSpec& spec, double a) {
    BBox b = bounding_box(spec);
    for (size_t i = 0; i < b.lo.size(); ++i)
        if (b.lo[i] <= -a / 2 || b.hi[i] >= a / 2)
            throw domain_error("shape support escapes the box (-a/2, a/2)^d, a = " +
                               std::to_string(a));
}

// Counterclockwise closed loops for boundary-integral quadrature. n is the
// vertex count per parametric loop; Rectangle contributes its 4 corners.
inline std::vector<std::vector<Vec2>> polygon_loops(const ShapeSpec& spec, int n) {
    auto one = [n](const ShapeSpec& s) {
        std::vector<Vec2> loop = boundary_polyline(s, s.kind == ShapeKind::Rectangle ? 4 : n);
        if (polygon_area(loop) < 0) std::reverse(loop.begin(), loop.end());
        return loop;
    };
    std::vector<std::vector<Vec2>> loops;
    if (spec.kind == ShapeKind::MultiDomain) {
        for (const auto& c : spec.components) loops.push_back(one(c));
    } else {
        loops.push_back(one(spec));
    }
    return loops;
}

} // namespace shapegen::geometry
