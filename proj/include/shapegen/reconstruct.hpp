#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <unordered_map>
#include <vector>

#include "shapegen/core.hpp"
#include "shapegen/farfield.hpp"
#include "shapegen/geometry.hpp"
#include "shapegen/reconstruct_tables.hpp"
#include "shapegen/util/parallel.hpp"

namespace shapegen::reconstruct {

// Smallest truncation order with the bias/noise balance tau * delta^(-2/(2+d)).
// Exact integers (up to round-off) are kept rather than bumped up.
inline int truncation_order(double delta, double tau, int d) {
    if (d != 2 && d != 3) throw config_error("truncation_order: d must be 2 or 3");
    if (!(delta > 0 && delta < 1)) throw domain_error("truncation_order: delta must be in (0,1)");
    if (!(tau >= d)) throw domain_error("truncation_order: tau must be >= d");
    double X = tau * std::pow(delta, -2.0 / (2.0 + d));
    double r = std::round(X);
    if (std::abs(X - r) < 1e-9 * std::max(1.0, std::abs(X))) X = r;
    return static_cast<int>(std::ceil(X));
}

// Overlap of the zero-frequency probe exp(-i k0 y1) with the lattice mode xi
// over the box [-a/2, a/2]^d; separability kills every mode with a transverse
// component.
inline double cross_term(const std::array<int, 3>& xi, int d, double a, double mu) {
    bool zero = true;
    for (int j = 0; j < d; ++j) zero = zero && xi[j] == 0;
    if (zero) throw domain_error("cross_term: xi = 0 is handled by the closure itself");
    for (int j = 1; j < d; ++j)
        if (xi[j] != 0) return 0.0;
    double sign = (xi[0] % 2 == 0) ? 1.0 : -1.0; // cos(pi xi1)
    return -std::pow(a, d) * sign * std::sin(mu * pi) / ((xi[0] - mu) * pi);
}

struct FourierCoefficients {
    farfield::AdmissibleSet adm;
    std::vector<complexd> c; // admissible ordering; the xi = 0 slot holds c0
};

// Divide out the scattering constant per mode, then close the zero mode with
// the probe equation. The correction sum runs in admissible order so results
// do not depend on scheduling.
inline FourierCoefficients fourier_coeffs(const farfield::ShapeGenerator& gen) {
    const auto& adm = gen.adm;
    if (gen.values.size() != adm.size())
        throw domain_error("fourier_coeffs: generator length mismatch");
    const double ad = std::pow(adm.a, adm.d);
    FourierCoefficients fc{adm, std::vector<complexd>(adm.size())};
    const std::size_t zero_slot = adm.index_of({0, 0, 0});
    for (std::size_t i = 0; i < adm.size(); ++i) {
        if (i == zero_slot) continue;
        fc.c[i] = gen.values[i] / (ad * farfield::c_const(adm.d, adm.entries[i].k));
    }
    complexd correction{};
    for (std::size_t i = 0; i < adm.size(); ++i) {
        if (i == zero_slot) continue;
        double w = cross_term(adm.entries[i].xi, adm.d, adm.a, adm.mu);
        if (w != 0.0) correction += fc.c[i] * w;
    }
    const complexd probe = gen.values[zero_slot] / farfield::c_const(adm.d, adm.entries[zero_slot].k);
    fc.c[zero_slot] = (adm.mu * pi / (ad * std::sin(adm.mu * pi))) * (probe - correction);
    return fc;
}

struct Field {
    int d = 2;
    double a = 0;
    std::size_t res = 0;         // cells per axis, values at cell centers
    std::vector<double> values;  // Re f, row-major with x1 slowest, size res^d
    double im_ratio = 0;         // l2(Im f) / l2(Re f), diagnostic
};

inline double grid_coord(double a, std::size_t res, std::size_t m) {
    return -a / 2 + a * (m + 0.5) / res;
}

// Direct trigonometric sum at one point, used to cross-check the factored
// evaluator.
inline complexd field_value_direct(const FourierCoefficients& fc, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != fc.adm.d)
        throw domain_error("field_value_direct: dimension mismatch");
    complexd s{};
    for (std::size_t i = 0; i < fc.adm.size(); ++i) {
        double phase = 0;
        for (int j = 0; j < fc.adm.d; ++j)
            phase += (2 * pi / fc.adm.a) * fc.adm.entries[i].xi[j] * x[j];
        s += fc.c[i] * std::polar(1.0, phase);
    }
    return s;
}

// Factored tensor evaluation: contract one lattice axis at a time against a
// per-axis phase table. Each output element is a fixed-order sum, so the
// result is independent of the thread count.
inline Field evaluate_field(const FourierCoefficients& fc, std::size_t res) {
    if (res < 16) throw config_error("evaluate_field: resolution must be >= 16");
    const int d = fc.adm.d, N = fc.adm.N;
    const std::size_t n = 2 * static_cast<std::size_t>(N) + 1;
    const double a = fc.adm.a;
    if (fc.c.size() != fc.adm.size()) throw domain_error("evaluate_field: coefficient length");

    std::vector<complexd> phase(res * n);
    for (std::size_t m = 0; m < res; ++m)
        for (std::size_t t = 0; t < n; ++t)
            phase[m * n + t] =
                std::polar(1.0, (2 * pi / a) * (static_cast<double>(t) - N) * grid_coord(a, res, m));

    std::vector<complexd> cur(fc.c);
    for (int axis = 0; axis < d; ++axis) {
        const std::size_t rest = cur.size() / n;
        std::vector<complexd> next(rest * res);
        util::parallel_for(res, [&](std::size_t m) {
            const complexd* P = &phase[m * n];
            for (std::size_t r = 0; r < rest; ++r) {
                complexd s{};
                for (std::size_t t = 0; t < n; ++t) s += cur[t * rest + r] * P[t];
                next[r * res + m] = s;
            }
        });
        cur = std::move(next);
    }

    Field f{d, a, res, std::vector<double>(cur.size()), 0.0};
    double re2 = 0, im2 = 0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
        f.values[i] = cur[i].real();
        re2 += cur[i].real() * cur[i].real();
        im2 += cur[i].imag() * cur[i].imag();
    }
    f.im_ratio = re2 > 0 ? std::sqrt(im2 / re2) : std::sqrt(im2);
    return f;
}

// ---- level-set extraction --------------------------------------------------

struct IsoContour {
    std::vector<std::vector<geometry::Vec2>> loops;
    std::vector<bool> closed; // chains hitting the grid border stay open
};

struct TriMesh {
    std::vector<std::array<geometry::Vec3, 3>> tris;
};

namespace detail {

// contour vertices live on grid edges; key them so segments can be stitched
inline long long edge_key(std::size_t res, std::size_t i, std::size_t j, bool along_x1) {
    return (static_cast<long long>(i * res + j) << 1) | (along_x1 ? 0 : 1);
}

} // namespace detail

inline IsoContour marching_squares(const Field& f, double level) {
    if (f.d != 2) throw domain_error("marching_squares: 2-d field required");
    const std::size_t res = f.res;
    auto val = [&](std::size_t i, std::size_t j) { return f.values[i * res + j]; };
    auto px = [&](std::size_t m) { return grid_coord(f.a, res, m); };

    std::unordered_map<long long, geometry::Vec2> pts;
    std::unordered_map<long long, std::vector<long long>> adj;
    auto crossing = [&](std::size_t i1, std::size_t j1, std::size_t i2, std::size_t j2,
                        bool along_x1) {
        double v1 = val(i1, j1), v2 = val(i2, j2);
        double t = (level - v1) / (v2 - v1);
        geometry::Vec2 p{px(i1) + t * (px(i2) - px(i1)), px(j1) + t * (px(j2) - px(j1))};
        long long key = detail::edge_key(res, i1, j1, along_x1);
        pts[key] = p;
        return key;
    };
    auto add_segment = [&](long long ka, long long kb) {
        adj[ka].push_back(kb);
        adj[kb].push_back(ka);
    };

    for (std::size_t i = 0; i + 1 < res; ++i)
        for (std::size_t j = 0; j + 1 < res; ++j) {
            // corners in cyclic order with their separating edges
            const bool b0 = val(i, j) >= level, b1 = val(i + 1, j) >= level,
                       b2 = val(i + 1, j + 1) >= level, b3 = val(i, j + 1) >= level;
            int inside = b0 + b1 + b2 + b3;
            if (inside == 0 || inside == 4) continue;

            auto e01 = [&] { return crossing(i, j, i + 1, j, true); };
            auto e12 = [&] { return crossing(i + 1, j, i + 1, j + 1, false); };
            auto e23 = [&] { return crossing(i, j + 1, i + 1, j + 1, true); };
            auto e30 = [&] { return crossing(i, j, i, j + 1, false); };

            if (b0 == b2 && b1 == b3) { // saddle: the cell center arbitrates
                double centre = (val(i, j) + val(i + 1, j) + val(i + 1, j + 1) + val(i, j + 1)) / 4;
                if ((centre >= level) == b0) {
                    add_segment(e01(), e12());
                    add_segment(e23(), e30());
                } else {
                    add_segment(e30(), e01());
                    add_segment(e12(), e23());
                }
            } else {
                long long keys[4];
                int nk = 0;
                if (b0 != b1) keys[nk++] = e01();
                if (b1 != b2) keys[nk++] = e12();
                if (b2 != b3) keys[nk++] = e23();
                if (b3 != b0) keys[nk++] = e30();
                add_segment(keys[0], keys[1]);
            }
        }

    IsoContour out;
    std::unordered_map<long long, bool> used;
    for (auto& [key, nb] : adj) {
        if (used[key]) continue;
        // walk to one end of the chain (or all the way around a loop)
        long long start = key;
        long long prev = -1, curk = key;
        while (true) {
            const auto& nn = adj[curk];
            long long nxt = -1;
            for (long long cand : nn)
                if (cand != prev) {
                    nxt = cand;
                    break;
                }
            if (nn.size() < 2 || nxt == -1) break; // open end
            prev = curk;
            curk = nxt;
            if (curk == start) break; // closed loop
        }
        bool is_loop = (curk == start && prev != -1);
        long long head = is_loop ? start : curk;
        std::vector<geometry::Vec2> chain;
        prev = -1;
        curk = head;
        while (curk != -1 && !used[curk]) {
            used[curk] = true;
            chain.push_back(pts[curk]);
            const auto& nn = adj[curk];
            long long nxt = -1;
            for (long long cand : nn)
                if (cand != prev && !used[cand]) {
                    nxt = cand;
                    break;
                }
            prev = curk;
            curk = nxt;
        }
        if (chain.size() >= 2) {
            out.loops.push_back(std::move(chain));
            out.closed.push_back(is_loop);
        }
    }
    return out;
}

inline TriMesh marching_cubes(const Field& f, double level) {
    if (f.d != 3) throw domain_error("marching_cubes: 3-d field required");
    const std::size_t res = f.res;
    auto val = [&](std::size_t i, std::size_t j, std::size_t k) {
        return f.values[(i * res + j) * res + k];
    };
    auto pxm = [&](std::size_t m) { return grid_coord(f.a, res, m); };

    TriMesh mesh;
    // per-slab parallelism with deterministic concatenation
    std::vector<std::vector<std::array<geometry::Vec3, 3>>> slabs(res - 1);
    util::parallel_for(res - 1, [&](std::size_t i) {
        auto& out = slabs[i];
        for (std::size_t j = 0; j + 1 < res; ++j)
            for (std::size_t k = 0; k + 1 < res; ++k) {
                const std::size_t ci[8][3] = {{i, j, k},         {i + 1, j, k},
                                              {i + 1, j, k + 1}, {i, j, k + 1},
                                              {i, j + 1, k},     {i + 1, j + 1, k},
                                              {i + 1, j + 1, k + 1}, {i, j + 1, k + 1}};
                double v[8];
                int cubeindex = 0;
                for (int c = 0; c < 8; ++c) {
                    v[c] = val(ci[c][0], ci[c][1], ci[c][2]);
                    if (v[c] < level) cubeindex |= 1 << c;
                }
                const signed char* row = detail::tri_table[cubeindex];
                if (row[0] == -1) continue;
                geometry::Vec3 ev[12];
                bool have[12] = {};
                auto edge_point = [&](int e) {
                    if (have[e]) return ev[e];
                    const int a = detail::edge_corner[e][0], b = detail::edge_corner[e][1];
                    double t = (level - v[a]) / (v[b] - v[a]);
                    geometry::Vec3 pa{pxm(ci[a][0]), pxm(ci[a][1]), pxm(ci[a][2])};
                    geometry::Vec3 pb{pxm(ci[b][0]), pxm(ci[b][1]), pxm(ci[b][2])};
                    ev[e] = {pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y),
                             pa.z + t * (pb.z - pa.z)};
                    have[e] = true;
                    return ev[e];
                };
                for (int n = 0; row[n] != -1; n += 3)
                    out.push_back({edge_point(row[n]), edge_point(row[n + 1]),
                                   edge_point(row[n + 2])});
            }
    });
    for (auto& s : slabs)
        mesh.tris.insert(mesh.tris.end(), s.begin(), s.end());
    return mesh;
}

// |signed volume| of a closed triangle mesh via the divergence theorem
inline double mesh_volume(const TriMesh& mesh) {
    double six_v = 0;
    for (const auto& t : mesh.tris) {
        const auto& p = t[0];
        const auto& q = t[1];
        const auto& r = t[2];
        six_v += p.x * (q.y * r.z - q.z * r.y) - p.y * (q.x * r.z - q.z * r.x) +
                 p.z * (q.x * r.y - q.y * r.x);
    }
    return std::abs(six_v) / 6.0;
}

// 4-neighbour (2-d) / 6-neighbour (3-d) labelling of the above-level mask;
// labels are -1 outside, 0..count-1 inside
inline std::pair<std::vector<int>, int> label_components(const std::vector<std::uint8_t>& mask,
                                                         std::size_t res, int d) {
    std::vector<int> label(mask.size(), -1);
    int count = 0;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < mask.size(); ++seed) {
        if (!mask[seed] || label[seed] != -1) continue;
        label[seed] = count;
        stack.assign(1, seed);
        while (!stack.empty()) {
            std::size_t cur = stack.back();
            stack.pop_back();
            std::size_t rem = cur;
            std::size_t idx[3] = {0, 0, 0};
            for (int j = d; j-- > 0;) {
                idx[j] = rem % res;
                rem /= res;
            }
            for (int j = 0; j < d; ++j) {
                std::size_t stride = 1;
                for (int q = j + 1; q < d; ++q) stride *= res;
                for (int step : {-1, 1}) {
                    if (step < 0 && idx[j] == 0) continue;
                    if (step > 0 && idx[j] + 1 == res) continue;
                    std::size_t nb = step < 0 ? cur - stride : cur + stride;
                    if (mask[nb] && label[nb] == -1) {
                        label[nb] = count;
                        stack.push_back(nb);
                    }
                }
            }
        }
        ++count;
    }
    return {std::move(label), count};
}

struct ExtractedShape {
    int d = 2;
    double level = 0.5;
    std::vector<std::uint8_t> mask; // field >= level, per grid cell
    int components = 0;
    IsoContour contour; // 2-d only
    TriMesh mesh;       // 3-d only
};

inline ExtractedShape extract_shape(const Field& f, double level) {
    ExtractedShape ex;
    ex.d = f.d;
    ex.level = level;
    ex.mask.resize(f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) ex.mask[i] = f.values[i] >= level ? 1 : 0;
    ex.components = label_components(ex.mask, f.res, f.d).second;
    if (f.d == 2)
        ex.contour = marching_squares(f, level);
    else
        ex.mesh = marching_cubes(f, level);
    return ex;
}

// ---- comparison against a known body ---------------------------------------

struct Metrics {
    double l2_field = 0;   // ||f - chi|| / ||chi|| over the grid
    double jaccard = 0;    // cell-counting overlap of {f >= level} and the body
    double hausdorff = 0;  // symmetric boundary distance, 2-d only (NaN in 3-d)
    int components = 0;
    double measure = 0;    // cell count times cell volume
    double im_ratio = 0;
};

namespace detail {

inline double dist_point_segment(const geometry::Vec2& p, const geometry::Vec2& a,
                                 const geometry::Vec2& b) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double L2 = vx * vx + vy * vy;
    double t = L2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / L2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

struct SegmentSet {
    std::vector<geometry::Vec2> pts;                       // dense samples
    std::vector<std::array<geometry::Vec2, 2>> segments;   // for exact distances

    void add_polyline(const std::vector<geometry::Vec2>& poly, bool closed) {
        for (std::size_t i = 0; i < poly.size(); ++i) {
            pts.push_back(poly[i]);
            if (i + 1 < poly.size()) segments.push_back({poly[i], poly[i + 1]});
        }
        if (closed && poly.size() >= 2) segments.push_back({poly.back(), poly.front()});
    }
};

inline double directed_hausdorff(const SegmentSet& from, const SegmentSet& to) {
    double worst = 0;
    std::vector<double> partial(from.pts.size());
    util::parallel_for(from.pts.size(), [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : to.segments)
            best = std::min(best, dist_point_segment(from.pts[i], s[0], s[1]));
        partial[i] = best;
    });
    for (double v : partial) worst = std::max(worst, v);
    return worst;
}

inline SegmentSet truth_boundary(const geometry::ShapeSpec& truth, std::size_t n) {
    SegmentSet set;
    if (truth.kind == geometry::ShapeKind::MultiDomain) {
        for (const auto& comp : truth.components)
            set.add_polyline(geometry::boundary_polyline(comp, n), true);
    } else {
        set.add_polyline(geometry::boundary_polyline(truth, n), true);
    }
    return set;
}

} // namespace detail

inline Metrics error_metrics(const Field& f, const geometry::ShapeSpec& truth, double level) {
    if (truth.dim() != f.d) throw domain_error("error_metrics: dimension mismatch");
    Metrics m;
    m.im_ratio = f.im_ratio;

    const std::size_t res = f.res;
    std::vector<std::uint8_t> mask(f.values.size()), chi(f.values.size());
    double num = 0, den = 0;
    std::size_t inter = 0, uni = 0, inside = 0;
    std::vector<double> x(f.d);
    std::vector<std::size_t> idx(f.d, 0);
    for (std::size_t cell = 0; cell < f.values.size(); ++cell) {
        std::size_t rem = cell;
        for (int j = f.d; j-- > 0;) {
            idx[j] = rem % res;
            rem /= res;
        }
        for (int j = 0; j < f.d; ++j) x[j] = grid_coord(f.a, res, idx[j]);
        bool in_truth = geometry::indicator(truth, x) != 0.0;
        chi[cell] = in_truth;
        mask[cell] = f.values[cell] >= level;
        double diff = f.values[cell] - (in_truth ? 1.0 : 0.0);
        num += diff * diff;
        den += in_truth ? 1.0 : 0.0;
        inter += (mask[cell] && chi[cell]);
        uni += (mask[cell] || chi[cell]);
        inside += mask[cell];
    }
    m.l2_field = den > 0 ? std::sqrt(num / den) : std::numeric_limits<double>::quiet_NaN();
    m.jaccard = inside == 0 ? 0.0 : (uni ? static_cast<double>(inter) / uni : 0.0);
    m.measure = inside * std::pow(f.a / res, f.d);
    m.components = label_components(mask, res, f.d).second;

    if (f.d != 2) {
        m.hausdorff = std::numeric_limits<double>::quiet_NaN();
    } else if (inside == 0) {
        m.hausdorff = f.a * std::sqrt(2.0);
    } else {
        auto contour = marching_squares(f, level);
        detail::SegmentSet pred;
        for (std::size_t l = 0; l < contour.loops.size(); ++l)
            pred.add_polyline(contour.loops[l], contour.closed[l]);
        auto tset = detail::truth_boundary(truth, 4096);
        m.hausdorff = std::max(detail::directed_hausdorff(pred, tset),
                               detail::directed_hausdorff(tset, pred));
    }
    return m;
}

} // namespace shapegen::reconstruct
