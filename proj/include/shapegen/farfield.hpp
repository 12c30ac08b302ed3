#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "shapegen/core.hpp"
#include "shapegen/geometry.hpp"
#include "shapegen/util/parallel.hpp"
#include "shapegen/util/rng.hpp"

namespace shapegen::farfield {

struct AdmissibleEntry {
    std::array<int, 3> xi{};      // first d components used
    double k = 0;
    std::array<double, 3> xhat{};
};

// Frequency lattice |xi|_inf <= N in lexicographic order (xi1 slowest, each
// component -N..N). The xi=0 slot carries (k0, e1) = (2*pi*mu/a, (1,0,..)).
// This ordering is the in-memory and file-format contract.
struct AdmissibleSet {
    int d = 2;
    double a = 1;
    double mu = 0.1;
    int N = 1;
    std::vector<AdmissibleEntry> entries;

    std::size_t size() const { return entries.size(); }

    std::size_t index_of(const std::array<int, 3>& xi) const {
        std::size_t idx = 0;
        for (int j = 0; j < d; ++j) idx = idx * (2 * N + 1) + static_cast<std::size_t>(xi[j] + N);
        return idx;
    }
};

inline AdmissibleSet admissible_set(int d, double a, double mu, int N) {
    if (d != 2 && d != 3) throw config_error("admissible_set: d must be 2 or 3");
    if (a <= 0) throw config_error("admissible_set: a must be positive");
    if (mu <= 0 || mu >= 1) throw config_error("admissible_set: mu must lie in (0, 1)");
    if (N < 1) throw config_error("admissible_set: N must be >= 1");
    AdmissibleSet s{d, a, mu, N, {}};
    std::size_t count = 1;
    for (int j = 0; j < d; ++j) count *= 2 * N + 1;
    s.entries.resize(count);
    std::array<int, 3> xi{};
    auto fill = [&](auto&& self, int axis) -> void {
        if (axis == d) {
            AdmissibleEntry e;
            e.xi = xi;
            double norm2 = 0;
            for (int j = 0; j < d; ++j) norm2 += double(xi[j]) * xi[j];
            if (norm2 == 0) {
                e.k = 2 * pi * mu / a;
                e.xhat = {1, 0, 0};
            } else {
                double norm = std::sqrt(norm2);
                e.k = 2 * pi * norm / a;
                for (int j = 0; j < d; ++j) e.xhat[j] = xi[j] / norm;
            }
            s.entries[s.index_of(xi)] = e;
            return;
        }
        for (int v = -N; v <= N; ++v) {
            xi[axis] = v;
            self(self, axis + 1);
        }
    };
    fill(fill, 0);
    return s;
}

// C_{d,k} = (-i/sqrt(8*pi)) * (k/(2*pi))^((d-2)/2) * exp(-(d-1)*pi*i/4)
inline complexd c_const(int d, double k) {
    if (k <= 0) throw domain_error("c_const: k must be positive");
    double amp = std::pow(k / (2 * pi), (d - 2) / 2.0) / std::sqrt(8 * pi);
    return complexd(0, -1) * amp * std::exp(complexd(0, -(d - 1) * pi / 4));
}

struct QuadratureConfig {
    int cells = 1024;
    int refine = 0; // 0 = default: 128 in 2D, 2 in 3D
};

inline int effective_refine(const QuadratureConfig& q, int d) {
    if (q.refine > 0) return q.refine;
    return d == 2 ? 128 : 2;
}

struct ShapeGenerator {
    AdmissibleSet adm;
    std::vector<complexd> values; // one per admissible entry, same ordering
};

inline double l2_norm(const std::vector<complexd>& v) {
    double s = 0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

inline double rel_l2_diff(const std::vector<complexd>& a, const std::vector<complexd>& b) {
    if (a.size() != b.size()) throw domain_error("rel_l2_diff: length mismatch");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return den == 0 ? std::sqrt(num) : std::sqrt(num / den);
}

namespace detail {

// tab[N+j] = base^j for j >= 0, tab[N-j] = conj(tab[N+j]); the exact
// conjugate pairing is what makes I(-xi) = conj(I(xi)) hold bit-for-bit.
inline void power_table(complexd base, int N, complexd* tab) {
    tab[N] = complexd(1, 0);
    for (int j = 1; j <= N; ++j) {
        tab[N + j] = tab[N + j - 1] * base;
        tab[N - j] = std::conj(tab[N + j]);
    }
}

// psi(s) = i * (1 - e^{-is}) / (is); eS must equal e^{-is}.
inline complexd psi_of(double s, complexd eS) {
    if (std::abs(s) < 1e-4) {
        double s2 = s * s;
        return complexd(s / 2 - s * s2 / 24, 1 - s2 / 6 + s2 * s2 / 120);
    }
    double inv = 1.0 / s;
    return complexd((1.0 - eS.real()) * inv, -eS.imag() * inv);
}

// Exact Fourier transform of a polygon union via the divergence theorem:
//   integral_D e^{-iW.y} dy = sum_edges i (W1*dy - W2*dx)/|W|^2 e^{-iW.A} phi(W.delta)
// Loops must be counterclockwise. The only approximation is the polygon
// itself (curved boundaries are polygonized by the caller).
inline std::vector<complexd> integrals_poly_2d(const std::vector<std::vector<geometry::Vec2>>& loops,
                                               const AdmissibleSet& adm) {
    const int N = adm.N;
    const double a = adm.a;
    const double t = 2 * pi / a;
    const double k0 = 2 * pi * adm.mu / a;

    struct Edge {
        double ax, ay, dx, dy;
    };
    std::vector<Edge> edges;
    for (const auto& loop : loops)
        for (std::size_t i = 0; i < loop.size(); ++i) {
            const auto& p = loop[i];
            const auto& q = loop[(i + 1) % loop.size()];
            edges.push_back({p.x, p.y, q.x - p.x, q.y - p.y});
        }

    // half lattice (xi2 > 0, or xi2 = 0 and xi1 > 0); mirrors come for free
    struct HalfEntry {
        int x1, x2;
        double g; // (a/2pi) / |xi|^2
    };
    std::vector<HalfEntry> half;
    for (int x2 = 0; x2 <= N; ++x2)
        for (int x1 = (x2 == 0 ? 1 : -N); x1 <= N; ++x1)
            half.push_back({x1, x2, a / (2 * pi) / (double(x1) * x1 + double(x2) * x2)});
    const std::size_t S = half.size() + 1; // trailing slot: xi = 0

    const std::size_t BS = 2048; // edges per block; fixed so the reduction
                                 // tree does not depend on the thread count
    const std::size_t nb = (edges.size() + BS - 1) / BS;
    std::vector<std::vector<complexd>> partials(nb);
    util::parallel_for(nb, [&](std::size_t b) {
        std::vector<complexd> acc(S, complexd{});
        std::vector<complexd> pax(2 * N + 1), pay(2 * N + 1), pdx(2 * N + 1), pdy(2 * N + 1);
        const std::size_t lo = b * BS, hi = std::min(edges.size(), lo + BS);
        for (std::size_t e = lo; e < hi; ++e) {
            const Edge& ed = edges[e];
            power_table(std::polar(1.0, -t * ed.ax), N, pax.data());
            power_table(std::polar(1.0, -t * ed.ay), N, pay.data());
            power_table(std::polar(1.0, -t * ed.dx), N, pdx.data());
            power_table(std::polar(1.0, -t * ed.dy), N, pdy.data());
            for (std::size_t h = 0; h < half.size(); ++h) {
                const HalfEntry& he = half[h];
                complexd E = pax[N + he.x1] * pay[N + he.x2];
                complexd eS = pdx[N + he.x1] * pdy[N + he.x2];
                double s = t * (he.x1 * ed.dx + he.x2 * ed.dy);
                double coef = he.g * (he.x1 * ed.dy - he.x2 * ed.dx);
                acc[h] += coef * (E * psi_of(s, eS));
            }
            double s0 = k0 * ed.dx;
            complexd E0 = std::polar(1.0, -k0 * ed.ax);
            acc[S - 1] += (ed.dy / k0) * (E0 * psi_of(s0, std::polar(1.0, -s0)));
        }
        partials[b] = std::move(acc);
    });
    std::vector<complexd> sums = util::tree_sum_columns(partials);

    std::vector<complexd> I(adm.size());
    for (std::size_t h = 0; h < half.size(); ++h) {
        const HalfEntry& he = half[h];
        I[adm.index_of({he.x1, he.x2, 0})] = sums[h];
        I[adm.index_of({-he.x1, -he.x2, 0})] = std::conj(sums[h]);
    }
    I[adm.index_of({0, 0, 0})] = sums[S - 1];
    return I;
}

inline complexd box_axis_integral(double W, double c, double w) {
    if (W == 0) return complexd(w, 0);
    double h = W * w / 2;
    double mag = w * std::sin(h) / h;
    return complexd(mag * std::cos(W * c), -mag * std::sin(W * c));
}

// Boxes are separable: the transform is an exact product of 1D integrals.
inline std::vector<complexd> integrals_box_3d(const geometry::ShapeSpec& shape,
                                              const AdmissibleSet& adm) {
    const int N = adm.N;
    const double t = 2 * pi / adm.a;
    const double k0 = 2 * pi * adm.mu / adm.a;
    const double* c = shape.center.data();
    const double* w = shape.params.data();
    std::vector<complexd> I(adm.size());
    for (int x3 = 0; x3 <= N; ++x3)
        for (int x2 = -N; x2 <= N; ++x2)
            for (int x1 = -N; x1 <= N; ++x1) {
                if (x3 == 0 && (x2 < 0 || (x2 == 0 && x1 < 0))) continue;
                if (x1 == 0 && x2 == 0 && x3 == 0) continue;
                complexd v = box_axis_integral(t * x1, c[0], w[0]) *
                             box_axis_integral(t * x2, c[1], w[1]) *
                             box_axis_integral(t * x3, c[2], w[2]);
                I[adm.index_of({x1, x2, x3})] = v;
                I[adm.index_of({-x1, -x2, -x3})] = std::conj(v);
            }
    I[adm.index_of({0, 0, 0})] = box_axis_integral(k0, c[0], w[0]) * w[1] * w[2];
    return I;
}

// z-run primitives of a 3D shape: ellipsoids (mannequin parts) and boxes.
struct RunSource {
    std::vector<geometry::Ellipsoid> ells;
    struct BoxPrim {
        double cx, cy, cz, hx, hy, hz;
    };
    std::vector<BoxPrim> boxes;
};

inline void collect_run_source(const geometry::ShapeSpec& shape, RunSource& src) {
    using geometry::ShapeKind;
    switch (shape.kind) {
        case ShapeKind::Mannequin: {
            auto parts = geometry::mannequin_parts(shape);
            src.ells.insert(src.ells.end(), parts.begin(), parts.end());
            return;
        }
        case ShapeKind::Box:
            src.boxes.push_back({shape.center[0], shape.center[1], shape.center[2],
                                 shape.params[0] / 2, shape.params[1] / 2, shape.params[2] / 2});
            return;
        case ShapeKind::MultiDomain:
            for (const auto& comp : shape.components) collect_run_source(comp, src);
            return;
        default: throw domain_error("farfield: unsupported 3D kind " + kind_name(shape.kind));
    }
}

inline int source_column_runs(const RunSource& src, double x, double y, double* out) {
    double raw[64];
    int m = 0;
    for (const auto& e : src.ells) {
        double qx = (x - e.c.x) / e.s.x;
        double qy = (y - e.c.y) / e.s.y;
        double q = 1.0 - qx * qx - qy * qy;
        if (q <= 0) continue;
        double half = e.s.z * std::sqrt(q);
        raw[2 * m] = e.c.z - half;
        raw[2 * m + 1] = e.c.z + half;
        ++m;
    }
    for (const auto& b : src.boxes) {
        if (std::abs(x - b.cx) > b.hx || std::abs(y - b.cy) > b.hy) continue;
        raw[2 * m] = b.cz - b.hz;
        raw[2 * m + 1] = b.cz + b.hz;
        ++m;
    }
    return geometry::merge_intervals(raw, m, out);
}

// Midpoint columns over (x, y), exact z-integral per merged run. Work is
// split by x-slice; each slice owns its partial table, and the final
// slice-order sum is sequential, so the result is thread-count invariant.
inline std::vector<complexd> integrals_columns_3d(const RunSource& src, const AdmissibleSet& adm,
                                                  int G) {
    const int N = adm.N;
    const double a = adm.a;
    const double t = 2 * pi / a;
    const double k0 = 2 * pi * adm.mu / a;
    const int n2 = 2 * N + 1, n3 = N + 1;

    std::vector<double> inv_w3(n3, 0.0);
    for (int j = 1; j <= N; ++j) inv_w3[j] = 1.0 / (t * j);

    std::vector<std::vector<complexd>> B(G); // per slice: (xi2, xi3 >= 0)
    std::vector<double> S(G, 0.0);           // per slice: run-length sums (xi = 0)

    util::parallel_for(static_cast<std::size_t>(G), [&](std::size_t is) {
        const int i = static_cast<int>(is);
        const double x = -a / 2 + a * (i + 0.5) / G;
        std::vector<complexd> Bx(static_cast<std::size_t>(n2) * n3, complexd{});
        std::vector<complexd> py(n2), runsum(n3);
        double Sx = 0;
        double runs[64];
        for (int j = 0; j < G; ++j) {
            const double y = -a / 2 + a * (j + 0.5) / G;
            int m = source_column_runs(src, x, y, runs);
            if (m == 0) continue;
            double len = 0;
            for (int q = 1; q < n3; ++q) runsum[q] = complexd{};
            for (int r = 0; r < m; ++r) {
                const double z0 = runs[2 * r], z1 = runs[2 * r + 1];
                len += z1 - z0;
                const complexd q0 = std::polar(1.0, -t * z0);
                const complexd q1 = std::polar(1.0, -t * z1);
                complexd p0 = q0, p1 = q1;
                for (int q = 1; q < n3; ++q) {
                    runsum[q] += complexd((p0.imag() - p1.imag()) * inv_w3[q],
                                          -(p0.real() - p1.real()) * inv_w3[q]);
                    p0 *= q0;
                    p1 *= q1;
                }
            }
            runsum[0] = complexd(len, 0);
            Sx += len;
            power_table(std::polar(1.0, -t * y), N, py.data());
            for (int x2 = -N; x2 <= N; ++x2) {
                const complexd w = py[N + x2];
                complexd* row = &Bx[static_cast<std::size_t>(x2 + N) * n3];
                for (int q = 0; q < n3; ++q) row[q] += w * runsum[q];
            }
        }
        B[is] = std::move(Bx);
        S[is] = Sx;
    });

    // sequential assembly over slices
    std::vector<complexd> acc(static_cast<std::size_t>(n2) * n2 * n3, complexd{});
    std::vector<complexd> px(n2);
    complexd acc0{};
    for (int i = 0; i < G; ++i) {
        const double x = -a / 2 + a * (i + 0.5) / G;
        power_table(std::polar(1.0, -t * x), N, px.data());
        const complexd* Bx = B[i].data();
        for (int x1 = -N; x1 <= N; ++x1) {
            const complexd w = px[N + x1];
            complexd* dst = &acc[static_cast<std::size_t>(x1 + N) * n2 * n3];
            for (std::size_t q = 0; q < static_cast<std::size_t>(n2) * n3; ++q) dst[q] += w * Bx[q];
        }
        acc0 += std::polar(1.0, -k0 * x) * S[i];
    }

    const double dA = (a / G) * (a / G);
    std::vector<complexd> I(adm.size());
    for (int x1 = -N; x1 <= N; ++x1)
        for (int x2 = -N; x2 <= N; ++x2)
            for (int x3 = 0; x3 <= N; ++x3) {
                complexd v = dA * acc[(static_cast<std::size_t>(x1 + N) * n2 + (x2 + N)) * n3 + x3];
                I[adm.index_of({x1, x2, x3})] = v;
                if (x3 > 0) I[adm.index_of({-x1, -x2, -x3})] = std::conj(v);
            }
    I[adm.index_of({0, 0, 0})] = dA * acc0;
    return I;
}

inline std::vector<complexd> integrals_columns_3d(const geometry::ShapeSpec& shape,
                                                  const AdmissibleSet& adm, int G) {
    RunSource src;
    collect_run_source(shape, src);
    return integrals_columns_3d(src, adm, G);
}

} // namespace detail

// Shape generator u_inf(xhat, k; chi_D) on the admissible set: C_{d,k} times
// the de-normalized integral over D, computed by the kind-appropriate engine.
inline ShapeGenerator farfield(const geometry::ShapeSpec& shape, const AdmissibleSet& adm,
                               const QuadratureConfig& quad = {}) {
    geometry::validate(shape);
    if (shape.dim() != adm.d) throw domain_error("farfield: shape/admissible dimension mismatch");
    if (quad.cells < 16) throw config_error("farfield: quadrature resolution < 16 cells/axis");
    geometry::require_support_in_box(shape, adm.a);

    const int n = quad.cells * effective_refine(quad, adm.d);
    std::vector<complexd> I;
    if (adm.d == 2) {
        I = detail::integrals_poly_2d(geometry::polygon_loops(shape, n), adm);
    } else if (shape.kind == geometry::ShapeKind::Box) {
        I = detail::integrals_box_3d(shape, adm);
    } else {
        I = detail::integrals_columns_3d(shape, adm, n);
    }

    ShapeGenerator gen{adm, std::vector<complexd>(adm.size())};
    for (std::size_t e = 0; e < adm.size(); ++e)
        gen.values[e] = c_const(adm.d, adm.entries[e].k) * I[e];
    return gen;
}

// Complex Gaussian perturbation rescaled so ||noise||_2 = delta * ||values||_2
// exactly; deterministic per seed.
inline ShapeGenerator add_noise(const ShapeGenerator& gen, double delta, std::uint64_t seed) {
    if (delta < 0) throw config_error("add_noise: delta must be >= 0");
    ShapeGenerator out = gen;
    if (delta == 0) return out;
    util::NormalSampler normal(seed);
    std::vector<complexd> p(gen.values.size());
    for (auto& z : p) {
        double re = normal();
        double im = normal();
        z = complexd(re, im);
    }
    double pn = l2_norm(p);
    if (pn == 0) return out;
    double scale = delta * l2_norm(gen.values) / pn;
    for (std::size_t i = 0; i < p.size(); ++i) out.values[i] += scale * p[i];
    return out;
}

} // namespace shapegen::farfield
