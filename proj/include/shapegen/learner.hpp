#pragma once

#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include "shapegen/core.hpp"
#include "shapegen/farfield.hpp"
#include "shapegen/util/parallel.hpp"

namespace shapegen::learner {

struct GridAxis {
    std::string label;
    std::vector<double> knots; // strictly increasing, >= 2
    bool uniform = false;
    double h = 0; // spacing when uniform
};

inline GridAxis make_axis(std::string label, std::vector<double> knots) {
    if (knots.size() < 2) throw config_error("grid axis needs >= 2 knots");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1]))
            throw config_error("grid axis knots must be strictly increasing");
    GridAxis ax{std::move(label), std::move(knots), false, 0};
    const double a = ax.knots.front(), b = ax.knots.back();
    const double h = (b - a) / (ax.knots.size() - 1);
    bool uniform = true;
    for (std::size_t g = 0; g < ax.knots.size(); ++g)
        if (std::abs(ax.knots[g] - (a + g * h)) > 1e-12 * std::max(1.0, std::abs(b - a)))
            uniform = false;
    ax.uniform = uniform;
    ax.h = uniform ? h : 0;
    return ax;
}

struct CharacteristicGrid {
    std::vector<GridAxis> axes;

    std::size_t node_count() const {
        std::size_t n = 1;
        for (const auto& ax : axes) n *= ax.knots.size();
        return n;
    }
    // row-major node index, axis 0 slowest
    std::size_t node_index(const std::vector<std::size_t>& g) const {
        std::size_t idx = 0;
        for (std::size_t j = 0; j < axes.size(); ++j) idx = idx * axes[j].knots.size() + g[j];
        return idx;
    }
};

struct CharacteristicPoint {
    std::vector<double> values; // one per grid axis, in axis order
};

struct TrainingDataset {
    CharacteristicGrid grid;
    farfield::AdmissibleSet adm;
    // node-major (grid row-major order), each entry one generator's values
    std::vector<std::vector<complexd>> tensor;
};

enum class BasisKind { NonUniform, Cardinal }; // Learning Models I and II

inline std::string basis_name(BasisKind b) {
    return b == BasisKind::NonUniform ? "nonuniform" : "cardinal";
}
inline BasisKind basis_from_name(const std::string& s) {
    if (s == "nonuniform") return BasisKind::NonUniform;
    if (s == "cardinal") return BasisKind::Cardinal;
    throw config_error("unknown basis kind: " + s);
}

struct SplineModel {
    CharacteristicGrid grid;
    farfield::AdmissibleSet adm;
    BasisKind basis = BasisKind::NonUniform;
    // per admissible entry: flattened row-major coefficient tensor with
    // extents (knots_j + 2) per axis
    std::vector<std::vector<complexd>> coeffs;

    std::vector<std::size_t> coeff_extents() const {
        std::vector<std::size_t> e;
        for (const auto& ax : grid.axes) e.push_back(ax.knots.size() + 2);
        return e;
    }
};

// ---- bases ----------------------------------------------------------------

// 4-regular (clamped) cubic knot vector over the axis knots
inline std::vector<double> clamped_knot_vector(const std::vector<double>& knots) {
    std::vector<double> T;
    T.reserve(knots.size() + 6);
    for (int r = 0; r < 3; ++r) T.push_back(knots.front());
    T.insert(T.end(), knots.begin(), knots.end());
    for (int r = 0; r < 3; ++r) T.push_back(knots.back());
    return T;
}

// Cox-de Boor with the 0/0 := 0 convention; the last nonempty interval is
// treated as closed so the curve is defined at the right endpoint.
inline double bspline_basis(const std::vector<double>& T, int l, int degree, double x) {
    const int nb = static_cast<int>(T.size()) - degree - 1;
    if (l < 0 || l >= nb) throw domain_error("bspline_basis: index out of range");
    if (degree == 0) {
        if (T[l] <= x && x < T[l + 1]) return 1.0;
        if (x == T.back() && T[l] < T[l + 1] && T[l + 1] == T.back()) return 1.0;
        return 0.0;
    }
    double left = 0, right = 0;
    double dl = T[l + degree] - T[l];
    if (dl > 0) left = (x - T[l]) / dl * bspline_basis(T, l, degree - 1, x);
    double dr = T[l + degree + 1] - T[l + 1];
    if (dr > 0) right = (T[l + degree + 1] - x) / dr * bspline_basis(T, l + 1, degree - 1, x);
    return left + right;
}

// derivative recursion applied twice (degree 3 only)
inline double bspline_basis_d2(const std::vector<double>& T, int l, double x) {
    auto d1 = [&](int j, int degree) {
        double left = 0, right = 0;
        double dl = T[j + degree] - T[j];
        if (dl > 0) left = bspline_basis(T, j, degree - 1, x) / dl;
        double dr = T[j + degree + 1] - T[j + 1];
        if (dr > 0) right = bspline_basis(T, j + 1, degree - 1, x) / dr;
        return degree * (left - right);
    };
    double left = 0, right = 0;
    double dl = T[l + 3] - T[l];
    if (dl > 0) left = d1(l, 2) / dl;
    double dr = T[l + 4] - T[l + 1];
    if (dr > 0) right = d1(l + 1, 2) / dr;
    return 3 * (left - right);
}

// centered cardinal cubic, support [-2, 2]
inline double cardinal_b3(double t) {
    double u = std::abs(t);
    if (u <= 1) return (4 - 6 * u * u + 3 * u * u * u) / 6;
    if (u <= 2) {
        double v = 2 - u;
        return v * v * v / 6;
    }
    return 0.0;
}

inline double cardinal_b3_d2(double t) {
    double u = std::abs(t);
    if (u <= 1) return 3 * u - 2;
    if (u <= 2) return 2 - u;
    return 0.0;
}

namespace detail {

// value row (deriv2 = false) or second-derivative row of all m = knots+2
// basis functions at x
inline std::vector<double> basis_row(const GridAxis& ax, BasisKind kind, double x, bool deriv2) {
    const std::size_t m = ax.knots.size() + 2;
    std::vector<double> row(m, 0.0);
    if (kind == BasisKind::NonUniform) {
        std::vector<double> T = clamped_knot_vector(ax.knots);
        for (std::size_t j = 0; j < m; ++j)
            row[j] = deriv2 ? bspline_basis_d2(T, static_cast<int>(j), x)
                            : bspline_basis(T, static_cast<int>(j), 3, x);
    } else {
        const double a = ax.knots.front(), h = ax.h;
        const double t = (x - a) / h;
        for (std::size_t j = 0; j < m; ++j) {
            double arg = t - (static_cast<double>(j) - 1);
            row[j] = deriv2 ? cardinal_b3_d2(arg) / (h * h) : cardinal_b3(arg);
        }
    }
    return row;
}

// Banded LU with partial pivoting, LAPACK-style storage: entry (i, j) lives
// at ab[kl + ku + i - j][j]; pivoting fills in up to kl extra superdiagonals.
struct BandedLU {
    int n = 0, kl = 0, ku = 0;
    std::vector<double> ab; // (2*kl + ku + 1) rows by n cols, row-major here
    std::vector<int> piv;

    BandedLU(int n_, int kl_, int ku_) : n(n_), kl(kl_), ku(ku_) {
        ab.assign(static_cast<std::size_t>(2 * kl + ku + 1) * n, 0.0);
        piv.assign(n, 0);
    }
    double& at(int i, int j) { return ab[static_cast<std::size_t>(kl + ku + i - j) * n + j]; }
    double get(int i, int j) const {
        int r = kl + ku + i - j;
        if (r < 0 || r > 2 * kl + ku) return 0.0;
        return ab[static_cast<std::size_t>(r) * n + j];
    }

    void factor() {
        for (int j = 0; j < n; ++j) {
            int imax = j;
            double vmax = std::abs(get(j, j));
            for (int i = j + 1; i <= std::min(n - 1, j + kl); ++i)
                if (std::abs(get(i, j)) > vmax) {
                    vmax = std::abs(get(i, j));
                    imax = i;
                }
            piv[j] = imax;
            assert(vmax > 0 && "banded system must be nonsingular for increasing knots");
            if (vmax == 0) throw domain_error("fit: singular per-axis system");
            if (imax != j)
                for (int c = j; c <= std::min(n - 1, j + kl + ku); ++c)
                    std::swap(at(j, c), at(imax, c));
            for (int i = j + 1; i <= std::min(n - 1, j + kl); ++i) {
                double mlt = at(i, j) / at(j, j);
                at(i, j) = mlt;
                for (int c = j + 1; c <= std::min(n - 1, j + kl + ku); ++c)
                    at(i, c) -= mlt * at(j, c);
            }
        }
    }

    // real factors, complex right-hand side
    void solve(complexd* rhs) const {
        for (int j = 0; j < n; ++j) {
            if (piv[j] != j) std::swap(rhs[j], rhs[piv[j]]);
            for (int i = j + 1; i <= std::min(n - 1, j + kl); ++i) rhs[i] -= get(i, j) * rhs[j];
        }
        for (int j = n - 1; j >= 0; --j) {
            complexd s = rhs[j];
            for (int c = j + 1; c <= std::min(n - 1, j + kl + ku); ++c) s -= get(j, c) * rhs[c];
            rhs[j] = s / get(j, j);
        }
    }
};

// Per-axis collocation: row 0 and row m-1 impose S''(a) = S''(b) = 0, rows in
// between interpolate the knots. Bandwidth 2 both sides for cubics.
inline BandedLU axis_system(const GridAxis& ax, BasisKind kind) {
    const int m = static_cast<int>(ax.knots.size()) + 2;
    BandedLU lu(m, 2, 2);
    auto put_row = [&](int r, const std::vector<double>& row) {
        for (int j = 0; j < m; ++j) {
            if (row[j] == 0.0) continue;
            if (std::abs(j - r) > 2) throw domain_error("fit: basis row escapes the band");
            lu.at(r, j) = row[j];
        }
    };
    put_row(0, basis_row(ax, kind, ax.knots.front(), true));
    for (std::size_t i = 0; i < ax.knots.size(); ++i)
        put_row(static_cast<int>(i) + 1, basis_row(ax, kind, ax.knots[i], false));
    put_row(m - 1, basis_row(ax, kind, ax.knots.back(), true));
    lu.factor();
    return lu;
}

} // namespace detail

// Natural-spline tensor fit, one independent problem per admissible entry.
// Axes are processed in fixed order (axis 0 first); each pass replaces the
// node extent knots_j by the coefficient extent knots_j + 2.
inline SplineModel fit(const TrainingDataset& dataset, BasisKind kind) {
    const CharacteristicGrid& grid = dataset.grid;
    if (grid.axes.empty()) throw config_error("fit: empty grid");
    if (dataset.tensor.size() != grid.node_count())
        throw domain_error("fit: incomplete tensor (" + std::to_string(dataset.tensor.size()) +
                           " of " + std::to_string(grid.node_count()) + " nodes)");
    const std::size_t nvals = dataset.adm.size();
    for (const auto& gen : dataset.tensor)
        if (gen.size() != nvals) throw domain_error("fit: generator length mismatch");
    if (kind == BasisKind::Cardinal)
        for (const auto& ax : grid.axes)
            if (!ax.uniform)
                throw config_error("fit: cardinal basis requires uniform axes (axis '" + ax.label +
                                   "')");

    const std::size_t M = grid.axes.size();
    std::vector<detail::BandedLU> systems;
    systems.reserve(M);
    for (const auto& ax : grid.axes) systems.push_back(detail::axis_system(ax, kind));

    std::vector<std::size_t> ext(M);
    for (std::size_t j = 0; j < M; ++j) ext[j] = grid.axes[j].knots.size();

    SplineModel model{grid, dataset.adm, kind, {}};
    model.coeffs.assign(nvals, {});

    double maxabs = 0;
    for (const auto& gen : dataset.tensor)
        for (const auto& z : gen) maxabs = std::max(maxabs, std::abs(z));

    util::parallel_for(nvals, [&](std::size_t e) {
        // gather this entry's node data, row-major over the grid
        std::vector<complexd> cur(dataset.tensor.size());
        for (std::size_t node = 0; node < dataset.tensor.size(); ++node)
            cur[node] = dataset.tensor[node][e];

        std::vector<std::size_t> sz(ext); // current extents, axis by axis
        for (std::size_t axis = 0; axis < M; ++axis) {
            const std::size_t K = sz[axis];          // node count on this axis
            const std::size_t m = K + 2;             // coefficient count
            std::size_t inner = 1, outer = 1;        // strides around the axis
            for (std::size_t j = axis + 1; j < M; ++j) inner *= sz[j];
            for (std::size_t j = 0; j < axis; ++j) outer *= sz[j];

            std::vector<complexd> next(outer * m * inner);
            std::vector<complexd> rhs(m);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    rhs[0] = complexd{};
                    for (std::size_t g = 0; g < K; ++g)
                        rhs[g + 1] = cur[(o * K + g) * inner + in];
                    rhs[m - 1] = complexd{};
                    systems[axis].solve(rhs.data());
                    for (std::size_t g = 0; g < m; ++g) next[(o * m + g) * inner + in] = rhs[g];
                }
            cur = std::move(next);
            sz[axis] = m;
        }
        model.coeffs[e] = std::move(cur);
    });

    // interpolation residual at every node
    std::vector<std::size_t> g(M, 0);
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
        std::size_t rem = node;
        for (std::size_t j = M; j-- > 0;) {
            g[j] = rem % grid.axes[j].knots.size();
            rem /= grid.axes[j].knots.size();
        }
        CharacteristicPoint p;
        for (std::size_t j = 0; j < M; ++j) p.values.push_back(grid.axes[j].knots[g[j]]);
        std::vector<std::vector<double>> rows;
        for (std::size_t j = 0; j < M; ++j)
            rows.push_back(detail::basis_row(grid.axes[j], kind, p.values[j], false));
        for (std::size_t e = 0; e < nvals; ++e) {
            // windowless fold over the tensor, last axis fastest
            std::vector<complexd> curv(model.coeffs[e]);
            for (std::size_t j = M; j-- > 0;) {
                const std::size_t stride = rows[j].size();
                const std::size_t outer = curv.size() / stride;
                std::vector<complexd> nx(outer);
                for (std::size_t o = 0; o < outer; ++o) {
                    complexd s{};
                    for (std::size_t q = 0; q < stride; ++q) s += curv[o * stride + q] * rows[j][q];
                    nx[o] = s;
                }
                curv = std::move(nx);
            }
            if (std::abs(curv[0] - dataset.tensor[node][e]) > 1e-9 * std::max(1e-300, maxabs))
                throw domain_error("fit: node residual exceeds tolerance");
        }
    }
    return model;
}

// Tensor-product evaluation at a new characteristic point; refuses to
// extrapolate.
inline farfield::ShapeGenerator predict(const SplineModel& model, const CharacteristicPoint& p) {
    const std::size_t M = model.grid.axes.size();
    if (p.values.size() != M) throw domain_error("predict: dimension mismatch");
    for (std::size_t j = 0; j < M; ++j) {
        const auto& ax = model.grid.axes[j];
        if (p.values[j] < ax.knots.front() || p.values[j] > ax.knots.back())
            throw domain_error("predict: '" + ax.label + "' = " + std::to_string(p.values[j]) +
                               " outside [" + std::to_string(ax.knots.front()) + ", " +
                               std::to_string(ax.knots.back()) + "]");
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j < M; ++j)
        rows.push_back(detail::basis_row(model.grid.axes[j], model.basis, p.values[j], false));

    farfield::ShapeGenerator out{model.adm, std::vector<complexd>(model.coeffs.size())};
    util::parallel_for(model.coeffs.size(), [&](std::size_t e) {
        std::vector<complexd> cur(model.coeffs[e]);
        for (std::size_t j = M; j-- > 0;) {
            const std::size_t stride = rows[j].size();
            const std::size_t outer = cur.size() / stride;
            std::vector<complexd> next(outer);
            for (std::size_t o = 0; o < outer; ++o) {
                complexd s{};
                for (std::size_t q = 0; q < stride; ++q) s += cur[o * stride + q] * rows[j][q];
                next[o] = s;
            }
            cur = std::move(next);
        }
        out.values[e] = cur[0];
    });
    return out;
}

// Node lookup: every coordinate must sit on a knot (1e-12 relative).
inline std::vector<std::size_t> grid_index(const CharacteristicGrid& grid,
                                           const CharacteristicPoint& p) {
    if (p.values.size() != grid.axes.size()) throw domain_error("grid_index: dimension mismatch");
    std::vector<std::size_t> g(grid.axes.size());
    for (std::size_t j = 0; j < grid.axes.size(); ++j) {
        const auto& ax = grid.axes[j];
        bool found = false;
        for (std::size_t i = 0; i < ax.knots.size(); ++i)
            if (std::abs(p.values[j] - ax.knots[i]) <= 1e-12 * std::max(1.0, std::abs(ax.knots[i]))) {
                g[j] = i;
                found = true;
                break;
            }
        if (!found)
            throw domain_error("grid_index: '" + ax.label + "' = " + std::to_string(p.values[j]) +
                               " is not a grid node");
    }
    return g;
}

} // namespace shapegen::learner
