// Acceptance gate: ten numbered end-to-end checks, one PASS/FAIL line each.
// Thresholds are fixed constants here on purpose; they are the contract, not
// knobs. Check 10 drives the real CLI binary, passed as argv[1].

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "shapegen/dataset.hpp"

namespace fs = std::filesystem;
using namespace shapegen;

namespace {

int failed = 0;

void report(int num, bool pass, const std::string& detail) {
    std::printf("C%d %s  %s\n", num, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failed;
}

double now_sec() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

learner::GridAxis uniform_axis(const std::string& label, double lo, double hi, int count) {
    std::vector<double> knots(count);
    for (int i = 0; i < count; ++i) {
        const double t = (double)i / (count - 1); // exact endpoints
        knots[i] = lo * (1 - t) + hi * t;
    }
    return learner::make_axis(label, knots);
}

double gen_distance(const std::vector<complexd>& a, const std::vector<complexd>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s);
}

// ---- 1: far-field against the Bessel closed form ----------------------------

void check1() {
    util::set_threads(1);
    auto adm = farfield::admissible_set(2, 4.0, 0.1, 20);
    auto disk = geometry::make_disk(1.0);
    const double t0 = now_sec();
    auto gen = farfield::farfield(disk, adm, {1024, 0});
    const double secs = now_sec() - t0;
    util::set_threads(4);

    // the disk transform is radial, so the closed form holds for the
    // mu-probe entry as well
    double worst = 0;
    for (std::size_t i = 0; i < adm.size(); ++i) {
        const double k = adm.entries[i].k;
        const complexd truth =
            farfield::c_const(2, k) * complexd(2 * pi * std::cyl_bessel_j(1, k) / k, 0);
        worst = std::max(worst, std::abs(gen.values[i] - truth) / std::abs(truth));
    }
    report(1, worst <= 1e-5 && secs < 30.0,
           fmt("disk vs Bessel: worst relative entry error %.3g (<= 1e-5), %.2f s single "
               "thread (< 30 s)",
               worst, secs));
}

// ---- 2: interpolation conditions and model agreement ------------------------

void check2() {
    learner::CharacteristicGrid grid{
        {uniform_axis("height", 1.5, 1.9, 5), uniform_axis("weight", 0.6, 1.2, 4)}};
    auto adm = farfield::admissible_set(2, 2.0, 0.1, 1);

    learner::TrainingDataset ds;
    ds.grid = grid;
    ds.adm = adm;
    for (double h : grid.axes[0].knots)
        for (double w : grid.axes[1].knots) {
            std::vector<complexd> row(adm.size());
            for (std::size_t e = 0; e < adm.size(); ++e)
                row[e] = std::exp(complexd(0, 0.7 * h + 0.3 * (double)e * w)) *
                         (1.0 + 0.2 * std::sin(2 * h) + 0.1 * w * w + 0.05 * (double)e);
            ds.tensor.push_back(std::move(row));
        }

    auto m1 = learner::fit(ds, learner::BasisKind::NonUniform);
    auto m2 = learner::fit(ds, learner::BasisKind::Cardinal);

    double maxabs = 0;
    for (const auto& row : ds.tensor)
        for (const auto& z : row) maxabs = std::max(maxabs, std::abs(z));

    double resid = 0;
    std::size_t node = 0;
    for (double h : grid.axes[0].knots)
        for (double w : grid.axes[1].knots) {
            auto pred = learner::predict(m1, {{h, w}});
            for (std::size_t e = 0; e < adm.size(); ++e)
                resid = std::max(resid, std::abs(pred.values[e] - ds.tensor[node][e]) / maxabs);
            ++node;
        }

    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> uh(1.5, 1.9), uw(0.6, 1.2);
    double agree = 0;
    for (int q = 0; q < 100; ++q) {
        learner::CharacteristicPoint p{{uh(rng), uw(rng)}};
        auto p1 = learner::predict(m1, p);
        auto p2 = learner::predict(m2, p);
        for (std::size_t e = 0; e < adm.size(); ++e)
            agree = std::max(agree, std::abs(p1.values[e] - p2.values[e]) / maxabs);
    }
    report(2, resid <= 1e-9 && agree <= 1e-9,
           fmt("5x4 grid: node residual %.3g (<= 1e-9), model I vs II %.3g at 100 queries "
               "(<= 1e-9)",
               resid, agree));
}

// ---- 3: truncation order values ---------------------------------------------

void check3() {
    const int n2 = reconstruct::truncation_order(0.01, 2, 2);
    const int n3 = reconstruct::truncation_order(0.01, 3, 3);
    report(3, n2 == 20 && n3 == 19,
           fmt("truncation_order(0.01,2,2) = %d (expect 20), truncation_order(0.01,3,3) = %d "
               "(expect 19)",
               n2, n3));
}

// ---- 4: kite pipeline ---------------------------------------------------------

void check4() {
    const double t0 = now_sec();
    const double a = 9.0, mu = 0.1, delta = 0.01, level = 0.5;
    const std::size_t mesh = 100;
    auto adm = farfield::admissible_set(2, a, mu, 20);
    const farfield::QuadratureConfig quad_train{1024, 16}, quad_verify{1536, 16};

    learner::CharacteristicGrid grid{
        {uniform_axis("beta1", 0.5, 1.8, 14), uniform_axis("beta2", 0.5, 1.8, 14)}};
    dataset::FamilyBinding family{geometry::make_kite(1.0, 1.0), {{-1, 0}, {-1, 1}}};
    auto ds = dataset::build_dataset(grid, family, adm, quad_train);
    auto model = learner::fit(ds, learner::BasisKind::NonUniform);

    const double cases[4][2] = {{0.93, 1.76}, {1.58, 0.87}, {0.95, 0.95}, {1.65, 1.65}};
    double worst_gen = 0, worst_jac = 1, worst_haus = 0, quad_err = 0;
    for (int c = 0; c < 4; ++c) {
        learner::CharacteristicPoint lambda{{cases[c][0], cases[c][1]}};
        auto truth = geometry::make_kite(cases[c][0], cases[c][1]);
        auto predicted = learner::predict(model, lambda);

        auto verify = farfield::farfield(truth, adm, quad_verify);
        worst_gen = std::max(worst_gen,
                             farfield::rel_l2_diff(predicted.values, verify.values));
        auto train_q = farfield::farfield(truth, adm, quad_train);
        quad_err = std::max(quad_err, gen_distance(train_q.values, verify.values));

        auto noisy = farfield::add_noise(predicted, delta, 401 + c);
        auto field = reconstruct::evaluate_field(reconstruct::fourier_coeffs(noisy), mesh);
        auto m = reconstruct::error_metrics(field, truth, level);
        worst_jac = std::min(worst_jac, m.jaccard);
        worst_haus = std::max(worst_haus, m.hausdorff);
    }

    // generators of distinct training bodies stay far apart (injectivity)
    double min_pair = 1e300;
    for (std::size_t i = 0; i < ds.tensor.size(); ++i)
        for (std::size_t j = i + 1; j < ds.tensor.size(); ++j)
            min_pair = std::min(min_pair, gen_distance(ds.tensor[i], ds.tensor[j]));

    const double secs = now_sec() - t0;
    const double haus_limit = 3 * a / (double)mesh;
    const bool pass = worst_gen <= 0.02 && worst_jac >= 0.93 && worst_haus <= haus_limit &&
                      min_pair > 1e3 * quad_err && secs < 600;
    report(4, pass,
           fmt("kite: gen err %.4f (<= 0.02), jaccard %.4f (>= 0.93), hausdorff %.4f (<= %.2f), "
               "pairwise gap %.3g > 1e3 x quad err %.3g, %.0f s (< 600)",
               worst_gen, worst_jac, worst_haus, haus_limit, min_pair, quad_err, secs));
}

// ---- 5: two-piece body --------------------------------------------------------

void check5() {
    const double a = 7.2, mu = 0.1, delta = 0.01, level = 0.5;
    const std::size_t mesh = 256;
    auto adm = farfield::admissible_set(2, a, mu, 20);
    const farfield::QuadratureConfig quad_train{1024, 16};

    auto tmpl = geometry::make_multidomain({geometry::make_apple(1.5, {-2.4, 0}),
                                            geometry::make_rounded_triangle(1.0, {1.35, 0})});
    learner::CharacteristicGrid grid{
        {uniform_axis("beta1", 1.0, 2.0, 11), uniform_axis("beta2", 0.5, 1.5, 11)}};
    dataset::FamilyBinding family{tmpl, {{0, 0}, {1, 0}}};
    auto ds = dataset::build_dataset(grid, family, adm, quad_train);
    auto model = learner::fit(ds, learner::BasisKind::NonUniform);

    const double cases[4][2] = {{1.13, 1.13}, {1.94, 0.53}, {1.88, 0.94}, {1.96, 1.47}};
    bool comp_ok = true;
    double worst_jac = 1;
    for (int c = 0; c < 4; ++c) {
        learner::CharacteristicPoint lambda{{cases[c][0], cases[c][1]}};
        auto truth = dataset::shape_for(family, lambda);
        auto noisy = farfield::add_noise(learner::predict(model, lambda), delta, 501 + c);
        auto field = reconstruct::evaluate_field(reconstruct::fourier_coeffs(noisy), mesh);
        auto ex = reconstruct::extract_shape(field, level);
        if (ex.components != 2) comp_ok = false;

        // match each truth piece to the overlapping extracted component
        auto labels = reconstruct::label_components(ex.mask, mesh, 2).first;
        for (std::size_t piece = 0; piece < truth.components.size(); ++piece) {
            std::vector<std::uint8_t> chi(mesh * mesh);
            std::vector<std::size_t> overlap(static_cast<std::size_t>(ex.components) + 1, 0);
            for (std::size_t i = 0; i < mesh; ++i)
                for (std::size_t j = 0; j < mesh; ++j) {
                    const std::size_t cell = i * mesh + j;
                    chi[cell] = geometry::indicator(truth.components[piece],
                                                    {reconstruct::grid_coord(a, mesh, i),
                                                     reconstruct::grid_coord(a, mesh, j)});
                    if (chi[cell] && labels[cell] >= 0) ++overlap[labels[cell]];
                }
            int best = 0;
            for (int l = 1; l < ex.components; ++l)
                if (overlap[l] > overlap[best]) best = l;
            std::size_t inter = 0, uni = 0;
            for (std::size_t cell = 0; cell < chi.size(); ++cell) {
                const bool in_l = labels[cell] == best;
                if (in_l && chi[cell]) ++inter;
                if (in_l || chi[cell]) ++uni;
            }
            worst_jac = std::min(worst_jac, uni ? (double)inter / (double)uni : 0.0);
        }
    }
    report(5, comp_ok && worst_jac >= 0.90,
           fmt("apple + triangle: components %s 2, per-piece jaccard %.4f (>= 0.90)",
               comp_ok ? "=" : "!=", worst_jac));
}

// ---- 6: rectangular solid -----------------------------------------------------

void check6() {
    const double t0 = now_sec();
    const double a = 2.6, mu = 0.1, delta = 0.01, level = 0.5;
    const std::size_t mesh = 64;
    auto adm = farfield::admissible_set(3, a, mu, 9);

    learner::CharacteristicGrid grid{{uniform_axis("width", 1.0, 2.0, 5),
                                      uniform_axis("height", 1.0, 2.0, 5),
                                      uniform_axis("length", 1.0, 2.0, 5)}};
    dataset::FamilyBinding family{geometry::make_box(1.5, 1.5, 1.5), {{-1, 0}, {-1, 1}, {-1, 2}}};
    auto ds = dataset::build_dataset(grid, family, adm);
    auto model = learner::fit(ds, learner::BasisKind::NonUniform);

    learner::CharacteristicPoint lambda{{1.8, 1.8, 1.8}};
    auto truth = geometry::make_box(1.8, 1.8, 1.8);
    auto noisy = farfield::add_noise(learner::predict(model, lambda), delta, 601);
    auto field = reconstruct::evaluate_field(reconstruct::fourier_coeffs(noisy), mesh);
    auto m = reconstruct::error_metrics(field, truth, level);

    const double want = 1.8 * 1.8 * 1.8;
    const double vol_err = std::abs(m.measure - want) / want;
    const double secs = now_sec() - t0;
    report(6, vol_err <= 0.12 && secs < 900,
           fmt("box (1.8,1.8,1.8): volume %.4f vs %.3f, off by %.2f%% (<= 12%%), %.0f s (< 900)",
               m.measure, want, 100 * vol_err, secs));
}

// ---- 7: noise-rate sweep ------------------------------------------------------

void check7() {
    const double a = 3.2, mu = 0.1, tau = 2.0, level = 0.5;
    const std::size_t mesh = 384;
    auto truth = geometry::make_rectangle(3.1, 3.1);
    const std::vector<double> deltas{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};

    std::vector<int> orders;
    int n_max = 0;
    for (double d : deltas) {
        orders.push_back(reconstruct::truncation_order(d, tau, 2));
        n_max = std::max(n_max, orders.back());
    }
    auto adm_full = farfield::admissible_set(2, a, mu, n_max);
    auto full = farfield::farfield(truth, adm_full, {1024, 16});

    std::vector<double> errs;
    for (std::size_t r = 0; r < deltas.size(); ++r) {
        auto adm = farfield::admissible_set(2, a, mu, orders[r]);
        farfield::ShapeGenerator gen{adm, std::vector<complexd>(adm.size())};
        for (std::size_t i = 0; i < adm.size(); ++i)
            gen.values[i] = full.values[adm_full.index_of(adm.entries[i].xi)];
        auto noisy = farfield::add_noise(gen, deltas[r], 7);
        auto field = reconstruct::evaluate_field(reconstruct::fourier_coeffs(noisy), mesh);
        errs.push_back(reconstruct::error_metrics(field, truth, level).l2_field);
    }

    int inversions = 0;
    bool inversion_small = true;
    for (std::size_t r = 0; r + 1 < errs.size(); ++r)
        if (errs[r] > errs[r + 1]) {
            ++inversions;
            if (errs[r] > 1.05 * errs[r + 1]) inversion_small = false;
        }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t r = 0; r < errs.size(); ++r) {
        const double x = std::log(deltas[r]), y = std::log(errs[r]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = (double)errs.size();
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    std::ostringstream es;
    for (double e : errs) es << " " << fmt("%.4f", e);
    report(7, inversions <= 1 && inversion_small && slope >= 0.25 && slope <= 0.75,
           fmt("sweep errors%s, %d inversions (<= 1, each <= 5%%), log-log slope %.3f (in "
               "[0.25, 0.75])",
               es.str().c_str(), inversions, slope));
}

// ---- 8: zero-mode closure ------------------------------------------------------

void check8() {
    // band-limited source synthesized exactly on the admissible set
    const double a = 2.0, mu = 0.3;
    const int N = 4;
    auto adm = farfield::admissible_set(2, a, mu, N);
    const double ad = a * a;

    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<complexd> c(adm.size());
    const std::size_t zero_slot = adm.index_of({0, 0, 0});
    for (int x1 = -N; x1 <= N; ++x1)
        for (int x2 = -N; x2 <= N; ++x2) {
            if (x1 == 0 && x2 == 0) continue;
            const std::size_t i = adm.index_of({x1, x2, 0});
            const std::size_t j = adm.index_of({-x1, -x2, 0});
            if (i < j) {
                c[i] = complexd(u(rng), u(rng));
                c[j] = std::conj(c[i]);
            }
        }
    const double c0 = 0.8;
    c[zero_slot] = c0;

    farfield::ShapeGenerator gen{adm, std::vector<complexd>(adm.size())};
    complexd probe = c0 * ad * std::sin(mu * pi) / (mu * pi);
    for (std::size_t i = 0; i < adm.size(); ++i) {
        if (i == zero_slot) continue;
        gen.values[i] = farfield::c_const(2, adm.entries[i].k) * (ad * c[i]);
        probe += c[i] * reconstruct::cross_term(adm.entries[i].xi, 2, a, mu);
    }
    gen.values[zero_slot] = farfield::c_const(2, adm.entries[zero_slot].k) * probe;

    auto fc = reconstruct::fourier_coeffs(gen);
    const double c0_err = std::abs(fc.c[zero_slot] - complexd(c0, 0));

    // cross term against a composite Simpson integral of the definition
    const double ct = reconstruct::cross_term({1, 0, 0}, 2, 1.0, 0.1);
    const int steps = 20000;
    const double h = 1.0 / steps, k0 = 2 * pi * 0.1, w = 2 * pi * 1.0;
    double integral = 0;
    for (int s = 0; s < steps; ++s) {
        const double y0 = -0.5 + s * h;
        auto g = [&](double y) { return std::cos((w - k0) * y); };
        integral += h / 6 * (g(y0) + 4 * g(y0 + h / 2) + g(y0 + h));
    }
    const double ct_err = std::abs(ct - integral); // the a^(d-1) transverse factor is 1 here

    report(8, c0_err <= 1e-8 && ct_err <= 1e-10,
           fmt("band-limited c0 error %.3g (<= 1e-8), cross term vs Simpson %.3g (<= 1e-10)",
               c0_err, ct_err));
}

// ---- 9: mannequin -------------------------------------------------------------

void check9() {
    const double a = 2.4, mu = 0.1, delta = 0.01, level = 0.5;
    const std::size_t mesh = 96;
    auto adm = farfield::admissible_set(3, a, mu, 16);
    const farfield::QuadratureConfig quad_train{128, 2}, quad_verify{192, 2};

    learner::CharacteristicGrid grid{
        {uniform_axis("height", 1.5, 1.9, 5), uniform_axis("relative_weight", 0.6, 1.4, 5)}};
    dataset::FamilyBinding family{geometry::mannequin(1.7, 1.0), {{-1, 0}, {-1, 1}}};
    auto ds = dataset::build_dataset(grid, family, adm, quad_train);
    auto model = learner::fit(ds, learner::BasisKind::NonUniform);

    const double cases[2][2] = {{1.55, 1.30}, {1.85, 1.10}};
    double worst_gen = 0, worst_vol = 0;
    for (int c = 0; c < 2; ++c) {
        learner::CharacteristicPoint lambda{{cases[c][0], cases[c][1]}};
        auto truth = geometry::mannequin(cases[c][0], cases[c][1]);
        auto predicted = learner::predict(model, lambda);
        auto verify = farfield::farfield(truth, adm, quad_verify);
        worst_gen = std::max(worst_gen,
                             farfield::rel_l2_diff(predicted.values, verify.values));

        auto noisy = farfield::add_noise(predicted, delta, 901 + c);
        auto field = reconstruct::evaluate_field(reconstruct::fourier_coeffs(noisy), mesh);
        auto m = reconstruct::error_metrics(field, truth, level);

        std::size_t inside = 0;
        for (std::size_t i = 0; i < mesh; ++i)
            for (std::size_t j = 0; j < mesh; ++j)
                for (std::size_t l = 0; l < mesh; ++l)
                    inside += geometry::indicator(truth, {reconstruct::grid_coord(a, mesh, i),
                                                          reconstruct::grid_coord(a, mesh, j),
                                                          reconstruct::grid_coord(a, mesh, l)});
        const double truth_vol = (double)inside * std::pow(a / (double)mesh, 3);
        worst_vol = std::max(worst_vol, std::abs(m.measure - truth_vol) / truth_vol);
    }
    report(9, worst_gen <= 0.03 && worst_vol <= 0.10,
           fmt("mannequin: gen err %.4f (<= 0.03), volume off by %.2f%% (<= 10%%)", worst_gen,
               100 * worst_vol));
}

// ---- 10: CLI determinism -------------------------------------------------------

int run_cli(const std::string& cmd) {
    int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check10(const std::string& cli) {
    const fs::path work = fs::temp_directory_path() / "shapegen_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    setenv("SOURCE_DATE_EPOCH", "1300000000", 1);

    std::ofstream(work / "cfg.json") << R"({
      "d": 2, "a": 3.2, "mu": 0.1, "N": 8, "tau": 2.0, "delta": 0.01,
      "quad_train": {"cells": 256, "refine": 16},
      "quad_verify": {"cells": 384, "refine": 16},
      "grid": {"axes": [
        {"label": "width",  "knots": [2.7, 2.9, 3.1]},
        {"label": "height", "knots": [2.7, 2.9, 3.1]}
      ]},
      "family": {
        "shape": {"kind": "Rectangle", "params": [3.0, 3.0], "center": [0, 0]},
        "bindings": [{"component": -1, "param": 0}, {"component": -1, "param": 1}]
      },
      "lambda_new": [3.0, 2.8],
      "mesh": 48, "level": 0.5, "seed": 11, "name": "det"
    })";

    const std::string base = cli + " --config " + (work / "cfg.json").string();
    const fs::path o1 = work / "t1", o4 = work / "t4";
    const int r1 = run_cli(base + " --out " + o1.string() + " --threads 1 pipeline > /dev/null 2>&1");
    const int r4 = run_cli(base + " --out " + o4.string() + " --threads 4 pipeline > /dev/null 2>&1");

    bool same = r1 == 0 && r4 == 0;
    std::size_t compared = 0;
    std::string differs;
    if (same)
        for (const auto& e : fs::directory_iterator(o1)) {
            ++compared;
            if (slurp(e.path()) != slurp(o4 / e.path().filename())) {
                same = false;
                differs = e.path().filename().string();
            }
        }
    report(10, same && compared >= 8,
           same ? fmt("pipeline outputs byte-identical across --threads 1/4 (%zu files)", compared)
                : fmt("exit codes %d/%d, first differing file '%s'", r1, r4, differs.c_str()));
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::printf("usage: acceptance <shapegen-binary>\n");
        return 64;
    }
    util::set_threads(4);
    struct Step {
        int num;
        void (*fn)();
    };
    const Step steps[] = {{1, check1}, {2, check2}, {3, check3}, {4, check4}, {5, check5},
                          {6, check6}, {7, check7}, {8, check8}, {9, check9}};
    for (const auto& s : steps) {
        try {
            s.fn();
        } catch (const std::exception& e) {
            report(s.num, false, fmt("exception: %s", e.what()));
        }
    }
    try {
        check10(argv[1]);
    } catch (const std::exception& e) {
        report(10, false, fmt("exception: %s", e.what()));
    }
    std::printf("acceptance: %d/10 passed\n", 10 - failed);
    return failed;
}
