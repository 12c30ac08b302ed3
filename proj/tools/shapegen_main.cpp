// shapegen: far-field shape generators, spline learning, and Fourier-based
// body reconstruction from the command line.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shapegen/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shapegen;

namespace {

struct Ctx {
    json cfg = json::object();
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_overridden = false;
};

// ---- config access with exit-code-2 errors ---------------------------------

const json& cfg_field(const json& cfg, const std::string& key) {
    auto it = cfg.find(key);
    if (it == cfg.end() || it->is_null())
        throw config_error("missing config field: " + key);
    return *it;
}

double cfg_num(const json& cfg, const std::string& key) {
    const json& v = cfg_field(cfg, key);
    if (!v.is_number()) throw config_error("config field must be a number: " + key);
    return v.get<double>();
}

double cfg_num_or(const json& cfg, const std::string& key, double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end() || it->is_null()) return fallback;
    if (!it->is_number()) throw config_error("config field must be a number: " + key);
    return it->get<double>();
}

int cfg_int(const json& cfg, const std::string& key) {
    const json& v = cfg_field(cfg, key);
    if (!v.is_number_integer()) throw config_error("config field must be an integer: " + key);
    return v.get<int>();
}

std::string cfg_str_or(const json& cfg, const std::string& key, const std::string& fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end() || it->is_null()) return fallback;
    if (!it->is_string()) throw config_error("config field must be a string: " + key);
    return it->get<std::string>();
}

json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read config " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw config_error("malformed config " + path + ": " + e.what());
    }
}

json parse_set_value(const std::string& raw) {
    try {
        return json::parse(raw);
    } catch (const json::exception&) {
    }
    if (raw.find(',') != std::string::npos) { // bare number list: 0.93,1.76
        json arr = json::array();
        std::size_t start = 0;
        while (start <= raw.size()) {
            auto comma = raw.find(',', start);
            std::string tok = raw.substr(start, comma == std::string::npos ? comma : comma - start);
            try {
                arr.push_back(json::parse(tok));
            } catch (const json::exception&) {
                arr.push_back(tok);
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return arr;
    }
    return raw;
}

void apply_set(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("--set expects key=value, got '" + kv + "'");
    std::string path = kv.substr(0, eq);
    json* node = &cfg;
    std::size_t start = 0;
    while (true) { // dotted paths create nested objects
        auto dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw config_error("--set has an empty key segment: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = parse_set_value(kv.substr(eq + 1));
            return;
        }
        node = &(*node)[key];
        if (!node->is_object()) *node = json::object();
        start = dot + 1;
    }
}

// ---- config to domain objects ----------------------------------------------

int resolve_truncation(const json& cfg) {
    if (cfg.contains("N") && !cfg.at("N").is_null()) {
        if (!cfg.at("N").is_number_integer())
            throw config_error("config field must be an integer: N");
        return cfg.at("N").get<int>();
    }
    return reconstruct::truncation_order(cfg_num(cfg, "delta"), cfg_num(cfg, "tau"),
                                         cfg_int(cfg, "d"));
}

farfield::AdmissibleSet make_adm(const json& cfg) {
    return farfield::admissible_set(cfg_int(cfg, "d"), cfg_num(cfg, "a"), cfg_num(cfg, "mu"),
                                    resolve_truncation(cfg));
}

farfield::QuadratureConfig quad_from(const json& cfg, const std::string& key) {
    const int d = cfg_int(cfg, "d");
    // defaults differ between training and verification so the learner is
    // never scored against its own discretization
    farfield::QuadratureConfig q;
    q.cells = (key == "quad_verify") ? (d == 2 ? 1536 : 192) : (d == 2 ? 1024 : 128);
    q.refine = 0;
    auto it = cfg.find(key);
    if (it != cfg.end() && !it->is_null()) {
        q.cells = it->value("cells", q.cells);
        q.refine = it->value("refine", q.refine);
    }
    return q;
}

learner::CharacteristicGrid grid_from(const json& cfg) {
    return dataset::grid_from_json(cfg_field(cfg, "grid"));
}

dataset::FamilyBinding family_from(const json& cfg) {
    return dataset::family_from_json(cfg_field(cfg, "family"));
}

learner::CharacteristicPoint lambda_from(const json& cfg) {
    const json& v = cfg_field(cfg, "lambda_new");
    if (!v.is_array() || v.empty()) throw config_error("lambda_new must be a number list");
    learner::CharacteristicPoint p;
    for (const auto& e : v) {
        if (!e.is_number()) throw config_error("lambda_new must be a number list");
        p.values.push_back(e.get<double>());
    }
    return p;
}

learner::BasisKind basis_from(const json& cfg) {
    return learner::basis_from_name(cfg_str_or(cfg, "basis", "nonuniform"));
}

std::string out_path(const Ctx& ctx, const std::string& file) {
    fs::create_directories(ctx.out_dir);
    return (fs::path(ctx.out_dir) / file).string();
}

std::string stem(const Ctx& ctx) { return cfg_str_or(ctx.cfg, "name", "out"); }

std::uint64_t effective_seed(const Ctx& ctx) {
    if (ctx.seed_overridden) return ctx.seed;
    auto it = ctx.cfg.find("seed");
    if (it != ctx.cfg.end() && it->is_number()) return it->get<std::uint64_t>();
    return 0;
}

void write_plain_json(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << j.dump() << '\n';
    if (!out) throw io_error("write failed: " + path);
}

std::vector<std::vector<geometry::Vec2>> reference_outline(const geometry::ShapeSpec& truth) {
    std::vector<std::vector<geometry::Vec2>> loops;
    if (truth.kind == geometry::ShapeKind::MultiDomain) {
        for (const auto& c : truth.components)
            loops.push_back(geometry::boundary_polyline(c, 1024));
    } else {
        loops.push_back(geometry::boundary_polyline(truth, 1024));
    }
    return loops;
}

json metrics_json(const reconstruct::Metrics& m) {
    return json{{"l2_field_error", m.l2_field},
                {"jaccard", m.jaccard},
                {"hausdorff", m.hausdorff}, // NaN serializes as null in 3-d
                {"components", m.components},
                {"measure", m.measure},
                {"im_ratio", m.im_ratio}};
}

// reconstruction products shared by `reconstruct` and `pipeline`
void emit_reconstruction(const Ctx& ctx, const farfield::ShapeGenerator& gen,
                         const geometry::ShapeSpec* truth, json extra_metrics) {
    const std::string name = stem(ctx);
    const auto mesh_res = static_cast<std::size_t>(cfg_int(ctx.cfg, "mesh"));
    const double level = cfg_num_or(ctx.cfg, "level", 0.5);

    auto fc = reconstruct::fourier_coeffs(gen);
    auto field = reconstruct::evaluate_field(fc, mesh_res);
    dataset::save_field(field, out_path(ctx, name + "_field.sfld.json"));
    dataset::export_field_csv(field, out_path(ctx, name + "_field.csv"));

    auto ex = reconstruct::extract_shape(field, level);
    if (field.d == 2) {
        dataset::export_field_pgm(field, out_path(ctx, name + "_field.pgm"));
        dataset::export_contour_svg(ex.contour,
                                    truth ? reference_outline(*truth)
                                          : std::vector<std::vector<geometry::Vec2>>{},
                                    field.a, out_path(ctx, name + "_contour.svg"));
    } else {
        dataset::export_mesh_stl(ex.mesh, out_path(ctx, name + "_mesh.stl"));
    }

    json mj = extra_metrics;
    mj["name"] = name;
    mj["level"] = level;
    mj["mesh"] = mesh_res;
    mj["components"] = ex.components;
    mj["im_ratio"] = field.im_ratio;
    if (truth) {
        auto m = reconstruct::error_metrics(field, *truth, level);
        mj.update(metrics_json(m));
    }
    write_plain_json(mj, out_path(ctx, name + "_metrics.json"));
    std::cout << mj.dump() << "\n";
}

// ---- commands ---------------------------------------------------------------

void run_gen_dataset(const Ctx& ctx) {
    auto grid = grid_from(ctx.cfg);
    auto family = family_from(ctx.cfg);
    auto adm = make_adm(ctx.cfg);
    auto quad = quad_from(ctx.cfg, "quad_train");
    auto ds = dataset::build_dataset(grid, family, adm, quad,
                                     [](std::size_t done, std::size_t total) {
                                         std::fprintf(stderr, "gen-dataset: %zu/%zu\n", done, total);
                                     });
    double tn = cfg_num_or(ctx.cfg, "train_noise", 0.0);
    if (tn > 0) {
        std::uint64_t seed = effective_seed(ctx);
        for (std::size_t node = 0; node < ds.tensor.size(); ++node) {
            farfield::ShapeGenerator g{adm, std::move(ds.tensor[node])};
            ds.tensor[node] = farfield::add_noise(g, tn, seed + node).values;
        }
    }
    auto path = out_path(ctx, stem(ctx) + ".sds.json");
    dataset::save_dataset({std::move(ds), family, quad}, path);
    std::cout << path << "\n";
}

void run_fit(const Ctx& ctx, const std::string& dataset_path) {
    auto sd = dataset::load_dataset(dataset_path);
    auto model = learner::fit(sd.data, basis_from(ctx.cfg));
    auto path = out_path(ctx, stem(ctx) + ".smod.json");
    dataset::save_model(model, path);
    std::cout << path << "\n";
}

void run_predict(const Ctx& ctx, const std::string& model_path) {
    auto model = dataset::load_model(model_path);
    auto gen = learner::predict(model, lambda_from(ctx.cfg));
    auto path = out_path(ctx, stem(ctx) + "_pred.sgen.json");
    dataset::save_generator(gen, path);
    std::cout << path << "\n";
}

void run_reconstruct(const Ctx& ctx, const std::string& gen_path) {
    auto gen = dataset::load_generator(gen_path);
    geometry::ShapeSpec truth;
    bool have_truth = ctx.cfg.contains("family") && ctx.cfg.contains("lambda_new");
    if (have_truth) truth = dataset::shape_for(family_from(ctx.cfg), lambda_from(ctx.cfg));
    emit_reconstruction(ctx, gen, have_truth ? &truth : nullptr, json::object());
}

void run_metrics(const Ctx& ctx, const std::string& field_path) {
    auto field = dataset::load_field(field_path);
    auto truth = dataset::shape_for(family_from(ctx.cfg), lambda_from(ctx.cfg));
    auto m = reconstruct::error_metrics(field, truth, cfg_num_or(ctx.cfg, "level", 0.5));
    json mj = metrics_json(m);
    write_plain_json(mj, out_path(ctx, stem(ctx) + "_metrics.json"));
    std::cout << mj.dump() << "\n";
}

void run_pipeline(const Ctx& ctx) {
    const std::string name = stem(ctx);
    auto adm = make_adm(ctx.cfg);
    auto family = family_from(ctx.cfg);
    auto lambda = lambda_from(ctx.cfg);
    const std::uint64_t seed = effective_seed(ctx);

    // reuse a previously built dataset when parameters line up
    auto ds_path = out_path(ctx, name + ".sds.json");
    dataset::StoredDataset sd;
    bool have = false;
    if (fs::exists(ds_path)) {
        sd = dataset::load_dataset(ds_path);
        have = sd.data.adm.d == adm.d && sd.data.adm.a == adm.a && sd.data.adm.mu == adm.mu &&
               sd.data.adm.N == adm.N;
        if (!have) std::fprintf(stderr, "pipeline: %s does not match, rebuilding\n", ds_path.c_str());
    }
    if (!have) {
        Ctx sub = ctx;
        run_gen_dataset(sub);
        sd = dataset::load_dataset(ds_path);
    }

    auto model = learner::fit(sd.data, basis_from(ctx.cfg));
    auto predicted = learner::predict(model, lambda);
    dataset::save_generator(predicted, out_path(ctx, name + "_pred.sgen.json"));

    auto truth = dataset::shape_for(family, lambda);
    json extra;
    extra["lambda_new"] = lambda.values;
    extra["N"] = adm.N;

    // generator accuracy before noise, against an independent quadrature
    auto verify = farfield::farfield(truth, adm, quad_from(ctx.cfg, "quad_verify"));
    extra["generator_rel_error"] = farfield::rel_l2_diff(predicted.values, verify.values);

    const double delta = cfg_num_or(ctx.cfg, "delta", 0.0);
    extra["delta"] = delta;
    auto working = delta > 0 ? farfield::add_noise(predicted, delta, seed) : predicted;
    emit_reconstruction(ctx, working, &truth, extra);
}

void run_stability_sweep(const Ctx& ctx) {
    const json& dl = cfg_field(ctx.cfg, "deltas");
    if (!dl.is_array() || dl.size() < 3)
        throw config_error("stability-sweep needs a deltas list with at least 3 entries");
    std::vector<double> deltas;
    for (const auto& e : dl) {
        if (!e.is_number()) throw config_error("deltas must be numbers");
        double v = e.get<double>();
        if (v == 0.0)
            throw config_error("delta = 0 has no defined truncation order; use pipeline for "
                               "noise-free runs");
        if (v < 0 || v >= 1) throw config_error("deltas must lie in (0, 1)");
        deltas.push_back(v);
    }
    const int d = cfg_int(ctx.cfg, "d");
    const double tau = cfg_num(ctx.cfg, "tau");
    const double a = cfg_num(ctx.cfg, "a");
    const double mu = cfg_num(ctx.cfg, "mu");
    const double level = cfg_num_or(ctx.cfg, "level", 0.5);
    const auto mesh_res = static_cast<std::size_t>(cfg_int(ctx.cfg, "mesh"));
    const std::uint64_t seed = effective_seed(ctx);
    auto truth = dataset::shape_for(family_from(ctx.cfg), lambda_from(ctx.cfg));

    std::vector<int> orders;
    int n_max = 0;
    for (double v : deltas) {
        orders.push_back(reconstruct::truncation_order(v, tau, d));
        n_max = std::max(n_max, orders.back());
    }
    auto adm_full = farfield::admissible_set(d, a, mu, n_max);
    auto full = farfield::farfield(truth, adm_full, quad_from(ctx.cfg, "quad_train"));

    json rows = json::array();
    std::string csv = "delta,N,l2_error\n";
    for (std::size_t r = 0; r < deltas.size(); ++r) {
        auto adm = farfield::admissible_set(d, a, mu, orders[r]);
        farfield::ShapeGenerator gen{adm, std::vector<complexd>(adm.size())};
        for (std::size_t i = 0; i < adm.size(); ++i)
            gen.values[i] = full.values[adm_full.index_of(adm.entries[i].xi)];
        auto noisy = farfield::add_noise(gen, deltas[r], seed);
        auto field = reconstruct::evaluate_field(reconstruct::fourier_coeffs(noisy), mesh_res);
        auto m = reconstruct::error_metrics(field, truth, level);
        char line[128];
        std::snprintf(line, sizeof line, "%.17g,%d,%.17g\n", deltas[r], orders[r], m.l2_field);
        csv += line;
        rows.push_back({{"delta", deltas[r]}, {"N", orders[r]}, {"l2_error", m.l2_field}});
        std::fprintf(stderr, "sweep: delta=%g N=%d l2=%.6g\n", deltas[r], orders[r], m.l2_field);
    }

    // log-log slope by least squares
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& row : rows) {
        double x = std::log(row.at("delta").get<double>());
        double y = std::log(row.at("l2_error").get<double>());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(rows.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    const std::string name = stem(ctx);
    std::ofstream out(out_path(ctx, name + "_sweep.csv"), std::ios::binary);
    if (!out) throw io_error("cannot write sweep CSV");
    out << csv;
    out.close();
    write_plain_json(json{{"slope", slope}, {"rows", rows}},
                     out_path(ctx, name + "_sweep.json"));
    std::cout << "slope " << slope << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"far-field shape generators, spline learning, and Fourier reconstruction"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", sets, "override a config field (key=value, repeatable)");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "noise seed (overrides config)");
    app.add_option("--threads", threads, "worker threads, 0 = all cores (outputs unaffected)");

    auto* c_gen = app.add_subcommand("gen-dataset", "compute a far-field training dataset");
    auto* c_fit = app.add_subcommand("fit", "fit a spline model to a dataset");
    auto* c_pre = app.add_subcommand("predict", "evaluate a model at a new characteristic point");
    auto* c_rec = app.add_subcommand("reconstruct", "reconstruct a body from a generator file");
    auto* c_pipe = app.add_subcommand("pipeline", "dataset, fit, predict, reconstruct in one go");
    auto* c_sweep = app.add_subcommand("stability-sweep", "reconstruction error versus noise rate");
    auto* c_met = app.add_subcommand("metrics", "recompute metrics for a stored field");

    std::string in_dataset, in_model, in_gen, in_field;
    c_fit->add_option("dataset", in_dataset, "dataset file (.sds.json)")->required();
    c_pre->add_option("model", in_model, "model file (.smod.json)")->required();
    c_rec->add_option("generator", in_gen, "generator file (.sgen.json)")->required();
    c_met->add_option("field", in_field, "field file (.sfld.json)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Ctx ctx;
        if (!config_path.empty()) ctx.cfg = load_config_file(config_path);
        for (const auto& kv : sets) apply_set(ctx.cfg, kv);
        ctx.out_dir = out_dir;
        ctx.seed = seed;
        ctx.seed_overridden = seed_opt->count() > 0;
        util::set_threads(threads);

        if (c_gen->parsed()) run_gen_dataset(ctx);
        if (c_fit->parsed()) run_fit(ctx, in_dataset);
        if (c_pre->parsed()) run_predict(ctx, in_model);
        if (c_rec->parsed()) run_reconstruct(ctx, in_gen);
        if (c_pipe->parsed()) run_pipeline(ctx);
        if (c_sweep->parsed()) run_stability_sweep(ctx);
        if (c_met->parsed()) run_metrics(ctx, in_field);
        return 0;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const domain_error& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 3;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
