#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapegen/core.hpp"
#include "shapegen/farfield.hpp"
#include "shapegen/geometry.hpp"
#include "shapegen/learner.hpp"
#include "shapegen/reconstruct.hpp"
#include "shapegen/util/parallel.hpp"
#include "shapegen/util/sha256.hpp"

namespace shapegen::dataset {

using nlohmann::json;

// ---- shape family ----------------------------------------------------------

// Where a grid axis lands in the shape template: component -1 targets the
// top-level parameter list, >= 0 a MultiDomain child.
struct AxisBinding {
    int component = -1;
    std::size_t param = 0;
};

struct FamilyBinding {
    geometry::ShapeSpec shape_template;
    std::vector<AxisBinding> bindings; // one per grid axis, in axis order
};

inline geometry::ShapeSpec shape_for(const FamilyBinding& family,
                                     const learner::CharacteristicPoint& p) {
    if (p.values.size() != family.bindings.size())
        throw config_error("shape_for: binding count does not match point dimension");
    geometry::ShapeSpec spec = family.shape_template;
    for (std::size_t j = 0; j < family.bindings.size(); ++j) {
        const auto& b = family.bindings[j];
        std::vector<double>* slot = nullptr;
        if (b.component < 0) {
            slot = &spec.params;
        } else {
            if (static_cast<std::size_t>(b.component) >= spec.components.size())
                throw config_error("shape_for: component index out of range");
            slot = &spec.components[b.component].params;
        }
        if (b.param >= slot->size()) throw config_error("shape_for: parameter index out of range");
        (*slot)[b.param] = p.values[j];
    }
    geometry::validate(spec);
    return spec;
}

// ---- dataset construction ---------------------------------------------------

using ProgressHook = std::function<void(std::size_t done, std::size_t total)>;

// One far-field computation per grid node, parallel over nodes. A shape
// escaping the admissible box aborts the whole build, naming the node.
inline learner::TrainingDataset build_dataset(const learner::CharacteristicGrid& grid,
                                              const FamilyBinding& family,
                                              const farfield::AdmissibleSet& adm,
                                              farfield::QuadratureConfig quad = {},
                                              const ProgressHook& progress = {}) {
    if (grid.axes.empty()) throw config_error("build_dataset: empty grid");
    if (family.bindings.size() != grid.axes.size())
        throw config_error("build_dataset: one binding per grid axis required");

    learner::TrainingDataset ds;
    ds.grid = grid;
    ds.adm = adm;
    ds.tensor.assign(grid.node_count(), {});

    const std::size_t total = grid.node_count();
    const std::size_t M = grid.axes.size();
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    util::parallel_for(total, [&](std::size_t node) {
        learner::CharacteristicPoint p;
        std::size_t rem = node;
        p.values.resize(M);
        for (std::size_t j = M; j-- > 0;) {
            p.values[j] = grid.axes[j].knots[rem % grid.axes[j].knots.size()];
            rem /= grid.axes[j].knots.size();
        }
        try {
            ds.tensor[node] = farfield::farfield(shape_for(family, p), adm, quad).values;
        } catch (const domain_error& e) {
            std::string at;
            for (std::size_t j = 0; j < M; ++j)
                at += (j ? ", " : "") + std::to_string(p.values[j]);
            throw domain_error("build_dataset: node " + std::to_string(node) + " (" + at +
                               "): " + e.what());
        }
        if (progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            progress(done.fetch_add(1) + 1, total);
        }
    });
    return ds;
}

// ---- JSON persistence --------------------------------------------------------

inline constexpr int schema_version = 1;

// RFC 3339 UTC stamp; SOURCE_DATE_EPOCH pins it for reproducible runs
inline std::string created_stamp() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) t = std::atoll(sde);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline json complex_list(const std::vector<complexd>& v) {
    json arr = json::array();
    for (const auto& z : v) arr.push_back({z.real(), z.imag()});
    return arr;
}

inline std::vector<complexd> complex_list_from(const json& arr) {
    std::vector<complexd> v;
    v.reserve(arr.size());
    for (const auto& e : arr) v.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    return v;
}

} // namespace detail

inline json shape_to_json(const geometry::ShapeSpec& spec) {
    json j;
    j["kind"] = geometry::kind_name(spec.kind);
    if (spec.kind == geometry::ShapeKind::MultiDomain) {
        json comps = json::array();
        for (const auto& c : spec.components) comps.push_back(shape_to_json(c));
        j["components"] = comps;
    } else {
        j["params"] = spec.params;
        j["center"] = spec.center;
    }
    return j;
}

inline geometry::ShapeSpec shape_from_json(const json& j) {
    geometry::ShapeSpec spec;
    spec.kind = geometry::kind_from_name(j.at("kind").get<std::string>());
    if (spec.kind == geometry::ShapeKind::MultiDomain) {
        for (const auto& c : j.at("components")) spec.components.push_back(shape_from_json(c));
    } else {
        spec.params = j.at("params").get<std::vector<double>>();
        spec.center = j.at("center").get<std::vector<double>>();
    }
    return spec;
}

inline json grid_to_json(const learner::CharacteristicGrid& grid) {
    json axes = json::array();
    for (const auto& ax : grid.axes) axes.push_back({{"label", ax.label}, {"knots", ax.knots}});
    return json{{"axes", axes}};
}

inline learner::CharacteristicGrid grid_from_json(const json& j) {
    learner::CharacteristicGrid grid;
    for (const auto& a : j.at("axes"))
        grid.axes.push_back(learner::make_axis(a.at("label").get<std::string>(),
                                               a.at("knots").get<std::vector<double>>()));
    return grid;
}

inline json family_to_json(const FamilyBinding& family) {
    json b = json::array();
    for (const auto& fb : family.bindings)
        b.push_back({{"component", fb.component}, {"param", fb.param}});
    return json{{"shape", shape_to_json(family.shape_template)}, {"bindings", b}};
}

inline FamilyBinding family_from_json(const json& j) {
    FamilyBinding family;
    family.shape_template = shape_from_json(j.at("shape"));
    for (const auto& b : j.at("bindings"))
        family.bindings.push_back(
            {b.at("component").get<int>(), b.at("param").get<std::size_t>()});
    return family;
}

namespace detail {

inline void save_envelope(const std::string& type, const json& payload, const std::string& path) {
    json env;
    env["schema_version"] = schema_version;
    env["type"] = type;
    env["created"] = created_stamp();
    env["content_hash"] = util::sha256_hex(payload.dump());
    env["payload"] = payload;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << env.dump() << '\n';
    if (!out) throw io_error("write failed: " + path);
}

inline json load_envelope(const std::string& type, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    json env;
    try {
        env = json::parse(in);
    } catch (const json::exception& e) {
        throw io_error("malformed JSON in " + path + ": " + e.what());
    }
    try {
        int ver = env.at("schema_version").get<int>();
        if (ver != schema_version)
            throw io_error("schema_version " + std::to_string(ver) + " in " + path +
                           ", this reader supports " + std::to_string(schema_version));
        std::string ftype = env.at("type").get<std::string>();
        if (ftype != type)
            throw io_error(path + " holds a '" + ftype + "', expected '" + type + "'");
        if (util::sha256_hex(env.at("payload").dump()) !=
            env.at("content_hash").get<std::string>())
            throw io_error("content hash mismatch in " + path);
        return env.at("payload");
    } catch (const json::exception& e) {
        throw io_error("incomplete envelope in " + path + ": " + e.what());
    }
}

inline json adm_to_json(const farfield::AdmissibleSet& adm) {
    return json{{"d", adm.d}, {"a", adm.a}, {"mu", adm.mu}, {"N", adm.N}};
}

inline farfield::AdmissibleSet adm_from_json(const json& j) {
    return farfield::admissible_set(j.at("d").get<int>(), j.at("a").get<double>(),
                                    j.at("mu").get<double>(), j.at("N").get<int>());
}

} // namespace detail

// generators: .sgen.json
inline void save_generator(const farfield::ShapeGenerator& gen, const std::string& path) {
    json payload = detail::adm_to_json(gen.adm);
    payload["values"] = detail::complex_list(gen.values);
    detail::save_envelope("shape_generator", payload, path);
}

inline farfield::ShapeGenerator load_generator(const std::string& path) {
    json p = detail::load_envelope("shape_generator", path);
    farfield::ShapeGenerator gen{detail::adm_from_json(p), detail::complex_list_from(p.at("values"))};
    if (gen.values.size() != gen.adm.size())
        throw io_error("generator value count does not match the admissible set in " + path);
    return gen;
}

// datasets: .sds.json (tensor rows in grid row-major order)
struct StoredDataset {
    learner::TrainingDataset data;
    FamilyBinding family;
    farfield::QuadratureConfig quad;
};

inline void save_dataset(const StoredDataset& sd, const std::string& path) {
    json payload = detail::adm_to_json(sd.data.adm);
    payload["grid"] = grid_to_json(sd.data.grid);
    payload["family"] = family_to_json(sd.family);
    payload["quad"] = {{"cells", sd.quad.cells}, {"refine", sd.quad.refine}};
    json tensor = json::array();
    for (const auto& gen : sd.data.tensor) tensor.push_back(detail::complex_list(gen));
    payload["tensor"] = tensor;
    detail::save_envelope("training_dataset", payload, path);
}

inline StoredDataset load_dataset(const std::string& path) {
    json p = detail::load_envelope("training_dataset", path);
    StoredDataset sd;
    sd.data.adm = detail::adm_from_json(p);
    sd.data.grid = grid_from_json(p.at("grid"));
    sd.family = family_from_json(p.at("family"));
    sd.quad.cells = p.at("quad").at("cells").get<std::size_t>();
    sd.quad.refine = p.at("quad").at("refine").get<std::size_t>();
    for (const auto& row : p.at("tensor"))
        sd.data.tensor.push_back(detail::complex_list_from(row));
    if (sd.data.tensor.size() != sd.data.grid.node_count())
        throw io_error("dataset tensor is incomplete in " + path);
    return sd;
}

// models: .smod.json (coefficient tensors row-major, extents knots+2 per axis)
inline void save_model(const learner::SplineModel& model, const std::string& path) {
    json payload = detail::adm_to_json(model.adm);
    payload["grid"] = grid_to_json(model.grid);
    payload["basis"] = learner::basis_name(model.basis);
    json coeffs = json::array();
    for (const auto& c : model.coeffs) coeffs.push_back(detail::complex_list(c));
    payload["coeffs"] = coeffs;
    detail::save_envelope("spline_model", payload, path);
}

inline learner::SplineModel load_model(const std::string& path) {
    json p = detail::load_envelope("spline_model", path);
    learner::SplineModel model;
    model.adm = detail::adm_from_json(p);
    model.grid = grid_from_json(p.at("grid"));
    model.basis = learner::basis_from_name(p.at("basis").get<std::string>());
    for (const auto& c : p.at("coeffs")) model.coeffs.push_back(detail::complex_list_from(c));
    std::size_t want = 1;
    for (const auto& ax : model.grid.axes) want *= ax.knots.size() + 2;
    if (model.coeffs.size() != model.adm.size())
        throw io_error("model entry count mismatch in " + path);
    for (const auto& c : model.coeffs)
        if (c.size() != want) throw io_error("model coefficient extents mismatch in " + path);
    return model;
}

// fields: .sfld.json (row-major, first axis slowest)
inline void save_field(const reconstruct::Field& f, const std::string& path) {
    json payload{{"d", f.d}, {"a", f.a}, {"res", f.res}, {"im_ratio", f.im_ratio},
                 {"values", f.values}};
    detail::save_envelope("reconstruction_field", payload, path);
}

inline reconstruct::Field load_field(const std::string& path) {
    json p = detail::load_envelope("reconstruction_field", path);
    reconstruct::Field f;
    f.d = p.at("d").get<int>();
    f.a = p.at("a").get<double>();
    f.res = p.at("res").get<std::size_t>();
    f.im_ratio = p.at("im_ratio").get<double>();
    f.values = p.at("values").get<std::vector<double>>();
    std::size_t want = 1;
    for (int j = 0; j < f.d; ++j) want *= f.res;
    if (f.values.size() != want) throw io_error("field size mismatch in " + path);
    return f;
}

// ---- plot-ready exports -------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

// one value per line, row-major; the header carries the grid geometry
inline void export_field_csv(const reconstruct::Field& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "# field d=" << f.d << " a=" << detail::fmt(f.a) << " res=" << f.res
        << " im_ratio=" << detail::fmt(f.im_ratio) << "\n";
    out << "value\n";
    for (double v : f.values) out << detail::fmt(v) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

// 8-bit ASCII PGM of a 2-d field plus a JSON sidecar with the scaling
inline void export_field_pgm(const reconstruct::Field& f, const std::string& path) {
    if (f.d != 2) throw domain_error("export_field_pgm: 2-d fields only");
    double vmin = f.values[0], vmax = f.values[0];
    for (double v : f.values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "P2\n" << f.res << " " << f.res << "\n255\n";
    // image rows scan x2 top-down, columns scan x1 left-right
    for (std::size_t r = 0; r < f.res; ++r) {
        const std::size_t j = f.res - 1 - r;
        for (std::size_t i = 0; i < f.res; ++i) {
            int px = static_cast<int>(std::lround(255 * (f.values[i * f.res + j] - vmin) / span));
            out << std::clamp(px, 0, 255) << (i + 1 < f.res ? ' ' : '\n');
        }
    }
    if (!out) throw io_error("write failed: " + path);
    json side{{"a", f.a},       {"res", f.res},         {"vmin", vmin},
              {"vmax", vmax},   {"im_ratio", f.im_ratio}, {"orientation", "x1 right, x2 up"}};
    std::ofstream sout(path + ".json", std::ios::binary);
    if (!sout) throw io_error("cannot write " + path + ".json");
    sout << side.dump() << '\n';
}

// reconstruction contour (solid) with an optional reference outline (dashed)
inline void export_contour_svg(const reconstruct::IsoContour& contour,
                               const std::vector<std::vector<geometry::Vec2>>& reference,
                               double a, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    const double h = a / 2;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << -h << " " << -h << " " << a
        << " " << a << "\">\n";
    out << "<g transform=\"scale(1,-1)\" fill=\"none\" stroke-width=\"" << a / 400 << "\">\n";
    auto emit = [&](const std::vector<geometry::Vec2>& poly, bool closed, const char* style) {
        out << "<path d=\"";
        for (std::size_t i = 0; i < poly.size(); ++i)
            out << (i ? " L " : "M ") << poly[i].x << " " << poly[i].y;
        if (closed) out << " Z";
        out << "\" " << style << "/>\n";
    };
    for (const auto& ref : reference)
        emit(ref, true, "stroke=\"#cc3300\" stroke-dasharray=\"0.05 0.05\"");
    for (std::size_t l = 0; l < contour.loops.size(); ++l)
        emit(contour.loops[l], contour.closed[l], "stroke=\"#0066cc\"");
    out << "</g>\n</svg>\n";
    if (!out) throw io_error("write failed: " + path);
}

// ASCII STL with per-facet normals
inline void export_mesh_stl(const reconstruct::TriMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "solid reconstruction\n";
    for (const auto& t : mesh.tris) {
        const double ux = t[1].x - t[0].x, uy = t[1].y - t[0].y, uz = t[1].z - t[0].z;
        const double vx = t[2].x - t[0].x, vy = t[2].y - t[0].y, vz = t[2].z - t[0].z;
        double nx = uy * vz - uz * vy, ny = uz * vx - ux * vz, nz = ux * vy - uy * vx;
        const double len = std::sqrt(nx * nx + ny * ny + nz * nz);
        if (len > 0) {
            nx /= len;
            ny /= len;
            nz /= len;
        } else {
            nx = ny = 0;
            nz = 1;
        }
        out << " facet normal " << nx << " " << ny << " " << nz << "\n  outer loop\n";
        for (const auto& p : t)
            out << "   vertex " << p.x << " " << p.y << " " << p.z << "\n";
        out << "  endloop\n endfacet\n";
    }
    out << "endsolid reconstruction\n";
    if (!out) throw io_error("write failed: " + path);
}

} // namespace shapegen::dataset
