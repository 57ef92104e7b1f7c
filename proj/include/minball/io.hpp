#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "minball/metrics.hpp"
#include "minball/reconstruction.hpp"
#include "minball/reinforce.hpp"
#include "minball/types.hpp"

namespace minball {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Point clouds: XYZ (2 or 3 whitespace floats per line) and PLY
// (ascii / binary little-endian, x y z with optional extra properties)
// ---------------------------------------------------------------------------

struct LoadedCloud {
    int dim = 0;
    std::vector<Vec<2>> points2;
    std::vector<Vec<3>> points3;

    std::size_t size() const { return dim == 2 ? points2.size() : points3.size(); }
};

namespace detail {

inline LoadedCloud load_xyz(std::istream& in, const std::string& path) {
    LoadedCloud cloud;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (vals.empty()) {
            std::string rest;
            std::istringstream probe(line);
            probe >> rest;
            if (rest.empty()) continue;  // blank line
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed line");
        }
        if (!ls.eof()) {
            std::string rest;
            ls.clear();
            ls >> rest;
            if (!rest.empty())
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": malformed line");
        }
        if (vals.size() != 2 && vals.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 2 or 3 columns");
        const int dim = static_cast<int>(vals.size());
        if (cloud.dim == 0) cloud.dim = dim;
        if (dim != cloud.dim)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": mixed column counts");
        if (dim == 2)
            cloud.points2.push_back({vals[0], vals[1]});
        else
            cloud.points3.push_back({vals[0], vals[1], vals[2]});
    }
    if (cloud.dim == 0) throw std::runtime_error(path + ": empty point cloud");
    return cloud;
}

struct PlyProperty {
    std::string name;
    int byte_size = 0;
    bool is_double = false;
};

inline LoadedCloud load_ply(std::istream& in, const std::string& path) {
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw std::runtime_error(path + ": not a PLY file");
    bool binary = false;
    std::int64_t n_vertices = -1;
    std::vector<PlyProperty> props;
    bool in_vertex_element = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw std::runtime_error(path + ": unsupported PLY format " + fmt);
        } else if (word == "element") {
            std::string name;
            std::int64_t count;
            ls >> name >> count;
            in_vertex_element = name == "vertex";
            if (in_vertex_element) n_vertices = count;
            else if (count > 0 && n_vertices < 0)
                throw std::runtime_error(path + ": vertex element must come first");
        } else if (word == "property" && in_vertex_element) {
            std::string type, name;
            ls >> type >> name;
            PlyProperty p;
            p.name = name;
            if (type == "float" || type == "float32")
                p.byte_size = 4;
            else if (type == "double" || type == "float64") {
                p.byte_size = 8;
                p.is_double = true;
            } else if (type == "uchar" || type == "uint8" || type == "char" ||
                       type == "int8")
                p.byte_size = 1;
            else if (type == "short" || type == "ushort")
                p.byte_size = 2;
            else if (type == "int" || type == "uint" || type == "int32" ||
                     type == "uint32")
                p.byte_size = 4;
            else
                throw std::runtime_error(path + ": unsupported property type " + type);
            props.push_back(p);
        } else if (word == "end_header") {
            break;
        }
    }
    if (n_vertices < 0) throw std::runtime_error(path + ": missing vertex element");
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < props.size(); ++i) {
        if (props[i].name == "x") ix = static_cast<int>(i);
        if (props[i].name == "y") iy = static_cast<int>(i);
        if (props[i].name == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0) throw std::runtime_error(path + ": PLY lacks x/y properties");

    LoadedCloud cloud;
    cloud.dim = iz >= 0 ? 3 : 2;
    for (std::int64_t v = 0; v < n_vertices; ++v) {
        std::vector<double> vals(props.size(), 0.0);
        if (binary) {
            for (std::size_t p = 0; p < props.size(); ++p) {
                char buf[8];
                in.read(buf, props[p].byte_size);
                if (!in) throw std::runtime_error(path + ": truncated PLY payload");
                if (props[p].byte_size == 4 && !props[p].is_double) {
                    float f;
                    std::memcpy(&f, buf, 4);
                    vals[p] = f;
                } else if (props[p].is_double) {
                    double d;
                    std::memcpy(&d, buf, 8);
                    vals[p] = d;
                }
            }
        } else {
            for (std::size_t p = 0; p < props.size(); ++p)
                if (!(in >> vals[p]))
                    throw std::runtime_error(path + ": truncated PLY payload");
        }
        if (cloud.dim == 2)
            cloud.points2.push_back({vals[ix], vals[iy]});
        else
            cloud.points3.push_back({vals[ix], vals[iy], vals[iz]});
    }
    return cloud;
}

}  // namespace detail

inline LoadedCloud load_pointcloud(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".ply") return detail::load_ply(in, path);
    return detail::load_xyz(in, path);
}

// ---------------------------------------------------------------------------
// Meshes: OBJ with `f` records in 3D, `v`/`l` records in 2D, optional SVG
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline void save_mesh(const Mesh<3>& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& v : mesh.vertices)
        out << "v " << detail::fmt_double(v[0]) << ' ' << detail::fmt_double(v[1])
            << ' ' << detail::fmt_double(v[2]) << '\n';
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

inline void save_mesh(const Mesh<2>& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& v : mesh.vertices)
        out << "v " << detail::fmt_double(v[0]) << ' ' << detail::fmt_double(v[1])
            << '\n';
    for (const auto& f : mesh.faces) out << "l " << f[0] + 1 << ' ' << f[1] + 1 << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

template <int D>
inline Mesh<D> load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    Mesh<D> mesh;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            std::vector<double> vals;
            double v;
            while (ls >> v) vals.push_back(v);
            if (static_cast<int>(vals.size()) < D)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": vertex arity mismatch");
            Vec<D> p;
            for (int d = 0; d < D; ++d) p[d] = vals[d];
            mesh.vertices.push_back(p);
        } else if ((tag == "f" && D == 3) || (tag == "l" && D == 2)) {
            std::array<std::int32_t, D> idx;
            for (int i = 0; i < D; ++i) {
                std::string token;
                if (!(ls >> token))
                    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": face arity mismatch");
                idx[i] = static_cast<std::int32_t>(std::stol(token)) - 1;
                if (idx[i] < 0)
                    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": bad index");
            }
            mesh.faces.push_back(Face<D>(idx));
        }
    }
    for (const auto& f : mesh.faces)
        if (!f.valid(static_cast<std::int64_t>(mesh.vertices.size())))
            throw std::runtime_error(path + ": face index out of range");
    mesh.source_index.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        mesh.source_index[i] = static_cast<std::int32_t>(i);
    return mesh;
}

// Detect the dimension of a saved mesh: `l` records mean 2D, `f` records 3D.
inline int mesh_file_dim(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::string line;
    int vertex_cols = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "l") return 2;
        if (tag == "f") return 3;
        if (tag == "v" && vertex_cols == 0) {
            double v;
            while (ls >> v) ++vertex_cols;
        }
    }
    if (vertex_cols == 2) return 2;
    if (vertex_cols >= 3) return 3;
    throw std::runtime_error(path + ": cannot infer mesh dimension");
}

// One SVG polyline path per connected chain, closed chains emit 'Z'.
inline void save_svg(const Mesh<2>& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\">\n";

    std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> adj(
        mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        adj[mesh.faces[f][0]].push_back({mesh.faces[f][1], static_cast<std::int32_t>(f)});
        adj[mesh.faces[f][1]].push_back({mesh.faces[f][0], static_cast<std::int32_t>(f)});
    }
    std::vector<char> used(mesh.faces.size(), 0);
    auto walk = [&](std::int32_t start) {
        std::vector<std::int32_t> chain = {start};
        std::int32_t cur = start;
        for (;;) {
            std::int32_t next = -1;
            for (const auto& [nb, f] : adj[cur])
                if (!used[f]) {
                    used[f] = 1;
                    next = nb;
                    break;
                }
            if (next < 0) break;
            chain.push_back(next);
            cur = next;
        }
        return chain;
    };
    auto emit = [&](const std::vector<std::int32_t>& chain) {
        if (chain.size() < 2) return;
        out << "  <path fill=\"none\" stroke=\"black\" stroke-width=\"0.002\" d=\"";
        const bool closed = chain.front() == chain.back() && chain.size() > 2;
        const std::size_t n = closed ? chain.size() - 1 : chain.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = mesh.vertices[chain[i]];
            out << (i == 0 ? 'M' : 'L') << p[0] << ' ' << 1.0 - p[1];
        }
        if (closed) out << 'Z';
        out << "\"/>\n";
    };
    // open chains first (start at odd-degree vertices), then remaining loops
    for (std::size_t v = 0; v < adj.size(); ++v) {
        std::size_t pending = 0;
        for (const auto& [nb, f] : adj[v]) pending += !used[f];
        if (pending == 1) emit(walk(static_cast<std::int32_t>(v)));
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        if (!used[f]) emit(walk(mesh.faces[f][0]));
    out << "</svg>\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Run configuration (flat JSON, unknown keys rejected)
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string mode = "2d-pc";  // "2d-pc" | "3d-pc"
    std::string input;
    std::string mesh;  // reinforce input mesh
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    ReconConfig recon;
    ReinforceConfig reinforce;
    int metric_samples = kMetricSamples;
    double metric_tau = kMetricTau;
};

// Paper-default hyperparameters per mode.
inline void apply_mode_defaults(RunConfig& cfg) {
    if (cfg.mode == "2d-pc") {
        cfg.recon.pointcloud_init = false;
        cfg.recon.epochs = 1;
        cfg.recon.steps_real_init = 100;
        cfg.recon.steps_position = 500;
        cfg.recon.steps_real = 0;
        cfg.recon.lr_psi = 0.3;
        cfg.recon.lr_position = 1e-3;
        cfg.recon.samples_per_face = 4;
    } else if (cfg.mode == "3d-pc") {
        cfg.recon.pointcloud_init = true;
        cfg.recon.epochs = 1;
        cfg.recon.steps_real_init = 0;
        cfg.recon.steps_position = 2000;
        cfg.recon.steps_real = 0;
        cfg.recon.lr_position = 1e-3;
        cfg.recon.samples_per_face = 1;
    } else {
        throw std::runtime_error("unknown mode: " + cfg.mode);
    }
    cfg.recon.cache_refresh = 50;
    cfg.recon.cache_K = 10;
    cfg.recon.knn_k = 10;
    cfg.recon.grid_edge = 0.0;  // 3x estimated density
    cfg.recon.lambda_qual = 0.0;
    cfg.recon.lambda_real = 1e-4;
}

inline json to_json(const RunConfig& cfg) {
    return json{{"mode", cfg.mode},
                {"input", cfg.input},
                {"mesh", cfg.mesh},
                {"out_dir", cfg.out_dir},
                {"seed", cfg.seed},
                {"epochs", cfg.recon.epochs},
                {"steps_real_init", cfg.recon.steps_real_init},
                {"steps_position", cfg.recon.steps_position},
                {"steps_real", cfg.recon.steps_real},
                {"cache_refresh", cfg.recon.cache_refresh},
                {"cache_K", cfg.recon.cache_K},
                {"knn_k", cfg.recon.knn_k},
                {"lr_position", cfg.recon.lr_position},
                {"lr_psi", cfg.recon.lr_psi},
                {"grid_edge", cfg.recon.grid_edge},
                {"lambda_qual", cfg.recon.lambda_qual},
                {"lambda_real", cfg.recon.lambda_real},
                {"samples_per_face", cfg.recon.samples_per_face},
                {"k_cd", cfg.recon.k_cd},
                {"extract_threshold", cfg.recon.extract_threshold},
                {"snap_threshold", cfg.recon.snap_threshold},
                {"reinforce_epochs", cfg.reinforce.epochs},
                {"reinforce_steps", cfg.reinforce.steps},
                {"reinforce_batch", cfg.reinforce.batch_size},
                {"reinforce_eps_card", cfg.reinforce.eps_card},
                {"reinforce_lr_phi", cfg.reinforce.lr_phi},
                {"reinforce_spacing", cfg.reinforce.spacing},
                {"metric_samples", cfg.metric_samples},
                {"metric_tau", cfg.metric_tau}};
}

// Missing keys keep the mode defaults; unknown keys are an error.
inline RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
    apply_mode_defaults(cfg);
    const json echo = to_json(cfg);
    for (const auto& [key, value] : j.items())
        if (!echo.contains(key))
            throw std::runtime_error("unknown config key: " + key);

    auto get = [&](const char* key, auto& into) {
        if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
    };
    get("input", cfg.input);
    get("mesh", cfg.mesh);
    get("out_dir", cfg.out_dir);
    get("seed", cfg.seed);
    get("epochs", cfg.recon.epochs);
    get("steps_real_init", cfg.recon.steps_real_init);
    get("steps_position", cfg.recon.steps_position);
    get("steps_real", cfg.recon.steps_real);
    get("cache_refresh", cfg.recon.cache_refresh);
    get("cache_K", cfg.recon.cache_K);
    get("knn_k", cfg.recon.knn_k);
    get("lr_position", cfg.recon.lr_position);
    get("lr_psi", cfg.recon.lr_psi);
    get("grid_edge", cfg.recon.grid_edge);
    get("lambda_qual", cfg.recon.lambda_qual);
    get("lambda_real", cfg.recon.lambda_real);
    get("samples_per_face", cfg.recon.samples_per_face);
    get("k_cd", cfg.recon.k_cd);
    get("extract_threshold", cfg.recon.extract_threshold);
    get("snap_threshold", cfg.recon.snap_threshold);
    get("reinforce_epochs", cfg.reinforce.epochs);
    get("reinforce_steps", cfg.reinforce.steps);
    get("reinforce_batch", cfg.reinforce.batch_size);
    get("reinforce_eps_card", cfg.reinforce.eps_card);
    get("reinforce_lr_phi", cfg.reinforce.lr_phi);
    get("reinforce_spacing", cfg.reinforce.spacing);
    get("metric_samples", cfg.metric_samples);
    get("metric_tau", cfg.metric_tau);
    cfg.recon.seed = cfg.seed;
    cfg.reinforce.seed = cfg.seed;
    return cfg;
}

inline json report_to_json(const MetricsReport& r) {
    return json{{"cd", r.cd},
                {"f1", r.f1},
                {"nc", r.nc},
                {"ecd", r.ecd},
                {"ef1", r.ef1},
                {"ar_mean", r.ar_mean},
                {"si_ratio", r.si_ratio},
                {"nme_ratio", r.nme_ratio},
                {"nmv_ratio", r.nmv_ratio},
                {"n_verts", r.n_verts},
                {"n_faces", r.n_faces},
                {"runtime_seconds", r.runtime_seconds}};
}

}  // namespace minball
