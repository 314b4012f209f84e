#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "edemap/conformal.hpp"
#include "edemap/edem.hpp"
#include "edemap/edeq.hpp"
#include "edemap/errors.hpp"
#include "edemap/mesh.hpp"
#include "edemap/metrics.hpp"
#include "edemap/remesh.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace edemap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConvergence = 2;

struct Options {
    std::string command;
    std::string input;
    std::string map_path; // metrics only
    std::string out = "out";
    std::string population = "area";
    std::string radii = "1,1,1";
    std::string method = "edeq"; // remesh only
    double dt = 0.1;
    double epsilon = 1e-3;
    int n_max = 300;
    double alpha = 1.0;
    double db = 0.1;
    double dc = 0.1;
    int K = 5;
    int target_vertices = 8500;
    int log_every = 10;
    int seed = 0;
};

EllipsoidRadii parse_radii(const std::string& spec) {
    if (spec == "sphere") return EllipsoidRadii(1.0, 1.0, 1.0);
    double a = 0, b = 0, c = 0;
    char comma1 = 0, comma2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> a >> comma1 >> b >> comma2 >> c) || comma1 != ',' || comma2 != ',') {
        throw ValidationError("radii must be 'a,b,c' or 'sphere'");
    }
    return EllipsoidRadii(a, b, c);
}

VectorXd parse_population(const std::string& spec, const TriMesh& mesh) {
    if (spec == "area") return face_areas(mesh, mesh.V);
    if (spec == "uniform") return VectorXd::Ones(mesh.num_faces());
    if (spec.rfind("csv:", 0) == 0) return load_population_csv(spec.substr(4), mesh.num_faces());
    throw ValidationError("population must be 'area', 'uniform', or 'csv:<path>'");
}

json canonical_config(const Options& opt) {
    const EllipsoidRadii r = parse_radii(opt.radii);
    json cfg;
    cfg["command"] = opt.command;
    cfg["input"] = opt.input;
    cfg["out"] = opt.out;
    cfg["population"] = opt.population;
    cfg["radii"] = {r.a, r.b, r.c};
    cfg["dt"] = opt.dt;
    cfg["epsilon"] = opt.epsilon;
    cfg["n_max"] = opt.n_max;
    cfg["log_every"] = opt.log_every;
    cfg["seed"] = opt.seed;
    if (opt.command == "edeq") {
        cfg["alpha"] = opt.alpha;
        cfg["db"] = opt.db;
        cfg["dc"] = opt.dc;
        cfg["K"] = opt.K;
    }
    if (opt.command == "remesh") {
        cfg["method"] = opt.method;
        cfg["target_vertices"] = opt.target_vertices;
        cfg["alpha"] = opt.alpha;
        cfg["db"] = opt.db;
        cfg["dc"] = opt.dc;
        cfg["K"] = opt.K;
    }
    if (opt.command == "metrics") cfg["map"] = opt.map_path;
    return cfg;
}

void apply_config_file(Options& opt, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    auto get = [&](const char* key, auto& field) {
        if (cfg.contains(key)) field = cfg[key].template get<std::decay_t<decltype(field)>>();
    };
    get("input", opt.input);
    get("out", opt.out);
    get("population", opt.population);
    get("dt", opt.dt);
    get("epsilon", opt.epsilon);
    get("n_max", opt.n_max);
    get("log_every", opt.log_every);
    get("seed", opt.seed);
    get("alpha", opt.alpha);
    get("db", opt.db);
    get("dc", opt.dc);
    get("K", opt.K);
    get("method", opt.method);
    get("target_vertices", opt.target_vertices);
    get("map", opt.map_path);
    if (cfg.contains("radii")) {
        const auto r = cfg["radii"];
        opt.radii = std::to_string(r[0].get<double>()) + "," + std::to_string(r[1].get<double>()) +
                    "," + std::to_string(r[2].get<double>());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json report_entry(const DistortionReport& rep) {
    return json{{"mean_abs_d_area", rep.mean_abs_d_area},
                {"sd_abs_d_area", rep.sd_abs_d_area},
                {"mean_abs_mu", rep.mean_abs_mu},
                {"var_normalized_density", rep.var_normalized_density},
                {"overlaps", rep.flipped}};
}

ProgressCallback make_logger(const std::string& tag, int log_every) {
    if (log_every <= 0) return nullptr;
    return [tag, log_every](const TraceRecord& rec) {
        if (rec.iteration % log_every == 0) {
            std::cerr << "[" << tag << "] iter " << rec.iteration << " sd/mean " << rec.sd_over_mean
                      << " flips " << rec.flips_post << "\n";
        }
    };
}

const char* stop_name(StopReason reason) {
    switch (reason) {
        case StopReason::Converged: return "converged";
        case StopReason::IterationCap: return "iteration_cap";
        case StopReason::Stalled: return "stalled";
    }
    return "unknown";
}

int cmd_edem(const Options& opt) {
    fs::create_directories(opt.out);
    write_json(fs::path(opt.out) / "config.json", canonical_config(opt));

    const TriMesh mesh = load_mesh(opt.input);
    EdemConfig config;
    config.dt = opt.dt;
    config.epsilon = opt.epsilon;
    config.n_max = opt.n_max;
    config.radii = parse_radii(opt.radii);
    config.population = parse_population(opt.population, mesh);

    EdemTrace partial;
    try {
        const EdemResult result = run_edem(mesh, config, [&](const TraceRecord& rec) {
            partial.records.push_back(rec);
            if (opt.log_every > 0 && rec.iteration % opt.log_every == 0) {
                std::cerr << "[edem] iter " << rec.iteration << " sd/mean " << rec.sd_over_mean
                          << " flips " << rec.flips_post << "\n";
            }
        });

        save_obj((fs::path(opt.out) / "param.obj").string(), result.map.positions, mesh.F);
        write_trace_csv((fs::path(opt.out) / "trace.csv").string(), result.trace);

        const DistortionReport initial = distortion_report(mesh, result.initial_positions, config.population);
        const DistortionReport final_rep = distortion_report(mesh, result.map.positions, config.population);
        json rep;
        rep["command"] = "edem";
        rep["input"] = opt.input;
        rep["radii"] = {config.radii.a, config.radii.b, config.radii.c};
        rep["iterations"] = result.trace.records.size();
        rep["stop"] = stop_name(result.trace.stop);
        rep["final_sd_over_mean"] =
            result.trace.records.empty() ? 0.0 : result.trace.records.back().sd_over_mean;
        rep["initial"] = report_entry(initial);
        rep["final"] = report_entry(final_rep);
        write_json(fs::path(opt.out) / "report.json", rep);
        write_distortion_csv((fs::path(opt.out) / "perface.csv").string(), final_rep);

        if (result.trace.stop == StopReason::IterationCap) {
            std::cerr << "warning: iteration cap reached before the density equalized\n";
        }
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "warning: run aborted: " << e.what() << "\n";
        write_trace_csv((fs::path(opt.out) / "trace.csv").string(), partial);
        return kExitConvergence;
    }
}

int cmd_edeq(const Options& opt) {
    fs::create_directories(opt.out);
    write_json(fs::path(opt.out) / "config.json", canonical_config(opt));

    if (!(opt.alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
    const TriMesh mesh = load_mesh(opt.input);
    EdeqConfig config;
    config.dt = opt.dt;
    config.db = opt.db;
    config.dc = opt.dc;
    config.K = opt.K;
    config.alpha = opt.alpha;
    config.epsilon = opt.epsilon;
    config.n_max = opt.n_max;
    config.initial_radii = parse_radii(opt.radii);
    config.population = parse_population(opt.population, mesh);

    try {
        const EdeqResult result = run_edeq(mesh, config, make_logger("edeq", opt.log_every));

        save_obj((fs::path(opt.out) / "param.obj").string(), result.map.positions, mesh.F);
        write_energy_csv((fs::path(opt.out) / "energy.csv").string(), result.report);

        const DistortionReport initial = distortion_report(mesh, result.initial_positions, config.population);
        const DistortionReport final_rep = distortion_report(mesh, result.map.positions, config.population);
        json rep;
        rep["command"] = "edeq";
        rep["input"] = opt.input;
        rep["initial_radii"] = {config.initial_radii.a, config.initial_radii.b, config.initial_radii.c};
        rep["final_radii"] = {result.map.radii.a, result.map.radii.b, result.map.radii.c};
        rep["iterations"] = result.report.records.size();
        rep["stop"] = stop_name(result.report.stop);
        rep["final_energy"] = result.report.records.empty() ? 0.0 : result.report.records.back().e_total;
        rep["shape_updates"] = result.report.shape_updates.size();
        rep["initial"] = report_entry(initial);
        rep["final"] = report_entry(final_rep);
        write_json(fs::path(opt.out) / "report.json", rep);
        write_distortion_csv((fs::path(opt.out) / "perface.csv").string(), final_rep);
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "warning: run aborted: " << e.what() << "\n";
        return kExitConvergence;
    }
}

int cmd_remesh(const Options& opt) {
    fs::create_directories(opt.out);
    write_json(fs::path(opt.out) / "config.json", canonical_config(opt));

    const TriMesh mesh = load_mesh(opt.input);
    const EllipsoidRadii radii = parse_radii(opt.radii);
    const VectorXd population = parse_population(opt.population, mesh);

    try {
        ParamMap param;
        if (opt.method == "fecm") {
            param = fecm(mesh, radii);
        } else if (opt.method == "edem") {
            EdemConfig config;
            config.dt = opt.dt;
            config.epsilon = opt.epsilon;
            config.n_max = opt.n_max;
            config.radii = radii;
            config.population = population;
            param = run_edem(mesh, config, make_logger("remesh/edem", opt.log_every)).map;
        } else if (opt.method == "edeq") {
            EdeqConfig config;
            config.dt = opt.dt;
            config.db = opt.db;
            config.dc = opt.dc;
            config.K = opt.K;
            config.alpha = opt.alpha;
            config.epsilon = opt.epsilon > 1e-4 ? 1e-5 : opt.epsilon;
            config.n_max = opt.n_max;
            config.initial_radii = radii;
            config.population = population;
            param = run_edeq(mesh, config, make_logger("remesh/edeq", opt.log_every)).map;
        } else {
            throw ValidationError("method must be fecm, edem, or edeq");
        }

        const TriMesh samples = uniform_ellipsoid_mesh(param.radii, opt.target_vertices);
        const TriMesh remeshed = pull_back(mesh, param, samples);

        save_obj((fs::path(opt.out) / "param.obj").string(), param.positions, mesh.F);
        save_obj((fs::path(opt.out) / "remeshed.obj").string(), remeshed.V, remeshed.F);

        const RemeshReport quality = remesh_quality(remeshed);
        json rep;
        rep["command"] = "remesh";
        rep["input"] = opt.input;
        rep["method"] = opt.method;
        rep["target_vertices"] = opt.target_vertices;
        rep["vertex_count"] = quality.vertex_count;
        rep["delta_size"] = quality.delta_size;
        rep["delta_shape"] = quality.delta_shape;
        rep["radii"] = {param.radii.a, param.radii.b, param.radii.c};
        write_json(fs::path(opt.out) / "report.json", rep);

        std::FILE* csv = std::fopen((fs::path(opt.out) / "regularity.csv").string().c_str(), "w");
        if (csv) {
            std::fprintf(csv, "face,regularity\n");
            for (int f = 0; f < quality.regularity.size(); ++f) {
                std::fprintf(csv, "%d,%.17g\n", f, quality.regularity(f));
            }
            std::fclose(csv);
        }
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "warning: run aborted: " << e.what() << "\n";
        return kExitConvergence;
    }
}

int cmd_metrics(const Options& opt) {
    fs::create_directories(opt.out);
    write_json(fs::path(opt.out) / "config.json", canonical_config(opt));

    const TriMesh source = load_mesh(opt.input);
    const TriMesh mapped = load_mesh(opt.map_path);
    if (source.num_vertices() != mapped.num_vertices() || source.F != mapped.F) {
        throw ConnectivityMismatch("source and map meshes have different connectivity");
    }
    const VectorXd population = parse_population(opt.population, source);
    const DistortionReport rep = distortion_report(source, mapped.V, population);

    json j;
    j["command"] = "metrics";
    j["input"] = opt.input;
    j["map"] = opt.map_path;
    j["metrics"] = report_entry(rep);
    write_json(fs::path(opt.out) / "report.json", j);
    write_distortion_csv((fs::path(opt.out) / "perface.csv").string(), rep);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("EDEQ_THREADS")) {
        const int n = std::atoi(threads);
        if (n > 0) Eigen::setNbThreads(n);
    }

    CLI::App app{"Ellipsoidal density-equalizing parameterization toolkit"};
    app.require_subcommand(1);

    Options opt;
    std::string config_path;

    auto add_common = [&](CLI::App* sub, bool needs_input) {
        if (needs_input) sub->add_option("--input", opt.input, "input mesh (obj/off)")->required();
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--config", config_path, "JSON config with defaults (flags win)");
        sub->add_option("--population", opt.population, "area | uniform | csv:<path>");
        sub->add_option("--radii", opt.radii, "a,b,c or 'sphere'");
        sub->add_option("--dt", opt.dt, "time step size");
        sub->add_option("--epsilon", opt.epsilon, "stopping threshold");
        sub->add_option("--n-max", opt.n_max, "iteration cap");
        sub->add_option("--log-every", opt.log_every, "progress line period (0 = quiet)");
        sub->add_option("--seed", opt.seed, "seed for randomized tie-breaks");
    };

    CLI::App* edem_cmd = app.add_subcommand("edem", "density-equalizing map to a fixed ellipsoid");
    add_common(edem_cmd, true);

    CLI::App* edeq_cmd =
        app.add_subcommand("edeq", "density-equalizing quasi-conformal map with radius optimization");
    add_common(edeq_cmd, true);
    edeq_cmd->add_option("--alpha", opt.alpha, "conformality weight (nonnegative)");
    edeq_cmd->add_option("--db", opt.db, "radius step along b");
    edeq_cmd->add_option("--dc", opt.dc, "radius step along c");
    edeq_cmd->add_option("--K", opt.K, "descent iterations per fixed radii");

    CLI::App* remesh_cmd = app.add_subcommand("remesh", "isotropic remeshing through a parameterization");
    add_common(remesh_cmd, true);
    remesh_cmd->add_option("--method", opt.method, "fecm | edem | edeq");
    remesh_cmd->add_option("--target-vertices", opt.target_vertices, "vertex count of the remesh");
    remesh_cmd->add_option("--alpha", opt.alpha, "conformality weight (edeq)");
    remesh_cmd->add_option("--db", opt.db, "radius step along b (edeq)");
    remesh_cmd->add_option("--dc", opt.dc, "radius step along c (edeq)");
    remesh_cmd->add_option("--K", opt.K, "descent iterations per fixed radii (edeq)");

    CLI::App* metrics_cmd = app.add_subcommand("metrics", "distortion metrics of a parameterization");
    add_common(metrics_cmd, true);
    metrics_cmd->add_option("--map", opt.map_path, "parameterization mesh (same connectivity)")->required();

    // epsilon defaults differ per command; adjust before parsing flags
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "edeq") opt.epsilon = 1e-5;
    }

    // config file first, explicit flags override
    for (int i = 1; i < argc - 1; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config_file(opt, argv[i + 1]);
            } catch (const ValidationError& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitValidation;
            }
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (edem_cmd->parsed()) {
            opt.command = "edem";
            return cmd_edem(opt);
        }
        if (edeq_cmd->parsed()) {
            opt.command = "edeq";
            if (!(opt.alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
            return cmd_edeq(opt);
        }
        if (remesh_cmd->parsed()) {
            opt.command = "remesh";
            return cmd_remesh(opt);
        }
        if (metrics_cmd->parsed()) {
            opt.command = "metrics";
            return cmd_metrics(opt);
        }
        std::cerr << "error: no command\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
