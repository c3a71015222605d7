// stencilc: compile, inspect, run, simulate and diff stencil programs.
//
// Exit codes: 0 success, 1 diagnostics, 2 tolerance failure, 3 internal error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "stencilc/inspect.hpp"
#include "stencilc/pipeline.hpp"
#include "stencilc/simulator.hpp"

using namespace stencilc;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, diagnostics = 1, tolerance = 2, internal = 3 };

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out)
        throw LoadError("cannot write '" + path.string() + "'");
}

std::pair<std::string, std::string> split_eq(const std::string &s, const char *what) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
        throw LoadError(std::string("expected name=value for ") + what + ", got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

std::vector<std::int64_t> parse_ints(std::string s) {
    std::vector<std::int64_t> v;
    for (char &c : s)
        if (c == '(' || c == ')' || c == ',' || c == 'x')
            c = ' ';
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        long long x = 0;
        try {
            x = std::stoll(tok, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (used != tok.size())
            throw LoadError("expected integers, got '" + tok + "'");
        v.push_back(x);
    }
    return v;
}

LaunchValue string_value(const std::string &s) {
    LaunchValue v;
    v.kind = LaunchValue::Kind::string;
    v.text = s;
    return v;
}

LaunchValue tuple_value(const std::string &s) {
    LaunchValue v;
    v.kind = LaunchValue::Kind::tuple;
    v.ints = parse_ints(s);
    return v;
}

LaunchValue bool_value(bool b) {
    LaunchValue v;
    v.kind = LaunchValue::Kind::boolean;
    v.boolean = b;
    return v;
}

// --set key=value: integers, tuples, booleans, reals, otherwise strings.
LaunchValue guess_value(const std::string &s) {
    if (s == "true" || s == "True")
        return bool_value(true);
    if (s == "false" || s == "False")
        return bool_value(false);
    if (s.find(',') != std::string::npos || s.starts_with("("))
        return tuple_value(s);
    LaunchValue v;
    std::size_t used = 0;
    try {
        v.integer = std::stoll(s, &used);
        if (used == s.size()) {
            v.kind = LaunchValue::Kind::integer;
            return v;
        }
        v.real = std::stod(s, &used);
        if (used == s.size()) {
            v.kind = LaunchValue::Kind::real;
            return v;
        }
    } catch (const std::exception &) {
    }
    return string_value(s);
}

struct BackendFlags {
    std::string backend, tmpl, algorithm, block, plane, mem_type, decomposition, capability;
    std::string fabric, margins;
    std::int64_t pe_memory = 0;
    bool prefetch = false, async_memcpy = false;
    std::vector<std::string> sets, binds;
    std::string target;

    void add(CLI::App *c) {
        c->add_option("--backend", backend, "seq, omp, gpu (cuda) or dataflow (csl)");
        c->add_option("--template", tmpl, "OpenMP or GPU template");
        c->add_option("--algorithm", algorithm, "conventional or semi (OpenMP)");
        c->add_option("--block", block, "block dims, e.g. 16,8,8");
        c->add_option("--plane", plane, "GPU streaming plane dims, e.g. 32,32");
        c->add_option("--mem-type", mem_type, "registers, shared or auto");
        c->add_option("--decomposition", decomposition, "unified, cross_product or slab7");
        c->add_option("--compute-capability", capability, "GPU compute capability");
        c->add_flag("--prefetch", prefetch, "GPU streaming prefetch");
        c->add_flag("--async-memcpy", async_memcpy, "GPU asynchronous copies");
        c->add_option("--fabric", fabric, "dataflow fabric dims, e.g. 757,996");
        c->add_option("--margins", margins, "dataflow margins N,E,S,W");
        c->add_option("--pe-memory", pe_memory, "dataflow elements per column");
        c->add_option("--set", sets, "any backend parameter, key=value");
        c->add_option("--bind", binds, "integer target parameter, name=value");
        c->add_option("--target", target, "target to use instead of the launched one");
    }

    Request request(const SourceUnit &unit) const {
        std::optional<BackendKind> kind;
        if (!backend.empty()) {
            kind = backend_from_name(backend);
            if (!kind)
                throw LoadError("unknown backend '" + backend + "'");
        }
        Request r = default_request(unit, kind);
        r.target = target;
        for (const auto &b : binds) {
            auto [k, v] = split_eq(b, "--bind");
            auto ints = parse_ints(v);
            if (ints.size() != 1)
                throw LoadError("--bind " + k + " needs one integer");
            r.bindings[k] = ints[0];
        }
        auto &p = r.params;
        if (!tmpl.empty())
            set_param(p, "template", string_value(tmpl));
        if (!algorithm.empty())
            set_param(p, "algorithm", string_value(algorithm));
        if (!block.empty())
            set_param(p, r.backend == BackendKind::omp ? "blockDims" : "threadsPerBlock",
                      tuple_value(block));
        if (!plane.empty())
            set_param(p, "planeDims", tuple_value(plane));
        if (!mem_type.empty())
            set_param(p, "memType", string_value(mem_type));
        if (!decomposition.empty())
            set_param(p, "decomposition", string_value(decomposition));
        if (!capability.empty())
            set_param(p, "computeCapability", string_value(capability));
        if (prefetch)
            set_param(p, "prefetch", bool_value(true));
        if (async_memcpy)
            set_param(p, "asyncMemcpy", bool_value(true));
        if (!fabric.empty())
            set_param(p, "fabricDims", tuple_value(fabric));
        if (!margins.empty())
            set_param(p, "margins", tuple_value(margins));
        if (pe_memory > 0) {
            LaunchValue v;
            v.integer = pe_memory;
            set_param(p, "peMemory", v);
        }
        for (const auto &s : sets) {
            auto [k, v] = split_eq(s, "--set");
            set_param(p, k, guess_value(v));
        }
        const auto &keys = backend_param_keys(r.backend);
        for (const auto &[k, v] : p)
            if (std::find(keys.begin(), keys.end(), k) == keys.end())
                throw CompileError(v.pos, "unknown parameter '" + k + "' for backend '" +
                                              std::string(backend_name(r.backend)) + "'");
        return r;
    }
};

GridBuffer load_grid_file(const std::string &path) {
    try {
        return load_grid(path);
    } catch (const std::exception &e) {
        throw LoadError("cannot load grid file '" + path + "': " + e.what());
    }
}

SourceUnit load_unit(const std::string &path) {
    SourceUnit u = parse_source(read_file(path));
    require_valid(u);
    return u;
}

GridSet load_inputs(const SourceUnit *unit, const std::vector<std::string> &inputs,
                    std::uint64_t seed, bool zero) {
    GridSet grids;
    if (unit)
        grids = zero ? make_grids(*unit) : random_grids(*unit, seed);
    for (const auto &spec : inputs) {
        auto [name, path] = split_eq(spec, "--input");
        GridBuffer g = load_grid_file(path);
        auto it = grids.find(name);
        if (unit) {
            if (it == grids.end())
                throw LoadError("--input names unknown grid '" + name + "'");
            if (!it->second.same_layout(g))
                throw LoadError("grid file '" + path + "' does not match grid '" + name +
                                "' (dtype, shape and order must agree)");
        }
        grids[name] = std::move(g);
    }
    return grids;
}

void write_outputs(const GridSet &grids, const std::string &dir,
                   const std::vector<std::string> &outputs) {
    for (const auto &spec : outputs) {
        auto [name, path] = split_eq(spec, "--output");
        auto it = grids.find(name);
        if (it == grids.end())
            throw LoadError("--output names unknown grid '" + name + "'");
        save_grid(path, it->second);
    }
    if (!dir.empty()) {
        fs::create_directories(dir);
        for (const auto &[name, g] : grids)
            save_grid((fs::path(dir) / (name + ".grid")).string(), g);
    }
}

void print_warnings(const std::vector<Diagnostic> &ws, const std::string &file) {
    for (const auto &w : ws)
        std::cerr << w.render(file) << "\n";
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Stencil DSL compiler"};
    app.require_subcommand(1, 1);

    // compile
    BackendFlags cflags;
    std::string c_file, c_out;
    bool print_code = false, save_temps = false, profile = false, driver = false;
    CLI::App *compile = app.add_subcommand("compile", "generate code for a backend");
    compile->add_option("file", c_file, ".stpy source")->required();
    cflags.add(compile);
    compile->add_option("-o,--output-dir", c_out, "directory for generated files");
    compile->add_flag("--print-code", print_code, "print generated code to stdout");
    compile->add_flag("--save-temps", save_temps, "also write the intermediate dumps");
    compile->add_flag("--profile", profile, "print phase timings");
    compile->add_flag("--driver", driver, "also write driver.c (seq and omp)");

    // inspect
    BackendFlags iflags;
    std::string i_file;
    bool show_plan = false, show_dfir = false;
    CLI::App *inspect = app.add_subcommand("inspect", "print analysis results");
    inspect->add_option("file", i_file, ".stpy source")->required();
    iflags.add(inspect);
    inspect->add_flag("--plan", show_plan, "also print the backend plan");
    inspect->add_flag("--dfir", show_dfir, "also print the dataflow IR");

    // run
    BackendFlags rflags;
    std::string r_file, r_out;
    std::vector<std::string> r_inputs, r_outputs;
    std::uint64_t r_seed = 1;
    bool r_oracle = false, r_zero = false, r_profile = false;
    double r_max = 1e-7, r_rmsd = 1e-8;
    CLI::App *run = app.add_subcommand("run", "execute with the backend's software model");
    run->add_option("file", r_file, ".stpy source")->required();
    rflags.add(run);
    run->add_option("--input", r_inputs, "grid=path, initial contents of a grid");
    run->add_option("--init", r_seed, "seed for log-uniform initial grids");
    run->add_flag("--zero", r_zero, "start from zero grids instead of random ones");
    run->add_option("--output", r_outputs, "grid=path, where to write a final grid");
    run->add_option("-o,--output-dir", r_out, "write every final grid as <dir>/<grid>.grid");
    run->add_flag("--oracle", r_oracle, "compare against the sequential reference");
    run->add_option("--max-error", r_max, "relative max error allowed by --oracle");
    run->add_option("--max-rmsd", r_rmsd, "relative RMSD allowed by --oracle");
    run->add_flag("--profile", r_profile, "print phase timings");

    // simulate
    std::string s_dir, s_layout, s_program, s_source, s_out, s_trace;
    std::vector<std::string> s_inputs, s_outputs;
    std::uint64_t s_seed = 1;
    CLI::App *simulate = app.add_subcommand("simulate", "run a dataflow program on the PE simulator");
    simulate->add_option("dir", s_dir, "directory holding layout.df and program.df");
    simulate->add_option("--layout", s_layout, "layout.df path");
    simulate->add_option("--program", s_program, "program.df path");
    simulate->add_option("--source", s_source, ".stpy source used to create initial grids");
    simulate->add_option("--init", s_seed, "seed for log-uniform initial grids (with --source)");
    simulate->add_option("--input", s_inputs, "grid=path");
    simulate->add_option("--output", s_outputs, "grid=path");
    simulate->add_option("-o,--output-dir", s_out, "write every final grid as <dir>/<grid>.grid");
    simulate->add_option("--trace", s_trace, "write the step trace to this file");

    // diff
    std::string d_a, d_b;
    double d_max = 1e-7, d_rmsd = 1e-8;
    bool d_abs = false;
    CLI::App *diff = app.add_subcommand("diff", "compare two grid files");
    diff->add_option("a", d_a, "reference grid file")->required();
    diff->add_option("b", d_b, "grid file")->required();
    diff->add_option("--max-error", d_max, "fail (exit 2) above this max error")
        ->capture_default_str();
    diff->add_option("--max-rmsd", d_rmsd, "fail (exit 2) above this RMSD")->capture_default_str();
    diff->add_flag("--absolute", d_abs, "thresholds are absolute rather than relative");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return diagnostics;
    }

    std::string file;
    try {
        if (compile->parsed()) {
            file = c_file;
            auto t0 = Clock::now();
            SourceUnit unit = load_unit(c_file);
            Request req = cflags.request(unit);
            ProfileReport prof;
            prof.frontend = seconds_since(t0);
            auto t1 = Clock::now();
            Compiled c = compile_request(unit, req);
            std::string drv;
            if (driver && (req.backend == BackendKind::seq || req.backend == BackendKind::omp)) {
                CodegenOptions o;
                o.target = req.target;
                o.bindings = req.bindings;
                drv = gen_driver(unit, c.artifact, o);
            }
            prof.codegen = seconds_since(t1);
            if (print_code)
                std::cout << c.artifact.joined();
            if (!print_code || !c_out.empty()) {
                fs::path out = c_out.empty() ? fs::path(fs::path(c_file).stem().string() + "_" +
                                                            std::string(backend_name(req.backend)))
                                             : fs::path(c_out);
                for (const auto &f : c.artifact.files)
                    write_file(out / f.path, f.text);
                if (!drv.empty())
                    write_file(out / "driver.c", drv);
                if (save_temps) {
                    write_file(out / "vhir.stpy", print_source(unit));
                    InspectOptions io{req.target, req.bindings, Decomposition::cross_product};
                    write_file(out / "hir.txt", describe_kernels(unit) + describe_target(unit, io));
                    if (!c.plan.empty())
                        write_file(out / "plan.txt", c.plan);
                    if (c.dataflow)
                        write_file(out / "dfir.txt", c.dataflow->dump());
                }
                if (!print_code)
                    std::cout << "wrote " << c.artifact.files.size() + (drv.empty() ? 0 : 1)
                              << " files to " << out.string() << " (entry " << c.artifact.entry
                              << ")\n";
            }
            if (profile)
                std::cerr << prof.str();
            return ok;
        }
        if (inspect->parsed()) {
            file = i_file;
            SourceUnit unit = load_unit(i_file);
            Request req = iflags.request(unit);
            InspectOptions io{req.target, req.bindings, Decomposition::cross_product};
            if (req.backend != BackendKind::dataflow) {
                const KernelDecl &k = primary_kernel(unit, req.target);
                io.decomposition = decomposition_param(req.params, analyze_kernel(k).dims);
            }
            std::cout << describe_kernels(unit) << describe_target(unit, io);
            if (show_plan) {
                Compiled c = compile_request(unit, req);
                std::cout << "plan " << backend_name(req.backend) << "\n" << c.plan;
                if (!c.plan.empty() && c.plan.back() != '\n')
                    std::cout << "\n";
            }
            if (show_dfir) {
                DataflowProgram p = build_dataflow(unit, req.params, req.target, req.bindings);
                std::cout << p.dump();
            }
            return ok;
        }
        if (run->parsed()) {
            file = r_file;
            auto t0 = Clock::now();
            SourceUnit unit = load_unit(r_file);
            Request req = rflags.request(unit);
            GridSet in = load_inputs(&unit, r_inputs, r_seed, r_zero);
            ProfileReport prof;
            prof.frontend = seconds_since(t0);
            auto t1 = Clock::now();
            ExecStats stats;
            GridSet out = execute_request(unit, req, in, &stats);
            prof.execution = seconds_since(t1);
            print_warnings(stats.warnings, r_file);
            write_outputs(out, r_out, r_outputs);
            if (r_profile)
                std::cerr << prof.str();
            if (!r_oracle)
                return ok;
            ExecOptions eo;
            eo.target = req.target;
            eo.bindings = req.bindings;
            GridSet ref = run_target(unit, in, eo);
            bool pass = true;
            for (const auto &[name, g] : ref) {
                ComparisonReport rep = compare(g, out.at(name));
                const bool good = rep.rel_max() <= r_max && rep.rel_rmsd() <= r_rmsd;
                pass = pass && good;
                std::cout << name << ": " << rep.relative_str() << (good ? "" : "  FAIL") << "\n";
            }
            return pass ? ok : tolerance;
        }
        if (simulate->parsed()) {
            if (s_layout.empty())
                s_layout = (fs::path(s_dir) / "layout.df").string();
            if (s_program.empty())
                s_program = (fs::path(s_dir) / "program.df").string();
            file = s_program;
            DataflowProgram prog = parse_dataflow_program(read_file(s_layout), read_file(s_program));
            std::optional<SourceUnit> unit;
            if (!s_source.empty())
                unit = load_unit(s_source);
            GridSet in = load_inputs(unit ? &*unit : nullptr, s_inputs, s_seed, false);
            Simulator sim(std::move(prog), in);
            SimulationTrace trace;
            GridSet out = sim.run_to_exit(&trace);
            write_outputs(out, s_out, s_outputs);
            if (!s_trace.empty())
                write_file(s_trace, trace.str());
            std::cout << "simulated " << sim.width() << "x" << sim.height() << " PEs, "
                      << trace.records.size() << " steps, timer " << trace.timer << "\n";
            return ok;
        }
        if (diff->parsed()) {
            GridBuffer a = load_grid_file(d_a), b = load_grid_file(d_b);
            ComparisonReport rep = compare(a, b);
            std::cout << "absolute " << rep.str() << "\nrelative " << rep.relative_str() << "\n";
            const double e = d_abs ? rep.max_error : rep.rel_max();
            const double r = d_abs ? rep.rmsd : rep.rel_rmsd();
            if (e > d_max || r > d_rmsd)
                return tolerance;
            return ok;
        }
    } catch (const CompileError &e) {
        for (const auto &d : e.diagnostics())
            std::cerr << d.render(file.empty() ? "<input>" : file) << "\n";
        return diagnostics;
    } catch (const LoadError &e) {
        std::cerr << "stencilc: " << e.what() << "\n";
        return diagnostics;
    } catch (const std::invalid_argument &e) {
        std::cerr << "stencilc: " << e.what() << "\n";
        return diagnostics;
    } catch (const std::exception &e) {
        std::cerr << "stencilc: internal error: " << e.what() << "\n";
        return internal;
    }
    return internal;
}
