#include "stencilc/simulator.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace stencilc {

// ---- program files ---------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string &line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

[[noreturn]] void malformed(int line, const std::string &what) {
    throw CompileError(SourcePos{line, 1}, "malformed dataflow program: " + what);
}

std::int64_t to_int(const std::string &s, int line) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(s, &used);
        if (used != s.size())
            malformed(line, "expected an integer, got '" + s + "'");
        return v;
    } catch (const std::logic_error &) {
        malformed(line, "expected an integer, got '" + s + "'");
    }
}

Dir to_dir(const std::string &s, int line) {
    if (s == "N")
        return Dir::N;
    if (s == "E")
        return Dir::E;
    if (s == "S")
        return Dir::S;
    if (s == "W")
        return Dir::W;
    malformed(line, "unknown direction '" + s + "'");
}

PatternId to_pattern(const std::string &s, int line) {
    auto p = parse_pattern(s);
    if (!p)
        malformed(line, "bad pattern '" + s + "'");
    return *p;
}

DType to_dtype(const std::string &s, int line) {
    if (s == "f32")
        return DType::f32;
    if (s == "f64")
        return DType::f64;
    malformed(line, "unknown dtype '" + s + "'");
}

SsaOperand to_operand(std::string s, DType dtype, int line) {
    SsaOperand o;
    if (s.empty())
        malformed(line, "empty operand");
    if (s[0] == 't') {
        o.kind = SsaOperand::Kind::temp;
        o.temp = static_cast<int>(to_int(s.substr(1), line));
    } else if (s[0] == '#') {
        o.kind = SsaOperand::Kind::constant;
        o.text = s.substr(1);
        try {
            o.value = literal_value(o.text, dtype);
        } catch (const std::exception &) {
            malformed(line, "bad constant '" + o.text + "'");
        }
    } else if (s[0] == 'P') {
        o.kind = SsaOperand::Kind::pattern;
        const std::size_t plen = s.size() > 1 && s[1] == '0' ? 1 : 3;
        if (s.size() < 1 + plen)
            malformed(line, "bad operand '" + s + "'");
        o.pattern = to_pattern(s.substr(1, plen), line);
        std::string rest = s.substr(1 + plen);
        if (!rest.empty()) {
            if (rest[0] == '+')
                rest = rest.substr(1);
            o.zshift = static_cast<int>(to_int(rest, line));
        }
    } else {
        malformed(line, "bad operand '" + s + "'");
    }
    return o;
}

SsaOp to_op(const std::string &text, DType dtype, int line) {
    // tN = opcode[.r] a, b, c
    auto eq = text.find(" = ");
    if (eq == std::string::npos || text[0] != 't')
        malformed(line, "bad SSA line '" + text + "'");
    SsaOp op;
    op.dest = static_cast<int>(to_int(text.substr(1, eq - 1), line));
    std::string rest = text.substr(eq + 3);
    auto sp = rest.find(' ');
    std::string code = rest.substr(0, sp);
    std::string args = sp == std::string::npos ? "" : rest.substr(sp + 1);
    bool reversed = false;
    if (code.size() > 2 && code.ends_with(".r")) {
        reversed = true;
        code.resize(code.size() - 2);
    }
    static const std::pair<const char *, SsaOpcode> codes[] = {
        {"mov", SsaOpcode::mov}, {"neg", SsaOpcode::neg}, {"add", SsaOpcode::add},
        {"sub", SsaOpcode::sub}, {"mul", SsaOpcode::mul}, {"div", SsaOpcode::div},
        {"mul_const", SsaOpcode::mul_const}, {"fma", SsaOpcode::fma}};
    bool found = false;
    for (auto [n, c] : codes)
        if (code == n) {
            op.op = c;
            found = true;
        }
    if (!found)
        malformed(line, "unknown opcode '" + code + "'");
    op.const_first = op.op == SsaOpcode::mul_const && !reversed;
    op.product_first = !(op.op == SsaOpcode::fma && reversed);
    std::istringstream in(args);
    for (std::string a; std::getline(in, a, ',');) {
        a.erase(0, a.find_first_not_of(' '));
        a.erase(a.find_last_not_of(' ') + 1);
        op.args.push_back(to_operand(a, dtype, line));
    }
    std::size_t want = op.op == SsaOpcode::fma                                ? 3
                       : op.op == SsaOpcode::mov || op.op == SsaOpcode::neg ? 1
                                                                              : 2;
    if (op.args.size() != want)
        malformed(line, "wrong operand count for '" + code + "'");
    return op;
}

} // namespace

DataflowProgram parse_dataflow_program(const std::string &layout_text,
                                       const std::string &program_text) {
    DataflowProgram p;
    bool have_layout[4] = {false, false, false, false}; // fabric, margins, active, nz
    {
        std::istringstream in(layout_text);
        int ln = 0;
        for (std::string line; std::getline(in, line);) {
            ++ln;
            auto w = split_ws(line);
            if (w.empty() || w[0][0] == '#')
                continue;
            if (w[0] == "fabric" && w.size() == 3) {
                p.layout.fabric_x = to_int(w[1], ln);
                p.layout.fabric_y = to_int(w[2], ln);
                have_layout[0] = true;
            } else if (w[0] == "margins" && w.size() == 5) {
                p.layout.margins = {static_cast<int>(to_int(w[1], ln)),
                                    static_cast<int>(to_int(w[2], ln)),
                                    static_cast<int>(to_int(w[3], ln)),
                                    static_cast<int>(to_int(w[4], ln))};
                have_layout[1] = true;
            } else if (w[0] == "active" && w.size() == 5) {
                p.layout.active_x = to_int(w[3], ln);
                p.layout.active_y = to_int(w[4], ln);
                have_layout[2] = true;
            } else if (w[0] == "nz" && w.size() == 2) {
                p.layout.nz = to_int(w[1], ln);
                have_layout[3] = true;
            } else if (w[0] == "column_budget" && w.size() == 2) {
                p.layout.column_budget = to_int(w[1], ln);
            } else if (w[0] == "plan" || w[0] == "dtype" || w[0] == "program" ||
                       w[0] == "symbols") {
                // informational
            } else {
                malformed(ln, "unexpected layout line '" + line + "'");
            }
        }
        for (bool h : have_layout)
            if (!h)
                throw CompileError(SourcePos{}, "malformed dataflow layout: missing fabric, "
                                                "margins, active or nz");
    }
    if (p.layout.active_x + p.layout.margins.north + p.layout.margins.south > p.layout.fabric_x ||
        p.layout.active_y + p.layout.margins.east + p.layout.margins.west > p.layout.fabric_y ||
        p.layout.nz > p.layout.column_budget || p.layout.active_x < 1 || p.layout.active_y < 1 ||
        p.layout.nz < 1)
        throw CompileError(SourcePos{}, "dataflow layout does not fit its fabric");

    std::istringstream in(program_text);
    int ln = 0;
    std::string section;
    bool have_iterations = false, have_states = false, have_ssa = false;
    std::map<std::string, std::size_t> step_index;
    for (std::string line; std::getline(in, line);) {
        ++ln;
        auto w = split_ws(line);
        if (w.empty() || w[0][0] == '#')
            continue;
        if (!section.empty()) {
            if (w[0] == "end") {
                section.clear();
                continue;
            }
            if (section == "routes")
                continue;
            if (section == "schedule") {
                // step KEY Q send P D recv D P
                if (w.size() != 9 || w[0] != "step" || w[3] != "send" || w[6] != "recv" ||
                    w[1].size() != 2)
                    malformed(ln, "bad schedule line");
                auto [it, fresh] = step_index.try_emplace(w[1], p.schedule.size());
                if (fresh) {
                    CommStep s;
                    s.i = w[1][0] - '0';
                    s.j = w[1][1] - '0';
                    p.schedule.push_back(s);
                }
                Dir q = to_dir(w[2], ln);
                CommAction &a = p.schedule[it->second].actions[static_cast<std::size_t>(q)];
                a.quadrant = q;
                a.send = to_pattern(w[4], ln);
                a.send_to = to_dir(w[5], ln);
                a.recv_from = to_dir(w[7], ln);
                a.recv_into = to_pattern(w[8], ln);
                continue;
            }
            if (section == "states") {
                // NAME -> A [| B]
                if (w.size() < 2 || w[1] != "->")
                    malformed(ln, "bad state line");
                p.machine.states.push_back(w[0]);
                auto &next = p.machine.transitions[w[0]];
                for (std::size_t k = 2; k < w.size(); ++k)
                    if (w[k] != "|")
                        next.push_back(w[k]);
                have_states = true;
                continue;
            }
            if (section == "ssa") {
                if (w[0] == "out" && w.size() == 2 && w[1][0] == 't') {
                    p.ssa.output = static_cast<int>(to_int(w[1].substr(1), ln));
                    have_ssa = true;
                    continue;
                }
                std::string t = line.substr(line.find_first_not_of(' '));
                p.ssa.ops.push_back(to_op(t, p.dtype, ln));
                p.ssa.temps = std::max(p.ssa.temps, p.ssa.ops.back().dest + 1);
                continue;
            }
        }
        const std::string &k = w[0];
        if (k == "routes" || k == "schedule" || k == "states" || k == "ssa") {
            section = k;
        } else if (k == "plan") {
        } else if (k == "kernel" && w.size() == 2) {
            p.kernel = w[1];
        } else if (k == "target" && w.size() == 2) {
            p.target = w[1];
        } else if (k == "dtype" && w.size() == 2) {
            p.dtype = to_dtype(w[1], ln);
        } else if (k == "dims" && w.size() == 2) {
            p.dims = static_cast<int>(to_int(w[1], ln));
        } else if (k == "iterations" && w.size() == 2) {
            p.machine.iterations = to_int(w[1], ln);
            have_iterations = true;
        } else if (k == "read" && w.size() == 2) {
            p.read_name = w[1];
        } else if (k == "write" && w.size() == 2) {
            p.write_name = w[1];
        } else if (k == "swap" && w.size() == 3) {
            p.swap = true;
            p.swap_a = w[1];
            p.swap_b = w[2];
        } else if (k == "bind" && w.size() == 3) {
            p.bindings[w[1]] = w[2];
        } else if (k == "grids") {
            p.grids.assign(w.begin() + 1, w.end());
        } else if (k == "patterns") {
            for (std::size_t n = 1; n < w.size(); ++n) {
                p.order.push_back(to_pattern(w[n], ln));
                p.patterns.patterns.insert(p.order.back());
            }
        } else if (k == "zmax") {
            for (std::size_t n = 1; n < w.size(); ++n) {
                auto eq = w[n].find('=');
                if (eq == std::string::npos)
                    malformed(ln, "bad zmax entry");
                p.patterns.zmax[to_pattern(w[n].substr(0, eq), ln)] =
                    static_cast<int>(to_int(w[n].substr(eq + 1), ln));
            }
        } else {
            malformed(ln, "unexpected line '" + line + "'");
        }
    }
    if (!section.empty())
        malformed(ln, "section '" + section + "' is not closed");
    if (!have_iterations || !have_states || !have_ssa || p.read_name.empty() ||
        p.write_name.empty() || p.grids.empty())
        throw CompileError(SourcePos{}, "malformed dataflow program: missing iterations, states, "
                                        "ssa, read, write or grids");
    for (const auto &s : p.machine.states)
        for (const auto &n : p.machine.transitions[s])
            if (std::find(p.machine.states.begin(), p.machine.states.end(), n) ==
                p.machine.states.end())
                throw CompileError(SourcePos{}, "malformed dataflow program: transition to "
                                                "unknown state '" + n + "'");
    for (const auto *n : {&p.read_name, &p.write_name})
        if (!p.bindings.contains(*n))
            throw CompileError(SourcePos{}, "malformed dataflow program: '" + *n +
                                                "' is not bound");
    p.layout.nz = std::max<std::int64_t>(p.layout.nz, 1);
    return p;
}

// ---- trace -----------------------------------------------------------------

std::int64_t SimulationTrace::count(const std::string &state) const {
    return std::count_if(records.begin(), records.end(),
                         [&](const TraceRecord &r) { return r.state == state; });
}

std::string SimulationTrace::str() const {
    std::ostringstream o;
    for (const auto &r : records) {
        o << r.step << " " << r.state;
        if (r.sends || r.receives)
            o << " sends=" << r.sends << " receives=" << r.receives
              << " discarded=" << r.discarded << " zero_fills=" << r.zero_fills;
        o << "\n";
    }
    o << "timer " << timer << "\n";
    return o.str();
}

// ---- simulator -------------------------------------------------------------

Simulator::Simulator(DataflowProgram program, const GridSet &grids) : prog_(std::move(program)) {
    nx_ = prog_.layout.active_x;
    ny_ = prog_.layout.active_y;
    nz_ = prog_.layout.nz;
    const int dims = prog_.dims;
    for (const auto &g : prog_.grids) {
        auto it = grids.find(g);
        if (it == grids.end())
            throw CompileError(SourcePos{}, "no data for grid '" + g + "'");
        const GridBuffer &b = it->second;
        if (b.dims() != dims || b.extent(0) != nx_ || b.extent(1) != ny_ ||
            (dims == 3 && b.extent(2) != nz_) || b.dtype() != prog_.dtype)
            throw CompileError(SourcePos{}, "grid '" + g + "' does not match the dataflow layout");
    }
    initial_ = grids;
    env_ = prog_.bindings;

    pes_.resize(static_cast<std::size_t>(nx_ * ny_));
    links_.resize(pes_.size());
    for (std::int64_t x = 0; x < nx_; ++x)
        for (std::int64_t y = 0; y < ny_; ++y) {
            PeState &pe = pe_mut(x, y);
            pe.px = x;
            pe.py = y;
            for (const auto &g : prog_.grids) {
                const GridBuffer &b = grids.at(g);
                auto &col = pe.columns[g];
                col.resize(static_cast<std::size_t>(nz_));
                for (std::int64_t z = 0; z < nz_; ++z)
                    col[static_cast<std::size_t>(z)] = b.at({x, y, dims == 3 ? z : 0});
            }
        }
}

Simulator Simulator::load_program(const GeneratedArtifact &artifact, const GridSet &grids) {
    const GeneratedFile *layout = artifact.find("layout.df");
    const GeneratedFile *program = artifact.find("program.df");
    if (!layout || !program)
        throw CompileError(SourcePos{}, "artifact has no layout.df/program.df");
    return Simulator(parse_dataflow_program(layout->text, program->text), grids);
}

const CommStep &Simulator::comm_step(const std::string &state, std::size_t prefix) const {
    const std::string key = state.substr(prefix);
    for (const CommStep &s : prog_.schedule)
        if (s.key() == key)
            return s;
    throw std::runtime_error("state " + state + " has no schedule entry");
}

void Simulator::prep(const CommStep &s) {
    const std::string &src = env_.at(prog_.read_name);
    for (PeState &pe : pes_)
        for (const CommAction &a : s.actions) {
            auto q = static_cast<std::size_t>(a.quadrant);
            if (a.send.center) {
                pe.send[q] = pe.columns.at(src);
            } else {
                auto it = pe.buffers.find(a.send);
                if (it == pe.buffers.end())
                    throw std::runtime_error("PE (" + std::to_string(pe.px) + ", " +
                                             std::to_string(pe.py) + ") sends " + a.send.str() +
                                             " before receiving it");
                pe.send[q] = it->second;
            }
        }
}

void Simulator::trans(const CommStep &s, TraceRecord &rec) {
    for (std::int64_t x = 0; x < nx_; ++x)
        for (std::int64_t y = 0; y < ny_; ++y) {
            PeState &pe = pe_mut(x, y);
            for (const CommAction &a : s.actions) {
                auto [dx, dy] = dir_step(a.send_to);
                if (!on_grid(x + dx, y + dy)) {
                    ++rec.discarded;
                    continue;
                }
                links_[static_cast<std::size_t>(x * ny_ + y)]
                      [static_cast<std::size_t>(a.send_to)]
                          .push_back(std::move(pe.send[static_cast<std::size_t>(a.quadrant)]));
                ++rec.sends;
            }
        }
    for (std::int64_t x = 0; x < nx_; ++x)
        for (std::int64_t y = 0; y < ny_; ++y) {
            PeState &pe = pe_mut(x, y);
            for (const CommAction &a : s.actions) {
                auto [dx, dy] = dir_step(a.recv_from);
                const std::int64_t sx = x + dx, sy = y + dy;
                if (!on_grid(sx, sy)) {
                    pe.buffers[a.recv_into].assign(static_cast<std::size_t>(nz_), 0.0);
                    ++rec.zero_fills;
                    continue;
                }
                auto &link = links_[static_cast<std::size_t>(sx * ny_ + sy)]
                                   [static_cast<std::size_t>(opposite(a.recv_from))];
                if (link.empty())
                    throw std::runtime_error("PE (" + std::to_string(x) + ", " +
                                             std::to_string(y) + ") receives from an empty " +
                                             std::string(dir_name(a.recv_from)) + " link in " +
                                             state_);
                pe.buffers[a.recv_into] = std::move(link.front());
                link.pop_front();
                ++rec.receives;
            }
        }
}

template <typename T> void Simulator::update_t() {
    const SsaProgram &ssa = prog_.ssa;
    const std::string &src = env_.at(prog_.read_name);
    const std::string &dst = env_.at(prog_.write_name);
    const auto n = static_cast<std::int64_t>(pes_.size());
    std::string error;
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
        PeState &pe = pes_[static_cast<std::size_t>(k)];
        // resolve every pattern operand to its column once per PE
        std::vector<const std::vector<double> *> cols(ssa.ops.size() * 3, nullptr);
        bool ok = true;
        for (std::size_t o = 0; o < ssa.ops.size(); ++o)
            for (std::size_t a = 0; a < ssa.ops[o].args.size(); ++a) {
                const SsaOperand &x = ssa.ops[o].args[a];
                if (x.kind != SsaOperand::Kind::pattern)
                    continue;
                if (x.pattern.center) {
                    cols[o * 3 + a] = &pe.columns.at(src);
                } else {
                    auto it = pe.buffers.find(x.pattern);
                    if (it == pe.buffers.end())
                        ok = false;
                    else
                        cols[o * 3 + a] = &it->second;
                }
            }
        if (!ok) {
#pragma omp critical
            error = "pattern buffer missing at UPDATE_STENCIL";
            continue;
        }
        std::vector<T> temps(static_cast<std::size_t>(ssa.temps));
        std::vector<double> out(static_cast<std::size_t>(nz_));
        for (std::int64_t z = 0; z < nz_; ++z) {
            auto val = [&](std::size_t o, std::size_t a) -> T {
                const SsaOperand &x = ssa.ops[o].args[a];
                switch (x.kind) {
                case SsaOperand::Kind::constant: return static_cast<T>(x.value);
                case SsaOperand::Kind::temp: return temps[static_cast<std::size_t>(x.temp)];
                case SsaOperand::Kind::pattern: {
                    const std::int64_t zz = z + x.zshift;
                    if (zz < 0 || zz >= nz_)
                        return T(0); // halo
                    return static_cast<T>((*cols[o * 3 + a])[static_cast<std::size_t>(zz)]);
                }
                }
                return T(0);
            };
            for (std::size_t o = 0; o < ssa.ops.size(); ++o) {
                const SsaOp &op = ssa.ops[o];
                T r{};
                switch (op.op) {
                case SsaOpcode::mov: r = val(o, 0); break;
                case SsaOpcode::neg: r = -val(o, 0); break;
                case SsaOpcode::add: r = val(o, 0) + val(o, 1); break;
                case SsaOpcode::sub: r = val(o, 0) - val(o, 1); break;
                case SsaOpcode::mul:
                case SsaOpcode::mul_const: r = val(o, 0) * val(o, 1); break;
                case SsaOpcode::div: r = val(o, 0) / val(o, 1); break;
                case SsaOpcode::fma: {
                    const T p = val(o, 0) * val(o, 1);
                    const T c = val(o, 2);
                    r = op.product_first ? p + c : c + p;
                    break;
                }
                }
                temps[static_cast<std::size_t>(op.dest)] = r;
            }
            out[static_cast<std::size_t>(z)] =
                static_cast<double>(temps[static_cast<std::size_t>(ssa.output)]);
        }
        pe.columns.at(dst) = std::move(out);
    }
    if (!error.empty())
        throw std::runtime_error(error);
}

void Simulator::update() {
    if (prog_.dtype == DType::f32)
        update_t<float>();
    else
        update_t<double>();
}

void Simulator::step() {
    if (done())
        throw std::runtime_error("the simulation has already reached STATE_EXIT");
    TraceRecord rec;
    rec.step = steps_;
    rec.state = state_;
    std::string next;
    const auto &tr = prog_.machine.transitions.at(state_);
    static const std::string prep_prefix = "STATE_PREP_TRANS_";
    static const std::string trans_prefix = "STATE_TRANS_";
    if (state_ == "STATE_SETUP") {
        setup_at_ = steps_;
        next = tr.at(0);
    } else if (state_.starts_with(prep_prefix)) {
        prep(comm_step(state_, prep_prefix.size()));
        next = tr.at(0);
    } else if (state_.starts_with(trans_prefix)) {
        trans(comm_step(state_, trans_prefix.size()), rec);
        next = tr.at(0);
    } else if (state_ == "STATE_UPDATE_STENCIL") {
        for (const auto &pe_links : links_)
            for (const auto &q : pe_links)
                if (!q.empty())
                    throw std::runtime_error("a payload is still in flight at UPDATE_STENCIL");
        update();
        next = tr.at(0);
    } else if (state_ == "STATE_ITERATION_CHECK") {
        for (PeState &pe : pes_)
            ++pe.iterations;
        if (prog_.swap)
            std::swap(env_.at(prog_.swap_a), env_.at(prog_.swap_b));
        next = prog_.machine.after_check(pes_.front().iterations);
    } else if (state_ == "STATE_TEARDOWN") {
        trace_.timer = steps_ - setup_at_;
        next = tr.at(0);
    } else {
        throw std::runtime_error("unknown state " + state_);
    }
    trace_.records.push_back(std::move(rec));
    ++steps_;
    state_ = next;
}

GridSet Simulator::run_to_exit(SimulationTrace *trace) {
    const std::int64_t limit = static_cast<std::int64_t>(prog_.machine.states.size()) *
                               std::max<std::int64_t>(prog_.machine.iterations, 1) * 4;
    while (!done()) {
        if (steps_ >= limit)
            throw std::runtime_error("step limit of " + std::to_string(limit) +
                                     " exceeded; the state machine does not terminate");
        step();
    }
    if (trace)
        *trace = trace_;
    return grids();
}

GridSet Simulator::grids() const {
    // halos and grids outside the program keep their initial contents
    GridSet out = initial_;
    const int dims = prog_.dims;
    for (const auto &g : prog_.grids) {
        GridBuffer &b = out.at(g);
        for (std::int64_t x = 0; x < nx_; ++x)
            for (std::int64_t y = 0; y < ny_; ++y) {
                const auto &col = pe(x, y).columns.at(g);
                for (std::int64_t z = 0; z < nz_; ++z)
                    b.set({x, y, dims == 3 ? z : 0}, col[static_cast<std::size_t>(z)]);
            }
    }
    return out;
}

} // namespace stencilc
