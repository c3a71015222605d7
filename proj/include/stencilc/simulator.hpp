#pragma once

// Lock-step simulation of a dataflow program on a grid of PEs joined by
// four-neighbour links.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "stencilc/codegen.hpp"
#include "stencilc/dataflow.hpp"
#include "stencilc/executor.hpp"

namespace stencilc {

/// Reads back the two files written by gen_dataflow_program. Throws
/// CompileError on malformed input.
DataflowProgram parse_dataflow_program(const std::string &layout_text,
                                       const std::string &program_text);

struct PeState {
    std::int64_t px = 0, py = 0;
    std::map<std::string, std::vector<double>> columns; // per top-level grid
    std::map<PatternId, std::vector<double>> buffers;   // received columns
    std::array<std::vector<double>, 4> send;            // per quadrant, loaded by PREP_TRANS
    std::int64_t iterations = 0;
};

/// One global step. All PEs share the state, so counts are summed over PEs.
struct TraceRecord {
    std::int64_t step = 0;
    std::string state;
    std::int64_t sends = 0;     // payloads put on links
    std::int64_t receives = 0;  // payloads taken from links
    std::int64_t discarded = 0; // sends off the active rectangle
    std::int64_t zero_fills = 0; // receives from beyond the edge
};

struct SimulationTrace {
    std::vector<TraceRecord> records;
    std::int64_t timer = 0; // steps between SETUP and TEARDOWN

    std::int64_t count(const std::string &state) const;
    std::string str() const;
};

class Simulator {
public:
    /// `grids` must hold every grid in the program with the layout's shape;
    /// other grids pass through unchanged.
    Simulator(DataflowProgram program, const GridSet &grids);

    static Simulator load_program(const GeneratedArtifact &artifact, const GridSet &grids);

    /// Advances every PE by one state. Throws std::runtime_error on a receive
    /// from an empty link or after STATE_EXIT.
    void step();
    bool done() const { return state_ == "STATE_EXIT"; }
    const std::string &state() const { return state_; }

    /// Steps until STATE_EXIT; the limit is states x T x 4 steps.
    GridSet run_to_exit(SimulationTrace *trace = nullptr);

    /// Current grid contents reassembled from the PE columns.
    GridSet grids() const;

    const DataflowProgram &program() const { return prog_; }
    std::int64_t width() const { return nx_; }
    std::int64_t height() const { return ny_; }
    const PeState &pe(std::int64_t x, std::int64_t y) const {
        return pes_[static_cast<std::size_t>(x * ny_ + y)];
    }
    const SimulationTrace &trace() const { return trace_; }
    /// Top-level grid currently bound to a target-level name.
    const std::string &bound(const std::string &name) const { return env_.at(name); }

private:
    PeState &pe_mut(std::int64_t x, std::int64_t y) {
        return pes_[static_cast<std::size_t>(x * ny_ + y)];
    }
    bool on_grid(std::int64_t x, std::int64_t y) const {
        return x >= 0 && y >= 0 && x < nx_ && y < ny_;
    }
    const CommStep &comm_step(const std::string &state, std::size_t prefix) const;
    void prep(const CommStep &s);
    void trans(const CommStep &s, TraceRecord &rec);
    void update();
    template <typename T> void update_t();

    DataflowProgram prog_;
    GridSet initial_;
    std::int64_t nx_ = 0, ny_ = 0, nz_ = 1;
    std::vector<PeState> pes_;
    std::map<std::string, std::string> env_;
    // outgoing link queues per (PE, direction)
    std::vector<std::array<std::deque<std::vector<double>>, 4>> links_;
    std::string state_ = "STATE_SETUP";
    std::int64_t steps_ = 0;
    std::int64_t setup_at_ = 0;
    SimulationTrace trace_;
};

} // namespace stencilc
