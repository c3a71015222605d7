#pragma once

// Dataflow IR: stencil point index patterns, the SPMD communication schedule,
// the per-PE state machine, SSA column code, and the PE-grid layout.
//
// Axes: grid dimension 0 is X (east positive), dimension 1 is Y (north
// positive), dimension 2 is Z and lives in PE memory.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stencilc/frontend.hpp"
#include "stencilc/planning.hpp"

namespace stencilc {

enum class Dir { N, E, S, W };
char dir_letter(Dir d);
std::string_view dir_name(Dir d); // North, East, ...
Dir opposite(Dir d);
/// Unit PE displacement (dx, dy) of a neighbour in direction d.
std::array<int, 2> dir_step(Dir d);
inline constexpr std::array<Dir, 4> kDirs{Dir::N, Dir::E, Dir::S, Dir::W};

struct PatternId {
    bool center = true;
    Dir quadrant = Dir::N;
    int i = 0; // 1..radius
    int j = 0; // 0..radius

    static PatternId make(Dir q, int i, int j) { return {false, q, i, j}; }
    std::string str() const; // "N10", CENTER is "0"

    friend bool operator==(const PatternId &, const PatternId &) = default;
    friend auto operator<=>(const PatternId &, const PatternId &) = default;
};

PatternId pattern_id_of(int x, int y);
/// The unique (x, y) that maps to a non-centre pattern.
std::array<int, 2> pattern_offset(const PatternId &p);
std::optional<PatternId> parse_pattern(std::string_view s);

struct PatternSet {
    std::set<PatternId> patterns; // non-centre
    std::map<PatternId, int> zmax; // includes CENTER when read
};

/// Offsets are 2D (x, y) or 3D (x, y, z).
PatternSet annotate_zmax(const std::set<OffsetVector> &offsets);

/// Within a quadrant: ascending (j, i). Quadrants interleave N, E, S, W per
/// rank.
std::vector<PatternId> sort_dependencies(const PatternSet &patterns);

struct CommAction {
    Dir quadrant = Dir::N;
    PatternId send;     // CENTER or a previously received pattern
    Dir send_to = Dir::S;
    Dir recv_from = Dir::N;
    PatternId recv_into;
};

struct CommStep {
    int i = 0, j = 0; // the step's (i, j) key, shared by all quadrants
    std::array<CommAction, 4> actions; // N, E, S, W
    std::string key() const { return std::to_string(i) + std::to_string(j); }
};

/// Every quadrant runs every step so that the sends feeding one quadrant's
/// receive (possibly issued by another quadrant) always happen. Keys missing
/// from the input but needed as relay stages are added.
std::vector<CommStep> build_comm_schedule(const std::vector<PatternId> &ordered);

/// Table-like rendering: one row per step, one column per quadrant.
std::string render_schedule(const std::vector<CommStep> &steps);

struct StateMachine {
    std::vector<std::string> states;
    std::map<std::string, std::vector<std::string>> transitions;
    std::int64_t iterations = 0;

    /// Successor of ITERATION_CHECK after `done` completed iterations.
    std::string after_check(std::int64_t done) const;
    std::string first_comm_or_update() const;
};

StateMachine build_state_machine(const std::vector<CommStep> &schedule, std::int64_t iterations);

// ---- SSA -------------------------------------------------------------------

struct SsaOperand {
    enum class Kind { pattern, temp, constant };
    Kind kind = Kind::constant;
    PatternId pattern; // pattern
    int zshift = 0;    // pattern
    int temp = 0;      // temp
    std::string text;  // constant: literal as written
    double value = 0;  // constant: literal in the element type

    std::string str() const;
};

enum class SsaOpcode { mov, neg, add, sub, mul, div, mul_const, fma };
std::string_view ssa_opcode_name(SsaOpcode op);

/// dest = op(args). mul_const: args {c, x} or {x, c} per const_first.
/// fma: args {a, b, c} meaning (a*b) + c, or c + (a*b) when !product_first;
/// the product and the sum round separately.
struct SsaOp {
    int dest = 0;
    SsaOpcode op = SsaOpcode::add;
    std::vector<SsaOperand> args;
    bool const_first = false;
    bool product_first = true;

    std::string str() const;
};

struct SsaProgram {
    std::vector<SsaOp> ops;
    int output = 0; // temp holding the result column
    int temps = 0;

    std::string str() const;
};

/// Lowers the (single) update of a 2D or 3D kernel reading one grid.
SsaProgram lower_to_ssa(const KernelDecl &k, DType dtype);

/// Rebuilds the expression tree from SSA, naming the read grid `grid`.
ExprPtr reexpand(const SsaProgram &p, const std::string &grid, int dims);

// ---- layout ----------------------------------------------------------------

struct Margins {
    int north = 3, east = 1, south = 4, west = 1;
};

struct PeLayout {
    /// The first fabric extent runs along grid X and also holds the north and
    /// south buffer PEs; the second runs along Y with the east and west ones.
    std::int64_t fabric_x = 757, fabric_y = 996;
    Margins margins;
    std::int64_t active_x = 0, active_y = 0;
    std::int64_t nz = 1;
    std::int64_t column_budget = 2048; // elements per Z-column

    std::string str() const;
};

/// Throws CompileError when the grid or its columns do not fit.
PeLayout map_grid_to_fabric(const std::vector<std::int64_t> &shape, std::int64_t fabric_x,
                            std::int64_t fabric_y, Margins margins,
                            std::int64_t column_budget = 2048);

// ---- whole program ---------------------------------------------------------

struct DataflowProgram {
    std::string kernel;
    std::string target;
    DType dtype = DType::f32;
    int dims = 0;
    /// Kernel parameter roles and the target-level names they are mapped from.
    std::string read_param, write_param;
    std::string read_name, write_name;
    bool swap = false;
    std::string swap_a, swap_b;
    /// Target-level name -> top-level grid.
    std::map<std::string, std::string> bindings;
    std::vector<std::string> grids; // top-level grids held in every PE

    PatternSet patterns;
    std::vector<PatternId> order;
    std::vector<CommStep> schedule;
    StateMachine machine;
    SsaProgram ssa;
    PeLayout layout;

    std::string dump() const; // human-readable DFIR
};

/// Requires a target of the form
///   for t in range(<literal>): st.map(<whole grid>)(k)(in, out); [swap]
/// Throws CompileError otherwise.
DataflowProgram build_dataflow(const SourceUnit &unit, const BackendParams &params,
                               const std::string &target = {},
                               const std::map<std::string, std::int64_t> &bindings = {});

} // namespace stencilc
