#include "stencilc/corpus.hpp"

#include <cstdlib>
#include <map>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace stencilc {

const std::vector<CorpusKernel> &corpus_kernels() {
    using S = StencilShape;
    static const std::vector<CorpusKernel> k = {
        {"star2d1r", S::star, 2, 1, 9, false},     {"star2d2r", S::star, 2, 2, 17, false},
        {"star2d3r", S::star, 2, 3, 25, false},    {"star2d4r", S::star, 2, 4, 33, false},
        {"star3d1r", S::star, 3, 1, 13, false},    {"star3d2r", S::star, 3, 2, 25, false},
        {"star3d3r", S::star, 3, 3, 37, false},    {"star3d4r", S::star, 3, 4, 49, false},
        {"box2d1r", S::box, 2, 1, 17, false},      {"box2d2r", S::box, 2, 2, 49, false},
        {"box2d3r", S::box, 2, 3, 97, false},      {"box2d4r", S::box, 2, 4, 161, false},
        {"box3d1r", S::box, 3, 1, 53, false},      {"box3d2r", S::box, 3, 2, 249, false},
        {"box3d3r", S::box, 3, 3, 685, false},     {"box3d4r", S::box, 3, 4, 1457, false},
        {"j2d5pt", S::star, 2, 1, 10, true},       {"j2d9pt-gol", S::box, 2, 1, 18, true},
        {"j2d9pt", S::star, 2, 2, 18, true},       {"j3d27pt", S::box, 3, 1, 54, true},
    };
    return k;
}

const CorpusKernel *find_corpus_kernel(const std::string &name) {
    for (const auto &k : corpus_kernels())
        if (k.name == name)
            return &k;
    return nullptr;
}

std::vector<OffsetVector> stencil_offsets(StencilShape shape, int dims, int radius) {
    std::vector<OffsetVector> out;
    OffsetVector o;
    o.dims = dims;
    const int r1 = dims >= 2 ? radius : 0, r2 = dims >= 3 ? radius : 0;
    for (int a = -radius; a <= radius; ++a)
        for (int b = -r1; b <= r1; ++b)
            for (int c = -r2; c <= r2; ++c) {
                o.c = {a, b, c};
                if (shape == StencilShape::star && o.nonzero_count() > 1)
                    continue;
                out.push_back(o);
            }
    return out;
}

namespace {

std::string at(const OffsetVector &o) {
    std::string s = "u.at(";
    for (int d = 0; d < o.dims; ++d)
        s += (d ? ", " : "") + std::to_string(o[d]);
    return s + ")";
}

std::string zero_at(int dims) {
    OffsetVector o;
    o.dims = dims;
    return "v.at(" + at(o).substr(5);
}

std::uint64_t name_seed(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Positive weights summing to one, printed with six decimals.
std::vector<std::string> convex_weights(const std::string &name, std::size_t n) {
    std::mt19937_64 rng(name_seed(name));
    std::vector<double> r(n);
    double sum = 0;
    for (auto &x : r) {
        x = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53; // [0.5, 1.5)
        sum += x;
    }
    std::vector<std::string> out;
    for (double x : r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", x / sum);
        out.emplace_back(buf);
    }
    return out;
}

std::string weighted_sum(const std::vector<OffsetVector> &offs,
                         const std::vector<std::string> &coef, const std::vector<bool> &negate,
                         const std::string &indent) {
    std::string s;
    for (std::size_t k = 0; k < offs.size(); ++k) {
        std::string term = coef[k] + " * " + at(offs[k]);
        if (k == 0)
            s += term;
        else
            s += "\n" + indent + (negate[k] ? "- " : "+ ") + term;
    }
    return s;
}

// Expression and kernel-body text for one table kernel.
std::string kernel_body(const CorpusKernel &k) {
    const std::string indent = "        ";
    auto offs = stencil_offsets(k.shape, k.dims, k.radius);
    std::vector<bool> negate(offs.size(), false);
    std::vector<std::string> coef;
    if (k.name == "star2d4r") {
        // fixed coefficients, one term per point
        const std::map<int, std::string> along_x = {
            {1, "0.06245"}, {2, "0.06255"}, {3, "0.06251"}, {4, "0.11111"}};
        const std::map<int, std::string> along_y = {
            {1, "0.06248"}, {2, "0.06243"}, {3, "0.06253"}, {4, "0.22220"}};
        for (const auto &o : offs) {
            if (o.is_zero())
                coef.emplace_back("0.25005");
            else if (o[0] != 0)
                coef.push_back(along_x.at(std::abs(o[0])));
            else
                coef.push_back(along_y.at(std::abs(o[1])));
        }
        for (std::size_t n = 0; n < offs.size(); ++n)
            negate[n] = n > 0 && std::abs(offs[n][1]) == 4;
    } else if (k.j_kernel) {
        if (k.name == "j3d27pt") {
            for (std::size_t n = 0; n < offs.size(); ++n) {
                char buf[16];
                std::snprintf(buf, sizeof buf, "%.1f", 0.5 + 0.1 * static_cast<double>((n * 7) % 11));
                coef.emplace_back(buf);
            }
        } else if (k.name == "j2d5pt") {
            coef = {"5.1", "12.1", "15.0", "12.2", "5.2"};
        } else {
            coef = {"7.1", "5.1", "9.2", "12.1", "15.0", "12.2", "9.3", "5.2", "7.2"};
        }
        const std::string divisor = k.name == "j3d27pt" ? "159.0" : "118.0";
        return zero_at(k.dims) + ".set((" + weighted_sum(offs, coef, negate, indent) + ")\n" +
               indent + "/ " + divisor + ")";
    } else {
        coef = convex_weights(k.name, offs.size());
    }
    return zero_at(k.dims) + ".set(" + weighted_sum(offs, coef, negate, indent) + ")";
}

std::string ident(const std::string &name) {
    std::string s = name;
    for (char &c : s)
        if (c == '-')
            c = '_';
    return s;
}

std::string shape_text(const std::vector<std::int64_t> &shape) {
    std::string s = "(";
    for (std::size_t d = 0; d < shape.size(); ++d)
        s += (d ? ", " : "") + std::to_string(shape[d]);
    return s + (shape.size() == 1 ? ",)" : ")");
}

std::string program(const std::string &name, int dims, int radius, const std::string &body,
                    const CorpusOptions &o) {
    const std::string id = ident(name);
    std::vector<std::int64_t> shape = o.shape;
    if (shape.empty())
        shape = dims == 3 ? std::vector<std::int64_t>{24, 24, 24} : std::vector<std::int64_t>{96, 96};
    const int order = o.order.value_or(radius);
    const std::string dt = o.dtype == DType::f32 ? "st.f32" : "st.f64";
    std::string s = "import stencilpy as st\n\n";
    s += "@st.kernel\ndef kernel_" + id + "(u: st.grid, v: st.grid):\n    " + body + "\n\n";
    s += "@st.target\ndef target_" + id + "(u: st.grid, v: st.grid" +
         (o.literal_iterations ? "" : ", iter: st.i32") + "):\n";
    s += "    for _t in range(" +
         (o.literal_iterations ? std::to_string(*o.literal_iterations) : std::string("iter")) +
         "):\n";
    s += "        st.map(" + o.map_args + ")(kernel_" + id + ")(u, v)\n";
    s += "        (v, u) = (u, v)\n\n";
    s += "u = st.grid(dtype=" + dt + ", shape=" + shape_text(shape) + ", order=" +
         std::to_string(order) + ")\n";
    s += "v = st.grid(dtype=" + dt + ", shape=" + shape_text(shape) + ", order=" +
         std::to_string(order) + ")\n";
    s += "st.launch(backend=" + o.backend + ")(target_" + id + ")(u, v" +
         (o.literal_iterations ? "" : ", " + std::to_string(o.launch_iterations)) + ")\n";
    return s;
}

} // namespace

std::string corpus_source(const std::string &name, const CorpusOptions &opts) {
    const CorpusKernel *k = find_corpus_kernel(name);
    if (!k)
        throw std::invalid_argument("unknown corpus kernel '" + name + "'");
    return program(name, k->dims, k->radius, kernel_body(*k), opts);
}

std::string star2d4r_cuda_source() {
    return R"(import stencilpy as st

@st.kernel
def kernel_star2d4r(u: st.grid, v: st.grid):
  v.at(0, 0).set(0.25005 * u.at(0, 0)
    + 0.11111 * (u.at(-4, 0) + u.at(4, 0))
    + 0.06251 * (u.at(-3, 0) + u.at(3, 0))
    + 0.06255 * (u.at(-2, 0) + u.at(2, 0))
    + 0.06245 * (u.at(-1, 0) + u.at(1, 0))
    + 0.06248 * (u.at(0, -1) + u.at(0, 1))
    + 0.06243 * (u.at(0, -2) + u.at(0, 2))
    + 0.06253 * (u.at(0, -3) + u.at(0, 3))
    - 0.22220 * (u.at(0, -4) + u.at(0, 4)))

@st.target
def target_star2d4r(u: st.grid, v: st.grid, iter:st.i32):
  for _t in range(iter):
    st.map(e=u.shape)(kernel_star2d4r)(u, v)
    (v, u) = (u, v)

u = st.grid(dtype=st.f32, shape=(1000,1000), order=4)
v = st.grid(dtype=st.f32, shape=(1000,1000), order=4)
# data initialization omitted for brevity
st.launch(
    backend=st.cuda(
        computeCapability="9.0",
        threadsPerBlock=(16, 8, 8),
        template=st.CUDABackend.Template.gmem,
    )
)(target_star2d4r)(u, v, 1000)
)";
}

std::vector<std::string> corpus_fixture_names() {
    return {"star2d4r_cuda", "identity2d", "center3d", "pml3d", "heat2d_dataflow"};
}

std::string corpus_fixture_source(const std::string &name) {
    if (name == "star2d4r_cuda")
        return star2d4r_cuda_source();
    if (name == "identity2d") {
        CorpusOptions o;
        o.shape = {16, 16};
        o.launch_iterations = 1;
        return program("identity2d", 2, 1, "v.at(0, 0).set(u.at(0, 0))", o);
    }
    if (name == "center3d") {
        CorpusOptions o;
        o.shape = {8, 8, 4};
        o.literal_iterations = 3;
        o.backend = "st.dataflow()";
        return program("center3d", 3, 0, "v.at(0, 0, 0).set(0.5 * u.at(0, 0, 0))", o);
    }
    if (name == "pml3d") {
        // inner region plus six absorbing slabs of width 4
        CorpusOptions o;
        o.shape = {24, 24, 24};
        o.map_args = "e=u.shape, w=4";
        o.backend = "st.omp(template=\"loop\", decomposition=\"slab7\")";
        return program("pml3d", 3, 2, kernel_body(*find_corpus_kernel("star3d2r")), o);
    }
    if (name == "heat2d_dataflow") {
        CorpusOptions o;
        o.shape = {32, 32};
        o.literal_iterations = 10;
        o.backend = "st.dataflow(fabricDims=(757, 996), margins=(3, 1, 4, 1))";
        return program("heat2d_dataflow", 2, 1, kernel_body(*find_corpus_kernel("star2d1r")), o);
    }
    throw std::invalid_argument("unknown fixture '" + name + "'");
}

} // namespace stencilc
