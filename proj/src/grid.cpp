#include "stencilc/grid.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace stencilc {

static_assert(std::endian::native == std::endian::little, "grid files assume a little-endian host");

GridBuffer::GridBuffer(DType dtype, std::vector<std::int64_t> shape, int order)
    : dtype_(dtype), shape_(std::move(shape)), order_(order) {
    if (shape_.empty() || shape_.size() > kMaxDims)
        throw std::invalid_argument("grid needs 1 to 3 dimensions");
    std::int64_t n = 1;
    for (int d = dims() - 1; d >= 0; --d) {
        if (extent(d) < 1)
            throw std::invalid_argument("grid extents must be positive");
        strides_[static_cast<std::size_t>(d)] = n;
        n *= padded_extent(d);
    }
    values_.assign(static_cast<std::size_t>(n), 0.0);
}

std::int64_t GridBuffer::interior_size() const {
    std::int64_t n = 1;
    for (auto e : shape_)
        n *= e;
    return n;
}

double round_to(DType t, double v) {
    return t == DType::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

void GridBuffer::set(const Index &i, double v) {
    values_[static_cast<std::size_t>(flat(i))] = round_to(dtype_, v);
}

bool GridBuffer::same_layout(const GridBuffer &o) const {
    return dtype_ == o.dtype_ && shape_ == o.shape_ && order_ == o.order_;
}

bool GridBuffer::operator==(const GridBuffer &o) const {
    if (!same_layout(o))
        return false;
    // bitwise, so that -0.0 and NaN payloads count as differences
    return std::memcmp(values_.data(), o.values_.data(), values_.size() * sizeof(double)) == 0;
}

void fill_log_uniform(GridBuffer &g, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    g.for_each_interior([&](const Index &i) { g.set(i, std::exp(u(rng))); });
}

// ---- files -----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'T', 'G', 'R', 'I', 'D', '0', '1'};

template <typename T> void put(std::string &out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T> T take(const std::string &in, std::size_t &pos) {
    if (pos + sizeof(T) > in.size())
        throw std::runtime_error("grid file is truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

std::string encode_grid(const GridBuffer &g) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, g.dtype() == DType::f32 ? 1u : 2u);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dims()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.order()));
    put<std::uint32_t>(out, 0u);
    for (auto e : g.shape())
        put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    out.reserve(out.size() + g.values().size() * dtype_size(g.dtype()));
    for (double v : g.values()) {
        if (g.dtype() == DType::f32)
            put<float>(out, static_cast<float>(v));
        else
            put<double>(out, v);
    }
    return out;
}

GridBuffer decode_grid(const std::string &bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        return parse_grid_text(bytes);
    std::size_t pos = sizeof(kMagic);
    auto code = take<std::uint32_t>(bytes, pos);
    auto ndims = take<std::uint32_t>(bytes, pos);
    auto order = take<std::uint32_t>(bytes, pos);
    take<std::uint32_t>(bytes, pos);
    if (code != 1 && code != 2)
        throw std::runtime_error("grid file has unknown dtype code " + std::to_string(code));
    if (ndims < 1 || ndims > kMaxDims)
        throw std::runtime_error("grid file has " + std::to_string(ndims) + " dimensions");
    std::vector<std::int64_t> shape;
    for (std::uint32_t d = 0; d < ndims; ++d)
        shape.push_back(static_cast<std::int64_t>(take<std::uint64_t>(bytes, pos)));
    GridBuffer g(code == 1 ? DType::f32 : DType::f64, shape, static_cast<int>(order));
    std::size_t need = g.values().size() * dtype_size(g.dtype());
    if (bytes.size() - pos != need)
        throw std::runtime_error("grid file body has " + std::to_string(bytes.size() - pos) +
                                 " bytes, expected " + std::to_string(need));
    for (double &v : g.values())
        v = code == 1 ? static_cast<double>(take<float>(bytes, pos)) : take<double>(bytes, pos);
    return g;
}

GridBuffer parse_grid_text(const std::string &text) {
    std::istringstream in(text);
    std::string tok;
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    int order = -1;
    bool have_dtype = false;
    while (order < 0 || !have_dtype || shape.empty()) {
        if (!(in >> tok))
            throw std::runtime_error("grid text needs 'dtype=', 'shape=' and 'order=' fields");
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("malformed grid header field '" + tok + "'");
        std::string key = tok.substr(0, eq);
        std::string val = tok.substr(eq + 1);
        if (key == "dtype") {
            if (val != "f32" && val != "f64")
                throw std::runtime_error("unknown dtype '" + val + "'");
            dtype = val == "f32" ? DType::f32 : DType::f64;
            have_dtype = true;
        } else if (key == "shape") {
            std::istringstream s(val);
            std::string part;
            while (std::getline(s, part, ','))
                shape.push_back(std::stoll(part));
        } else if (key == "order") {
            order = std::stoi(val);
        } else {
            throw std::runtime_error("unknown grid header field '" + key + "'");
        }
    }
    GridBuffer g(dtype, shape, order);
    std::int64_t n = 0;
    g.for_each_interior([&](const Index &i) {
        std::string v;
        if (!(in >> v))
            throw std::runtime_error("grid text has " + std::to_string(n) + " values, expected " +
                                     std::to_string(g.interior_size()));
        double x = 0;
        auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size())
            throw std::runtime_error("malformed grid value '" + v + "'");
        g.set(i, x);
        ++n;
    });
    if (in >> tok)
        throw std::runtime_error("grid text has more values than its shape");
    return g;
}

void save_grid(const std::string &path, const GridBuffer &g) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    std::string bytes = encode_grid(g);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("failed writing '" + path + "'");
}

GridBuffer load_grid(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return decode_grid(ss.str());
    } catch (const std::exception &e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

// ---- comparison ------------------------------------------------------------

std::string ComparisonReport::worst_str() const {
    std::string s = "(";
    for (int d = 0; d < dims; ++d) {
        if (d)
            s += ",";
        s += std::to_string(worst[static_cast<std::size_t>(d)]);
    }
    return s + ")";
}

namespace {
std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}
} // namespace

std::string ComparisonReport::str() const {
    return "max=" + sci(max_error) + " rmsd=" + sci(rmsd) + " at=" + worst_str();
}

std::string ComparisonReport::relative_str() const {
    return "scale=" + sci(scale) + " rel_max=" + sci(rel_max()) + " rel_rmsd=" + sci(rel_rmsd());
}

ComparisonReport compare(const GridBuffer &ref, const GridBuffer &other) {
    if (!ref.same_layout(other))
        throw std::invalid_argument("cannot compare grids of different type, shape or order");
    ComparisonReport r;
    r.dims = ref.dims();
    double sum = 0;
    bool first = true;
    ref.for_each_interior([&](const Index &i) {
        double a = ref.at(i);
        double b = other.at(i);
        double e = std::fabs(a - b);
        if (std::isnan(e))
            e = INFINITY; // a NaN on either side is a maximal error
        if (first || e > r.max_error) {
            r.max_error = e;
            r.worst = i;
            first = false;
        }
        r.scale = std::max(r.scale, std::fabs(a));
        sum += e * e;
        ++r.points;
    });
    r.rmsd = r.points ? std::sqrt(sum / static_cast<double>(r.points)) : 0.0;
    return r;
}

} // namespace stencilc
