#pragma once

// Halo-padded grid storage, grid files, and grid comparison.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stencilc/ast.hpp"

namespace stencilc {

using Index = std::array<std::int64_t, kMaxDims>;

/// Row-major, last dimension contiguous, halo of width `order` on every side.
/// Values are held as double; f32 grids only ever contain float-representable
/// values because every store rounds to the element type.
class GridBuffer {
public:
    GridBuffer() = default;
    GridBuffer(DType dtype, std::vector<std::int64_t> shape, int order);
    static GridBuffer like(const GridDecl &g) { return {g.dtype, g.shape, g.order}; }

    DType dtype() const { return dtype_; }
    const std::vector<std::int64_t> &shape() const { return shape_; }
    int order() const { return order_; }
    int dims() const { return static_cast<int>(shape_.size()); }
    std::int64_t extent(int d) const { return shape_[static_cast<std::size_t>(d)]; }
    std::int64_t padded_extent(int d) const { return extent(d) + 2 * order_; }
    std::int64_t stride(int d) const { return strides_[static_cast<std::size_t>(d)]; }
    std::int64_t interior_size() const;

    /// Flat position of a logical index; components range over
    /// [-order, extent + order).
    std::int64_t flat(const Index &i) const {
        std::int64_t f = 0;
        for (int d = 0; d < dims(); ++d)
            f += (i[static_cast<std::size_t>(d)] + order_) * strides_[static_cast<std::size_t>(d)];
        return f;
    }

    double at(const Index &i) const { return values_[static_cast<std::size_t>(flat(i))]; }
    void set(const Index &i, double v);

    std::vector<double> &values() { return values_; }
    const std::vector<double> &values() const { return values_; }

    bool same_layout(const GridBuffer &o) const;
    bool operator==(const GridBuffer &o) const;

    /// Calls f(index) for every interior point in row-major order.
    template <typename F> void for_each_interior(F &&f) const {
        Index i{0, 0, 0};
        const int n = dims();
        std::array<std::int64_t, kMaxDims> ext{1, 1, 1};
        for (int d = 0; d < n; ++d)
            ext[static_cast<std::size_t>(d)] = extent(d);
        for (i[0] = 0; i[0] < ext[0]; ++i[0])
            for (i[1] = 0; i[1] < ext[1]; ++i[1])
                for (i[2] = 0; i[2] < ext[2]; ++i[2])
                    f(i);
    }

private:
    DType dtype_ = DType::f32;
    std::vector<std::int64_t> shape_;
    int order_ = 0;
    std::array<std::int64_t, kMaxDims> strides_{0, 0, 0};
    std::vector<double> values_;
};

double round_to(DType t, double v);

/// Interior filled with values log-uniform in [lo, hi]; halo left at zero.
void fill_log_uniform(GridBuffer &g, std::uint64_t seed, double lo = 1e-4, double hi = 1e5);

/// Binary format: "STGRID01", u32 dtype (1 f32, 2 f64), u32 ndims, u32 order,
/// u32 reserved, ndims x u64 extents, then every padded value little-endian.
void save_grid(const std::string &path, const GridBuffer &g);
std::string encode_grid(const GridBuffer &g);
/// Accepts the binary format and the text format
/// `dtype=f32 shape=4,4 order=1` followed by the interior values.
GridBuffer load_grid(const std::string &path);
GridBuffer decode_grid(const std::string &bytes);
GridBuffer parse_grid_text(const std::string &text);

struct ComparisonReport {
    double max_error = 0; // absolute
    double rmsd = 0;      // absolute
    Index worst{0, 0, 0};
    int dims = 0;
    double scale = 0; // max |reference| over the interior
    std::int64_t points = 0;

    double rel_max() const { return scale > 0 ? max_error / scale : max_error; }
    double rel_rmsd() const { return scale > 0 ? rmsd / scale : rmsd; }
    std::string worst_str() const;
    /// `max=<e> rmsd=<e> at=<index>`
    std::string str() const;
    std::string relative_str() const;
};

/// Interior-only comparison; `ref` supplies the scale. Throws
/// std::invalid_argument on layout mismatch.
ComparisonReport compare(const GridBuffer &ref, const GridBuffer &other);

} // namespace stencilc
