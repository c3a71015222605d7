#pragma once

// The benchmark kernel corpus: the 16 star/box kernels, the four j-kernels,
// and a few fixtures, rendered as `.stpy` sources.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stencilc/analysis.hpp"

namespace stencilc {

struct CorpusKernel {
    std::string name;
    StencilShape shape = StencilShape::star;
    int dims = 2;
    int radius = 1;
    int flops = 0; // expected operator count
    bool j_kernel = false;
};

/// The 20 benchmark kernels: star/box by radius, then the j-kernels.
const std::vector<CorpusKernel> &corpus_kernels();
const CorpusKernel *find_corpus_kernel(const std::string &name);

/// Offsets of a star or box stencil in lexicographic order.
std::vector<OffsetVector> stencil_offsets(StencilShape shape, int dims, int radius);

struct CorpusOptions {
    /// Grid extents; defaults to 96x96 (2D) or 24x24x24 (3D).
    std::vector<std::int64_t> shape;
    std::optional<int> order; // defaults to the radius
    DType dtype = DType::f32;
    /// Set for a literal `range(N)`; otherwise the target takes `iter`.
    std::optional<std::int64_t> literal_iterations;
    std::int64_t launch_iterations = 5; // value passed for `iter`
    /// Backend expression of st.launch, e.g. `st.omp(template="loop")`.
    std::string backend = "st.seq()";
    /// Keyword arguments of st.map.
    std::string map_args = "e=u.shape";
};

/// Source for a corpus kernel; throws std::invalid_argument for unknown names.
std::string corpus_source(const std::string &name, const CorpusOptions &opts = {});

/// star2d4r with grouped coefficients and a CUDA launch on 1000x1000 grids.
std::string star2d4r_cuda_source();

/// Names of the fixtures written next to the table kernels.
std::vector<std::string> corpus_fixture_names();
std::string corpus_fixture_source(const std::string &name);

} // namespace stencilc
