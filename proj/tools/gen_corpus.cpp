// Writes the kernel corpus as .stpy files: gen_corpus [out_dir]
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stencilc/corpus.hpp"

namespace fs = std::filesystem;

static void write(const fs::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out)
        throw std::runtime_error("cannot write " + p.string());
}

int main(int argc, char **argv) {
    const fs::path dir = argc > 1 ? argv[1] : "corpus";
    try {
        fs::create_directories(dir);
        for (const auto &k : stencilc::corpus_kernels())
            write(dir / (k.name + ".stpy"), stencilc::corpus_source(k.name));
        fs::create_directories(dir / "fixtures");
        for (const auto &f : stencilc::corpus_fixture_names())
            write(dir / "fixtures" / (f + ".stpy"), stencilc::corpus_fixture_source(f));
    } catch (const std::exception &e) {
        std::cerr << "gen_corpus: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
