#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace stencilc {

/// Integer expression of the form `c + sum(k_i * sym_i)`. Used for map bounds,
/// which may refer to grid extents (`u.shape[0]`) or integer target parameters
/// before those are bound.
class Affine {
public:
    Affine() = default;
    Affine(std::int64_t c) : constant_(c) {} // NOLINT(implicit)
    static Affine symbol(std::string name);

    bool is_constant() const { return terms_.empty(); }
    std::int64_t constant() const { return constant_; }
    const std::map<std::string, std::int64_t> &terms() const { return terms_; }

    Affine operator+(const Affine &o) const;
    Affine operator-(const Affine &o) const;
    Affine operator-() const;
    Affine scaled(std::int64_t k) const;

    friend bool operator==(const Affine &, const Affine &) = default;

    /// Substitutes every symbol; nullopt if `lookup` misses any of them.
    std::optional<std::int64_t>
    evaluate(const std::function<std::optional<std::int64_t>(const std::string &)> &lookup) const;

    /// Renders in a form the DSL parser accepts back, e.g. `x - p`, `x1 + p`, `0`.
    std::string str() const;

private:
    void normalize();

    std::int64_t constant_ = 0;
    std::map<std::string, std::int64_t> terms_;
};

} // namespace stencilc
