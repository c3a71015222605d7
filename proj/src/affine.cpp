#include "stencilc/affine.hpp"

namespace stencilc {

Affine Affine::symbol(std::string name) {
    Affine a;
    a.terms_.emplace(std::move(name), 1);
    return a;
}

void Affine::normalize() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (it->second == 0)
            it = terms_.erase(it);
        else
            ++it;
    }
}

Affine Affine::operator+(const Affine &o) const {
    Affine r = *this;
    r.constant_ += o.constant_;
    for (const auto &[name, k] : o.terms_)
        r.terms_[name] += k;
    r.normalize();
    return r;
}

Affine Affine::operator-(const Affine &o) const { return *this + (-o); }

Affine Affine::operator-() const { return scaled(-1); }

Affine Affine::scaled(std::int64_t k) const {
    Affine r;
    r.constant_ = constant_ * k;
    for (const auto &[name, c] : terms_)
        r.terms_[name] = c * k;
    r.normalize();
    return r;
}

std::optional<std::int64_t> Affine::evaluate(
    const std::function<std::optional<std::int64_t>(const std::string &)> &lookup) const {
    std::int64_t v = constant_;
    for (const auto &[name, k] : terms_) {
        auto s = lookup(name);
        if (!s)
            return std::nullopt;
        v += k * *s;
    }
    return v;
}

std::string Affine::str() const {
    std::string out;
    bool first = true;
    auto emit = [&](std::int64_t k, const std::string &body) {
        if (first) {
            if (k < 0)
                out += "-";
        } else {
            out += k < 0 ? " - " : " + ";
        }
        std::int64_t mag = k < 0 ? -k : k;
        if (body.empty())
            out += std::to_string(mag);
        else if (mag == 1)
            out += body;
        else
            out += std::to_string(mag) + "*" + body;
        first = false;
    };
    for (const auto &[name, k] : terms_)
        if (k > 0)
            emit(k, name);
    for (const auto &[name, k] : terms_)
        if (k < 0)
            emit(k, name);
    if (constant_ != 0 || first)
        emit(constant_, "");
    return out;
}

} // namespace stencilc
