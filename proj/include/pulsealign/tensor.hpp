#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pulsealign/errors.hpp"

namespace pulsealign {

// Dense row-major tensor. Training uses Tensor<float>; numeric oracles use
// Tensor<double>. Shapes are small (rank <= 3 in practice), data contiguous.
template <typename S>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<S> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape_in)
        : shape(std::move(shape_in)), data(count(shape), S(0)) {}

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::int64_t> shape, S value) {
        Tensor t(std::move(shape));
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    static Tensor scalar(S value) {
        Tensor t({1});
        t.data[0] = value;
        return t;
    }

    static std::int64_t count(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto d : shape) {
            require(d >= 0, ErrorKind::ShapeMismatch, "negative tensor dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    S& at(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    S at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    void fill(S value) { std::fill(data.begin(), data.end(), value); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (S v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }

    std::string shape_string() const {
        std::ostringstream out;
        out << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) out << ", ";
            out << shape[i];
        }
        out << ']';
        return out.str();
    }
};

template <typename S>
void check_shape(const Tensor<S>& t, const std::vector<std::int64_t>& expected, const char* what) {
    require(t.shape == expected, ErrorKind::ShapeMismatch,
            std::string(what) + " has shape " + t.shape_string());
}

} // namespace pulsealign
