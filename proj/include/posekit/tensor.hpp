#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit {

/// Dense row-major n-dimensional array. Value type; no view semantics.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, T fill = T(0))
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<size_t>(checked_size(shape_)) != data_.size())
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, T v) { return Tensor(std::move(shape), v); }

    static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4D accessors (NCHW). Bounds unchecked in release builds.
    T& at(int n, int c, int h, int w) {
        assert(rank() == 4);
        return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at(int n, int c, int h, int w) const {
        return const_cast<Tensor*>(this)->at(n, c, h, w);
    }
    T& at(int i, int j) {
        assert(rank() == 2);
        return data_[static_cast<size_t>(int64_t(i) * shape_[1] + j)];
    }
    const T& at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    static int64_t checked_size(const std::vector<int>& shape) {
        if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
        int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace posekit
