#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace steadapt {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Dense row-major tensor. The buffer is shared so reshapes are free; ops treat
// tensors as immutable values and allocate fresh buffers for outputs.
template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : buf_(std::make_shared<std::vector<T>>(shape_numel(shape))), shape_(std::move(shape)) {
        check_dims();
    }

    Tensor(Shape shape, T fill)
        : buf_(std::make_shared<std::vector<T>>(shape_numel(shape), fill)), shape_(std::move(shape)) {
        check_dims();
    }

    Tensor(Shape shape, std::vector<T> values)
        : buf_(std::make_shared<std::vector<T>>(std::move(values))), shape_(std::move(shape)) {
        check_dims();
        if (static_cast<std::int64_t>(buf_->size()) != shape_numel(shape_))
            throw InvalidShape("tensor values size does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s), T(0)); }
    static Tensor full(Shape s, T v) { return Tensor(std::move(s), v); }

    bool defined() const { return static_cast<bool>(buf_); }
    const Shape& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::int64_t numel() const { return buf_ ? static_cast<std::int64_t>(buf_->size()) : 0; }

    T* data() { return buf_->data(); }
    const T* data() const { return buf_->data(); }
    T& operator[](std::int64_t i) { return (*buf_)[static_cast<size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return (*buf_)[static_cast<size_t>(i)]; }

    // Shares the underlying buffer.
    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != numel())
            throw InvalidShape("reshape " + shape_str(shape_) + " -> " + shape_str(s));
        Tensor t;
        t.buf_ = buf_;
        t.shape_ = std::move(s);
        return t;
    }

    Tensor clone() const {
        Tensor t;
        t.buf_ = std::make_shared<std::vector<T>>(*buf_);
        t.shape_ = shape_;
        return t;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> t{shape_};
        const T* s = data();
        U* d = t.data();
        for (std::int64_t i = 0; i < numel(); ++i) d[i] = static_cast<U>(s[i]);
        return t;
    }

    void fill(T v) { std::fill(buf_->begin(), buf_->end(), v); }

    bool all_finite() const {
        for (const T& v : *buf_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

private:
    void check_dims() const {
        for (int d : shape_)
            if (d <= 0) throw InvalidShape("non-positive dim in shape " + shape_str(shape_));
    }

    std::shared_ptr<std::vector<T>> buf_;
    Shape shape_;
};

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw InvalidShape("max_abs_diff shape mismatch");
    double m = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace steadapt
