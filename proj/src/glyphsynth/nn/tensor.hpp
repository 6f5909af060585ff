#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "glyphsynth/common.hpp"

namespace glyphsynth::nn {

// Dense row-major double tensor. Storage is shared between copies; use
// clone() for a deep copy. Shapes are small (<= 4 dims in practice).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<double>>(count(shape_), 0.0)) {}

    Tensor(std::initializer_list<int64_t> shape) : Tensor(std::vector<int64_t>(shape)) {}

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int64_t> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.begin(), t.end(), v);
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    static Tensor from(std::vector<int64_t> shape, std::vector<double> values) {
        check(count(shape) == static_cast<int64_t>(values.size()),
              "Tensor::from: value count does not match shape");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<double>>(std::move(values));
        return t;
    }

    bool defined() const { return data_ != nullptr; }
    int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t size(int dim) const { return shape_.at(static_cast<size_t>(dim)); }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    double* begin() { return data(); }
    double* end() { return data() + numel(); }
    const double* begin() const { return data(); }
    const double* end() const { return data() + numel(); }

    double& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    double& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        return (*data_)[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    double at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return (*data_)[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    double& at(int64_t r, int64_t c) { return (*data_)[static_cast<size_t>(r * shape_[1] + c)]; }
    double at(int64_t r, int64_t c) const {
        return (*data_)[static_cast<size_t>(r * shape_[1] + c)];
    }

    // Shares storage; only the shape changes.
    Tensor reshaped(std::vector<int64_t> shape) const {
        check(count(shape) == numel(), "Tensor::reshaped: element count mismatch");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    void fill(double v) { std::fill(begin(), end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double item() const {
        check(numel() == 1, "Tensor::item: tensor is not a scalar");
        return (*data_)[0];
    }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            check(d >= 0, "Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<int64_t> shape_;
    std::shared_ptr<std::vector<double>> data_;
};

inline std::string shape_str(const std::vector<int64_t>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
}

}  // namespace glyphsynth::nn
