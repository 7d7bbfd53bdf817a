#ifndef G2HF_TENSOR_HPP
#define G2HF_TENSOR_HPP

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "g2hf/rng.hpp"

namespace g2hf {

// Dense row-major tensor of doubles with an explicit shape.
// Values are immutable by convention once an op has produced them.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(count(shape_)), 0.0);
    }

    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<long long>(data_.size()) != count(shape_))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor uniform(std::vector<int> shape, Rng& rng, double bound) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = rng.uniform_symmetric(bound);
        return t;
    }

    int ndim() const { return static_cast<int>(shape_.size()); }
    int size(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    long long numel() const { return static_cast<long long>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](long long i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](long long i) const { return data_[static_cast<std::size_t>(i)]; }

    // [C,H,W] indexing
    double& at(int c, int h, int w) {
        return data_[static_cast<std::size_t>((static_cast<long long>(c) * shape_[1] + h) * shape_[2] + w)];
    }
    double at(int c, int h, int w) const {
        return data_[static_cast<std::size_t>((static_cast<long long>(c) * shape_[1] + h) * shape_[2] + w)];
    }

    // [M,N] indexing
    double& at(int i, int j) {
        return data_[static_cast<std::size_t>(static_cast<long long>(i) * shape_[1] + j)];
    }
    double at(int i, int j) const {
        return data_[static_cast<std::size_t>(static_cast<long long>(i) * shape_[1] + j)];
    }

    // conv weight [Co,Ci,Kh,Kw] indexing
    double at(int o, int i, int y, int x) const {
        return data_[static_cast<std::size_t>(
            ((static_cast<long long>(o) * shape_[1] + i) * shape_[2] + y) * shape_[3] + x)];
    }
    double& at(int o, int i, int y, int x) {
        return data_[static_cast<std::size_t>(
            ((static_cast<long long>(o) * shape_[1] + i) * shape_[2] + y) * shape_[3] + x)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    double max_abs_diff(const Tensor& o) const {
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i)
            m = std::max(m, std::abs(data_[i] - o.data_[i]));
        return m;
    }

    static long long count(const std::vector<int>& shape) {
        long long n = 1;
        for (int e : shape) {
            if (e <= 0) throw std::invalid_argument("tensor: non-positive extent");
            n *= e;
        }
        return n;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i)
            out += (i ? "," : "") + std::to_string(s[i]);
        return out + "]";
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace g2hf

#endif
