#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace permsec {

// Dense rank-2 or rank-3 real array, row-major (channel-major for rank 3).
// Rank-2 tensors carry the features U, T, X, Y, Z of the transmission
// pipeline; rank-3 tensors only appear for filter-level shuffling.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols)
        : channels_(1), rows_(rows), cols_(cols), rank3_(false),
          data_(rows * cols, 0.0) {}
    Tensor(std::size_t channels, std::size_t rows, std::size_t cols)
        : channels_(channels), rows_(rows), cols_(cols), rank3_(true),
          data_(channels * rows * cols, 0.0) {}

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t channels() const { return channels_; }
    bool rank3() const { return rank3_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& at(std::size_t ch, std::size_t r, std::size_t c) {
        return data_[(ch * rows_ + r) * cols_ + c];
    }
    double at(std::size_t ch, std::size_t r, std::size_t c) const {
        return data_[(ch * rows_ + r) * cols_ + c];
    }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> channel(std::size_t ch) {
        return {data_.data() + ch * rows_ * cols_, rows_ * cols_};
    }
    std::span<const double> channel(std::size_t ch) const {
        return {data_.data() + ch * rows_ * cols_, rows_ * cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const {
        return rank3_ == other.rank3_ && channels_ == other.channels_ &&
               rows_ == other.rows_ && cols_ == other.cols_;
    }
    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    std::size_t channels_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    bool rank3_ = false;
    std::vector<double> data_;
};

// Mean of squared entries; 0 for an empty tensor.
double mean_square(const Tensor& t);

// Mean of squared differences. Shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace permsec
