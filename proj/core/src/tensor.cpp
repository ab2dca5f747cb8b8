#include "permsec/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace permsec {

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t l = n == 0 ? 0 : rows.begin()->size();
    Tensor t(n, l);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != l)
            throw std::invalid_argument("Tensor::from_rows: ragged rows");
        std::size_t c = 0;
        for (double v : row) t.at(r, c++) = v;
        ++r;
    }
    return t;
}

double mean_square(const Tensor& t) {
    if (t.empty()) return 0.0;
    double acc = 0.0;
    for (double v : t.data()) acc += v * v;
    return acc / static_cast<double>(t.size());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace permsec
