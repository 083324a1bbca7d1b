#pragma once

#include <initializer_list>
#include <random>

#include "avatar/tensor.hpp"
#include "oracles.hpp"

namespace testutil {

inline oracle::Mat to_mat(const avatar::Matrix& m) {
    oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    return out;
}

inline oracle::Vec to_vec(const avatar::Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

inline avatar::Vector from(std::initializer_list<double> xs) {
    avatar::Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline avatar::Matrix rows(std::initializer_list<std::initializer_list<double>> xs) {
    avatar::Matrix m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(xs.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : xs) {
        Eigen::Index j = 0;
        for (double x : r) m(i, j++) = x;
        ++i;
    }
    return m;
}

inline avatar::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> d(lo, hi);
    avatar::Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

inline avatar::Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = 0, double hi = 1) {
    std::uniform_real_distribution<double> d(lo, hi);
    avatar::Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

/// Random simplex rows bounded away from 0 and 1.
inline avatar::Matrix random_simplex(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    avatar::Matrix m = random_matrix(rng, r, c, 0.05, 1.0);
    for (Eigen::Index i = 0; i < r; ++i) m.row(i) /= m.row(i).sum();
    return m;
}

inline avatar::Labels random_labels(std::mt19937_64& rng, std::size_t n, int k) {
    std::uniform_int_distribution<int> d(0, k - 1);
    avatar::Labels y(n);
    for (auto& v : y) v = d(rng);
    return y;
}

}  // namespace testutil
