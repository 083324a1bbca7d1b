#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace avatar {

// Samples are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// Class indices are 0-based internally: [0, K).
using Labels = std::vector<int>;
using Mask = std::vector<bool>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, std::int64_t row = -1)
        : Error(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}

    std::int64_t row() const noexcept { return row_; }

private:
    std::int64_t row_;
};

/// Rows of `m` selected by `idx`, in order.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx);
Vector gather(const Vector& v, const std::vector<std::size_t>& idx);
Labels gather(const Labels& v, const std::vector<std::size_t>& idx);
Mask gather(const Mask& v, const std::vector<std::size_t>& idx);

}  // namespace avatar
