#pragma once

#include <Eigen/Dense>

namespace pdfest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Measurement matrices are stored row-major: rows are samples and get
// appended / split along the sample axis.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

}  // namespace pdfest
