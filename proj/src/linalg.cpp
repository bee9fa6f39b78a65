#include "sparseloc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace sparseloc {

Matrix pinv_symmetric(const Matrix& a, double cutoff) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const Vector& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    Vector inv = Vector::Zero(ev.size());
    if (top > 0.0) {
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (std::abs(ev(i)) > cutoff * top) inv(i) = 1.0 / ev(i);
    }
    const Matrix& v = es.eigenvectors();
    return v * inv.asDiagonal() * v.transpose();
}

Matrix pinv(const Matrix& a, double cutoff) {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Vector inv = Vector::Zero(s.size());
    if (s.size() > 0 && s(0) > 0.0) {
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > cutoff * s(0)) inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix inv_sqrt_psd(const Matrix& a, double cutoff) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const Vector& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    Vector inv = Vector::Zero(ev.size());
    if (top > 0.0) {
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev(i) > cutoff * top) inv(i) = 1.0 / std::sqrt(ev(i));
    }
    const Matrix& v = es.eigenvectors();
    return v * inv.asDiagonal() * v.transpose();
}

double spectral_norm_sq(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    if (a.cols() == 1) return a.col(0).squaredNorm();
    const Matrix g = a.rows() <= a.cols() ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

Matrix source_norms(const Matrix& x, int dof) {
    const Eigen::Index m = x.rows() / dof;
    if (dof == 1) return x.cwiseAbs();
    Matrix out(m, x.cols());
    for (Eigen::Index j = 0; j < m; ++j) out.row(j) = x.middleRows(j * dof, dof).colwise().norm();
    return out;
}

} // namespace sparseloc
