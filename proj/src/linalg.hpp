#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace dnc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
struct SymEig {
  Vec values;
  Mat vectors;
};

// Cyclic Jacobi rotations. Input is symmetrized first.
SymEig jacobi_eig(const Mat& a, int max_sweeps = 100);

// Largest singular value.
double spectral_norm(const Mat& a);
double spectral_norm(const CMat& a);

// Eigenvalues of a 3x3 symmetric matrix in closed form, ascending.
Eigen::Vector3d sym3_eigenvalues(const Eigen::Matrix3d& a);

Mat kron(const Mat& a, const Mat& b);

// All eigenvalues of a general real square matrix (Hessenberg + shifted QR).
CVec general_eigenvalues(const Mat& a);

double max_asymmetry(const Mat& a);

}  // namespace dnc
