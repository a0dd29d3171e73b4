#pragma once

namespace plumeinv {

// Compares a BLAS-backed GEMM and Cholesky against Eigen's built-in kernels
// on small fixed matrices. Returns the largest relative discrepancy.
double blas_self_check();

// Some OpenBLAS builds select CPU kernels that return wrong results (seen
// with 0.3.20 picking its Cooperlake DGEMM). When the self check fails and
// OPENBLAS_CORETYPE is unset, the process re-executes itself with Haswell
// kernels forced. Throws NumericalError if the check still fails. Call
// first thing in main().
void ensure_sane_blas(char** argv);

}  // namespace plumeinv
