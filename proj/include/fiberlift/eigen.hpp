#pragma once
#include <complex>
#include <vector>

namespace fiberlift {

// Eigenvalues of a dense real matrix (row-major n x n) via Hessenberg
// reduction and Francis double-shift QR. Desk-scale oracle: n <= a few
// hundred.
std::vector<std::complex<double>> dense_eigenvalues(std::vector<double> a, int n);

// Moduli sorted descending.
std::vector<double> eigenvalue_moduli(const std::vector<double>& a, int n);

} // namespace fiberlift
