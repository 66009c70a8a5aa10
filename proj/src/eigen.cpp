#include "fiberlift/eigen.hpp"
#include "fiberlift/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fiberlift {

namespace {

inline double& at(std::vector<double>& a, int n, int i, int j) { return a[size_t(i) * n + j]; }

// Householder reduction to upper Hessenberg form (in place).
void hessenberg(std::vector<double>& a, int n) {
    for (int k = 0; k < n - 2; ++k) {
        double scale = 0;
        for (int i = k + 1; i < n; ++i) scale += std::fabs(at(a, n, i, k));
        if (scale == 0) continue;
        std::vector<double> v(n, 0.0);
        double norm2 = 0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = at(a, n, i, k) / scale;
            norm2 += v[i] * v[i];
        }
        double alpha = v[k + 1] >= 0 ? -std::sqrt(norm2) : std::sqrt(norm2);
        double beta = norm2 - alpha * v[k + 1];
        if (beta == 0) continue;
        v[k + 1] -= alpha;
        // A <- H A H with H = I - v v^T / beta
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int i = k + 1; i < n; ++i) s += v[i] * at(a, n, i, j);
            s /= beta;
            for (int i = k + 1; i < n; ++i) at(a, n, i, j) -= s * v[i];
        }
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = k + 1; j < n; ++j) s += at(a, n, i, j) * v[j];
            s /= beta;
            for (int j = k + 1; j < n; ++j) at(a, n, i, j) -= s * v[j];
        }
        at(a, n, k + 1, k) = alpha * scale;
        for (int i = k + 2; i < n; ++i) at(a, n, i, k) = 0.0;
    }
}

} // namespace

// Francis double-shift QR on the Hessenberg matrix, deflating converged
// trailing 1x1/2x2 blocks. Follows the classical dhqr scheme.
std::vector<std::complex<double>> dense_eigenvalues(std::vector<double> a, int n) {
    std::vector<std::complex<double>> eig;
    if (n == 0) return eig;
    if (n == 1) return {std::complex<double>(a[0], 0)};
    hessenberg(a, n);

    double anorm = 0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - 1); j < n; ++j) anorm += std::fabs(at(a, n, i, j));
    if (anorm == 0) anorm = 1;

    int nn = n - 1;
    double t_shift = 0;
    int its_total = 0;
    while (nn >= 0) {
        int its = 0;
        int l;
        for (;;) {
            // find small subdiagonal element
            for (l = nn; l >= 1; --l) {
                double s = std::fabs(at(a, n, l - 1, l - 1)) + std::fabs(at(a, n, l, l));
                if (s == 0) s = anorm;
                if (std::fabs(at(a, n, l, l - 1)) <= 1e-15 * s) {
                    at(a, n, l, l - 1) = 0;
                    break;
                }
            }
            double x = at(a, n, nn, nn);
            if (l == nn) { // one root found
                eig.push_back({x + t_shift, 0});
                nn--;
                break;
            }
            double y = at(a, n, nn - 1, nn - 1);
            double w = at(a, n, nn, nn - 1) * at(a, n, nn - 1, nn);
            if (l == nn - 1) { // two roots
                double p = 0.5 * (y - x);
                double q = p * p + w;
                double z = std::sqrt(std::fabs(q));
                x += t_shift;
                if (q >= 0) {
                    z = p + (p >= 0 ? z : -z);
                    eig.push_back({x + z, 0});
                    eig.push_back({std::fabs(z) > 1e-300 ? x - w / z : x + z, 0});
                } else {
                    eig.push_back({x + p, z});
                    eig.push_back({x + p, -z});
                }
                nn -= 2;
                break;
            }
            if (++its_total > 120 * n)
                throw ConvergenceError("dense_eigenvalues: QR iteration failed to converge");
            double p = 0, q = 0, z = 0, r = 0, s = 0;
            if (its == 10 || its == 20) {
                // exceptional shift
                t_shift += x;
                for (int i = 0; i <= nn; ++i) at(a, n, i, i) -= x;
                s = std::fabs(at(a, n, nn, nn - 1)) + std::fabs(at(a, n, nn - 1, nn - 2));
                x = y = 0.75 * s;
                w = -0.4375 * s * s;
            }
            ++its;
            int mIdx;
            for (mIdx = nn - 2; mIdx >= l; --mIdx) {
                z = at(a, n, mIdx, mIdx);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at(a, n, mIdx + 1, mIdx) + at(a, n, mIdx, mIdx + 1);
                q = at(a, n, mIdx + 1, mIdx + 1) - z - r - s;
                r = at(a, n, mIdx + 2, mIdx + 1);
                s = std::fabs(p) + std::fabs(q) + std::fabs(r);
                p /= s;
                q /= s;
                r /= s;
                if (mIdx == l) break;
                double u = std::fabs(at(a, n, mIdx, mIdx - 1)) * (std::fabs(q) + std::fabs(r));
                double v = std::fabs(p) * (std::fabs(at(a, n, mIdx - 1, mIdx - 1)) + std::fabs(z) +
                                           std::fabs(at(a, n, mIdx + 1, mIdx + 1)));
                if (u <= 1e-16 * v) break;
            }
            for (int i = mIdx + 2; i <= nn; ++i) {
                at(a, n, i, i - 2) = 0;
                if (i != mIdx + 2) at(a, n, i, i - 3) = 0;
            }
            for (int k = mIdx; k <= nn - 1; ++k) {
                if (k != mIdx) {
                    p = at(a, n, k, k - 1);
                    q = at(a, n, k + 1, k - 1);
                    r = k != nn - 1 ? at(a, n, k + 2, k - 1) : 0.0;
                    x = std::fabs(p) + std::fabs(q) + std::fabs(r);
                    if (x == 0) continue;
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = std::sqrt(p * p + q * q + r * r);
                if (p < 0) s = -s;
                if (s == 0) continue;
                if (k == mIdx) {
                    if (l != mIdx) at(a, n, k, k - 1) = -at(a, n, k, k - 1);
                } else {
                    at(a, n, k, k - 1) = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                for (int j = k; j <= nn; ++j) { // row modification
                    p = at(a, n, k, j) + q * at(a, n, k + 1, j);
                    if (k != nn - 1) {
                        p += r * at(a, n, k + 2, j);
                        at(a, n, k + 2, j) -= p * z;
                    }
                    at(a, n, k + 1, j) -= p * y;
                    at(a, n, k, j) -= p * x;
                }
                int mmin = nn < k + 3 ? nn : k + 3;
                for (int i = l; i <= mmin; ++i) { // column modification
                    p = x * at(a, n, i, k) + y * at(a, n, i, k + 1);
                    if (k != nn - 1) {
                        p += z * at(a, n, i, k + 2);
                        at(a, n, i, k + 2) -= p * r;
                    }
                    at(a, n, i, k + 1) -= p * q;
                    at(a, n, i, k) -= p;
                }
            }
        }
    }
    return eig;
}

std::vector<double> eigenvalue_moduli(const std::vector<double>& a, int n) {
    auto eig = dense_eigenvalues(a, n);
    std::vector<double> mod;
    mod.reserve(eig.size());
    for (auto& e : eig) mod.push_back(std::abs(e));
    std::sort(mod.begin(), mod.end(), std::greater<double>());
    return mod;
}

} // namespace fiberlift
