#include "bruhatlab/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

namespace bruhatlab {

Error::Error(std::string kind, std::string op, const std::string& detail)
    : std::runtime_error(kind + " in " + op + ": " + detail), kind_(std::move(kind)), op_(std::move(op)) {}

Grid Grid::from_extent(double extent, double spacing) {
    if (!(extent > 0.0) || !(spacing > 0.0) || spacing > extent)
        throw Error("GridInvalid", "Grid::from_extent", "need 0 < spacing <= extent");
    const int half = static_cast<int>(std::lround(extent / spacing));
    return Grid{2 * half + 1, spacing};
}

double Grid::radius(int i, int j) const { return std::hypot(coord(i), coord(j)); }

int thread_count() {
    if (const char* env = std::getenv("BRUHATLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
    if (workers <= 1) {
        if (count > 0) body(0, count);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, &errors, w, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    // Rethrow the first worker failure on the calling thread.
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

GaussRule gauss_legendre(int n, double a, double b) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        const double c = 0.5 * (a + b), s = 0.5 * (b - a);
        r.x[i] = c - s * z;
        r.x[n - 1 - i] = c + s * z;
        r.w[i] = r.w[n - 1 - i] = s * w;
    }
    return r;
}

void KahanSum::add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
        comp_ += (sum_ - t) + v;
    else
        comp_ += (v - t) + sum_;
    sum_ = t;
}

std::vector<double> least_squares(const std::vector<double>& a, int rows, int cols,
                                  const std::vector<double>& b, double* residual) {
    Eigen::MatrixXd m(rows, cols);
    Eigen::VectorXd rhs(rows);
    for (int i = 0; i < rows; ++i) {
        rhs(i) = b[i];
        for (int j = 0; j < cols; ++j) m(i, j) = a[static_cast<std::size_t>(i) * cols + j];
    }
    // Column scaling keeps mixed powers of the ladder well conditioned.
    Eigen::VectorXd scale(cols);
    for (int j = 0; j < cols; ++j) {
        scale(j) = m.col(j).norm();
        if (scale(j) == 0.0) scale(j) = 1.0;
        m.col(j) /= scale(j);
    }
    Eigen::VectorXd x = m.colPivHouseholderQr().solve(rhs);
    if (residual) *residual = (m * x - rhs).norm();
    std::vector<double> out(cols);
    for (int j = 0; j < cols; ++j) out[j] = x(j) / scale(j);
    return out;
}

}  // namespace bruhatlab
