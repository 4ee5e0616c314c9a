#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bruhatlab {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kEulerGamma = 0.57721566490153286061;

// Every failure carries the name of the failing condition (e.g. "GridMismatch")
// and the operation that raised it.
class Error : public std::runtime_error {
public:
    Error(std::string kind, std::string op, const std::string& detail);
    const std::string& kind() const { return kind_; }
    const std::string& op() const { return op_; }

private:
    std::string kind_;
    std::string op_;
};

// Centered uniform Cartesian grid with an odd node count per axis.
// Node (i, j) sits at ((i - half) h, (j - half) h); storage is row-major.
struct Grid {
    int n = 1;
    double h = 1.0;

    static Grid from_extent(double extent, double spacing);
    int half() const { return (n - 1) / 2; }
    double extent() const { return half() * h; }
    std::size_t size() const { return static_cast<std::size_t>(n) * n; }
    double coord(int i) const { return (i - half()) * h; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n + j; }
    std::size_t center() const { return index(half(), half()); }
    double radius(int i, int j) const;
    bool operator==(const Grid& o) const { return n == o.n && h == o.h; }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

// Thread count from BRUHATLAB_THREADS (default: hardware concurrency).
int thread_count();

// Splits [0, count) into contiguous chunks, one per worker.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};

// Gauss-Legendre nodes and weights on [a, b].
GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Neumaier compensated summation.
class KahanSum {
public:
    void add(double v);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Dense least squares min |A x - b| via Householder QR; A is rows x cols, row-major.
// Returns the solution and writes the residual 2-norm.
std::vector<double> least_squares(const std::vector<double>& a, int rows, int cols,
                                  const std::vector<double>& b, double* residual = nullptr);

}  // namespace bruhatlab
