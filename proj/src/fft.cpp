#include "bruhatlab/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace bruhatlab {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

int fft_good_size(int n) {
    auto smooth = [](int m) {
        for (int p : {2, 3, 5, 7})
            while (m % p == 0) m /= p;
        return m == 1;
    };
    while (!smooth(n)) ++n;
    return n;
}

void dft2(std::vector<cplx>& data, int n, bool forward) {
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_2d(n, n, ptr, ptr, forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
}

double grid_frequency(const Grid& g, int i) { return 2.0 * kPi * (i - g.half()) / (g.n * g.h); }

std::vector<cplx> grid_to_fourier(const std::vector<cplx>& samples, const Grid& g) {
    const int n = g.n, half = g.half();
    std::vector<cplx> buf(g.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int a = (i - half + n) % n, b = (j - half + n) % n;
            buf[static_cast<std::size_t>(a) * n + b] = samples[g.index(i, j)];
        }
    dft2(buf, n, true);
    std::vector<cplx> out(g.size());
    const double h2 = g.h * g.h;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int a = (i - half + n) % n, b = (j - half + n) % n;
            out[g.index(i, j)] = h2 * buf[static_cast<std::size_t>(a) * n + b];
        }
    return out;
}

std::vector<cplx> fourier_to_grid(const std::vector<cplx>& hat, const Grid& g) {
    const int n = g.n, half = g.half();
    std::vector<cplx> buf(g.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int a = (i - half + n) % n, b = (j - half + n) % n;
            buf[static_cast<std::size_t>(a) * n + b] = hat[g.index(i, j)];
        }
    dft2(buf, n, false);
    std::vector<cplx> out(g.size());
    const double scale = 1.0 / (static_cast<double>(n) * n * g.h * g.h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int a = (i - half + n) % n, b = (j - half + n) % n;
            out[g.index(i, j)] = scale * buf[static_cast<std::size_t>(a) * n + b];
        }
    return out;
}

std::vector<cplx> linear_convolve(const std::vector<cplx>& f, const std::vector<cplx>& g, const Grid& grid) {
    const int n = grid.n, half = grid.half();
    const int m = fft_good_size(2 * n);
    std::vector<cplx> a(static_cast<std::size_t>(m) * m), b(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int r = (i - half + m) % m, c = (j - half + m) % m;
            a[static_cast<std::size_t>(r) * m + c] = f[grid.index(i, j)];
            b[static_cast<std::size_t>(r) * m + c] = g[grid.index(i, j)];
        }
    dft2(a, m, true);
    dft2(b, m, true);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] *= b[k];
    dft2(a, m, false);
    const double scale = grid.h * grid.h / (static_cast<double>(m) * m);
    std::vector<cplx> out(grid.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int r = (i - half + m) % m, c = (j - half + m) % m;
            out[grid.index(i, j)] = scale * a[static_cast<std::size_t>(r) * m + c];
        }
    return out;
}

}  // namespace bruhatlab
