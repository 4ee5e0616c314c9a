#pragma once

#include "bruhatlab/common.hpp"

#include <vector>

namespace bruhatlab {

// Angular frequency of centered index i on the periodic box of grid g.
double grid_frequency(const Grid& g, int i);

// hat(xi_k) = h^2 sum_p f(p) exp(-i xi_k . p), returned on the centered frequency grid.
std::vector<cplx> grid_to_fourier(const std::vector<cplx>& samples, const Grid& g);
// Inverse of grid_to_fourier.
std::vector<cplx> fourier_to_grid(const std::vector<cplx>& hat, const Grid& g);

// Linear (zero-padded) convolution h^2 sum_q f(p - q) g(q), truncated to the grid.
std::vector<cplx> linear_convolve(const std::vector<cplx>& f, const std::vector<cplx>& g, const Grid& grid);

// Smallest m >= n whose prime factors are all in {2, 3, 5, 7}.
int fft_good_size(int n);

// Raw unnormalized 2-D DFT of an n x n array in FFTW index order.
void dft2(std::vector<cplx>& data, int n, bool forward);

}  // namespace bruhatlab
