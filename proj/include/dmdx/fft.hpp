#pragma once
#include <complex>
#include <vector>

namespace dmdx {

// Unitary centred 2-D DFT, in place:
//   out[k] = 1/sqrt(R*C) * sum_n in[n] exp(sign * 2 pi i (n - n/2)(k - k/2) / N)
// per axis, with the centre index at N/2 (floor). sign = -1 is the forward lens.
// Backed by FFTW; plans are cached and shared between threads.
void centered_dft(std::vector<std::complex<double>>& a, int rows, int cols, int sign);

}  // namespace dmdx
