#include "dmdx/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "dmdx/errors.hpp"

namespace dmdx {

namespace {

struct Buf {
    fftw_complex* p = nullptr;
    size_t n = 0;
    explicit Buf(size_t count) : p(fftw_alloc_complex(count)), n(count) {}
    ~Buf() { fftw_free(p); }
    Buf(const Buf&) = delete;
    Buf& operator=(const Buf&) = delete;
};

std::mutex plan_mu;
std::map<std::tuple<int, int, int>, fftw_plan> plans;

// FFTW_ESTIMATE keeps the algorithm choice fixed, so results do not depend on timing
fftw_plan plan_for(int rows, int cols, int sign) {
    std::lock_guard<std::mutex> lk(plan_mu);
    auto key = std::make_tuple(rows, cols, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    Buf a(static_cast<size_t>(rows) * cols);
    fftw_plan p = fftw_plan_dft_2d(rows, cols, a.p, a.p, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE);
    if (!p) throw ParameterError("fftw could not build a plan");
    plans.emplace(key, p);
    return p;
}

}  // namespace

void centered_dft(std::vector<std::complex<double>>& a, int rows, int cols, int sign) {
    if (a.size() != static_cast<size_t>(rows) * cols) throw ShapeError("dft size mismatch");
    fftw_plan p = plan_for(rows, cols, sign);
    Buf b(a.size());
    const int cr = rows / 2, cc = cols / 2;
    // ifftshift: index (r + cr) mod R goes to r
    for (int r = 0; r < rows; ++r) {
        int sr = (r + cr) % rows;
        for (int c = 0; c < cols; ++c) {
            int sc = (c + cc) % cols;
            const auto& z = a[static_cast<size_t>(sr) * cols + sc];
            b.p[static_cast<size_t>(r) * cols + c][0] = z.real();
            b.p[static_cast<size_t>(r) * cols + c][1] = z.imag();
        }
    }
    fftw_execute_dft(p, b.p, b.p);
    const double s = 1.0 / std::sqrt(static_cast<double>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        int sr = (r - cr + rows) % rows;
        for (int c = 0; c < cols; ++c) {
            int sc = (c - cc + cols) % cols;
            const auto* z = b.p[static_cast<size_t>(sr) * cols + sc];
            a[static_cast<size_t>(r) * cols + c] = {z[0] * s, z[1] * s};
        }
    }
}

}  // namespace dmdx
