// SPDX-License-Identifier: Apache-2.0
#include "msense/core/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace msense::fft {

namespace {

// One cached plan per (size, direction). FFTW_ESTIMATE keeps planning
// deterministic; buffers are owned by the cache entry and reused.
struct PlanEntry {
    fftw_plan plan = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    ~PlanEntry() {
        if (plan) fftw_destroy_plan(plan);
        if (in) fftw_free(in);
        if (out) fftw_free(out);
    }
};

cvec run(const cvec& x, int direction) {
    if (x.empty()) throw std::invalid_argument("fft: empty input");
    static std::mutex mutex;
    static std::map<std::pair<std::size_t, int>, PlanEntry> cache;

    std::lock_guard<std::mutex> lock(mutex);
    auto& entry = cache[{x.size(), direction}];
    if (!entry.plan) {
        const int n = static_cast<int>(x.size());
        entry.in = fftw_alloc_complex(x.size());
        entry.out = fftw_alloc_complex(x.size());
        entry.plan = fftw_plan_dft_1d(n, entry.in, entry.out, direction, FFTW_ESTIMATE);
        if (!entry.plan) throw std::runtime_error("fft: planning failed");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        entry.in[i][0] = x[i].real();
        entry.in[i][1] = x[i].imag();
    }
    fftw_execute(entry.plan);
    cvec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = {entry.out[i][0], entry.out[i][1]};
    }
    return y;
}

} // namespace

cvec forward(const cvec& x) { return run(x, FFTW_FORWARD); }

cvec inverse(const cvec& x) { return run(x, FFTW_BACKWARD); }

cvec fftshift(const cvec& x) {
    const std::size_t n = x.size();
    const std::size_t half = n / 2;
    cvec y(n);
    // natural index k maps to centered index (k + n - floor(n/2)) mod n... the
    // standard rotation: y[i] = x[(i + (n - half)) % n] places DC at floor(n/2).
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = x[(i + n - half) % n];
    }
    return y;
}

cvec ifftshift(const cvec& x) {
    const std::size_t n = x.size();
    const std::size_t half = n / 2;
    cvec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = x[(i + half) % n];
    }
    return y;
}

std::vector<double> centered_bin_frequencies(std::size_t n, double sample_rate) {
    std::vector<double> f(n);
    const double step = sample_rate / static_cast<double>(n);
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    for (std::size_t i = 0; i < n; ++i) {
        f[i] = static_cast<double>(static_cast<std::ptrdiff_t>(i) - half) * step;
    }
    return f;
}

} // namespace msense::fft
