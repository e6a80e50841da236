#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>

#include <fftw3.h>

namespace skg {

namespace detail {
// FFTW's planner is not re-entrant; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

enum class FftDirection { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

/// Unnormalized complex DFT of a fixed size. Plans use FFTW_ESTIMATE so the
/// chosen algorithm (and therefore every output bit) is reproducible run to run.
class FftPlan {
public:
    FftPlan(std::size_t size, FftDirection dir) : size_(size) {
        if (size == 0) throw std::invalid_argument("FftPlan: size must be positive");
        std::lock_guard lock(detail::fftw_planner_mutex());
        auto* in = fftw_alloc_complex(size);
        auto* out = fftw_alloc_complex(size);
        plan_ = fftw_plan_dft_1d(static_cast<int>(size), in, out, static_cast<int>(dir),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (!plan_) throw std::runtime_error("FftPlan: planner failed");
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    FftPlan(FftPlan&& other) noexcept
        : size_(other.size_), plan_(std::exchange(other.plan_, nullptr)) {}
    FftPlan& operator=(FftPlan&& other) noexcept {
        if (this != &other) {
            reset();
            size_ = other.size_;
            plan_ = std::exchange(other.plan_, nullptr);
        }
        return *this;
    }
    ~FftPlan() { reset(); }

    std::size_t size() const { return size_; }

    /// Out-of-place transform; in and out must not alias and must both hold size() values.
    void execute(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const {
        if (in.size() != size_ || out.size() != size_) throw std::invalid_argument("FftPlan: size mismatch");
        // fftw_complex is layout-compatible with std::complex<double>.
        fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                         reinterpret_cast<fftw_complex*>(out.data()));
    }

private:
    void reset() {
        if (plan_) {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
            plan_ = nullptr;
        }
    }

    std::size_t size_;
    fftw_plan plan_ = nullptr;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace skg
