#pragma once

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace tdcf::detail {

// FFTW planning is not thread-safe; execution with new-array functions is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Forward complex DFT of fixed length, reusable across calls:
/// X_k = sum_n x_n e^{-2 pi i k n / N}.
class ForwardFft {
 public:
  explicit ForwardFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_complex(n_);
    out_ = fftw_alloc_complex(n_);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n_), in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ForwardFft(const ForwardFft&) = delete;
  ForwardFft& operator=(const ForwardFft&) = delete;
  ~ForwardFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }

  std::size_t size() const { return n_; }
  std::complex<double>* input() { return reinterpret_cast<std::complex<double>*>(in_); }
  const std::complex<double>* output() const { return reinterpret_cast<const std::complex<double>*>(out_); }
  void execute() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace tdcf::detail
