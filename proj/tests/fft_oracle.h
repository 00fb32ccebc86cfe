#pragma once

#include <fftw3.h>

#include <cmath>
#include <span>
#include <vector>

namespace sqdr::test {

// 20 log10 |FFT| of the zero-padded taps at bins 0..n/2.
inline std::vector<double> FftMagnitudeDb(std::span<const double> taps, int n) {
  std::vector<double> in(static_cast<size_t>(n), 0.0);
  std::copy(taps.begin(), taps.end(), in.begin());
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
  fftw_execute(plan);
  std::vector<double> db(static_cast<size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    db[k] = 20.0 * std::log10(std::hypot(out[k][0], out[k][1]));
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  return db;
}

}  // namespace sqdr::test
