// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "circat/memory.hpp"

namespace circat {

template <class T>
using ComplexVector = CountedVector<std::complex<T>>;

enum class FftStrategy { kRadix2, kBluestein };

// Discrete Fourier transform of a fixed length.
//
// Conventions: forward is unnormalised, X_k = sum_n x_n exp(-2 pi i k n / L);
// inverse carries the 1/L factor, so inverse(forward(x)) == x.
// Lengths that are powers of two run an iterative radix-2 transform; any
// other length uses Bluestein's chirp-z re-expression as a power-of-two
// circular convolution of length >= 2L - 1.
//
// Plans are immutable after construction and may be shared across threads.
template <class T>
class FftPlan {
 public:
  explicit FftPlan(std::size_t length);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  std::size_t length() const { return length_; }
  FftStrategy strategy() const { return strategy_; }

  ComplexVector<T> forward(std::span<const std::complex<T>> x) const;
  ComplexVector<T> inverse(std::span<const std::complex<T>> x) const;

  // Same as forward/inverse but write into `out` (length L, distinct from x).
  void forward_into(std::span<const std::complex<T>> x, std::span<std::complex<T>> out) const;
  void inverse_into(std::span<const std::complex<T>> x, std::span<std::complex<T>> out) const;

 private:
  struct Bluestein;

  void radix2(std::span<std::complex<T>> data, bool inverse) const;
  void transform(std::span<const std::complex<T>> x, std::span<std::complex<T>> out,
                 bool inverse) const;

  std::size_t length_;
  FftStrategy strategy_;
  CountedVector<std::uint32_t> bitrev_;
  ComplexVector<T> twiddles_;  // exp(-2 pi i k / L), k < L/2
  std::unique_ptr<Bluestein> bluestein_;
};

extern template class FftPlan<double>;
extern template class FftPlan<float>;

// Complex multiplications performed by transforms on this thread since the
// last reset. Butterflies count one each; Bluestein adds its chirp products.
std::uint64_t fft_multiply_count();
void reset_fft_multiply_count();

// Naive O(L^2) DFT used as an oracle by the verification suite.
ComplexVector<double> naive_dft(std::span<const std::complex<double>> x, bool inverse = false);

// c_i = sum_j z[(i - j) mod N] v_j, via IFFT(FFT(z) . FFT(v)).
// Throws kInternal when the discarded imaginary residue is not negligible.
template <class T>
void circular_convolve(std::span<const T> z, std::span<const T> v, std::span<T> out);
// c_i = sum_j z[(j - i) mod N] v_j, via IFFT(conj(FFT(z)) . FFT(v)).
template <class T>
void circular_correlate(std::span<const T> z, std::span<const T> v, std::span<T> out);

CountedVector<double> circular_convolve(std::span<const double> z, std::span<const double> v);
CountedVector<double> circular_correlate(std::span<const double> z, std::span<const double> v);

// Imaginary residue allowed after a real-to-real circular product, relative
// to max(1, |z|_1 * max|v|).
template <class T>
constexpr T kImagResidueTol = sizeof(T) == sizeof(double) ? T(1e-10) : T(1e-3);

}  // namespace circat
