// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "circat/error.hpp"

namespace circat {
namespace {

thread_local std::uint64_t g_multiplies = 0;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void require_length(std::size_t got, std::size_t want, const char* what) {
  require(got == want, ErrorCode::kShapeMismatch,
          std::string(what) + ": length " + std::to_string(got) + " does not match plan length " +
              std::to_string(want));
}

}  // namespace

std::uint64_t fft_multiply_count() { return g_multiplies; }
void reset_fft_multiply_count() { g_multiplies = 0; }

template <class T>
struct FftPlan<T>::Bluestein {
  std::size_t padded;
  ComplexVector<T> chirp;           // exp(-i pi n^2 / L), n < L
  ComplexVector<T> kernel_spectrum;  // FFT of conj chirp, wrapped to length `padded`
  FftPlan<T> inner;

  Bluestein(std::size_t length)
      : padded(next_power_of_two(2 * length - 1)), chirp(length), inner(padded) {
    const long double two_l = 2.0L * static_cast<long double>(length);
    for (std::size_t n = 0; n < length; ++n) {
      // n^2 mod 2L keeps the angle argument small for large n.
      const std::uint64_t sq = (static_cast<std::uint64_t>(n) * n) %
                               static_cast<std::uint64_t>(2 * length);
      const long double angle = -std::numbers::pi_v<long double> * 2.0L *
                                static_cast<long double>(sq) / two_l;
      chirp[n] = std::complex<T>(static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle)));
    }
    ComplexVector<T> b(padded, std::complex<T>(0, 0));
    b[0] = std::conj(chirp[0]);
    for (std::size_t n = 1; n < length; ++n) {
      b[n] = std::conj(chirp[n]);
      b[padded - n] = std::conj(chirp[n]);
    }
    kernel_spectrum = inner.forward(b);
  }
};

template <class T>
FftPlan<T>::FftPlan(std::size_t length) : length_(length) {
  require(length >= 1, ErrorCode::kInvalidArgument, "FftPlan: length must be >= 1");
  if (!is_power_of_two(length)) {
    strategy_ = FftStrategy::kBluestein;
    bluestein_ = std::make_unique<Bluestein>(length);
    return;
  }
  strategy_ = FftStrategy::kRadix2;
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < length) ++bits;
  bitrev_.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    bitrev_[i] = static_cast<std::uint32_t>(r);
  }
  twiddles_.resize(length / 2);
  for (std::size_t k = 0; k < length / 2; ++k) {
    const long double angle = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k) /
                              static_cast<long double>(length);
    twiddles_[k] = std::complex<T>(static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle)));
  }
}

template <class T>
FftPlan<T>::~FftPlan() = default;
template <class T>
FftPlan<T>::FftPlan(FftPlan&&) noexcept = default;
template <class T>
FftPlan<T>& FftPlan<T>::operator=(FftPlan&&) noexcept = default;

template <class T>
void FftPlan<T>::radix2(std::span<std::complex<T>> data, bool inverse) const {
  const std::size_t n = length_;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = bitrev_[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t half = 1; half < n; half <<= 1) {
    const std::size_t stride = n / (2 * half);
    for (std::size_t start = 0; start < n; start += 2 * half) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<T> w = twiddles_[k * stride];
        if (inverse) w = std::conj(w);
        const std::complex<T> u = data[start + k];
        const std::complex<T> t = w * data[start + k + half];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
    g_multiplies += n / 2;
  }
}

template <class T>
void FftPlan<T>::transform(std::span<const std::complex<T>> x, std::span<std::complex<T>> out,
                           bool inverse) const {
  if (strategy_ == FftStrategy::kRadix2) {
    std::copy(x.begin(), x.end(), out.begin());
    radix2(out, inverse);
  } else {
    const Bluestein& bs = *bluestein_;
    const std::size_t l = length_;
    ComplexVector<T> a(bs.padded, std::complex<T>(0, 0));
    // Inverse via conj(forward(conj(x))).
    for (std::size_t n = 0; n < l; ++n) a[n] = (inverse ? std::conj(x[n]) : x[n]) * bs.chirp[n];
    bs.inner.radix2(a, false);
    for (std::size_t k = 0; k < bs.padded; ++k) a[k] *= bs.kernel_spectrum[k];
    bs.inner.radix2(a, true);
    const T inv_padded = T(1) / static_cast<T>(bs.padded);
    for (std::size_t k = 0; k < l; ++k) {
      const std::complex<T> v = a[k] * inv_padded * bs.chirp[k];
      out[k] = inverse ? std::conj(v) : v;
    }
    g_multiplies += 2 * l + bs.padded;
  }
  if (inverse) {
    const T inv = T(1) / static_cast<T>(length_);
    for (auto& v : out) v *= inv;
  }
}

template <class T>
void FftPlan<T>::forward_into(std::span<const std::complex<T>> x,
                              std::span<std::complex<T>> out) const {
  require_length(x.size(), length_, "fft_forward");
  require_length(out.size(), length_, "fft_forward");
  transform(x, out, false);
}

template <class T>
void FftPlan<T>::inverse_into(std::span<const std::complex<T>> x,
                              std::span<std::complex<T>> out) const {
  require_length(x.size(), length_, "fft_inverse");
  require_length(out.size(), length_, "fft_inverse");
  transform(x, out, true);
}

template <class T>
ComplexVector<T> FftPlan<T>::forward(std::span<const std::complex<T>> x) const {
  ComplexVector<T> out(length_);
  forward_into(x, out);
  return out;
}

template <class T>
ComplexVector<T> FftPlan<T>::inverse(std::span<const std::complex<T>> x) const {
  ComplexVector<T> out(length_);
  inverse_into(x, out);
  return out;
}

template class FftPlan<double>;
template class FftPlan<float>;

ComplexVector<double> naive_dft(std::span<const std::complex<double>> x, bool inverse) {
  const std::size_t l = x.size();
  ComplexVector<double> out(l);
  const long double sign = inverse ? 1.0L : -1.0L;
  for (std::size_t k = 0; k < l; ++k) {
    std::complex<long double> acc(0, 0);
    for (std::size_t n = 0; n < l; ++n) {
      const std::uint64_t kn = (static_cast<std::uint64_t>(k) * n) % l;
      const long double angle = sign * 2.0L * std::numbers::pi_v<long double> *
                                static_cast<long double>(kn) / static_cast<long double>(l);
      acc += std::complex<long double>(x[n].real(), x[n].imag()) *
             std::complex<long double>(std::cos(angle), std::sin(angle));
    }
    if (inverse) acc /= static_cast<long double>(l);
    out[k] = std::complex<double>(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
  }
  return out;
}

namespace {

template <class T>
void circular_product(std::span<const T> z, std::span<const T> v, std::span<T> out,
                      bool correlate, const char* what) {
  const std::size_t n = z.size();
  require(v.size() == n && out.size() == n, ErrorCode::kShapeMismatch,
          std::string(what) + ": lengths differ");
  require(n >= 1, ErrorCode::kShapeMismatch, std::string(what) + ": empty input");
  const FftPlan<T> plan(n);
  ComplexVector<T> zc(z.begin(), z.end()), vc(v.begin(), v.end());
  ComplexVector<T> zf = plan.forward(zc), vf = plan.forward(vc);
  for (std::size_t k = 0; k < n; ++k) vf[k] *= correlate ? std::conj(zf[k]) : zf[k];
  g_multiplies += n;
  const ComplexVector<T> y = plan.inverse(vf);
  T zsum = 0, vmax = 0, residue = 0;
  for (std::size_t i = 0; i < n; ++i) {
    zsum += std::abs(z[i]);
    vmax = std::max(vmax, std::abs(v[i]));
    residue = std::max(residue, std::abs(y[i].imag()));
    out[i] = y[i].real();
  }
  require(residue <= kImagResidueTol<T> * std::max(T(1), zsum * vmax), ErrorCode::kInternal,
          std::string(what) + ": imaginary residue too large");
}

}  // namespace

template <class T>
void circular_convolve(std::span<const T> z, std::span<const T> v, std::span<T> out) {
  circular_product(z, v, out, false, "circular_convolve");
}

template <class T>
void circular_correlate(std::span<const T> z, std::span<const T> v, std::span<T> out) {
  circular_product(z, v, out, true, "circular_correlate");
}

template void circular_convolve<double>(std::span<const double>, std::span<const double>,
                                        std::span<double>);
template void circular_convolve<float>(std::span<const float>, std::span<const float>,
                                       std::span<float>);
template void circular_correlate<double>(std::span<const double>, std::span<const double>,
                                         std::span<double>);
template void circular_correlate<float>(std::span<const float>, std::span<const float>,
                                        std::span<float>);

CountedVector<double> circular_convolve(std::span<const double> z, std::span<const double> v) {
  CountedVector<double> out(z.size());
  circular_convolve<double>(z, v, out);
  return out;
}

CountedVector<double> circular_correlate(std::span<const double> z, std::span<const double> v) {
  CountedVector<double> out(z.size());
  circular_correlate<double>(z, v, out);
  return out;
}

}  // namespace circat
