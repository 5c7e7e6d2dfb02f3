#pragma once

#include "hazebridge/regularizers.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// 10 * log10(1 / MSE) for images in [0,1]. An exact match has no finite
// value; it is reported as the 99 dB sentinel and flagged through
// exact_match when the caller wants to know.
real psnr(const Tensor& a, const Tensor& b, bool* exact_match = nullptr);

constexpr real kPsnrSentinel = real(99);

// Mean SSIM as a plain number (same windowed formula as the training loss).
real ssim_metric(const Tensor& a, const Tensor& b);

// Squared energy statistic between two point sets [n,d] and [m,d]:
// 2 E||X-Y|| - E||X-X'|| - E||Y-Y'||. Nonnegative, zero iff equal laws.
real energy_distance(const Tensor& xs, const Tensor& ys);

}  // namespace hazebridge
