#pragma once

#include <cstdint>
#include <span>

// Data-parallel inner loops. Every kernel has an OpenMP version (namespace
// pflow::kernels) and a straightforward serial version (pflow::kernels::ref)
// used by the tests as an oracle and by bench_kernels as the baseline.
//
// Tensors are (y, x, c) row-major. 3x3 convolution weights are laid out as
// [ky][kx][cin][cout] so the innermost loop runs over output channels.
// Padding is zero; `dilation` spaces the taps.
//
// The OpenMP versions partition work so each output element is written by
// exactly one thread with a fixed summation order: results are bitwise
// identical for any thread count.

namespace pflow::kernels {

struct ConvShape {
  int h = 0;
  int w = 0;
  int cin = 0;
  int cout = 0;
  int dilation = 1;
};

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> out);

/// grad_in = conv^T(grad_out); overwrites grad_in.
template <typename T>
void conv3x3_backward_input(const ConvShape& s, std::span<const T> grad_out,
                            std::span<const T> weights, std::span<T> grad_in);

/// Accumulates (+=) weight and bias gradients.
template <typename T>
void conv3x3_backward_params(const ConvShape& s, std::span<const T> in,
                             std::span<const T> grad_out, std::span<T> grad_w,
                             std::span<T> grad_b);

/// out[i, :] = in[sources[i], :] for rows of `channels` values.
void gather_rows(std::span<const float> in, int channels, std::span<const std::int32_t> sources,
                 std::span<float> out);

/// Mean over rows of the Euclidean norm of each row (rows of `channels`).
double mean_row_norm(std::span<const float> values, int channels);

namespace ref {

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> out);
template <typename T>
void conv3x3_backward_input(const ConvShape& s, std::span<const T> grad_out,
                            std::span<const T> weights, std::span<T> grad_in);
template <typename T>
void conv3x3_backward_params(const ConvShape& s, std::span<const T> in,
                             std::span<const T> grad_out, std::span<T> grad_w,
                             std::span<T> grad_b);
void gather_rows(std::span<const float> in, int channels, std::span<const std::int32_t> sources,
                 std::span<float> out);
double mean_row_norm(std::span<const float> values, int channels);

}  // namespace ref

/// Honors PREVIEWFLOW_DETERMINISTIC=1 by pinning OpenMP to one thread;
/// otherwise applies `jobs` when positive. Returns the thread count in use.
int configure_threads(int jobs = 0);
bool deterministic_mode();

}  // namespace pflow::kernels
