#include "previewflow/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <vector>

namespace pflow::kernels {

namespace {

inline std::size_t px(const ConvShape& s, int y, int x) {
  return static_cast<std::size_t>(y) * s.w + x;
}

}  // namespace

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> out) {
  const int cin = s.cin;
  const int cout = s.cout;
  const int dil = s.dilation;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s.h; ++y) {
    std::vector<T> acc(cout);
    for (int x = 0; x < s.w; ++x) {
      for (int co = 0; co < cout; ++co) acc[co] = bias[co];
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + (ky - 1) * dil;
        if (sy < 0 || sy >= s.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + (kx - 1) * dil;
          if (sx < 0 || sx >= s.w) continue;
          const T* src = in.data() + px(s, sy, sx) * cin;
          const T* wt = weights.data() + static_cast<std::size_t>(ky * 3 + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const T v = src[ci];
            const T* wrow = wt + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) acc[co] += v * wrow[co];
          }
        }
      }
      std::memcpy(out.data() + px(s, y, x) * cout, acc.data(), sizeof(T) * cout);
    }
  }
}

template <typename T>
void conv3x3_backward_input(const ConvShape& s, std::span<const T> grad_out,
                            std::span<const T> weights, std::span<T> grad_in) {
  const int cin = s.cin;
  const int cout = s.cout;
  const int dil = s.dilation;
  // Input p feeds output q = p - (k - 1) * dil through tap k.
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      T* dst = grad_in.data() + px(s, y, x) * cin;
      for (int ci = 0; ci < cin; ++ci) dst[ci] = T(0);
      for (int ky = 0; ky < 3; ++ky) {
        const int qy = y - (ky - 1) * dil;
        if (qy < 0 || qy >= s.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int qx = x - (kx - 1) * dil;
          if (qx < 0 || qx >= s.w) continue;
          const T* g = grad_out.data() + px(s, qy, qx) * cout;
          const T* wt = weights.data() + static_cast<std::size_t>(ky * 3 + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const T* wrow = wt + static_cast<std::size_t>(ci) * cout;
            T sum = T(0);
            for (int co = 0; co < cout; ++co) sum += wrow[co] * g[co];
            dst[ci] += sum;
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward_params(const ConvShape& s, std::span<const T> in,
                             std::span<const T> grad_out, std::span<T> grad_w,
                             std::span<T> grad_b) {
  const int cin = s.cin;
  const int cout = s.cout;
  const int dil = s.dilation;
  // One tap per task: each thread owns a disjoint slice of grad_w.
#pragma omp parallel for schedule(static)
  for (int tap = 0; tap < 9; ++tap) {
    const int ky = tap / 3;
    const int kx = tap % 3;
    T* gw = grad_w.data() + static_cast<std::size_t>(tap) * cin * cout;
    for (int y = 0; y < s.h; ++y) {
      const int sy = y + (ky - 1) * dil;
      if (sy < 0 || sy >= s.h) continue;
      for (int x = 0; x < s.w; ++x) {
        const int sx = x + (kx - 1) * dil;
        if (sx < 0 || sx >= s.w) continue;
        const T* src = in.data() + px(s, sy, sx) * cin;
        const T* g = grad_out.data() + px(s, y, x) * cout;
        for (int ci = 0; ci < cin; ++ci) {
          const T v = src[ci];
          T* row = gw + static_cast<std::size_t>(ci) * cout;
          for (int co = 0; co < cout; ++co) row[co] += v * g[co];
        }
      }
    }
  }
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      const T* g = grad_out.data() + px(s, y, x) * cout;
      for (int co = 0; co < cout; ++co) grad_b[co] += g[co];
    }
  }
}

void gather_rows(std::span<const float> in, int channels, std::span<const std::int32_t> sources,
                 std::span<float> out) {
  const auto n = static_cast<std::ptrdiff_t>(sources.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * channels, in.data() + static_cast<std::size_t>(sources[i]) * channels,
                sizeof(float) * channels);
  }
}

double mean_row_norm(std::span<const float> values, int channels) {
  const auto rows = static_cast<std::ptrdiff_t>(values.size() / channels);
  if (rows == 0) return 0.0;
  std::vector<double> norms(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double v = values[r * channels + c];
      acc += v * v;
    }
    norms[r] = std::sqrt(acc);
  }
  // Sequential reduction keeps the sum independent of the thread count.
  double total = 0.0;
  for (double n : norms) total += n;
  return total / static_cast<double>(rows);
}

namespace ref {

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weights,
                     std::span<const T> bias, std::span<T> out) {
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int co = 0; co < s.cout; ++co) {
        T acc = bias[co];
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int sy = y + (ky - 1) * s.dilation;
            const int sx = x + (kx - 1) * s.dilation;
            if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
            for (int ci = 0; ci < s.cin; ++ci) {
              acc += in[px(s, sy, sx) * s.cin + ci] *
                     weights[((ky * 3 + kx) * s.cin + ci) * s.cout + co];
            }
          }
        }
        out[px(s, y, x) * s.cout + co] = acc;
      }
    }
  }
}

template <typename T>
void conv3x3_backward_input(const ConvShape& s, std::span<const T> grad_out,
                            std::span<const T> weights, std::span<T> grad_in) {
  // Scatter form: the transpose of the forward loop.
  for (auto& v : grad_in) v = T(0);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int sy = y + (ky - 1) * s.dilation;
          const int sx = x + (kx - 1) * s.dilation;
          if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
          for (int ci = 0; ci < s.cin; ++ci) {
            for (int co = 0; co < s.cout; ++co) {
              grad_in[px(s, sy, sx) * s.cin + ci] +=
                  weights[((ky * 3 + kx) * s.cin + ci) * s.cout + co] *
                  grad_out[px(s, y, x) * s.cout + co];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward_params(const ConvShape& s, std::span<const T> in,
                             std::span<const T> grad_out, std::span<T> grad_w,
                             std::span<T> grad_b) {
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int co = 0; co < s.cout; ++co) {
        const T g = grad_out[px(s, y, x) * s.cout + co];
        grad_b[co] += g;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int sy = y + (ky - 1) * s.dilation;
            const int sx = x + (kx - 1) * s.dilation;
            if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
            for (int ci = 0; ci < s.cin; ++ci) {
              grad_w[((ky * 3 + kx) * s.cin + ci) * s.cout + co] += in[px(s, sy, sx) * s.cin + ci] * g;
            }
          }
        }
      }
    }
  }
}

void gather_rows(std::span<const float> in, int channels, std::span<const std::int32_t> sources,
                 std::span<float> out) {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (int c = 0; c < channels; ++c) {
      out[i * channels + c] = in[static_cast<std::size_t>(sources[i]) * channels + c];
    }
  }
}

double mean_row_norm(std::span<const float> values, int channels) {
  const std::size_t rows = values.size() / channels;
  if (rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      acc += static_cast<double>(values[r * channels + c]) * values[r * channels + c];
    }
    total += std::sqrt(acc);
  }
  return total / static_cast<double>(rows);
}

}  // namespace ref

bool deterministic_mode() {
  const char* env = std::getenv("PREVIEWFLOW_DETERMINISTIC");
  return env != nullptr && std::strcmp(env, "1") == 0;
}

int configure_threads(int jobs) {
  if (deterministic_mode()) {
    omp_set_num_threads(1);
  } else if (jobs > 0) {
    omp_set_num_threads(jobs);
  }
  return omp_get_max_threads();
}

#define PFLOW_INSTANTIATE(T)                                                                      \
  template void conv3x3_forward<T>(const ConvShape&, std::span<const T>, std::span<const T>,      \
                                   std::span<const T>, std::span<T>);                             \
  template void conv3x3_backward_input<T>(const ConvShape&, std::span<const T>,                   \
                                          std::span<const T>, std::span<T>);                      \
  template void conv3x3_backward_params<T>(const ConvShape&, std::span<const T>,                  \
                                           std::span<const T>, std::span<T>, std::span<T>);       \
  template void ref::conv3x3_forward<T>(const ConvShape&, std::span<const T>, std::span<const T>, \
                                        std::span<const T>, std::span<T>);                        \
  template void ref::conv3x3_backward_input<T>(const ConvShape&, std::span<const T>,              \
                                               std::span<const T>, std::span<T>);                 \
  template void ref::conv3x3_backward_params<T>(const ConvShape&, std::span<const T>,             \
                                                std::span<const T>, std::span<T>, std::span<T>);

PFLOW_INSTANTIATE(float)
PFLOW_INSTANTIATE(double)

#undef PFLOW_INSTANTIATE

}  // namespace pflow::kernels
