// Times the OpenMP kernels against the serial reference versions.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "previewflow/kernels.hpp"
#include "previewflow/rng.hpp"

using namespace pflow;
namespace k = pflow::kernels;

namespace {

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed, streams::kTest);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

void report(const std::string& name, double omp_ms, double ref_ms) {
  std::printf("%-28s omp %9.3f ms   ref %9.3f ms   x%.2f\n", name.c_str(), omp_ms, ref_ms,
              ref_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int size = argc > 1 ? std::stoi(argv[1]) : 64;
  const int reps = argc > 2 ? std::stoi(argv[2]) : 20;
  k::configure_threads(0);
  std::printf("threads %d, grid %dx%d, %d reps\n", omp_get_max_threads(), size, size, reps);

  const k::ConvShape s{size, size, 24, 24, 2};
  const std::size_t n_in = static_cast<std::size_t>(s.h) * s.w * s.cin;
  const std::size_t n_out = static_cast<std::size_t>(s.h) * s.w * s.cout;
  const auto in = random_vector(n_in, 1);
  const auto w = random_vector(9 * s.cin * s.cout, 2);
  const auto b = random_vector(s.cout, 3);
  const auto g = random_vector(n_out, 4);
  std::vector<float> out(n_out);
  std::vector<float> gin(n_in);
  std::vector<float> gw(w.size());
  std::vector<float> gb(b.size());

  report("conv3x3_forward",
         time_ms([&] { k::conv3x3_forward<float>(s, in, w, b, out); }, reps),
         time_ms([&] { k::ref::conv3x3_forward<float>(s, in, w, b, out); }, reps));
  report("conv3x3_backward_input",
         time_ms([&] { k::conv3x3_backward_input<float>(s, g, w, gin); }, reps),
         time_ms([&] { k::ref::conv3x3_backward_input<float>(s, g, w, gin); }, reps));
  report("conv3x3_backward_params",
         time_ms([&] { k::conv3x3_backward_params<float>(s, in, g, gw, gb); }, reps),
         time_ms([&] { k::ref::conv3x3_backward_params<float>(s, in, g, gw, gb); }, reps));

  const int rows = size * size;
  std::vector<std::int32_t> sources(rows / 4);
  for (std::size_t i = 0; i < sources.size(); ++i) sources[i] = static_cast<std::int32_t>(i * 4);
  std::vector<float> gathered(sources.size() * 24);
  report("gather_rows",
         time_ms([&] { k::gather_rows(in, 24, sources, gathered); }, reps * 10),
         time_ms([&] { k::ref::gather_rows(in, 24, sources, gathered); }, reps * 10));
  double sink = 0.0;
  report("mean_row_norm",
         time_ms([&] { sink += k::mean_row_norm(in, 24); }, reps * 10),
         time_ms([&] { sink += k::ref::mean_row_norm(in, 24); }, reps * 10));
  std::printf("(checksum %.3f)\n", sink);
  return 0;
}
