#include "motad/registration/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <utility>

#include "motad/errors.hpp"

namespace motad::registration {

struct Fft2d::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  ~Plans() {
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
  }
};

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct AlignedBuffer {
  fftw_complex* ptr;
  explicit AlignedBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~AlignedBuffer() { fftw_free(ptr); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
};

std::shared_ptr<const Fft2d::Plans> plans_for(int w, int h) {
  std::lock_guard lock(planner_mutex());
  static std::map<std::pair<int, int>, std::shared_ptr<const Fft2d::Plans>> cache;
  auto it = cache.find({w, h});
  if (it != cache.end()) return it->second;
  const auto n = static_cast<std::size_t>(w) * h;
  AlignedBuffer in(n);
  AlignedBuffer out(n);
  auto plans = std::make_shared<Fft2d::Plans>();
  plans->fwd = fftw_plan_dft_2d(h, w, in.ptr, out.ptr, FFTW_FORWARD, FFTW_ESTIMATE);
  plans->inv = fftw_plan_dft_2d(h, w, in.ptr, out.ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!plans->fwd || !plans->inv) throw InvalidArgument("FFTW planning failed");
  cache.emplace(std::pair{w, h}, plans);
  return plans;
}

void execute(fftw_plan plan, std::vector<std::complex<double>>& data) {
  AlignedBuffer in(data.size());
  AlignedBuffer out(data.size());
  std::memcpy(static_cast<void*>(in.ptr), static_cast<const void*>(data.data()), data.size() * sizeof(fftw_complex));
  fftw_execute_dft(plan, in.ptr, out.ptr);
  std::memcpy(static_cast<void*>(data.data()), static_cast<const void*>(out.ptr), data.size() * sizeof(fftw_complex));
}

}  // namespace

Fft2d::Fft2d(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("FFT size must be positive");
  plans_ = plans_for(width, height);
}

void Fft2d::forward(std::vector<std::complex<double>>& data) const {
  if (data.size() != static_cast<std::size_t>(width_) * height_) {
    throw InvalidArgument("FFT buffer size mismatch");
  }
  execute(plans_->fwd, data);
}

void Fft2d::inverse(std::vector<std::complex<double>>& data) const {
  if (data.size() != static_cast<std::size_t>(width_) * height_) {
    throw InvalidArgument("FFT buffer size mismatch");
  }
  execute(plans_->inv, data);
  const double s = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= s;
}

}  // namespace motad::registration
