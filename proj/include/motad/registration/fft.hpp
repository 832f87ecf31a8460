#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace motad::registration {

/// 2D complex DFT of fixed size backed by FFTW. Instances are cheap; plans
/// are cached process-wide and executing a transform is thread-safe.
class Fft2d {
 public:
  Fft2d(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  /// Unnormalized forward transform; data is row-major, width*height values.
  void forward(std::vector<std::complex<double>>& data) const;
  /// Inverse transform scaled by 1/(width*height).
  void inverse(std::vector<std::complex<double>>& data) const;

  struct Plans;

 private:
  int width_;
  int height_;
  std::shared_ptr<const Plans> plans_;
};

}  // namespace motad::registration
