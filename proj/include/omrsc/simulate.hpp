#pragma once

#include "omrsc/density.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace omrsc {

struct Dataset {
  std::vector<Image> images;
  double sigma = 0.0;
  // 0 when no noise was added.
  double snr = 0.0;
  std::uint64_t seed = 0;
  int reference_index = 0;
  // Diagnostics only; reconstruction never reads these.
  std::optional<std::vector<Rotation>> hidden_rotations;

  int G() const { return images.empty() ? 0 : static_cast<int>(images.front().rows()); }
  int N() const { return static_cast<int>(images.size()); }
};

// Image 0 uses the identity rotation; image n >= 1 draws from substream n.
Dataset generate(const GaussianMixture& mix, int G, int N, std::uint64_t seed);
inline Dataset generate(const DensityMap& d, int N, std::uint64_t seed) { return generate(d.mixture(), d.grid.G, N, seed); }

Dataset add_noise(const Dataset& clean, double snr, std::uint64_t seed);

// Sum of squared clean pixels over sum of squared noise, dataset-wide.
double empirical_snr(const Dataset& noisy, const Dataset& clean);

// Isotropic Gaussian blur, std in pixels, zero outside the frame.
Image lowpass(const Image& image, double sigma_px);

namespace serial {
Dataset generate(const GaussianMixture& mix, int G, int N, std::uint64_t seed);
}

}  // namespace omrsc
