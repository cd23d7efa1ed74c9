#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gexp/error.hpp"

namespace gexp {

/// Volatility interval [sigma_low, sigma_high] of a G-normal law.
struct VolatilityBand {
  double sigma_low = 0.0;
  double sigma_high = 1.0;

  double variance_low() const noexcept { return sigma_low * sigma_low; }
  double variance_high() const noexcept { return sigma_high * sigma_high; }
  bool degenerate_low() const noexcept { return sigma_low == 0.0; }
  bool classical() const noexcept { return sigma_low == sigma_high; }

  void validate() const {
    if (!(std::isfinite(sigma_low) && std::isfinite(sigma_high)) || sigma_low < 0.0 ||
        sigma_low > sigma_high || sigma_high <= 0.0)
      throw PreconditionError("invalid volatility band: need 0 <= sigma_low <= sigma_high, "
                              "sigma_high > 0 (got [" +
                              std::to_string(sigma_low) + ", " + std::to_string(sigma_high) + "])");
  }
};

/// G(a) = (sigma_high^2 a^+ - sigma_low^2 a^-) / 2.
inline double g_function(double alpha, const VolatilityBand& band) noexcept {
  return 0.5 * (band.variance_high() * std::max(alpha, 0.0) -
                band.variance_low() * std::max(-alpha, 0.0));
}

}  // namespace gexp
