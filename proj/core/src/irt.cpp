#include "scaffold/irt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scaffold::irt {

bool is_valid(const IrtParams& params) {
  return std::isfinite(params.k) && std::isfinite(params.mu) && std::isfinite(params.b) &&
         params.k > 0.0 && params.b >= 0.0 && params.b < 1.0;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double forward(const IrtParams& params, double p) {
  return params.b + (1.0 - params.b) * stable_sigmoid(params.k * (p + params.mu));
}

Inversion inverse(const IrtParams& params, double target) {
  if (!(target > 0.0 && target < 1.0)) {
    throw std::invalid_argument("irt::inverse: target must lie in (0, 1)");
  }
  Inversion out;
  if (target <= params.b) {
    out.rate = 1.0;
    out.clamped = true;
    out.unreachable = true;
    return out;
  }
  // (1 - b) / (t - b) - 1 == (1 - t) / (t - b)
  const double raw = -params.mu - std::log((1.0 - target) / (target - params.b)) / params.k;
  out.rate = std::clamp(raw, 0.0, 1.0);
  out.clamped = raw < 0.0 || raw > 1.0;
  return out;
}

ParamGradient jacobian(const IrtParams& params, double p) {
  const double shift = p + params.mu;
  const double s = stable_sigmoid(params.k * shift);
  const double slope = (1.0 - params.b) * s * (1.0 - s);
  return {slope * shift, slope * params.k, 1.0 - s};
}

}  // namespace scaffold::irt
