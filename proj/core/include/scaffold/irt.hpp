#pragma once

// Three-parameter logistic curve mapping a hinting rate to expected accuracy:
//
//   f(p) = b + (1 - b) / (1 + exp(-k (p + mu)))
//
// k is the discrimination slope, mu the shifted capability and b the guessing
// floor. The curve is strictly increasing in p with range (b, 1).

namespace scaffold::irt {

struct IrtParams {
  double k = 10.0;
  double mu = -0.5;
  double b = 0.0;
};

/// True when k > 0, 0 <= b < 1 and every field is finite.
bool is_valid(const IrtParams& params);

/// Logistic function, evaluated without overflow for any finite x.
double stable_sigmoid(double x);

/// Accuracy predicted at hinting rate p. p outside [0, 1] is accepted so the
/// fitter can probe the curve; callers in the controller always pass p in [0, 1].
double forward(const IrtParams& params, double p);

struct Inversion {
  double rate = 1.0;
  // The unclamped solution fell outside [0, 1].
  bool clamped = false;
  // target <= b: the floor already exceeds the demand, rate forced to 1.
  bool unreachable = false;
};

/// Hinting rate at which the curve reaches `target`, clamped to [0, 1].
/// Throws std::invalid_argument unless 0 < target < 1.
Inversion inverse(const IrtParams& params, double target);

struct ParamGradient {
  double d_k = 0.0;
  double d_mu = 0.0;
  double d_b = 0.0;
};

ParamGradient jacobian(const IrtParams& params, double p);

}  // namespace scaffold::irt
