#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "hkrm/mlp.hpp"
#include "hkrm/params.hpp"

namespace hkrm {

struct GradCheckOptions {
  double step = 1e-5;   // central-difference half width
  double floor = 1e-8;  // denominator floor of the relative error
  // 0 probes every entry; otherwise at most this many entries per tensor,
  // chosen with `seed`.
  std::size_t max_probes_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-8);

// Compares `analytic` against central differences of `loss` with respect to
// every tensor in `params`. `loss` must re-evaluate from the current parameter
// values; each probed entry is restored before moving on. Throws NumericError
// if the loss is ever non-finite.
GradCheckReport check_gradients(const ParamList& params, const GradList& analytic,
                                const std::function<double()>& loss,
                                const GradCheckOptions& options = {});

// Scalar loss of an MLP output; writes dLoss/dOutput into `grad`.
using OutputLoss = std::function<double(const Matrix& output, Matrix& grad)>;

// Gradient check of every MLP parameter and of the input.
GradCheckReport grad_check(Mlp& mlp, const OutputLoss& loss, const Matrix& input,
                           const GradCheckOptions& options = {});

}  // namespace hkrm
