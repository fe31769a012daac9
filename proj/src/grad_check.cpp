#include "hkrm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hkrm/error.hpp"
#include "hkrm/rng.hpp"

namespace hkrm {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double finite_loss(const std::function<double()>& loss, const std::string& where) {
  const double v = loss();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss while probing " + where);
  return v;
}

std::vector<std::size_t> probe_indices(std::size_t n, const GradCheckOptions& options,
                                       std::uint64_t tensor_index) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (options.max_probes_per_tensor == 0 || n <= options.max_probes_per_tensor) return idx;
  Rng rng(derive_seed(options.seed, "grad_check", tensor_index));
  // partial Fisher-Yates
  for (std::size_t i = 0; i < options.max_probes_per_tensor; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(options.max_probes_per_tensor);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport check_gradients(const ParamList& params, const GradList& analytic,
                                const std::function<double()>& loss,
                                const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ShapeError("grad_check: " + std::to_string(params.size()) + " tensors but " +
                     std::to_string(analytic.size()) + " gradients");
  }
  finite_loss(loss, "base point");

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params[t].value;
    require_same_shape(p, analytic[t], "grad_check");
    for (std::size_t i : probe_indices(p.size(), options, t)) {
      const double saved = p[i];
      p[i] = saved + options.step;
      const double up = finite_loss(loss, params[t].name);
      p[i] = saved - options.step;
      const double down = finite_loss(loss, params[t].name);
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[t][i], numeric, options.floor);
      ++report.probes;
      if (err > report.max_relative_error || report.probes == 1) {
        report.max_relative_error = err;
        report.worst_tensor = params[t].name;
        report.worst_index = i;
        report.worst_analytic = analytic[t][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(Mlp& mlp, const OutputLoss& loss, const Matrix& input,
                           const GradCheckOptions& options) {
  Matrix x = input;
  ParamList params;
  mlp.collect(params, "mlp");
  params.push_back({"input", &x});

  MlpCache cache = mlp.forward_cached(x);
  Matrix upstream(cache.output.rows(), cache.output.cols());
  const double base = loss(cache.output, upstream);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss at base point");
  MlpGradients g = mlp.backward(cache, upstream, true);
  Matrix input_grad = std::move(g.input);
  GradList analytic;
  Mlp::append(analytic, std::move(g));
  analytic.push_back(std::move(input_grad));

  Matrix scratch;
  auto eval = [&]() {
    Matrix out = mlp.forward(x);
    scratch = Matrix(out.rows(), out.cols());
    return loss(out, scratch);
  };
  return check_gradients(params, analytic, eval, options);
}

}  // namespace hkrm
