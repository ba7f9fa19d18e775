#include "tide/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tide {

namespace {

double eval_loss(const GradcheckFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& in : inputs) leaves.push_back(tape.leaf(in, true));
  Var loss = fn(tape, leaves);
  const Tensor& lv = tape.value(loss);
  if (lv.numel() != 1) {
    throw std::invalid_argument("finite_diff_gradcheck: builder must return a scalar");
  }
  return lv[0];
}

}  // namespace

GradcheckReport finite_diff_gradcheck(const GradcheckFn& fn,
                                      const std::vector<Tensor>& inputs, double eps,
                                      double atol) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_gradcheck: eps must be positive");
  if (atol < 0.0) throw std::invalid_argument("finite_diff_gradcheck: atol must be >= 0");

  // Analytic gradients from one reverse pass.
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& in : inputs) leaves.push_back(tape.leaf(in, true));
    Var loss = fn(tape, leaves);
    Gradients g = tape.backward(loss);
    for (Var v : leaves) analytic.push_back(g.get(v));
  }

  GradcheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (Index i = 0; i < probe[k].numel(); ++i) {
      const double saved = probe[k][i];
      probe[k][i] = saved + eps;
      const double up = eval_loss(fn, probe);
      probe[k][i] = saved - eps;
      const double down = eval_loss(fn, probe);
      probe[k][i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a) <= atol && std::abs(numeric) <= atol
                             ? 0.0
                             : std::abs(a - numeric) / denom;
      ++report.probes;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input =
            "input " + std::to_string(k) + ", element " + std::to_string(i);
      }
    }
  }
  return report;
}

}  // namespace tide
