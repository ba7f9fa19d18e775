#ifndef TIDE_GRADCHECK_HPP
#define TIDE_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "tide/tape.hpp"

namespace tide {

/// Scalar-valued computation under test: given a fresh tape and leaves
/// already placed on it (one per input tensor, requires_grad set), build the
/// graph and return the loss node. The builder must be deterministic, so
/// stochastic layers have to be pinned (dropout_with_mask).
using GradcheckFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_input;  // "input 2, element 17"
  Index probes = 0;
};

/// Compares reverse-mode gradients against central finite differences.
///
/// For every element x of every input, the numeric estimate is
/// (f(x+eps) - f(x-eps)) / (2 eps) and the relative error against the
/// analytic gradient a is |a - n| / max(|a|, |n|, 1e-12). Pairs with both
/// sides below `atol` count as exact: when a parameter truly does not
/// influence the loss the analytic gradient is 0 while the central
/// difference returns rounding noise of order |f| * 1e-16 / eps, which would
/// otherwise score as relative error 1.
GradcheckReport finite_diff_gradcheck(const GradcheckFn& fn,
                                      const std::vector<Tensor>& inputs,
                                      double eps = 1e-5, double atol = 1e-7);

}  // namespace tide

#endif  // TIDE_GRADCHECK_HPP
