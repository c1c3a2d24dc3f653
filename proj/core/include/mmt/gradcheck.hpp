#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mmt/tensor.hpp"

namespace mmt {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;

  std::string to_string() const;
};

// Central finite differences against the analytic gradients already stored in
// each parameter's grad array (run forward+backward before calling). f must
// evaluate the same scalar loss from the current parameter values and be
// bit-deterministic; a repeated-evaluation mismatch is rejected up front.
//
// Relative error per coordinate is |fd - grad| / max(|fd|, |grad|, 1e-6).
GradCheckReport finite_diff_check(const std::function<double()>& f,
                                  const std::vector<std::pair<std::string, TensorPtr>>& params,
                                  double step, double tol);

}  // namespace mmt
