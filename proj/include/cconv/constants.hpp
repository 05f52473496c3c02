#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cconv/cost.hpp"

namespace cconv {

struct ConstantEstimates {
  double lip_c = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double L = 0.0;
  std::vector<std::pair<double, double>> omega_table;  // (rho, omega), rho increasing

  /// omega at rho, rounded up to the next tabulated scale so that inequalities
  /// using it err on the safe side. Beyond the table the last value is used.
  double omega_upper(double rho) const;
};

struct ConstantOptions {
  double safety = 1.1;
  int omega_scales = 12;
};

/// Sampled suprema/infima over X x Y, inflated by the safety factor.
/// Pairs on the diagonal of singular costs are skipped.
ConstantEstimates estimate_constants(const CostModel& model, int sample_budget, std::uint64_t seed,
                                     const ConstantOptions& options = {});

}  // namespace cconv
