#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fusion/tensor.hpp"

namespace fusion {

// Finite-difference gradient verification. The numeric side re-evaluates the
// forward computation only, so it stays independent of the tape.

struct GradCheckCase {
    std::vector<Tensor> inputs;                                  // leaves to perturb
    std::function<Tensor(const std::vector<Tensor>&)> forward;   // builds a scalar loss
};

struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0;
    bool pass = false;
};

// Max relative error between tape gradients and central finite differences
// (step eps) over every element of every input.
double finite_diff_error(const GradCheckCase& c, double eps = 1e-5);

// Registered per-op checks (every differentiable tensor op), `instances`
// seeded cases each. `filter` restricts to one op name; `inject_fault_op`
// perturbs that op's analytic gradient before comparing (fault-injection
// fixture proving the harness catches a wrong backward rule).
std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, const std::string& filter = "",
                                           const std::string& inject_fault_op = "",
                                           int instances = 5, double tolerance = 1e-4);

std::vector<std::string> gradcheck_op_names();

std::string format_gradcheck_table(const std::vector<GradCheckResult>& results);

}  // namespace fusion
