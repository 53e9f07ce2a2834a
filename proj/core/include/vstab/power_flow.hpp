#pragma once

#include "vstab/errors.hpp"
#include "vstab/types.hpp"

#include <vector>

namespace vstab {

/// Minimal Newton power flow in polar coordinates, used only to initialize
/// fixtures at an operating point.
struct PowerFlowBus {
    enum class Type { Slack, PV, PQ };
    Type type = Type::PQ;
    Real p = 0.0;     ///< active injection setpoint (PV, PQ)
    Real q = 0.0;     ///< reactive injection setpoint (PQ)
    Real vset = 1.0;  ///< voltage magnitude (Slack, PV)
};

struct PowerFlowResult {
    ComplexVector v;      ///< bus voltages
    ComplexVector s_inj;  ///< net complex injections at the solution
    int iterations = 0;
};

PowerFlowResult solve_power_flow(const ComplexMatrix& y, const std::vector<PowerFlowBus>& buses,
                                 Real tol = 1e-12, int max_iter = 50);

}  // namespace vstab
