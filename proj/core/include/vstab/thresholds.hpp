#pragma once

#include "vstab/types.hpp"

#include <map>
#include <string>

namespace vstab {

/// Numeric thresholds used across the analysis pipeline.  All values are on
/// per-unit scales.  Every field can be overridden by name (CLI `--set`), and
/// the set in effect is logged with each run.
struct Thresholds {
    Real eps_v = 1e-3;       ///< bus-voltage floor inside constant-power / exciter evaluation
    Real eps_sing = 1e-6;    ///< |lambda1| below this counts as on the singular surface
    Real eps_gap = 1e-8;     ///< minimum eigenvalue separation before DegenerateSpectrum
    Real eps_g = 1e-8;       ///< algebraic residual bound for set membership
    Real eps_psi = 1e-6;     ///< pseudo-equilibrium residual bound
    Real eps_xi = 1e-4;      ///< semi-singular scalar bound
    Real eps_near = 1e-2;    ///< "near the singular surface" band on |lambda1|
    Real eps_alg = 1e-10;    ///< Newton tolerance for the algebraic solve
    Real eps_eig_rel = 1e-5; ///< non-negligible eigenvalue cut, relative to ||J||_F
    Real eps_complex = 1e-6; ///< relative imaginary-part tolerance on eigenvalues
    Real lambda_tie = 0.2;   ///< relative tie window for tracked minimum-modulus selection

    /// Override a threshold by key; throws ParseError on unknown keys.
    void set(const std::string& key, Real value);

    /// All thresholds by name, for logging and metadata.
    [[nodiscard]] std::map<std::string, Real> to_map() const;
};

}  // namespace vstab
