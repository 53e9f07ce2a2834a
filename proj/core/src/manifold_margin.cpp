#include "vstab/manifold_margin.hpp"

#include <cmath>

namespace vstab {

ManifoldModel build_manifold(const PseudoSaddle& saddle, const SystemState& sep,
                             const Thresholds& th) {
    const SaddleSpectrum spec = analyze_saddle_spectrum(saddle.J, th);
    if (spec.n_positive == 0) {
        throw NoUnstableDirection("no significant eigenvalue with positive real part");
    }
    if (spec.n_positive > 1) {
        throw MultipleUnstable(std::to_string(spec.n_positive) +
                               " significant unstable eigenvalues");
    }

    ManifoldModel model;
    model.z_cps = saddle.z_cps;
    model.mu = spec.mu;
    model.eta = spec.eta;

    const Real dp_sep = (sep.z() - saddle.z_cps.z()).dot(model.eta);
    if (std::abs(dp_sep) < 1e-9) {
        throw DegenerateSEP("equilibrium lies on the approximate stable manifold");
    }
    if (dp_sep < 0.0) model.eta = -model.eta;
    return model;
}

Real manifold_value(const SystemState& z, const ManifoldModel& model) {
    return (z.z() - model.z_cps.z()).dot(model.eta);
}

Real stability_margin(const SystemState& z_f1, const SystemState& z_sep,
                      const ManifoldModel& model) {
    const Real dp_sep = manifold_value(z_sep, model);
    if (std::abs(dp_sep) < 1e-9) {
        throw DegenerateSEP("d_p at the equilibrium is numerically zero");
    }
    return manifold_value(z_f1, model) / dp_sep;
}

}  // namespace vstab
