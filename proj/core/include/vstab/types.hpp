#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>

namespace vstab {

using Real = double;
using Complex = std::complex<double>;
using Index = Eigen::Index;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Block layout of the stacked state vectors.
///
/// The differential state x is ordered block-by-variable:
///   x = [delta (all devices), omega, E, Efd]
/// where E is the internal EMF magnitude (machine transient EMF or converter
/// internal voltage) and Efd the excitation state (machine exciter output or
/// converter virtual excitation).  The algebraic state is
///   y = [Vx (all buses), Vy (all buses)]
/// with device terminal buses ordered first, then load buses.
struct StateLayout {
    Index n_dev = 0;  ///< number of dynamic devices
    Index n_bus = 0;  ///< number of retained network buses

    [[nodiscard]] Index n_diff() const { return 4 * n_dev; }
    [[nodiscard]] Index n_alg() const { return 2 * n_bus; }
    [[nodiscard]] Index n_total() const { return n_diff() + n_alg(); }

    [[nodiscard]] Index delta_off() const { return 0; }
    [[nodiscard]] Index omega_off() const { return n_dev; }
    [[nodiscard]] Index e_off() const { return 2 * n_dev; }
    [[nodiscard]] Index efd_off() const { return 3 * n_dev; }
};

/// Differential state x plus algebraic state y.
struct SystemState {
    Vector x;
    Vector y;

    SystemState() = default;
    SystemState(Vector x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) {}

    /// Concatenated state z = [x; y].
    [[nodiscard]] Vector z() const {
        Vector out(x.size() + y.size());
        out << x, y;
        return out;
    }

    /// Split a concatenated vector back into (x, y).
    static SystemState from_z(const Vector& z, Index n_diff) {
        return {z.head(n_diff), z.tail(z.size() - n_diff)};
    }

    // Named views into x and y.
    [[nodiscard]] auto delta(const StateLayout& l) const { return x.segment(l.delta_off(), l.n_dev); }
    [[nodiscard]] auto omega(const StateLayout& l) const { return x.segment(l.omega_off(), l.n_dev); }
    [[nodiscard]] auto emf(const StateLayout& l) const { return x.segment(l.e_off(), l.n_dev); }
    [[nodiscard]] auto efd(const StateLayout& l) const { return x.segment(l.efd_off(), l.n_dev); }
    [[nodiscard]] auto vx(const StateLayout& l) const { return y.segment(0, l.n_bus); }
    [[nodiscard]] auto vy(const StateLayout& l) const { return y.segment(l.n_bus, l.n_bus); }
};

}  // namespace vstab
