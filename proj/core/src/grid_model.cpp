#include "vstab/grid_model.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace vstab {

namespace {

// Per-bus constant-power load diagonals b, g and their voltage derivatives.
struct LoadDiag {
    Real b = 0.0;
    Real g = 0.0;
};

struct LoadDiagDerivative {
    Real db_dvx = 0.0;
    Real dg_dvx = 0.0;
    Real db_dvy = 0.0;
    Real dg_dvy = 0.0;
};

bool has_load(const PowerNetwork& net, Index i) {
    return net.P[i] != 0.0 || net.Q[i] != 0.0;
}

void check_voltage_floor(Real d2, Real eps_v, Index bus) {
    if (d2 < eps_v * eps_v) {
        throw VoltageCollapseGuard("bus " + std::to_string(bus) +
                                   " voltage magnitude below floor in constant-power evaluation");
    }
}

LoadDiag load_diag(const PowerNetwork& net, const Vector& vx, const Vector& vy, Index i,
                   Real eps_v) {
    if (!has_load(net, i)) return {};
    const Real p = net.P[i], q = net.Q[i];
    const Real d = vx[i] * vx[i] + vy[i] * vy[i];
    check_voltage_floor(d, eps_v, i);
    const Real d2 = d * d;
    const Real diff = vx[i] * vx[i] - vy[i] * vy[i];
    const Real cross = vx[i] * vy[i];
    return {(q * diff - 2.0 * p * cross) / d2, (p * diff + 2.0 * q * cross) / d2};
}

LoadDiagDerivative load_diag_derivative(const PowerNetwork& net, const Vector& vx,
                                        const Vector& vy, Index i, Real eps_v) {
    if (!has_load(net, i)) return {};
    const Real p = net.P[i], q = net.Q[i];
    const Real x = vx[i], y = vy[i];
    const Real d = x * x + y * y;
    check_voltage_floor(d, eps_v, i);
    const Real d2 = d * d, d3 = d2 * d;
    const Real nb = q * (x * x - y * y) - 2.0 * p * x * y;  // numerator of b
    const Real ng = p * (x * x - y * y) + 2.0 * q * x * y;  // numerator of g
    LoadDiagDerivative out;
    out.db_dvx = 2.0 * ((q * x - p * y) / d2 - 2.0 * x * nb / d3);
    out.db_dvy = 2.0 * ((-q * y - p * x) / d2 - 2.0 * y * nb / d3);
    out.dg_dvx = 2.0 * ((p * x + q * y) / d2 - 2.0 * x * ng / d3);
    out.dg_dvy = 2.0 * ((-p * y + q * x) / d2 - 2.0 * y * ng / d3);
    return out;
}

}  // namespace

ComplexMatrix kron_reduce(const ComplexMatrix& y_full, const std::vector<Index>& retained) {
    const Index n = y_full.rows();
    std::vector<bool> keep(static_cast<std::size_t>(n), false);
    for (Index r : retained) keep[static_cast<std::size_t>(r)] = true;
    std::vector<Index> eliminated;
    for (Index i = 0; i < n; ++i)
        if (!keep[static_cast<std::size_t>(i)]) eliminated.push_back(i);

    const Index nr = static_cast<Index>(retained.size());
    const Index ne = static_cast<Index>(eliminated.size());
    if (ne == 0) {
        ComplexMatrix out(nr, nr);
        for (Index i = 0; i < nr; ++i)
            for (Index j = 0; j < nr; ++j) out(i, j) = y_full(retained[i], retained[j]);
        return out;
    }

    ComplexMatrix y_rr(nr, nr), y_re(nr, ne), y_er(ne, nr), y_ee(ne, ne);
    for (Index i = 0; i < nr; ++i) {
        for (Index j = 0; j < nr; ++j) y_rr(i, j) = y_full(retained[i], retained[j]);
        for (Index j = 0; j < ne; ++j) y_re(i, j) = y_full(retained[i], eliminated[j]);
    }
    for (Index i = 0; i < ne; ++i) {
        for (Index j = 0; j < nr; ++j) y_er(i, j) = y_full(eliminated[i], retained[j]);
        for (Index j = 0; j < ne; ++j) y_ee(i, j) = y_full(eliminated[i], eliminated[j]);
    }

    Eigen::JacobiSVD<ComplexMatrix> svd(y_ee);
    const Real smin = svd.singularValues().minCoeff();
    const Real smax = svd.singularValues().maxCoeff();
    if (smin <= 0.0 || smax / smin > 1e12) {
        throw SingularElimination("eliminated admittance block is numerically singular");
    }

    return y_rr - y_re * y_ee.partialPivLu().solve(y_er);
}

ComplexVector constant_impedance_loads(const ComplexVector& s_load, const Vector& rho,
                                       const ComplexVector& v0) {
    ComplexVector yz(s_load.size());
    for (Index i = 0; i < s_load.size(); ++i) {
        const Real mag2 = std::norm(v0[i]);
        if (mag2 == 0.0) {
            throw ZeroBaseVoltage("zero base voltage at load index " + std::to_string(i));
        }
        yz[i] = (1.0 - rho[i]) * std::conj(s_load[i]) / mag2;
    }
    return yz;
}

Vector algebraic_residual(const Vector& x, const Vector& y, const PowerNetwork& net,
                          const Thresholds& th) {
    const StateLayout l = net.layout();
    const Index nb = l.n_bus;
    const auto delta = x.segment(l.delta_off(), l.n_dev);
    const auto emf = x.segment(l.e_off(), l.n_dev);
    const auto vx = y.head(nb);
    const auto vy = y.tail(nb);

    const Vector igx = net.B_le * (emf.array() * delta.array().cos()).matrix();
    const Vector igy = -net.B_le * (emf.array() * delta.array().sin()).matrix();

    Vector ilx = Vector::Zero(nb), ily = Vector::Zero(nb);
    for (Index i = 0; i < nb; ++i) {
        if (!has_load(net, i)) continue;
        const Real d = vx[i] * vx[i] + vy[i] * vy[i];
        check_voltage_floor(d, th.eps_v, i);
        ilx[i] = (net.P[i] * vy[i] - net.Q[i] * vx[i]) / d;
        ily[i] = (net.P[i] * vx[i] + net.Q[i] * vy[i]) / d;
    }

    Vector g(2 * nb);
    g.head(nb) = net.B * vx + net.G * vy + igx - ilx;
    g.tail(nb) = net.G * vx - net.B * vy + igy - ily;
    return g;
}

Matrix jacobian_y(const Vector& x, const Vector& y, const PowerNetwork& net,
                  const Thresholds& th) {
    (void)x;  // the network Jacobian depends on voltages only
    const Index nb = net.n_bus();
    const auto vx = y.head(nb);
    const auto vy = y.tail(nb);

    Matrix dyg(2 * nb, 2 * nb);
    dyg.topLeftCorner(nb, nb) = net.B;
    dyg.topRightCorner(nb, nb) = net.G;
    dyg.bottomLeftCorner(nb, nb) = net.G;
    dyg.bottomRightCorner(nb, nb) = -net.B;
    for (Index i = 0; i < nb; ++i) {
        const LoadDiag d = load_diag(net, vx, vy, i, th.eps_v);
        dyg(i, i) -= d.b;
        dyg(i, nb + i) -= d.g;
        dyg(nb + i, i) += d.g;
        dyg(nb + i, nb + i) -= d.b;
    }
    return dyg;
}

Matrix jacobian_x(const Vector& x, const Vector& y, const PowerNetwork& net) {
    (void)y;
    const StateLayout l = net.layout();
    const Index nb = l.n_bus;
    const auto delta = x.segment(l.delta_off(), l.n_dev);
    const auto emf = x.segment(l.e_off(), l.n_dev);

    Matrix dxg = Matrix::Zero(2 * nb, l.n_diff());
    for (Index i = 0; i < l.n_dev; ++i) {
        const Real c = std::cos(delta[i]), s = std::sin(delta[i]);
        // delta columns
        dxg.col(l.delta_off() + i).head(nb) = -net.B_le.col(i) * (emf[i] * s);
        dxg.col(l.delta_off() + i).tail(nb) = -net.B_le.col(i) * (emf[i] * c);
        // E columns
        dxg.col(l.e_off() + i).head(nb) = net.B_le.col(i) * c;
        dxg.col(l.e_off() + i).tail(nb) = -net.B_le.col(i) * s;
    }
    return dxg;
}

Matrix dyg_dy(const Vector& y, const PowerNetwork& net, Index k, const Thresholds& th) {
    const Index nb = net.n_bus();
    Matrix d = Matrix::Zero(2 * nb, 2 * nb);
    const Index i = k < nb ? k : k - nb;
    if (!has_load(net, i)) return d;
    const auto vx = y.head(nb);
    const auto vy = y.tail(nb);
    const LoadDiagDerivative dd = load_diag_derivative(net, vx, vy, i, th.eps_v);
    const Real db = k < nb ? dd.db_dvx : dd.db_dvy;
    const Real dg = k < nb ? dd.dg_dvx : dd.dg_dvy;
    d(i, i) = -db;
    d(i, nb + i) = -dg;
    d(nb + i, i) = dg;
    d(nb + i, nb + i) = -db;
    return d;
}

Real dyg_dy_bilinear(const Vector& y, const PowerNetwork& net, Index k, const Vector& v,
                     const Vector& u, const Thresholds& th) {
    const Index nb = net.n_bus();
    const Index i = k < nb ? k : k - nb;
    if (!has_load(net, i)) return 0.0;
    const auto vx = y.head(nb);
    const auto vy = y.tail(nb);
    const LoadDiagDerivative dd = load_diag_derivative(net, vx, vy, i, th.eps_v);
    const Real db = k < nb ? dd.db_dvx : dd.db_dvy;
    const Real dg = k < nb ? dd.dg_dvx : dd.dg_dvy;
    return -db * (v[i] * u[i] + v[nb + i] * u[nb + i]) - dg * v[i] * u[nb + i] +
           dg * v[nb + i] * u[i];
}

Matrix dxg_dx(const Vector& x, const PowerNetwork& net, Index k) {
    const StateLayout l = net.layout();
    const Index nb = l.n_bus;
    Matrix d = Matrix::Zero(2 * nb, l.n_diff());
    const auto delta = x.segment(l.delta_off(), l.n_dev);
    const auto emf = x.segment(l.e_off(), l.n_dev);

    if (k >= l.delta_off() && k < l.delta_off() + l.n_dev) {
        const Index i = k - l.delta_off();
        const Real c = std::cos(delta[i]), s = std::sin(delta[i]);
        d.col(l.delta_off() + i).head(nb) = -net.B_le.col(i) * (emf[i] * c);
        d.col(l.delta_off() + i).tail(nb) = net.B_le.col(i) * (emf[i] * s);
        d.col(l.e_off() + i).head(nb) = -net.B_le.col(i) * s;
        d.col(l.e_off() + i).tail(nb) = -net.B_le.col(i) * c;
    } else if (k >= l.e_off() && k < l.e_off() + l.n_dev) {
        const Index i = k - l.e_off();
        const Real c = std::cos(delta[i]), s = std::sin(delta[i]);
        d.col(l.delta_off() + i).head(nb) = -net.B_le.col(i) * s;
        d.col(l.delta_off() + i).tail(nb) = -net.B_le.col(i) * c;
    }
    return d;
}

Vector dxg_dx_apply(const Vector& x, const PowerNetwork& net, Index k, const Vector& f) {
    const StateLayout l = net.layout();
    const Index nb = l.n_bus;
    Vector out = Vector::Zero(2 * nb);
    const auto delta = x.segment(l.delta_off(), l.n_dev);
    const auto emf = x.segment(l.e_off(), l.n_dev);

    if (k >= l.delta_off() && k < l.delta_off() + l.n_dev) {
        const Index i = k - l.delta_off();
        const Real c = std::cos(delta[i]), s = std::sin(delta[i]);
        const Real fd = f[l.delta_off() + i];
        const Real fe = f[l.e_off() + i];
        out.head(nb) = net.B_le.col(i) * (-emf[i] * c * fd - s * fe);
        out.tail(nb) = net.B_le.col(i) * (emf[i] * s * fd - c * fe);
    } else if (k >= l.e_off() && k < l.e_off() + l.n_dev) {
        const Index i = k - l.e_off();
        const Real c = std::cos(delta[i]), s = std::sin(delta[i]);
        const Real fd = f[l.delta_off() + i];
        out.head(nb) = -net.B_le.col(i) * (s * fd);
        out.tail(nb) = -net.B_le.col(i) * (c * fd);
    }
    return out;
}

}  // namespace vstab
