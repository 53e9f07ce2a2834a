#include "vstab/power_flow.hpp"

#include <cmath>

namespace vstab {

PowerFlowResult solve_power_flow(const ComplexMatrix& y, const std::vector<PowerFlowBus>& buses,
                                 Real tol, int max_iter) {
    const Index n = y.rows();
    const Matrix g = y.real(), b = y.imag();

    std::vector<Index> ang_idx, mag_idx;
    for (Index i = 0; i < n; ++i) {
        const auto& bus = buses[static_cast<std::size_t>(i)];
        if (bus.type != PowerFlowBus::Type::Slack) ang_idx.push_back(i);
        if (bus.type == PowerFlowBus::Type::PQ) mag_idx.push_back(i);
    }
    const Index na = static_cast<Index>(ang_idx.size());
    const Index nm = static_cast<Index>(mag_idx.size());

    Vector theta = Vector::Zero(n);
    Vector vm(n);
    for (Index i = 0; i < n; ++i) {
        const auto& bus = buses[static_cast<std::size_t>(i)];
        vm[i] = bus.type == PowerFlowBus::Type::PQ ? 1.0 : bus.vset;
    }

    auto injections = [&](Vector& p, Vector& q) {
        p.setZero(n);
        q.setZero(n);
        for (Index i = 0; i < n; ++i) {
            for (Index k = 0; k < n; ++k) {
                const Real t = theta[i] - theta[k];
                p[i] += vm[i] * vm[k] * (g(i, k) * std::cos(t) + b(i, k) * std::sin(t));
                q[i] += vm[i] * vm[k] * (g(i, k) * std::sin(t) - b(i, k) * std::cos(t));
            }
        }
    };

    Vector p(n), q(n);
    int it = 0;
    for (; it < max_iter; ++it) {
        injections(p, q);

        Vector mism(na + nm);
        for (Index a = 0; a < na; ++a)
            mism[a] = buses[static_cast<std::size_t>(ang_idx[a])].p - p[ang_idx[a]];
        for (Index m = 0; m < nm; ++m)
            mism[na + m] = buses[static_cast<std::size_t>(mag_idx[m])].q - q[mag_idx[m]];
        if (mism.lpNorm<Eigen::Infinity>() < tol) break;

        Matrix jac(na + nm, na + nm);
        for (Index a = 0; a < na; ++a) {
            const Index i = ang_idx[a];
            for (Index a2 = 0; a2 < na; ++a2) {
                const Index j = ang_idx[a2];
                if (i == j) {
                    jac(a, a2) = -q[i] - b(i, i) * vm[i] * vm[i];
                } else {
                    const Real t = theta[i] - theta[j];
                    jac(a, a2) = vm[i] * vm[j] * (g(i, j) * std::sin(t) - b(i, j) * std::cos(t));
                }
            }
            for (Index m = 0; m < nm; ++m) {
                const Index j = mag_idx[m];
                if (i == j) {
                    jac(a, na + m) = p[i] / vm[i] + g(i, i) * vm[i];
                } else {
                    const Real t = theta[i] - theta[j];
                    jac(a, na + m) = vm[i] * (g(i, j) * std::cos(t) + b(i, j) * std::sin(t));
                }
            }
        }
        for (Index m = 0; m < nm; ++m) {
            const Index i = mag_idx[m];
            for (Index a2 = 0; a2 < na; ++a2) {
                const Index j = ang_idx[a2];
                if (i == j) {
                    jac(na + m, a2) = p[i] - g(i, i) * vm[i] * vm[i];
                } else {
                    const Real t = theta[i] - theta[j];
                    jac(na + m, a2) = -vm[i] * vm[j] * (g(i, j) * std::cos(t) + b(i, j) * std::sin(t));
                }
            }
            for (Index m2 = 0; m2 < nm; ++m2) {
                const Index j = mag_idx[m2];
                if (i == j) {
                    jac(na + m, na + m2) = q[i] / vm[i] - b(i, i) * vm[i];
                } else {
                    const Real t = theta[i] - theta[j];
                    jac(na + m, na + m2) = vm[i] * (g(i, j) * std::sin(t) - b(i, j) * std::cos(t));
                }
            }
        }

        const Vector step = jac.partialPivLu().solve(mism);
        if (!step.allFinite()) throw NoConvergence("power flow Jacobian solve failed");
        for (Index a = 0; a < na; ++a) theta[ang_idx[a]] += step[a];
        for (Index m = 0; m < nm; ++m) vm[mag_idx[m]] += step[na + m];
    }
    if (it == max_iter) throw NoConvergence("power flow did not converge");

    PowerFlowResult out;
    out.v.resize(n);
    for (Index i = 0; i < n; ++i) out.v[i] = std::polar(vm[i], theta[i]);
    out.s_inj = out.v.array() * (y * out.v).conjugate().array();
    out.iterations = it;
    return out;
}

}  // namespace vstab
