#include "vstab/device_dynamics.hpp"

#include <cmath>

namespace vstab {

DeviceElectrical device_electrical(const Device& dev, Real delta, Real emf, Real vgx, Real vgy) {
    const Real xr = dev.reactance();
    const Real c = std::cos(delta), s = std::sin(delta);
    DeviceElectrical e;
    e.vmag = std::hypot(vgx, vgy);
    e.pe = emf / xr * (vgx * s - vgy * c);
    e.id = (emf - (vgx * c + vgy * s)) / xr;
    e.qe = (emf * (vgx * c + vgy * s) - (vgx * vgx + vgy * vgy)) / xr;
    return e;
}

namespace {

void check_terminal_voltage(Real vmag, Real eps_v, const std::string& name) {
    if (vmag < eps_v) {
        throw VoltageCollapseGuard("terminal voltage of device " + name + " below floor");
    }
}

}  // namespace

Vector f_eval(const Vector& x, const Vector& y, const DeviceSet& devices, Real omega0,
              const Thresholds& th) {
    const Index nd = static_cast<Index>(devices.size());
    const Index nb = y.size() / 2;
    const StateLayout l{nd, nb};

    Vector f(l.n_diff());
    for (Index i = 0; i < nd; ++i) {
        const Device& dev = devices[static_cast<std::size_t>(i)];
        const Real delta = x[l.delta_off() + i];
        const Real omega = x[l.omega_off() + i];
        const Real emf = x[l.e_off() + i];
        const Real efd = x[l.efd_off() + i];
        const Real vgx = y[dev.bus], vgy = y[nb + dev.bus];

        const DeviceElectrical e = device_electrical(dev, delta, emf, vgx, vgy);
        check_terminal_voltage(e.vmag, th.eps_v, dev.name);

        f[l.delta_off() + i] = omega0 * omega;
        if (dev.is_machine()) {
            const MachineParams& p = dev.machine();
            f[l.omega_off() + i] = (p.Pm - e.pe - p.D * omega) / p.M;
            f[l.e_off() + i] = (efd - emf - (p.xd - p.xdp) * e.id) / p.Td0;
            f[l.efd_off() + i] = (p.Ka * (p.Vref - e.vmag) - efd) / p.Ta;
        } else {
            const GfmParams& p = dev.gfm();
            f[l.omega_off() + i] = (p.Pref - e.pe - p.D * omega) / p.M;
            f[l.e_off() + i] = (efd + p.Kq * (p.Qref - e.qe)) / p.Ki;
            f[l.efd_off() + i] = (p.Vref - e.vmag - efd) / p.Tu;
        }
    }
    return f;
}

FJacobian f_jacobian(const Vector& x, const Vector& y, const DeviceSet& devices, Index n_bus,
                     Real omega0, const Thresholds& th) {
    const Index nd = static_cast<Index>(devices.size());
    const StateLayout l{nd, n_bus};

    FJacobian j;
    j.dfdx = Matrix::Zero(l.n_diff(), l.n_diff());
    j.dfdy = Matrix::Zero(l.n_diff(), l.n_alg());

    for (Index i = 0; i < nd; ++i) {
        const Device& dev = devices[static_cast<std::size_t>(i)];
        const Real delta = x[l.delta_off() + i];
        const Real emf = x[l.e_off() + i];
        const Real vgx = y[dev.bus], vgy = y[n_bus + dev.bus];
        const Real c = std::cos(delta), s = std::sin(delta);
        const Real xr = dev.reactance();

        const Real vmag = std::hypot(vgx, vgy);
        check_terminal_voltage(vmag, th.eps_v, dev.name);

        // Electrical derivative building blocks shared by both device types.
        const Real dpe_ddelta = emf / xr * (vgx * c + vgy * s);
        const Real dpe_demf = (vgx * s - vgy * c) / xr;
        const Real dpe_dvgx = emf / xr * s;
        const Real dpe_dvgy = -emf / xr * c;
        const Real dvmag_dvgx = vgx / vmag;
        const Real dvmag_dvgy = vgy / vmag;

        const Index rd = l.delta_off() + i;
        const Index rw = l.omega_off() + i;
        const Index re = l.e_off() + i;
        const Index rf = l.efd_off() + i;
        const Index cx = dev.bus;          // Vx column
        const Index cy = n_bus + dev.bus;  // Vy column

        j.dfdx(rd, rw) = omega0;

        if (dev.is_machine()) {
            const MachineParams& p = dev.machine();
            j.dfdx(rw, rd) = -dpe_ddelta / p.M;
            j.dfdx(rw, rw) = -p.D / p.M;
            j.dfdx(rw, re) = -dpe_demf / p.M;
            j.dfdy(rw, cx) = -dpe_dvgx / p.M;
            j.dfdy(rw, cy) = -dpe_dvgy / p.M;

            const Real did_ddelta = (vgx * s - vgy * c) / xr;
            const Real k = (p.xd - p.xdp) / p.Td0;
            j.dfdx(re, rd) = -k * did_ddelta;
            j.dfdx(re, re) = (-1.0 - (p.xd - p.xdp) / xr) / p.Td0;
            j.dfdx(re, rf) = 1.0 / p.Td0;
            j.dfdy(re, cx) = k * c / xr;
            j.dfdy(re, cy) = k * s / xr;

            j.dfdx(rf, rf) = -1.0 / p.Ta;
            j.dfdy(rf, cx) = -p.Ka / p.Ta * dvmag_dvgx;
            j.dfdy(rf, cy) = -p.Ka / p.Ta * dvmag_dvgy;
        } else {
            const GfmParams& p = dev.gfm();
            j.dfdx(rw, rd) = -dpe_ddelta / p.M;
            j.dfdx(rw, rw) = -p.D / p.M;
            j.dfdx(rw, re) = -dpe_demf / p.M;
            j.dfdy(rw, cx) = -dpe_dvgx / p.M;
            j.dfdy(rw, cy) = -dpe_dvgy / p.M;

            const Real dqe_ddelta = emf / xr * (-vgx * s + vgy * c);
            const Real dqe_demf = (vgx * c + vgy * s) / xr;
            const Real dqe_dvgx = (emf * c - 2.0 * vgx) / xr;
            const Real dqe_dvgy = (emf * s - 2.0 * vgy) / xr;
            j.dfdx(re, rd) = -p.Kq / p.Ki * dqe_ddelta;
            j.dfdx(re, re) = -p.Kq / p.Ki * dqe_demf;
            j.dfdx(re, rf) = 1.0 / p.Ki;
            j.dfdy(re, cx) = -p.Kq / p.Ki * dqe_dvgx;
            j.dfdy(re, cy) = -p.Kq / p.Ki * dqe_dvgy;

            j.dfdx(rf, rf) = -1.0 / p.Tu;
            j.dfdy(rf, cx) = -dvmag_dvgx / p.Tu;
            j.dfdy(rf, cy) = -dvmag_dvgy / p.Tu;
        }
    }
    return j;
}

}  // namespace vstab
