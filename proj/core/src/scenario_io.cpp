#include "vstab/scenario_io.hpp"

#include "vstab/power_flow.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vstab {

using nlohmann::json;

namespace {

Real require_real(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw ParseError("missing or non-numeric field '" + key + "'");
    }
    return j[key].get<Real>();
}

std::string require_string(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw ParseError("missing or non-string field '" + key + "'");
    }
    return j[key].get<std::string>();
}

Real optional_real(const json& j, const std::string& key, Real fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ParseError("non-numeric field '" + key + "'");
    return j[key].get<Real>();
}

}  // namespace

ScenarioSpec parse_scenario_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }

    ScenarioSpec spec;
    spec.name = j.value("name", "scenario");
    spec.base_frequency_hz = optional_real(j, "base_frequency_hz", 60.0);
    spec.t_end = optional_real(j, "t_end", 5.0);
    spec.dt_max = optional_real(j, "dt_max", 0.005);

    if (!j.contains("buses") || !j["buses"].is_array()) throw ParseError("missing 'buses' array");
    for (const auto& jb : j["buses"]) {
        spec.buses.push_back(jb.is_string() ? jb.get<std::string>() : require_string(jb, "id"));
    }

    for (const auto& jl : j.value("lines", json::array())) {
        LineSpec l;
        l.id = jl.value("id", "");
        l.from = require_string(jl, "from");
        l.to = require_string(jl, "to");
        l.r = optional_real(jl, "r", 0.0);
        l.x = require_real(jl, "x");
        l.b = optional_real(jl, "b", 0.0);
        spec.lines.push_back(std::move(l));
    }
    for (const auto& js : j.value("shunts", json::array())) {
        spec.shunts.push_back(
            {require_string(js, "bus"), optional_real(js, "g", 0.0), optional_real(js, "b", 0.0)});
    }
    for (const auto& jl : j.value("loads", json::array())) {
        LoadSpec l;
        l.bus = require_string(jl, "bus");
        l.p = require_real(jl, "p");
        l.q = optional_real(jl, "q", 0.0);
        l.rho = optional_real(jl, "rho", 0.0);
        if (l.rho < 0.0 || l.rho > 1.0) throw ParseError("load rho outside [0, 1]");
        spec.loads.push_back(std::move(l));
    }
    for (const auto& jg : j.value("gfl", json::array())) {
        spec.gfl.push_back(
            {require_string(jg, "bus"), require_real(jg, "p"), optional_real(jg, "q", 0.0)});
    }

    if (!j.contains("devices") || !j["devices"].is_array() || j["devices"].empty()) {
        throw ParseError("missing 'devices' array");
    }
    for (const auto& jd : j["devices"]) {
        DeviceSpec d;
        d.name = require_string(jd, "name");
        d.bus = require_string(jd, "bus");
        d.kind = jd.value("kind", "machine");
        if (d.kind != "machine" && d.kind != "gfm") {
            throw ParseError("device kind must be 'machine' or 'gfm'");
        }
        d.slack = jd.value("slack", false);
        d.dispatch_p = optional_real(jd, "dispatch_p", 0.0);
        d.dispatch_v = optional_real(jd, "dispatch_v", 1.0);
        d.M = optional_real(jd, "M", d.M);
        d.D = optional_real(jd, "D", d.D);
        if (d.kind == "machine") {
            d.Td0 = optional_real(jd, "Td0", d.Td0);
            d.xd = optional_real(jd, "xd", d.xd);
            d.xdp = optional_real(jd, "xdp", d.xdp);
            d.Ta = optional_real(jd, "Ta", d.Ta);
            d.Ka = optional_real(jd, "Ka", d.Ka);
        } else {
            d.Ki = optional_real(jd, "Ki", d.Ki);
            d.Tu = optional_real(jd, "Tu", d.Tu);
            d.Kq = optional_real(jd, "Kq", d.Kq);
            d.xl = optional_real(jd, "xl", d.xl);
        }
        spec.devices.push_back(std::move(d));
    }

    if (j.contains("fault")) {
        const auto& jf = j["fault"];
        FaultSpec f;
        f.bus = require_string(jf, "bus");
        f.shunt_b = optional_real(jf, "shunt_b", 1e4);
        f.start = optional_real(jf, "start", 0.2);
        f.duration = optional_real(jf, "duration", 0.06);
        f.load_scale = optional_real(jf, "load_scale", 1.0);
        for (const auto& cl : jf.value("clear_lines", json::array())) {
            f.clear_lines.push_back(cl.get<std::string>());
        }
        spec.fault = std::move(f);
    }
    return spec;
}

ScenarioSpec load_scenario_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_spec(ss.str());
}

namespace {

struct BusIndexer {
    std::map<std::string, Index> to_index;

    Index operator()(const std::string& name) const {
        const auto it = to_index.find(name);
        if (it == to_index.end()) throw ParseError("unknown bus '" + name + "'");
        return it->second;
    }
};

ComplexMatrix assemble_admittance(const ScenarioSpec& spec, const BusIndexer& idx,
                                  const std::set<std::string>& removed_lines) {
    const Index n = static_cast<Index>(spec.buses.size());
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (const auto& l : spec.lines) {
        if (removed_lines.count(l.id) > 0) continue;
        const Index a = idx(l.from), b = idx(l.to);
        const Complex ys = 1.0 / Complex(l.r, l.x);
        const Complex ysh(0.0, 0.5 * l.b);
        y(a, a) += ys + ysh;
        y(b, b) += ys + ysh;
        y(a, b) -= ys;
        y(b, a) -= ys;
    }
    for (const auto& s : spec.shunts) {
        y(idx(s.bus), idx(s.bus)) += Complex(s.g, s.b);
    }
    return y;
}

}  // namespace

BuiltScenario build_scenario(const ScenarioSpec& spec, const Thresholds& th) {
    const Index n_full = static_cast<Index>(spec.buses.size());
    BusIndexer idx;
    for (Index i = 0; i < n_full; ++i) {
        if (!idx.to_index.emplace(spec.buses[static_cast<std::size_t>(i)], i).second) {
            throw ParseError("duplicate bus id '" + spec.buses[static_cast<std::size_t>(i)] + "'");
        }
    }

    // Validation: device buses are distinct and carry no static injection.
    std::set<Index> device_buses;
    Index slack_count = 0;
    for (const auto& d : spec.devices) {
        if (!device_buses.insert(idx(d.bus)).second) {
            throw ParseError("two devices share bus '" + d.bus + "'");
        }
        if (d.slack) ++slack_count;
    }
    if (slack_count != 1) throw ParseError("exactly one device must be flagged slack");

    std::map<Index, LoadSpec> load_at;
    for (const auto& l : spec.loads) {
        const Index b = idx(l.bus);
        if (device_buses.count(b) > 0) throw ParseError("load on device bus '" + l.bus + "'");
        if (!load_at.emplace(b, l).second) throw ParseError("duplicate load on bus '" + l.bus + "'");
    }
    std::map<Index, GflSpec> gfl_at;
    for (const auto& g : spec.gfl) {
        const Index b = idx(g.bus);
        if (device_buses.count(b) > 0) throw ParseError("gfl on device bus '" + g.bus + "'");
        if (!gfl_at.emplace(b, g).second) throw ParseError("duplicate gfl on bus '" + g.bus + "'");
    }

    // --- Power flow at the pre-fault operating point ---
    const ComplexMatrix y_base = assemble_admittance(spec, idx, {});
    std::vector<PowerFlowBus> pf_buses(static_cast<std::size_t>(n_full));
    for (Index i = 0; i < n_full; ++i) {
        auto& pb = pf_buses[static_cast<std::size_t>(i)];
        pb.type = PowerFlowBus::Type::PQ;
        if (const auto it = load_at.find(i); it != load_at.end()) {
            pb.p -= it->second.p;
            pb.q -= it->second.q;
        }
        if (const auto it = gfl_at.find(i); it != gfl_at.end()) {
            pb.p += it->second.p;
            pb.q += it->second.q;
        }
    }
    for (const auto& d : spec.devices) {
        auto& pb = pf_buses[static_cast<std::size_t>(idx(d.bus))];
        pb.type = d.slack ? PowerFlowBus::Type::Slack : PowerFlowBus::Type::PV;
        pb.p = d.dispatch_p;
        pb.vset = d.dispatch_v;
    }
    const PowerFlowResult pf = solve_power_flow(y_base, pf_buses);

    // --- Retained bus set: device terminals in device order, then static-injection buses ---
    std::vector<Index> retained;
    for (const auto& d : spec.devices) retained.push_back(idx(d.bus));
    std::vector<Index> load_buses;
    for (Index i = 0; i < n_full; ++i) {
        if (device_buses.count(i) > 0) continue;
        if (load_at.count(i) > 0 || gfl_at.count(i) > 0) load_buses.push_back(i);
    }
    retained.insert(retained.end(), load_buses.begin(), load_buses.end());

    const Index n_gen = static_cast<Index>(spec.devices.size());
    const Index n_load = static_cast<Index>(load_buses.size());
    const Index n_red = n_gen + n_load;

    // --- Device records and internal states from the operating point ---
    DeviceSet devices;
    const Real omega0 = 2.0 * M_PI * spec.base_frequency_hz;
    Vector x0(4 * n_gen);
    const StateLayout l{n_gen, n_red};

    for (Index i = 0; i < n_gen; ++i) {
        const DeviceSpec& d = spec.devices[static_cast<std::size_t>(i)];
        const Index bus_full = idx(d.bus);
        const Complex v = pf.v[bus_full];
        const Complex s = pf.s_inj[bus_full];
        const Complex current = std::conj(s / v);
        const Real xr = d.kind == "machine" ? d.xdp : d.xl;
        const Complex e = v + Complex(0.0, xr) * current;
        const Real delta = std::arg(e);
        const Real emf = std::abs(e);

        Device dev;
        dev.name = d.name;
        dev.bus = i;
        if (d.kind == "machine") {
            MachineParams p;
            p.M = d.M;
            p.D = d.D;
            p.Td0 = d.Td0;
            p.xd = d.xd;
            p.xdp = d.xdp;
            p.Ta = d.Ta;
            p.Ka = d.Ka;
            const Real id = (emf - (v.real() * std::cos(delta) + v.imag() * std::sin(delta))) / d.xdp;
            const Real efd = emf + (d.xd - d.xdp) * id;
            p.Vref = std::abs(v) + efd / d.Ka;
            p.Pm = s.real();
            dev.params = p;
            x0[l.efd_off() + i] = efd;
        } else {
            GfmParams p;
            p.M = d.M;
            p.D = d.D;
            p.Ki = d.Ki;
            p.Tu = d.Tu;
            p.Kq = d.Kq;
            p.xl = d.xl;
            p.Pref = s.real();
            p.Qref = s.imag();  // droop balanced at the operating point
            p.Vref = std::abs(v);
            dev.params = p;
            x0[l.efd_off() + i] = 0.0;
        }
        x0[l.delta_off() + i] = delta;
        x0[l.omega_off() + i] = 0.0;
        x0[l.e_off() + i] = emf;
        devices.push_back(std::move(dev));
    }

    // --- Dynamic admittance: machine shunts plus the constant-impedance load portion ---
    auto make_network = [&](const std::set<std::string>& removed,
                            std::optional<std::pair<Index, Real>> fault_shunt,
                            Real load_scale) {
        ComplexMatrix y = assemble_admittance(spec, idx, removed);
        for (Index i = 0; i < n_gen; ++i) {
            const Index bus_full = idx(spec.devices[static_cast<std::size_t>(i)].bus);
            const Real xr = spec.devices[static_cast<std::size_t>(i)].kind == "machine"
                                ? spec.devices[static_cast<std::size_t>(i)].xdp
                                : spec.devices[static_cast<std::size_t>(i)].xl;
            y(bus_full, bus_full) += 1.0 / Complex(0.0, xr);
        }
        // The stored matrix pair carries Y minus the constant-impedance diagonal.
        for (const auto& [bus_full, load] : load_at) {
            const Complex s_inj = -load_scale * Complex(load.p, load.q);
            const Complex yz = (1.0 - load.rho) * std::conj(s_inj) / std::norm(pf.v[bus_full]);
            y(bus_full, bus_full) -= yz;
        }
        if (fault_shunt) {
            y(fault_shunt->first, fault_shunt->first) += Complex(0.0, -fault_shunt->second);
        }

        const ComplexMatrix y_red = kron_reduce(y, retained);

        PowerNetwork net;
        net.n_gen = n_gen;
        net.n_load = n_load;
        net.B = y_red.imag();
        net.G = y_red.real();
        net.B_le = Matrix::Zero(n_red, n_gen);
        for (Index i = 0; i < n_gen; ++i) {
            net.B_le(i, i) = 1.0 / spec.devices[static_cast<std::size_t>(i)].xdp;
            if (spec.devices[static_cast<std::size_t>(i)].kind == "gfm") {
                net.B_le(i, i) = 1.0 / spec.devices[static_cast<std::size_t>(i)].xl;
            }
        }
        net.P = Vector::Zero(n_red);
        net.Q = Vector::Zero(n_red);
        net.rho = Vector::Zero(n_red);
        net.yz_diag = ComplexVector::Zero(n_red);
        for (Index k = 0; k < n_load; ++k) {
            const Index bus_full = load_buses[static_cast<std::size_t>(k)];
            const Index r = n_gen + k;
            if (const auto it = load_at.find(bus_full); it != load_at.end()) {
                const Complex s_inj = -load_scale * Complex(it->second.p, it->second.q);
                net.P[r] += it->second.rho * s_inj.real();
                net.Q[r] += it->second.rho * s_inj.imag();
                net.rho[r] = it->second.rho;
                net.yz_diag[r] =
                    (1.0 - it->second.rho) * std::conj(s_inj) / std::norm(pf.v[bus_full]);
            }
            if (const auto it = gfl_at.find(bus_full); it != gfl_at.end()) {
                net.P[r] += it->second.p;
                net.Q[r] += it->second.q;
                if (load_at.count(bus_full) == 0) net.rho[r] = 1.0;
            }
        }
        net.omega0 = omega0;
        return net;
    };

    std::set<std::string> cleared;
    std::optional<std::pair<Index, Real>> fault_shunt;
    if (spec.fault) {
        for (const auto& id : spec.fault->clear_lines) {
            bool found = false;
            for (const auto& line : spec.lines) found = found || line.id == id;
            if (!found) throw ParseError("fault clears unknown line '" + id + "'");
            cleared.insert(id);
        }
        fault_shunt = {idx(spec.fault->bus), spec.fault->shunt_b};
    }

    const Real load_scale = spec.fault ? spec.fault->load_scale : 1.0;
    BuiltScenario out;
    out.scenario.name = spec.name;
    out.scenario.pre_fault = make_network({}, std::nullopt, 1.0);
    out.scenario.fault_on = make_network({}, fault_shunt, load_scale);
    out.scenario.post_fault = make_network(cleared, std::nullopt, load_scale);
    out.scenario.devices = devices;
    if (spec.fault) {
        out.scenario.fault_start = spec.fault->start;
        out.scenario.fault_duration = spec.fault->duration;
    }
    out.scenario.t_end = spec.t_end;
    out.scenario.dt_max = spec.dt_max;

    Real p_total = 0.0, p_cp = 0.0;
    for (const auto& load : spec.loads) {
        p_total += load.p;
        p_cp += load.rho * load.p;
    }
    out.scenario.constant_power_share = p_total > 0.0 ? p_cp / p_total : 0.0;

    Vector y0(2 * n_red);
    for (Index k = 0; k < n_red; ++k) {
        y0[k] = pf.v[retained[static_cast<std::size_t>(k)]].real();
        y0[n_red + k] = pf.v[retained[static_cast<std::size_t>(k)]].imag();
    }
    out.scenario.initial = {x0, y0};

    for (Index r : retained) out.bus_names.push_back(spec.buses[static_cast<std::size_t>(r)]);
    out.v0_full = pf.v;

    const Real f_res = f_eval(x0, y0, devices, omega0, th).lpNorm<Eigen::Infinity>();
    const Real g_res =
        algebraic_residual(x0, y0, out.scenario.pre_fault, th).lpNorm<Eigen::Infinity>();
    if (f_res > 1e-8 || g_res > 1e-8) {
        throw InvalidInitialCondition("assembled initial state has residuals ||f|| = " +
                                      std::to_string(f_res) + ", ||g|| = " +
                                      std::to_string(g_res));
    }
    return out;
}

BuiltScenario load_scenario(const std::string& path, const Thresholds& th) {
    return build_scenario(load_scenario_spec(path), th);
}

}  // namespace vstab
