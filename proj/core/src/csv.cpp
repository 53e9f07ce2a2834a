#include "vstab/csv.hpp"

#include "vstab/errors.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace vstab {

std::string format_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const DeviceSet& devices,
                          const std::vector<std::string>& bus_names) {
    const bool rescaled = !traj.tau.empty();
    std::vector<std::string> cols;
    if (rescaled) {
        cols.push_back("tau");
        cols.push_back("t_reconstructed");
    }
    cols.push_back("time");
    for (const auto& d : devices) cols.push_back("delta_" + d.name);
    for (const auto& d : devices) cols.push_back("omega_" + d.name);
    for (const auto& d : devices) cols.push_back("e_" + d.name);
    for (const auto& d : devices) cols.push_back("efd_" + d.name);
    for (const auto& b : bus_names) cols.push_back("vx_" + b);
    for (const auto& b : bus_names) cols.push_back("vy_" + b);
    cols.push_back("lambda1");
    cols.push_back("g_inf");

    for (std::size_t i = 0; i < cols.size(); ++i) {
        os << (i == 0 ? "" : ",") << cols[i];
    }
    os << "\n";

    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::vector<Real> row;
        if (rescaled) {
            row.push_back(traj.tau[k]);
            row.push_back(traj.t_reconstructed[k]);
        }
        row.push_back(traj.times[k]);
        const SystemState& st = traj.states[k];
        for (Index i = 0; i < st.x.size(); ++i) row.push_back(st.x[i]);
        for (Index i = 0; i < st.y.size(); ++i) row.push_back(st.y[i]);
        row.push_back(traj.lambda1[k]);
        row.push_back(traj.g_inf[k]);
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << (i == 0 ? "" : ",") << format_real(row[i]);
        }
        os << "\n";
    }
}

Trajectory read_trajectory_csv(std::istream& is, const StateLayout& l) {
    std::string header;
    if (!std::getline(is, header)) throw ParseError("empty trajectory CSV");
    std::size_t lead = 0;
    if (header.rfind("tau,", 0) == 0) lead = 2;

    Trajectory traj;
    std::string line;
    const std::size_t expect = lead + 1 + static_cast<std::size_t>(l.n_total()) + 2;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<Real> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != expect) {
            throw ParseError("trajectory CSV row has " + std::to_string(vals.size()) +
                             " columns, expected " + std::to_string(expect));
        }
        std::size_t c = 0;
        if (lead == 2) {
            traj.tau.push_back(vals[c++]);
            traj.t_reconstructed.push_back(vals[c++]);
        }
        traj.times.push_back(vals[c++]);
        Vector x(l.n_diff()), y(l.n_alg());
        for (Index i = 0; i < l.n_diff(); ++i) x[i] = vals[c++];
        for (Index i = 0; i < l.n_alg(); ++i) y[i] = vals[c++];
        traj.states.push_back({std::move(x), std::move(y)});
        traj.lambda1.push_back(vals[c++]);
        traj.g_inf.push_back(vals[c++]);
    }
    return traj;
}

}  // namespace vstab
