#pragma once

#include "vstab/simulator_types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vstab {

// =============================================================================
// Scenario file schema (structured text, JSON)
// =============================================================================

struct LineSpec {
    std::string id;
    std::string from;
    std::string to;
    Real r = 0.0;
    Real x = 0.1;
    Real b = 0.0;  ///< total line charging susceptance
};

struct ShuntSpec {
    std::string bus;
    Real g = 0.0;
    Real b = 0.0;
};

/// Load entry; p and q are consumption-positive, rho is the constant-power
/// fraction.  At most one entry per bus.
struct LoadSpec {
    std::string bus;
    Real p = 0.0;
    Real q = 0.0;
    Real rho = 0.0;
};

/// Grid-following converter: a pure constant-power injection (no dynamics).
struct GflSpec {
    std::string bus;
    Real p = 0.0;
    Real q = 0.0;
};

struct DeviceSpec {
    std::string name;
    std::string bus;
    std::string kind;  ///< "machine" or "gfm"
    bool slack = false;
    Real dispatch_p = 0.0;
    Real dispatch_v = 1.0;
    // machine parameters
    Real M = 10.0, D = 0.0, Td0 = 6.0, xd = 1.8, xdp = 0.3, Ta = 0.2, Ka = 50.0;
    // gfm parameters
    Real Ki = 0.5, Tu = 0.05, Kq = 0.2, xl = 0.15;
};

struct FaultSpec {
    std::string bus;
    Real shunt_b = 1e4;
    Real start = 0.2;
    Real duration = 0.06;
    std::vector<std::string> clear_lines;
    Real load_scale = 1.0;  ///< load-step factor applied from fault application on
};

/// Parsed scenario file, before any numerics.  Tests and parameter sweeps
/// mutate this and rebuild.
struct ScenarioSpec {
    std::string name;
    Real base_frequency_hz = 60.0;
    std::vector<std::string> buses;
    std::vector<LineSpec> lines;
    std::vector<ShuntSpec> shunts;
    std::vector<LoadSpec> loads;
    std::vector<GflSpec> gfl;
    std::vector<DeviceSpec> devices;
    std::optional<FaultSpec> fault;
    Real t_end = 5.0;
    Real dt_max = 0.005;
};

/// Parse a scenario file.  Throws ParseError with the offending key on any
/// schema violation.
ScenarioSpec load_scenario_spec(const std::string& path);
ScenarioSpec parse_scenario_spec(const std::string& json_text);

/// Built scenario plus naming needed by the CSV surfaces.
struct BuiltScenario {
    Scenario scenario;
    std::vector<std::string> bus_names;  ///< retained buses, reduced order
    ComplexVector v0_full;               ///< power-flow solution, file bus order
};

/// Solve the operating point, fold the load model, reduce the three topologies
/// and assemble the initial equilibrium.  Throws InvalidInitialCondition when
/// the assembled initial state fails the equilibrium residual check.
BuiltScenario build_scenario(const ScenarioSpec& spec, const Thresholds& th = {});

/// Convenience: load + build.
BuiltScenario load_scenario(const std::string& path, const Thresholds& th = {});

}  // namespace vstab
