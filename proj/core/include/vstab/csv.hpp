#pragma once

#include "vstab/simulator_types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vstab {

/// Shortest round-trippable decimal form; deterministic across runs.
std::string format_real(Real v);

/// Trajectory CSV: header row, then one row per accepted step with columns
///   time, delta_<dev>..., omega_<dev>..., e_<dev>..., efd_<dev>...,
///   vx_<bus>..., vy_<bus>..., lambda1, g_inf
/// plus leading tau, t_reconstructed columns for rescaled-time runs.
/// Comma separated, '.' decimal, LF line endings.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const DeviceSet& devices,
                          const std::vector<std::string>& bus_names);

/// Read back a trajectory CSV produced by write_trajectory_csv (states and
/// diagnostics only; termination metadata lives in the sidecar).
Trajectory read_trajectory_csv(std::istream& is, const StateLayout& l);

}  // namespace vstab
