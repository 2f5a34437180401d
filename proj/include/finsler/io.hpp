#pragma once

#include <string>
#include <vector>

#include "finsler/field.hpp"
#include "finsler/flow.hpp"

namespace finsler {

// Flat binary field format: magic "FNSF1", dims, extents, spacing, origin,
// boundary flag, then row-major 64-bit floats.
void write_field(const std::string& path, const ScalarField& u);
ScalarField read_field(const std::string& path);

void write_field_csv(const std::string& path, const ScalarField& u);

// One row per recorded step: t, mass, energy, l2, lap_l2, inner_iters.
void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj);

// Generic CSV: header row + numeric rows.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Atomic text write (temp file + rename).
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace finsler
