#pragma once

#include <string>

#include "qbspde/grid.hpp"

namespace qbspde {

/// Columnar CSV: header then one row (t, x[, w], u, q_1..q_{d0}) per node.
/// Values printed with 17 significant digits so read-back is bit-exact.
void write_field_csv(const SolutionField& field, const std::string& path);
SolutionField read_field_csv(const std::string& path);

/// Compact binary dump, magic "QBSPDE01"; bit-exact round trip.
void write_field_binary(const SolutionField& field, const std::string& path);
SolutionField read_field_binary(const std::string& path);

/// Dispatch by extension: ".csv" -> CSV, anything else -> binary.
void write_field(const SolutionField& field, const std::string& path);

}  // namespace qbspde
