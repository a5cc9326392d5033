#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cloc/config.hpp"
#include "cloc/synthesis.hpp"

namespace cloc {

// Design files use the config syntax: one key per ClocDesign field, SI units
// with explicit suffixes. Only k/s^2 plants are representable.
void write_design(std::ostream& out, const ClocDesign& design, const std::string& header_comment = {});
ClocDesign read_design(const Config& cfg);
ClocDesign read_design(const std::filesystem::path& path);

// Plant gain k of k/s^2; throws ParameterError for other plants.
double double_integrator_gain(const RationalTF& plant);

// Step-by-step summary for people.
std::string design_report(const ClocDesign& design, const PidDesign& reference_pid);

}  // namespace cloc
