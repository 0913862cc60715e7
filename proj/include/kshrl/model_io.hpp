#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "kshrl/model.hpp"

namespace kshrl {

inline constexpr int kModelFormatVersion = 1;

/// Exact text form of a double ("%a"), and its inverse.
std::string hex_double(double v);
double parse_hex_double(const std::string& s);

/// JSON model file. Every double is stored as a hex-float string, so
/// write -> read -> write reproduces the same bytes.
void write_model(std::ostream& out, const FittedModel& model);
FittedModel read_model(std::istream& in);

void save_model(const std::string& path, const FittedModel& model);
FittedModel load_model(const std::string& path);

}  // namespace kshrl
