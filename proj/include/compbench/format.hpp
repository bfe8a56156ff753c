#pragma once

#include <string>

namespace compbench {

// Shortest round-trip decimal form; integral values print without a
// fractional part ("8", not "8.0").
std::string format_number(double value);

}  // namespace compbench
