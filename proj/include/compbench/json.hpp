#pragma once

#include <json.hpp>

namespace compbench {

// Insertion-ordered so operation parameters and emitted documents keep a
// stable field order.
using Json = nlohmann::ordered_json;

}  // namespace compbench
