#pragma once

#include <functional>
#include <string>
#include <vector>

#include "compbench/behavior.hpp"
#include "compbench/json.hpp"
#include "compbench/layers.hpp"

namespace compbench {

// POSTs `body` to `<provider>/<endpoint>` and returns the parsed reply. A
// transport throws ProviderUnavailable when the provider cannot be reached or
// answers with a non-2xx status.
using ProviderTransport = std::function<Json(const std::string& endpoint, const Json& body)>;

// Request bodies:
//   outputs: {"model", "kind": "outputs", "ids": [...]}
//   layers:  {"model", "kind": "layers", "paths": [...]}   (empty paths = all layers)
// Replies mirror outputs.json / layers.json and list ids or paths they do not
// know under "unknown".
Json outputs_request(const std::string& model, const std::vector<std::string>& ids);
Json layers_request(const std::string& model, const std::vector<std::string>& paths);

// Check the echo contract and decode. Echo violations throw
// ProviderProtocolViolation; reported unknown ids throw MissingOutput and
// unknown paths UnknownPath.
ModelOutputs decode_outputs_reply(const Json& reply, const std::string& model, const std::vector<std::string>& ids,
                                  const std::vector<std::string>& classes);
ModelLayers decode_layers_reply(const Json& reply, const std::string& model, const std::vector<std::string>& paths);

ModelOutputs fetch_provider_outputs(const ProviderTransport& transport, const std::string& model,
                                    const std::vector<std::string>& ids, const std::vector<std::string>& classes);
ModelLayers fetch_provider_layers(const ProviderTransport& transport, const std::string& model,
                                  const std::vector<std::string>& paths);

}  // namespace compbench
