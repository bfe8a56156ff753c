#include "compbench/provider.hpp"

#include <set>

#include "compbench/errors.hpp"

namespace compbench {

Json outputs_request(const std::string& model, const std::vector<std::string>& ids) {
  return Json{{"model", model}, {"kind", "outputs"}, {"ids", ids}};
}

Json layers_request(const std::string& model, const std::vector<std::string>& paths) {
  return Json{{"model", model}, {"kind", "layers"}, {"paths", paths}};
}

namespace {

void check_model_echo(const Json& reply, const std::string& model) {
  if (!reply.is_object()) throw Error(ErrorCode::ProviderProtocolViolation, model, "reply is not a JSON object");
  auto it = reply.find("model");
  if (it == reply.end() || !it->is_string()) {
    throw Error(ErrorCode::ProviderProtocolViolation, model, "reply does not echo the model id");
  }
  if (it->get<std::string>() != model) {
    throw Error(ErrorCode::ProviderProtocolViolation, model, "reply is for model " + it->get<std::string>());
  }
}

std::vector<std::string> unknown_list(const Json& reply, const std::string& model) {
  std::vector<std::string> out;
  auto it = reply.find("unknown");
  if (it == reply.end() || it->is_null()) return out;
  if (!it->is_array()) throw Error(ErrorCode::ProviderProtocolViolation, model, "\"unknown\" must be an array");
  for (const auto& u : *it) {
    if (!u.is_string()) throw Error(ErrorCode::ProviderProtocolViolation, model, "\"unknown\" entries must be strings");
    out.push_back(u.get<std::string>());
  }
  return out;
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

}  // namespace

ModelOutputs decode_outputs_reply(const Json& reply, const std::string& model, const std::vector<std::string>& ids,
                                  const std::vector<std::string>& classes) {
  check_model_echo(reply, model);
  const auto unknown = unknown_list(reply, model);
  const std::set<std::string> requested(ids.begin(), ids.end());
  for (const auto& u : unknown) {
    if (!requested.count(u)) throw Error(ErrorCode::ProviderProtocolViolation, model, "unrequested unknown id " + u);
  }
  if (!unknown.empty()) throw Error(ErrorCode::MissingOutput, joined(unknown), "provider has no output for model " + model);
  ModelOutputs out;
  try {
    out = outputs_from_json(reply, classes);
  } catch (const Error& e) {
    throw Error(ErrorCode::ProviderProtocolViolation, model, e.what());
  }
  std::set<std::string> returned;
  for (const auto& r : out.records) {
    if (!requested.count(r.instance)) {
      throw Error(ErrorCode::ProviderProtocolViolation, model, "reply contains unrequested id " + r.instance);
    }
    if (!returned.insert(r.instance).second) {
      throw Error(ErrorCode::ProviderProtocolViolation, model, "reply repeats id " + r.instance);
    }
  }
  for (const auto& id : ids) {
    if (!returned.count(id)) {
      throw Error(ErrorCode::ProviderProtocolViolation, model, "id " + id + " neither answered nor reported unknown");
    }
  }
  return out;
}

ModelLayers decode_layers_reply(const Json& reply, const std::string& model, const std::vector<std::string>& paths) {
  check_model_echo(reply, model);
  const auto unknown = unknown_list(reply, model);
  const std::set<std::string> requested(paths.begin(), paths.end());
  for (const auto& u : unknown) {
    if (!requested.count(u)) throw Error(ErrorCode::ProviderProtocolViolation, model, "unrequested unknown path " + u);
  }
  if (!unknown.empty()) throw Error(ErrorCode::UnknownPath, joined(unknown), "provider has no such layer for " + model);
  ModelLayers out;
  try {
    out = layers_from_json(reply);
  } catch (const Error& e) {
    throw Error(ErrorCode::ProviderProtocolViolation, model, e.what());
  }
  if (!requested.empty()) {
    std::set<std::string> returned;
    for (const auto& l : out.layers) {
      if (!requested.count(l.path)) {
        throw Error(ErrorCode::ProviderProtocolViolation, model, "reply contains unrequested path " + l.path);
      }
      returned.insert(l.path);
    }
    for (const auto& p : paths) {
      if (!returned.count(p)) {
        throw Error(ErrorCode::ProviderProtocolViolation, model, "path " + p + " neither answered nor reported unknown");
      }
    }
  }
  return out;
}

ModelOutputs fetch_provider_outputs(const ProviderTransport& transport, const std::string& model,
                                    const std::vector<std::string>& ids, const std::vector<std::string>& classes) {
  return decode_outputs_reply(transport("outputs", outputs_request(model, ids)), model, ids, classes);
}

ModelLayers fetch_provider_layers(const ProviderTransport& transport, const std::string& model,
                                  const std::vector<std::string>& paths) {
  return decode_layers_reply(transport("layers", layers_request(model, paths)), model, paths);
}

}  // namespace compbench
