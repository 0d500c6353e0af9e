#pragma once

#include <nlohmann/json.hpp>

#include "holmes/engine.hpp"
#include "holmes/history.hpp"
#include "holmes/params.hpp"

namespace holmes::serial {

using Json = nlohmann::json;

Json to_json(const lenia::UpdateRuleParams& p);
lenia::UpdateRuleParams rule_from_json(const Json& j);

/// `{nodes:[{id,act,bias}], conns:[{src,dst,w,on}]}`
Json to_json(const cppn::Genome& g);
cppn::Genome genome_from_json(const Json& j);

Json to_json(const SystemParams& p);
SystemParams params_from_json(const Json& j);

/// History line: run, theta, pattern, path, emb (+ goal, fault when set).
/// The pattern grid itself is not serialized.
Json to_json(const Record& r);
Record record_from_json(const Json& j);

/// Every ExplorationConfig field by name; missing keys keep their defaults.
Json to_json(const ExplorationConfig& c);
ExplorationConfig config_from_json(const Json& j);

}  // namespace holmes::serial
