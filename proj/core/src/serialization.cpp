#include "holmes/serialization.hpp"

#include "holmes/errors.hpp"

namespace holmes::serial {

Json to_json(const lenia::UpdateRuleParams& p) {
  return {{"R", p.R}, {"T", p.T}, {"mu", p.mu}, {"sigma", p.sigma}, {"beta", p.beta}};
}

lenia::UpdateRuleParams rule_from_json(const Json& j) {
  lenia::UpdateRuleParams p;
  p.R = j.at("R").get<double>();
  p.T = j.at("T").get<double>();
  p.mu = j.at("mu").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.beta = j.at("beta").get<std::array<double, 3>>();
  return p;
}

Json to_json(const cppn::Genome& g) {
  Json nodes = Json::array(), conns = Json::array();
  for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"act", cppn::to_string(n.act)}, {"bias", n.bias}});
  for (const auto& c : g.connections)
    conns.push_back({{"src", c.src}, {"dst", c.dst}, {"w", c.weight}, {"on", c.enabled}});
  return {{"nodes", nodes}, {"conns", conns}};
}

cppn::Genome genome_from_json(const Json& j) {
  cppn::Genome g;
  for (const auto& n : j.at("nodes"))
    g.nodes.push_back({n.at("id").get<int>(), cppn::activation_from_string(n.at("act").get<std::string>()),
                       n.value("bias", 0.0)});
  for (const auto& c : j.at("conns"))
    g.connections.push_back(
        {c.at("src").get<int>(), c.at("dst").get<int>(), c.at("w").get<double>(), c.value("on", true)});
  cppn::validate(g);
  return g;
}

Json to_json(const SystemParams& p) {
  return {{"rule", to_json(p.rule)}, {"genome", to_json(p.genome)}, {"seed", p.run_seed}};
}

SystemParams params_from_json(const Json& j) {
  return {rule_from_json(j.at("rule")), genome_from_json(j.at("genome")), j.at("seed").get<std::uint64_t>()};
}

Json to_json(const Record& r) {
  Json emb = Json::object();
  for (const auto& id : r.path) emb[id] = r.emb.at(id);
  Json j = {{"run", r.run_index}, {"theta", to_json(r.theta)}, {"pattern", r.pattern_ref}, {"path", r.path}, {"emb", emb}};
  if (!r.goal_node.empty()) j["goal"] = r.goal_node;
  if (r.faulted) j["fault"] = true;
  return j;
}

Record record_from_json(const Json& j) {
  Record r;
  r.run_index = j.at("run").get<std::uint64_t>();
  r.theta = params_from_json(j.at("theta"));
  r.pattern_ref = j.at("pattern").get<std::string>();
  r.path = j.at("path").get<std::vector<std::string>>();
  for (const auto& [id, v] : j.at("emb").items()) r.emb[id] = v.get<std::vector<double>>();
  r.goal_node = j.value("goal", std::string());
  r.faulted = j.value("fault", false);
  return r;
}

namespace {

Json to_json(const SplitPolicy& p) {
  return {{"plateau_eps", p.plateau_eps},       {"plateau_window", p.plateau_window},
          {"min_population", p.min_population}, {"min_epochs", p.min_epochs},
          {"min_explored", p.min_explored},     {"max_splits", p.max_splits}};
}

Json to_json(const AugmentConfig& a) {
  return {{"translate_prob", a.translate_prob},     {"flip_h_prob", a.flip_h_prob}, {"flip_v_prob", a.flip_v_prob},
          {"rotate_prob", a.rotate_prob},           {"max_rotation_deg", a.max_rotation_deg},
          {"zoom_prob", a.zoom_prob},               {"max_zoom", a.max_zoom}};
}

Json to_json(const AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"epsilon", a.epsilon},             {"weight_decay", a.weight_decay}};
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const Json& j, std::initializer_list<const char*> known, const char* section) {
  for (const auto& [k, v] : j.items()) {
    bool found = false;
    for (const char* name : known) found = found || k == name;
    if (!found) throw ConfigError(std::string("unknown ") + section + " key '" + k + "'");
  }
}

}  // namespace

Json to_json(const ExplorationConfig& c) {
  return {{"n_total", c.n_total},
          {"n_init", c.n_init},
          {"train_every", c.train_every},
          {"train_epochs", c.train_epochs},
          {"grid", c.grid},
          {"steps", c.steps},
          {"seed", c.seed},
          {"guided", c.guided},
          {"softmax_temperature", c.softmax_temperature},
          {"goal_space", to_string(c.goal_space)},
          {"envelope_inflation", c.envelope_inflation},
          {"feedback_timeout_s", c.feedback_timeout_s},
          {"projection_dir", c.projection_dir},
          {"split", to_json(c.split)},
          {"batch_size", c.batch_size},
          {"new_fraction", c.new_fraction},
          {"augment", to_json(c.augment)},
          {"adam", to_json(c.adam)},
          {"channels", c.channels},
          {"hidden", c.hidden},
          {"latent", c.latent},
          {"mutate_genome", c.mutate_genome}};
}

ExplorationConfig config_from_json(const Json& j) {
  check_keys(j,
             {"n_total", "n_init", "train_every", "train_epochs", "grid", "steps", "seed", "guided",
              "softmax_temperature", "goal_space", "envelope_inflation", "feedback_timeout_s", "projection_dir", "split",
              "batch_size", "new_fraction", "augment", "adam", "channels", "hidden", "latent", "mutate_genome"},
             "config");
  ExplorationConfig c;
  try {
    read(j, "n_total", c.n_total);
    read(j, "n_init", c.n_init);
    read(j, "train_every", c.train_every);
    read(j, "train_epochs", c.train_epochs);
    read(j, "grid", c.grid);
    read(j, "steps", c.steps);
    read(j, "seed", c.seed);
    read(j, "guided", c.guided);
    read(j, "softmax_temperature", c.softmax_temperature);
    if (j.contains("goal_space")) c.goal_space = goal_space_from_string(j.at("goal_space").get<std::string>());
    read(j, "envelope_inflation", c.envelope_inflation);
    read(j, "feedback_timeout_s", c.feedback_timeout_s);
    read(j, "projection_dir", c.projection_dir);
    if (j.contains("split")) {
      const Json& s = j.at("split");
      check_keys(s, {"plateau_eps", "plateau_window", "min_population", "min_epochs", "min_explored", "max_splits"},
                 "split");
      read(s, "plateau_eps", c.split.plateau_eps);
      read(s, "plateau_window", c.split.plateau_window);
      read(s, "min_population", c.split.min_population);
      read(s, "min_epochs", c.split.min_epochs);
      read(s, "min_explored", c.split.min_explored);
      read(s, "max_splits", c.split.max_splits);
    }
    read(j, "batch_size", c.batch_size);
    read(j, "new_fraction", c.new_fraction);
    if (j.contains("augment")) {
      const Json& a = j.at("augment");
      check_keys(a, {"translate_prob", "flip_h_prob", "flip_v_prob", "rotate_prob", "max_rotation_deg", "zoom_prob",
                     "max_zoom"},
                 "augment");
      read(a, "translate_prob", c.augment.translate_prob);
      read(a, "flip_h_prob", c.augment.flip_h_prob);
      read(a, "flip_v_prob", c.augment.flip_v_prob);
      read(a, "rotate_prob", c.augment.rotate_prob);
      read(a, "max_rotation_deg", c.augment.max_rotation_deg);
      read(a, "zoom_prob", c.augment.zoom_prob);
      read(a, "max_zoom", c.augment.max_zoom);
    }
    if (j.contains("adam")) {
      const Json& a = j.at("adam");
      check_keys(a, {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay"}, "adam");
      read(a, "learning_rate", c.adam.learning_rate);
      read(a, "beta1", c.adam.beta1);
      read(a, "beta2", c.adam.beta2);
      read(a, "epsilon", c.adam.epsilon);
      read(a, "weight_decay", c.adam.weight_decay);
    }
    read(j, "channels", c.channels);
    read(j, "hidden", c.hidden);
    read(j, "latent", c.latent);
    read(j, "mutate_genome", c.mutate_genome);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

}  // namespace holmes::serial
