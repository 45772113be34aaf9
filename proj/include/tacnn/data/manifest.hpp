#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "tacnn/augment/mix.hpp"
#include "tacnn/data/sample.hpp"

namespace tacnn {

struct SplitLists {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Benchmark description: class and joint counts, joint names, the default
/// body partition and named split protocols (e.g. "xsub", "xview").
struct DatasetManifest {
  std::string name;
  std::size_t classes = 0;
  std::size_t joints = 0;
  std::vector<std::string> joint_names;
  BodyPartition partition;
  std::map<std::string, SplitLists> protocols;

  void validate() const {
    if (classes == 0 || joints == 0) throw ConfigError("manifest " + name + ": classes and joints must be positive");
    if (!joint_names.empty() && joint_names.size() != joints) {
      throw ConfigError("manifest " + name + ": joint_names has " + std::to_string(joint_names.size()) + " entries");
    }
    partition.validate(joints);
    for (const auto& [proto, lists] : protocols) {
      std::set<std::string> train;
      for (const auto& id : lists.train)
        if (!train.insert(id).second) throw ConfigError("manifest " + name + "/" + proto + ": duplicate id " + id);
      std::set<std::string> test;
      for (const auto& id : lists.test) {
        if (train.count(id)) throw ConfigError("manifest " + name + "/" + proto + ": id " + id + " in both splits");
        if (!test.insert(id).second) throw ConfigError("manifest " + name + "/" + proto + ": duplicate id " + id);
      }
    }
  }

  const SplitLists& protocol(const std::string& proto) const {
    auto it = protocols.find(proto);
    if (it == protocols.end()) throw ConfigError("manifest " + name + ": no protocol '" + proto + "'");
    return it->second;
  }
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
  nlohmann::json protos = nlohmann::json::object();
  for (const auto& [k, v] : m.protocols) protos[k] = {{"train", v.train}, {"test", v.test}};
  j = {{"name", m.name},           {"classes", m.classes},     {"joints", m.joints},
       {"joint_names", m.joint_names}, {"partition", m.partition}, {"protocols", protos}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.name = j.at("name").get<std::string>();
  m.classes = j.at("classes").get<std::size_t>();
  m.joints = j.at("joints").get<std::size_t>();
  m.joint_names = j.value("joint_names", std::vector<std::string>{});
  m.partition = j.contains("partition") ? j.at("partition").get<BodyPartition>() : BodyPartition::default_for(m.joints);
  m.protocols.clear();
  if (j.contains("protocols"))
    for (const auto& [k, v] : j.at("protocols").items()) {
      m.protocols[k] = {v.at("train").get<std::vector<std::string>>(), v.at("test").get<std::vector<std::string>>()};
    }
  m.validate();
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  try {
    return nlohmann::json::parse(in).get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
}

/// Samples whose ids are listed, in list order. Unknown ids are an
/// InputError.
inline Dataset select_ids(const Dataset& data, const std::vector<std::string>& ids) {
  std::map<std::string, const SkeletonSample*> by_id;
  for (const auto& s : data) by_id.emplace(s.id, &s);
  Dataset out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InputError("split lists unknown sample id " + id);
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace tacnn
