#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "slipbound/env.hpp"
#include "slipbound/gait.hpp"
#include "slipbound/mlp.hpp"
#include "slipbound/sac.hpp"
#include "slipbound/symmetry.hpp"

namespace slipbound {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using nlohmann::json;

json to_json(const SlipParams& p);
SlipParams slip_params_from_json(const json& j);

json to_json(const PeriodicGait& g);
PeriodicGait gait_from_json(const json& j);

/// Columnar layout: one array per sample field.
json to_json(const ReferenceTrajectory& ref);
ReferenceTrajectory reference_from_json(const json& j);

json to_json(const GaitSearchConfig& c);
GaitSearchConfig gait_search_from_json(const json& j, GaitSearchConfig base = {});

json to_json(const RobotModel& r);
RobotModel robot_from_json(const json& j);

json to_json(const ContactParams& c);
ContactParams contact_from_json(const json& j, ContactParams base = {});

json to_json(const MirrorSpec& m);
MirrorSpec mirror_from_json(const json& j);

json to_json(const EnvConfig& c);
/// Missing keys keep their values from `base`; a "robot_preset" key
/// reloads the preset model before the remaining keys are applied.
EnvConfig env_config_from_json(const json& j, EnvConfig base = {});

json to_json(const SacConfig& c);
SacConfig sac_config_from_json(const json& j, SacConfig base = {});

json to_json(const Mlp& net);
Mlp mlp_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);

}  // namespace slipbound
