#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "occlab/experiments.hpp"

namespace occlab {

using Json = nlohmann::json;

/// Malformed config, unknown key or invalid value; `key()` holds the dotted path when known.
class ConfigError : public std::runtime_error {
   public:
    ConfigError(const std::string& key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(key) {}
    const std::string& key() const { return key_; }

   private:
    std::string key_;
};

/**
 * The complete config schema with every default filled in. A user config is
 * a subset of this tree; any key outside it is rejected. Objects whose
 * default is empty (`occupancy.learning_rates`) are free-form maps.
 */
Json default_config();

/// Overlays `user` onto `base`, rejecting keys that `base` does not define.
Json merge_config(const Json& base, const Json& user);

/// Reads a JSON file and merges it onto the defaults.
Json load_config(const std::string& path);

/// Applies `dotted.key=value`. The value is parsed as JSON and falls back to a plain string.
void apply_override(Json& config, const std::string& assignment);

/// Parses "0,1,2" into seeds.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

EnvSpec env_from_config(const Json& config);
/// Action labels for printing; defaults to the gridworld names or a0, a1, ...
std::vector<std::string> action_names(const Json& config);
TabularPolicy policy_from_config(const Json& config, const TabularMdp& mdp);

OccupancySpec occupancy_spec_from_config(const Json& config);
SweepSpec sweep_spec_from_config(const Json& config);
OccupancySpec ablation_spec_from_config(const Json& config);
/// `mode` is stitching or shortcut.
OfflineSpec offline_spec_from_config(const Json& config, const std::string& mode);
GcrlSpec gcrl_spec_from_config(const Json& config);
InterpSpec interp_spec_from_config(const Json& config);

}  // namespace occlab
