#include "occlab/config.hpp"

#include <fstream>
#include <sstream>

namespace occlab {

namespace {

Json estimator_defaults(double learning_rate, double ema_tau, bool normalized) {
    return {{"loss_family", "categorical"},
            {"weight_scheme", "softmax_normalized"},
            {"negatives_scheme", "n_squared"},
            {"batch_size", 64},
            {"repr_dim", 0},
            {"learning_rate", learning_rate},
            {"ema_tau", ema_tau},
            {"normalized", normalized},
            {"initial_scale", 10.0},
            {"sr_step_size", 0.005}};
}

// Keys whose value may legitimately take more than one JSON type.
bool polymorphic(const std::string& key) { return key == "policy"; }

const char* type_label(const Json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    if (v.is_object()) return "object";
    return "null";
}

bool same_kind(const Json& a, const Json& b) { return std::string(type_label(a)) == type_label(b); }

void merge_into(Json& base, const Json& user, const std::string& prefix) {
    if (!user.is_object()) throw ConfigError(prefix, "expected an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError(key, "unknown config key");
        Json& slot = base[it.key()];
        if (slot.is_object() && !slot.empty()) {
            merge_into(slot, it.value(), key);
            continue;
        }
        if (!polymorphic(key) && !same_kind(slot, it.value()))
            throw ConfigError(key, std::string("expected ") + type_label(slot) + ", got " + type_label(it.value()));
        slot = it.value();
    }
}

// Typed access that reports the dotted key when conversion fails.
template <class T>
T get(const Json& config, const std::string& dotted) {
    const Json* node = &config;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part)) throw ConfigError(dotted, "missing config key");
        node = &(*node)[part];
    }
    try {
        return node->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(dotted, e.what());
    }
}

template <class F>
auto checked(const std::string& key, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

EstimatorConfig estimator_from(const Json& config, const std::string& prefix) {
    EstimatorConfig c;
    c.loss_family = checked(prefix + ".loss_family",
                            [&] { return parse_loss_family(get<std::string>(config, prefix + ".loss_family")); });
    c.weight_scheme = checked(prefix + ".weight_scheme", [&] {
        return parse_weight_scheme(get<std::string>(config, prefix + ".weight_scheme"));
    });
    c.negatives_scheme = checked(prefix + ".negatives_scheme", [&] {
        return parse_negatives_scheme(get<std::string>(config, prefix + ".negatives_scheme"));
    });
    c.batch_size = get<int>(config, prefix + ".batch_size");
    c.repr_dim = get<int>(config, prefix + ".repr_dim");
    c.learning_rate = get<double>(config, prefix + ".learning_rate");
    c.ema_tau = get<double>(config, prefix + ".ema_tau");
    c.normalized = get<bool>(config, prefix + ".normalized");
    c.initial_scale = get<double>(config, prefix + ".initial_scale");
    c.sr_step_size = get<double>(config, prefix + ".sr_step_size");
    checked(prefix, [&] {
        c.validate();
        return 0;
    });
    return c;
}

std::vector<std::pair<int, int>> pairs_from(const Json& config, const std::string& key) {
    const auto raw = get<std::vector<std::vector<int>>>(config, key);
    std::vector<std::pair<int, int>> out;
    for (const auto& p : raw) {
        if (p.size() != 2) throw ConfigError(key, "each pair must be [start, goal]");
        out.emplace_back(p[0], p[1]);
    }
    return out;
}

GridworldSpec grid_from(const Json& config) {
    if (get<std::string>(config, "env.kind") != "gridworld")
        throw ConfigError("env.kind", "this subcommand requires a gridworld environment");
    return env_from_config(config).grid;
}

GcrlConfig gcrl_from(const Json& config) {
    GcrlConfig g;
    g.critic = estimator_from(config, "gcrl.critic");
    g.critic_kind = checked("gcrl.critic_kind", [&] {
        return parse_gc_critic_kind(get<std::string>(config, "gcrl.critic_kind"));
    });
    g.actor_learning_rate = get<double>(config, "gcrl.actor_learning_rate");
    g.goal_future_prob = get<double>(config, "gcrl.goal_future_prob");
    g.eval_interval = get<long>(config, "gcrl.eval_interval");
    g.online = get<bool>(config, "gcrl.online");
    g.epsilon = get<double>(config, "gcrl.epsilon");
    g.episode_len = get<int>(config, "gcrl.episode_len");
    g.warmup_episodes = get<int>(config, "gcrl.warmup_episodes");
    g.collect_every = get<int>(config, "gcrl.collect_every");
    g.eval_pairs = pairs_from(config, "gcrl.eval_pairs");
    g.horizon = get<int>(config, "gcrl.horizon");
    g.eval_episodes = get<int>(config, "gcrl.eval_episodes");
    checked("gcrl", [&] {
        g.validate();
        return 0;
    });
    return g;
}

}  // namespace

Json default_config() {
    Json c;
    c["experiment"] = "default";
    c["env"] = {{"kind", "gridworld"},  {"width", 5},       {"height", 5},
                {"walls", Json::array()}, {"slip_prob", 0.0}, {"num_states", 0},
                {"num_actions", 0},       {"transition", Json::array()},
                {"initial", Json::array()}, {"action_names", Json::array()}};
    c["gamma"] = 0.9;
    c["policy"] = "uniform";
    c["seeds"] = {0, 1, 2};
    c["workers"] = 1;
    c["estimator"] = estimator_defaults(2.0, 0.01, false);
    c["occupancy"] = {{"dataset_size", 100000},
                      {"episode_len", 100},
                      {"steps", 50000},
                      {"eval_interval", 2500},
                      {"methods", {"td_infonce", "mc_infonce", "c_learning", "successor_representation",
                                   kExactOracle}},
                      {"learning_rates", Json::object()},
                      {"oracle_iterations", 200}};
    c["sweep"] = {{"sizes", {1000, 10000, 100000}}};
    c["gcrl"] = {{"critic", estimator_defaults(1.0, 0.05, false)},
                 {"critic_kind", "td_infonce"},
                 {"actor_learning_rate", 1.0},
                 {"goal_future_prob", 1.0},
                 {"eval_interval", 100},
                 {"online", false},
                 {"epsilon", 0.2},
                 {"episode_len", 50},
                 {"warmup_episodes", 10},
                 {"collect_every", 10},
                 {"eval_pairs", Json::array()},
                 {"horizon", 0},
                 {"eval_episodes", 1},
                 {"dataset_size", 10000},
                 {"dataset_episode_len", 100},
                 {"iterations", 2000}};
    c["offline"] = {{"dataset_size", 20000},
                    {"iterations", 50000},
                    {"eval_interval", 10000},
                    {"goal_future_prob", 0.5},
                    {"horizon", 0},
                    {"methods", {"td_infonce", "mc_infonce"}},
                    {"p_short", 0.05},
                    {"pause_prob", 0.1},
                    {"end_pause", 5}};
    c["interp"] = {{"dataset_size", 20000},
                   {"episode_len", 100},
                   {"iterations", 20000},
                   {"goal_future_prob", 0.5},
                   {"normalized", true},
                   {"pairs", Json::array()},
                   {"alphas", {0.0, 0.25, 0.5, 0.75, 1.0}},
                   {"anchor_count", 16}};
    return c;
}

Json merge_config(const Json& base, const Json& user) {
    Json out = base;
    merge_into(out, user, "");
    return out;
}

Json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    Json user;
    try {
        user = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", "cannot parse " + path + ": " + e.what());
    }
    return merge_config(default_config(), user);
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }
    // Build {"a": {"b": value}} and merge it so the usual key checks apply.
    Json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigError(key, "empty path component");
        parts.push_back(part);
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    merge_into(config, patch, "");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("seeds", "invalid seed list '" + text + "'");
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ConfigError("seeds", "seed list is empty");
    return out;
}

EnvSpec env_from_config(const Json& config) {
    EnvSpec env;
    env.kind = get<std::string>(config, "env.kind");
    if (env.kind == "gridworld") {
        env.grid.width = get<int>(config, "env.width");
        env.grid.height = get<int>(config, "env.height");
        for (const auto& w : get<std::vector<std::vector<int>>>(config, "env.walls")) {
            if (w.size() != 2) throw ConfigError("env.walls", "each wall must be [x, y]");
            env.grid.walls.push_back(Cell{w[0], w[1]});
        }
        env.grid.slip_prob = get<double>(config, "env.slip_prob");
        checked("env", [&] {
            env.grid.validate();
            return 0;
        });
    } else if (env.kind == "explicit") {
        env.num_states = get<int>(config, "env.num_states");
        env.num_actions = get<int>(config, "env.num_actions");
        if (env.num_states < 1 || env.num_actions < 1)
            throw ConfigError("env.num_states", "explicit MDPs need num_states and num_actions >= 1");
        const auto rows = get<std::vector<std::vector<double>>>(config, "env.transition");
        if (static_cast<int>(rows.size()) != env.num_states * env.num_actions)
            throw ConfigError("env.transition", "expected num_states * num_actions rows");
        env.transition = Matrix(env.num_states * env.num_actions, env.num_states);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<int>(rows[r].size()) != env.num_states)
                throw ConfigError("env.transition", "every row needs num_states entries");
            for (int c = 0; c < env.num_states; ++c) env.transition(static_cast<Eigen::Index>(r), c) = rows[r][c];
        }
        auto initial = get<std::vector<double>>(config, "env.initial");
        if (initial.empty()) initial.assign(env.num_states, 1.0 / env.num_states);
        if (static_cast<int>(initial.size()) != env.num_states)
            throw ConfigError("env.initial", "expected num_states entries");
        env.initial = Eigen::Map<const Vector>(initial.data(), env.num_states);
    } else {
        throw ConfigError("env.kind", "unknown environment kind '" + env.kind + "'");
    }
    checked("env", [&] { return env.build(get<double>(config, "gamma")); });
    return env;
}

std::vector<std::string> action_names(const Json& config) {
    auto names = get<std::vector<std::string>>(config, "env.action_names");
    const EnvSpec env = env_from_config(config);
    const int na = env.kind == "gridworld" ? 5 : env.num_actions;
    if (names.empty()) {
        for (int a = 0; a < na; ++a)
            names.push_back(env.kind == "gridworld" ? to_string(static_cast<GridAction>(a)) : "a" + std::to_string(a));
    }
    if (static_cast<int>(names.size()) != na) throw ConfigError("env.action_names", "expected one name per action");
    return names;
}

TabularPolicy policy_from_config(const Json& config, const TabularMdp& mdp) {
    const Json& p = config.at("policy");
    if (p.is_string()) {
        if (p.get<std::string>() != "uniform") throw ConfigError("policy", "expected \"uniform\" or a matrix");
        return TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    }
    const auto rows = get<std::vector<std::vector<double>>>(config, "policy");
    if (static_cast<int>(rows.size()) != mdp.num_states()) throw ConfigError("policy", "expected one row per state");
    TabularPolicy pol{Matrix(mdp.num_states(), mdp.num_actions())};
    for (int s = 0; s < mdp.num_states(); ++s) {
        if (static_cast<int>(rows[s].size()) != mdp.num_actions())
            throw ConfigError("policy", "expected one entry per action");
        for (int a = 0; a < mdp.num_actions(); ++a) pol.probs(s, a) = rows[s][a];
    }
    checked("policy", [&] {
        pol.validate();
        return 0;
    });
    return pol;
}

OccupancySpec occupancy_spec_from_config(const Json& config) {
    OccupancySpec spec;
    spec.experiment = "occupancy";
    spec.env = env_from_config(config);
    spec.gamma = get<double>(config, "gamma");
    spec.dataset_size = get<int>(config, "occupancy.dataset_size");
    spec.episode_len = get<int>(config, "occupancy.episode_len");
    spec.methods = get<std::vector<std::string>>(config, "occupancy.methods");
    spec.estimator = estimator_from(config, "estimator");
    spec.learning_rates = get<std::map<std::string, double>>(config, "occupancy.learning_rates");
    spec.schedule.steps = get<long>(config, "occupancy.steps");
    spec.schedule.eval_interval = get<long>(config, "occupancy.eval_interval");
    spec.oracle_iterations = get<int>(config, "occupancy.oracle_iterations");
    spec.seeds = get<std::vector<std::uint64_t>>(config, "seeds");
    spec.workers = get<int>(config, "workers");
    const TabularMdp mdp = spec.env.build(spec.gamma);
    if (!config.at("policy").is_string()) spec.policy = policy_from_config(config, mdp).probs;
    checked("occupancy", [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

SweepSpec sweep_spec_from_config(const Json& config) {
    SweepSpec spec;
    spec.base = occupancy_spec_from_config(config);
    spec.base.experiment = "sweep";
    spec.sizes = get<std::vector<int>>(config, "sweep.sizes");
    checked("sweep.sizes", [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

OccupancySpec ablation_spec_from_config(const Json& config) {
    OccupancySpec spec = occupancy_spec_from_config(config);
    spec.experiment = "ablation";
    return spec;
}

OfflineSpec offline_spec_from_config(const Json& config, const std::string& mode) {
    OfflineSpec spec;
    spec.mode = mode;
    spec.experiment = mode;
    spec.grid = grid_from(config);
    spec.gamma = get<double>(config, "gamma");
    spec.style.name = mode == "stitching" ? "z_paths" : "skewed_paths";
    spec.style.p_short = get<double>(config, "offline.p_short");
    spec.style.pause_prob = get<double>(config, "offline.pause_prob");
    spec.style.end_pause = get<int>(config, "offline.end_pause");
    spec.dataset_size = get<int>(config, "offline.dataset_size");
    spec.iterations = get<long>(config, "offline.iterations");
    spec.gcrl = gcrl_from(config);
    spec.gcrl.goal_future_prob = get<double>(config, "offline.goal_future_prob");
    spec.gcrl.eval_interval = get<long>(config, "offline.eval_interval");
    spec.gcrl.horizon = get<int>(config, "offline.horizon");
    spec.gcrl.online = false;
    spec.methods = get<std::vector<std::string>>(config, "offline.methods");
    spec.seeds = get<std::vector<std::uint64_t>>(config, "seeds");
    spec.workers = get<int>(config, "workers");
    checked("offline", [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

GcrlSpec gcrl_spec_from_config(const Json& config) {
    GcrlSpec spec;
    spec.env = env_from_config(config);
    spec.gamma = get<double>(config, "gamma");
    spec.gcrl = gcrl_from(config);
    spec.dataset_size = get<int>(config, "gcrl.dataset_size");
    spec.episode_len = get<int>(config, "gcrl.dataset_episode_len");
    spec.iterations = get<long>(config, "gcrl.iterations");
    spec.seeds = get<std::vector<std::uint64_t>>(config, "seeds");
    spec.workers = get<int>(config, "workers");
    checked("gcrl", [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

InterpSpec interp_spec_from_config(const Json& config) {
    InterpSpec spec;
    spec.grid = grid_from(config);
    spec.gamma = get<double>(config, "gamma");
    spec.dataset_size = get<int>(config, "interp.dataset_size");
    spec.episode_len = get<int>(config, "interp.episode_len");
    spec.iterations = get<long>(config, "interp.iterations");
    spec.gcrl = gcrl_from(config);
    spec.gcrl.goal_future_prob = get<double>(config, "interp.goal_future_prob");
    spec.gcrl.critic.normalized = get<bool>(config, "interp.normalized");
    spec.gcrl.eval_interval = std::max<long>(1, spec.iterations);
    spec.pairs = pairs_from(config, "interp.pairs");
    spec.alphas = get<std::vector<double>>(config, "interp.alphas");
    spec.anchor_count = get<int>(config, "interp.anchor_count");
    spec.seeds = get<std::vector<std::uint64_t>>(config, "seeds");
    checked("interp", [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

}  // namespace occlab
