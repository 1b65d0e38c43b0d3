#include "dtd/config.hpp"

#include "dtd/errors.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace dtd {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

long long parse_int(const std::string& key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

int parse_int32(const std::string& key, std::string_view v) {
  const long long x = parse_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

double parse_real(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<int> parse_layers(const std::string& key, std::string_view v) {
  std::vector<int> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_int32(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list of widths");
  return out;
}

std::string real_str(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string layers_str(const std::vector<int>& layers) {
  std::string s;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(layers[i]);
  }
  return s;
}

const char* const kAgentKeys[] = {"hidden_layers", "hidden_activation", "gamma",
                                  "tau",           "actor_lr",          "critic_lr",
                                  "explore_eps",   "explore_noise_std", "action_l2"};

void apply_agent_key(DdpgConfig& c, const std::string& key, std::string_view field,
                     std::string_view v) {
  if (field == "hidden_layers") {
    c.hidden_layers = parse_layers(key, v);
  } else if (field == "hidden_activation") {
    if (v == "relu") {
      c.hidden_activation = nn::Activation::relu;
    } else if (v == "tanh") {
      c.hidden_activation = nn::Activation::tanh;
    } else {
      throw ConfigError(key, "expected relu or tanh, got '" + std::string(v) + "'");
    }
  } else if (field == "gamma") {
    c.gamma = parse_real(key, v);
  } else if (field == "tau") {
    c.tau = parse_real(key, v);
  } else if (field == "actor_lr") {
    c.actor_lr = parse_real(key, v);
  } else if (field == "critic_lr") {
    c.critic_lr = parse_real(key, v);
  } else if (field == "explore_eps") {
    c.explore_eps = parse_real(key, v);
  } else if (field == "explore_noise_std") {
    c.explore_noise_std = parse_real(key, v);
  } else if (field == "action_l2") {
    c.action_l2 = parse_real(key, v);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

std::string agent_value(const DdpgConfig& c, std::string_view field) {
  if (field == "hidden_layers") return layers_str(c.hidden_layers);
  if (field == "hidden_activation") return std::string(nn::to_string(c.hidden_activation));
  if (field == "gamma") return real_str(c.gamma);
  if (field == "tau") return real_str(c.tau);
  if (field == "actor_lr") return real_str(c.actor_lr);
  if (field == "critic_lr") return real_str(c.critic_lr);
  if (field == "explore_eps") return real_str(c.explore_eps);
  if (field == "explore_noise_std") return real_str(c.explore_noise_std);
  return real_str(c.action_l2);
}

void apply_key(DtdConfig& c, const std::string& key, std::string_view v) {
  if (key == "env") {
    c.env = std::string(v);
  } else if (key == "epochs") {
    c.epochs = parse_int32(key, v);
  } else if (key == "episodes_per_epoch") {
    c.episodes_per_epoch = parse_int32(key, v);
  } else if (key == "sub_episodes") {
    c.sub_episodes = parse_int32(key, v);
  } else if (key == "horizon") {
    c.horizon = parse_int32(key, v);
  } else if (key == "trainings_per_epoch") {
    c.trainings_per_epoch = parse_int32(key, v);
  } else if (key == "batch_size") {
    c.batch_size = parse_int32(key, v);
  } else if (key == "relabel_prob") {
    c.relabel_prob = parse_real(key, v);
  } else if (key == "sigma") {
    c.schedule.sigma = parse_real(key, v);
  } else if (key == "eps_start") {
    c.schedule.eps_start = parse_real(key, v);
  } else if (key == "eps_end") {
    c.schedule.eps_end = parse_real(key, v);
  } else if (key == "anneal_epochs") {
    c.schedule.anneal_epochs = parse_int32(key, v);
  } else if (key == "buffer_capacity") {
    c.buffer_capacity = parse_int32(key, v);
  } else if (key == "eval_episodes") {
    c.eval_episodes = parse_int32(key, v);
  } else if (key == "seed") {
    const long long s = parse_int(key, v);
    if (s < 0) throw ConfigError(key, "must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_int32(key, v);
  } else if (key == "record_wall_time") {
    c.record_wall_time = parse_bool(key, v);
  } else if (key.starts_with("low_")) {
    apply_agent_key(c.low, key, std::string_view(key).substr(4), v);
  } else if (key.starts_with("high_")) {
    apply_agent_key(c.high, key, std::string_view(key).substr(5), v);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k = {
        {"env", "environment: planar-push, pick-place or block-rotate (planar-push)"},
        {"epochs", "training epochs (100)"},
        {"episodes_per_epoch", "exploration episodes collected per epoch (50)"},
        {"sub_episodes", "sub-episodes per episode; 1 disables the hierarchy (2, rotate 4)"},
        {"horizon", "steps per episode, divisible by sub_episodes (50, rotate 48)"},
        {"trainings_per_epoch", "update iterations per epoch (40)"},
        {"batch_size", "samples per update (1024)"},
        {"relabel_prob", "probability of hindsight relabeling a sample (0.8)"},
        {"sigma", "std of sub-goal perturbations in goal units (0.1, rotate 0.5)"},
        {"eps_start", "initial perturbation probability (1.0)"},
        {"eps_end", "final perturbation probability (0.2)"},
        {"anneal_epochs", "epochs over which the perturbation probability decays (epochs/2)"},
        {"buffer_capacity", "replay capacity in episodes (10000)"},
        {"eval_episodes", "noise-free evaluation episodes after each epoch (10)"},
        {"seed", "base random seed (0)"},
        {"checkpoint_every", "keep a checkpoint every k epochs; 0 keeps only epoch 0 (1)"},
        {"record_wall_time", "write measured epoch time into metrics.csv (false)"},
    };
    for (const char* level : {"low", "high"}) {
      for (const char* field : kAgentKeys) {
        k.push_back({std::string(level) + "_" + field,
                     std::string(level) + "-level agent " + field});
      }
    }
    return k;
  }();
  return keys;
}

DtdConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key: value'");
    }
    const std::string key(trim(line.substr(0, colon)));
    const std::string value(trim(line.substr(colon + 1)));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    if (value.empty()) throw ConfigError(key, "missing value");
    if (!entries.emplace(key, value).second) throw ConfigError(key, "given more than once");
  }

  const auto env_it = entries.find("env");
  DtdConfig c = default_config(env_it == entries.end() ? "planar-push" : env_it->second);
  for (const auto& [key, value] : entries) apply_key(c, key, value);
  if (!entries.contains("anneal_epochs")) c.schedule.anneal_epochs = std::max(1, c.epochs / 2);
  c.validate();
  return c;
}

DtdConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("", "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const DtdConfig& c) {
  std::ostringstream out;
  out << "env: " << c.env << '\n'
      << "epochs: " << c.epochs << '\n'
      << "episodes_per_epoch: " << c.episodes_per_epoch << '\n'
      << "sub_episodes: " << c.sub_episodes << '\n'
      << "horizon: " << c.horizon << '\n'
      << "trainings_per_epoch: " << c.trainings_per_epoch << '\n'
      << "batch_size: " << c.batch_size << '\n'
      << "relabel_prob: " << real_str(c.relabel_prob) << '\n'
      << "sigma: " << real_str(c.schedule.sigma) << '\n'
      << "eps_start: " << real_str(c.schedule.eps_start) << '\n'
      << "eps_end: " << real_str(c.schedule.eps_end) << '\n'
      << "anneal_epochs: " << c.schedule.anneal_epochs << '\n'
      << "buffer_capacity: " << c.buffer_capacity << '\n'
      << "eval_episodes: " << c.eval_episodes << '\n'
      << "seed: " << c.seed << '\n'
      << "checkpoint_every: " << c.checkpoint_every << '\n'
      << "record_wall_time: " << (c.record_wall_time ? "true" : "false") << '\n';
  for (const auto& [prefix, agent] : {std::pair{"low_", &c.low}, std::pair{"high_", &c.high}}) {
    for (const char* field : kAgentKeys) {
      out << prefix << field << ": " << agent_value(*agent, field) << '\n';
    }
  }
  return out.str();
}

}  // namespace dtd
