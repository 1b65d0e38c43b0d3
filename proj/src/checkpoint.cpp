#include "dtd/checkpoint.hpp"

#include "dtd/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dtd {

namespace {

struct Record {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void record(std::string_view name, std::vector<std::uint32_t> dims,
              const std::vector<double>& values) {
    str(name);
    u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) u32(d);
    for (double v : values) f64(v);
  }
  void scalar(std::string_view name, double v) { record(name, {}, {v}); }
  void vector(std::string_view name, const Vec& v) {
    record(name, {static_cast<std::uint32_t>(v.size())}, std::vector<double>(v.begin(), v.end()));
  }
  void matrix(std::string_view name, const Mat& m) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
    }
    record(name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
           values);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  bool at_end() const { return pos_ == in_.size(); }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(in_[pos_++])} << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_++])} << (8 * i);
    return std::bit_cast<double>(bits);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint: truncated file");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

// Config fields, each stored as a scalar record.
struct ConfigCodec {
  std::string name;
  std::function<double(const DtdConfig&)> get;
  std::function<void(DtdConfig&, double)> set;
};

const std::vector<ConfigCodec>& config_codecs() {
  static const std::vector<ConfigCodec> codecs = [] {
    std::vector<ConfigCodec> c;
    auto add_int = [&c](std::string name, int DtdConfig::*field) {
      c.push_back({std::move(name), [field](const DtdConfig& k) { return double(k.*field); },
                   [field](DtdConfig& k, double v) { k.*field = static_cast<int>(v); }});
    };
    auto add_double = [&c](std::string name, double DtdConfig::*field) {
      c.push_back({std::move(name), [field](const DtdConfig& k) { return k.*field; },
                   [field](DtdConfig& k, double v) { k.*field = v; }});
    };
    add_int("epochs", &DtdConfig::epochs);
    add_int("episodes_per_epoch", &DtdConfig::episodes_per_epoch);
    add_int("sub_episodes", &DtdConfig::sub_episodes);
    add_int("horizon", &DtdConfig::horizon);
    add_int("trainings_per_epoch", &DtdConfig::trainings_per_epoch);
    add_int("batch_size", &DtdConfig::batch_size);
    add_double("relabel_prob", &DtdConfig::relabel_prob);
    add_int("buffer_capacity", &DtdConfig::buffer_capacity);
    add_int("eval_episodes", &DtdConfig::eval_episodes);
    add_int("checkpoint_every", &DtdConfig::checkpoint_every);
    c.push_back({"record_wall_time", [](const DtdConfig& k) { return k.record_wall_time ? 1.0 : 0.0; },
                 [](DtdConfig& k, double v) { k.record_wall_time = v != 0.0; }});
    // u64 does not fit a double exactly; store it as two 32-bit halves.
    c.push_back({"seed_hi", [](const DtdConfig& k) { return double(k.seed >> 32); },
                 [](DtdConfig& k, double v) {
                   k.seed = (k.seed & 0xffffffffULL) | (static_cast<std::uint64_t>(v) << 32);
                 }});
    c.push_back({"seed_lo", [](const DtdConfig& k) { return double(k.seed & 0xffffffffULL); },
                 [](DtdConfig& k, double v) {
                   k.seed = (k.seed & ~0xffffffffULL) | static_cast<std::uint64_t>(v);
                 }});
    c.push_back({"sigma", [](const DtdConfig& k) { return k.schedule.sigma; },
                 [](DtdConfig& k, double v) { k.schedule.sigma = v; }});
    c.push_back({"eps_start", [](const DtdConfig& k) { return k.schedule.eps_start; },
                 [](DtdConfig& k, double v) { k.schedule.eps_start = v; }});
    c.push_back({"eps_end", [](const DtdConfig& k) { return k.schedule.eps_end; },
                 [](DtdConfig& k, double v) { k.schedule.eps_end = v; }});
    c.push_back({"anneal_epochs", [](const DtdConfig& k) { return double(k.schedule.anneal_epochs); },
                 [](DtdConfig& k, double v) { k.schedule.anneal_epochs = static_cast<int>(v); }});
    for (const char* level : {"low", "high"}) {
      auto pick = [level](auto& k) -> auto& { return level[0] == 'l' ? k.low : k.high; };
      auto add_level = [&c, level, pick](const char* name, double DdpgConfig::*field) {
        c.push_back({std::string(level) + "_" + name,
                     [pick, field](const DtdConfig& k) { return pick(k).*field; },
                     [pick, field](DtdConfig& k, double v) { pick(k).*field = v; }});
      };
      add_level("gamma", &DdpgConfig::gamma);
      add_level("tau", &DdpgConfig::tau);
      add_level("actor_lr", &DdpgConfig::actor_lr);
      add_level("critic_lr", &DdpgConfig::critic_lr);
      add_level("explore_eps", &DdpgConfig::explore_eps);
      add_level("explore_noise_std", &DdpgConfig::explore_noise_std);
      add_level("action_l2", &DdpgConfig::action_l2);
      c.push_back({std::string(level) + "_hidden_activation",
                   [pick](const DtdConfig& k) { return double(static_cast<int>(pick(k).hidden_activation)); },
                   [pick](DtdConfig& k, double v) {
                     const int code = static_cast<int>(v);
                     if (code < 0 || code > static_cast<int>(nn::Activation::linear) || code != v) {
                       throw FormatError("checkpoint: bad activation code");
                     }
                     pick(k).hidden_activation = static_cast<nn::Activation>(code);
                   }});
    }
    return c;
  }();
  return codecs;
}

void write_net(Writer& w, const std::string& prefix, const nn::MlpParams& p) {
  for (std::size_t k = 0; k < p.num_layers(); ++k) {
    w.matrix(prefix + "/w" + std::to_string(k), p.weights[k]);
    w.vector(prefix + "/b" + std::to_string(k), p.biases[k]);
  }
}

void write_grads(Writer& w, const std::string& prefix, const nn::ParamGrads& g) {
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    w.matrix(prefix + "/w" + std::to_string(k), g.weights[k]);
    w.vector(prefix + "/b" + std::to_string(k), g.biases[k]);
  }
}

void write_agent(Writer& w, const std::string& level, const DdpgAgent& a) {
  write_net(w, level + "/actor", a.actor);
  write_net(w, level + "/critic", a.critic);
  write_net(w, level + "/actor_target", a.actor_target);
  write_net(w, level + "/critic_target", a.critic_target);
  for (const auto& [name, opt] : {std::pair{"actor_opt", &a.actor_opt}, std::pair{"critic_opt", &a.critic_opt}}) {
    const std::string p = level + "/" + name;
    write_grads(w, p + "/m", opt->first_moment);
    write_grads(w, p + "/v", opt->second_moment);
    w.scalar(p + "/step", static_cast<double>(opt->step_count));
  }
  w.scalar(level + "/normalizer/count", a.normalizer.count());
  w.vector(level + "/normalizer/mean", a.normalizer.mean());
  w.vector(level + "/normalizer/m2", a.normalizer.sum_sq_dev());
}

class RecordSet {
 public:
  explicit RecordSet(std::map<std::string, Record> records) : records_(std::move(records)) {}

  const Record& get(const std::string& name) const {
    auto it = records_.find(name);
    if (it == records_.end()) throw FormatError("checkpoint: missing record '" + name + "'");
    return it->second;
  }
  double scalar(const std::string& name) const {
    const Record& r = get(name);
    if (!r.dims.empty()) throw ShapeError("checkpoint: record '" + name + "' is not a scalar");
    return r.values[0];
  }
  void read_vector(const std::string& name, Vec& out) const {
    const Record& r = get(name);
    if (r.dims.size() != 1 || r.dims[0] != static_cast<std::uint32_t>(out.size())) {
      throw ShapeError("checkpoint: record '" + name + "' has the wrong shape");
    }
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = r.values[static_cast<std::size_t>(i)];
  }
  void read_matrix(const std::string& name, Mat& out) const {
    const Record& r = get(name);
    if (r.dims.size() != 2 || r.dims[0] != static_cast<std::uint32_t>(out.rows()) ||
        r.dims[1] != static_cast<std::uint32_t>(out.cols())) {
      throw ShapeError("checkpoint: record '" + name + "' has the wrong shape");
    }
    std::size_t i = 0;
    for (Eigen::Index row = 0; row < out.rows(); ++row) {
      for (Eigen::Index col = 0; col < out.cols(); ++col) out(row, col) = r.values[i++];
    }
  }

 private:
  std::map<std::string, Record> records_;
};

void read_net(const RecordSet& rs, const std::string& prefix, nn::MlpParams& p) {
  for (std::size_t k = 0; k < p.num_layers(); ++k) {
    rs.read_matrix(prefix + "/w" + std::to_string(k), p.weights[k]);
    rs.read_vector(prefix + "/b" + std::to_string(k), p.biases[k]);
  }
  // Extra layers in the file mean the stored architecture differs.
  try {
    rs.get(prefix + "/w" + std::to_string(p.num_layers()));
  } catch (const FormatError&) {
    return;
  }
  throw ShapeError("checkpoint: '" + prefix + "' has more layers than the configuration");
}

void read_grads(const RecordSet& rs, const std::string& prefix, nn::ParamGrads& g) {
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    rs.read_matrix(prefix + "/w" + std::to_string(k), g.weights[k]);
    Vec b = g.biases[k];
    rs.read_vector(prefix + "/b" + std::to_string(k), b);
    g.biases[k] = b;
  }
}

void read_agent(const RecordSet& rs, const std::string& level, DdpgAgent& a) {
  read_net(rs, level + "/actor", a.actor);
  read_net(rs, level + "/critic", a.critic);
  read_net(rs, level + "/actor_target", a.actor_target);
  read_net(rs, level + "/critic_target", a.critic_target);
  for (const auto& [name, opt] : {std::pair{"actor_opt", &a.actor_opt}, std::pair{"critic_opt", &a.critic_opt}}) {
    const std::string p = level + "/" + name;
    read_grads(rs, p + "/m", opt->first_moment);
    read_grads(rs, p + "/v", opt->second_moment);
    opt->step_count = static_cast<std::uint64_t>(rs.scalar(p + "/step"));
  }
  Vec mean(a.input_dim());
  Vec m2(a.input_dim());
  rs.read_vector(level + "/normalizer/mean", mean);
  rs.read_vector(level + "/normalizer/m2", m2);
  a.normalizer.restore(rs.scalar(level + "/normalizer/count"), mean, m2);
}

}  // namespace

std::string encode_checkpoint(const DtdConfig& config, const Agents& agents, int epoch) {
  Writer w;
  for (char c : kCheckpointMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kCheckpointVersion);
  w.str(config.env);
  w.scalar("meta/epoch", epoch);
  for (const auto& codec : config_codecs()) w.scalar("config/" + codec.name, codec.get(config));
  for (const auto& [level, cfg] : {std::pair{"low", &config.low}, std::pair{"high", &config.high}}) {
    std::vector<double> sizes(cfg->hidden_layers.begin(), cfg->hidden_layers.end());
    w.record(std::string("config/") + level + "_hidden_layers",
             {static_cast<std::uint32_t>(sizes.size())}, sizes);
  }
  write_agent(w, "low", agents.low);
  write_agent(w, "high", agents.high);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (not a checkpoint file)");
  }
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::string env = r.str();

  std::map<std::string, Record> records;
  while (!r.at_end()) {
    std::string name = r.str();
    Record rec;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint: implausible rank in record '" + name + "'");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      rec.dims.push_back(r.u32());
      count *= rec.dims.back();
    }
    if (count > bytes.size() / 8) throw FormatError("checkpoint: truncated file");
    rec.values.resize(count);
    for (double& v : rec.values) v = r.f64();
    if (!records.emplace(std::move(name), std::move(rec)).second) {
      throw FormatError("checkpoint: duplicate record");
    }
  }
  const RecordSet rs(std::move(records));

  Checkpoint ckpt;
  try {
    env_spec(env);
  } catch (const Error&) {
    throw FormatError("checkpoint: unknown environment '" + env + "'");
  }
  ckpt.config = default_config(env);
  ckpt.epoch = static_cast<int>(rs.scalar("meta/epoch"));
  for (const auto& codec : config_codecs()) codec.set(ckpt.config, rs.scalar("config/" + codec.name));
  for (const auto& [level, cfg] : {std::pair{"low", &ckpt.config.low}, std::pair{"high", &ckpt.config.high}}) {
    const Record& rec = rs.get(std::string("config/") + level + "_hidden_layers");
    if (rec.dims.size() != 1) throw ShapeError("checkpoint: hidden layer record is not a vector");
    cfg->hidden_layers.assign(rec.values.begin(), rec.values.end());
  }
  try {
    ckpt.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: stored configuration is invalid: ") + e.what());
  }

  ckpt.agents = make_agents(env_spec(env), ckpt.config);
  read_agent(rs, "low", ckpt.agents.low);
  read_agent(rs, "high", ckpt.agents.high);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const DtdConfig& config,
                     const Agents& agents, int epoch) {
  const std::string bytes = encode_checkpoint(config, agents, epoch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

void check_compatible(const Checkpoint& ckpt, const EnvSpec& spec) {
  const DdpgAgent& low = ckpt.agents.low;
  if (low.obs_dim != spec.observation_dim || low.goal_dim != spec.goal_dim ||
      low.action_dim() != spec.action_dim) {
    throw ShapeError("checkpoint was trained on '" + ckpt.config.env + "' (obs " +
                     std::to_string(low.obs_dim) + ", goal " + std::to_string(low.goal_dim) +
                     ", action " + std::to_string(low.action_dim()) + ") and does not fit '" +
                     spec.name + "'");
  }
}

}  // namespace dtd
