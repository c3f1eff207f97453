#include "lfbm/config.hpp"

#include "lfbm/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace lfbm {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for '" + std::string(key) + "' in " + where);
  }
}

TrainMode parse_mode(const std::string& s) {
  if (s == "mcmc") return TrainMode::Mcmc;
  if (s == "vae") return TrainMode::Vae;
  if (s == "recovery") return TrainMode::Recovery;
  throw ConfigError("mode must be one of mcmc, vae, recovery (got '" + s + "')");
}

Activation parse_output(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("decoder_output must be tanh or identity (got '" + s + "')");
}

std::vector<Vector> to_vectors(const std::vector<std::vector<double>>& rows) {
  std::vector<Vector> out;
  for (const auto& r : rows) out.push_back(Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size())));
  return out;
}

std::vector<std::vector<double>> from_vectors(const std::vector<Vector>& v) {
  std::vector<std::vector<double>> out;
  for (const auto& r : v) out.emplace_back(r.data(), r.data() + r.size());
  return out;
}

void parse_dataset(const json& j, DatasetConfig& d) {
  reject_unknown(j, {"kind", "n", "means", "stddevs", "weights", "inner_radius", "outer_radius", "noise", "images",
                     "labels", "limit", "exclude_labels"},
                 "dataset");
  read(j, "kind", d.kind, "dataset");
  read(j, "n", d.n, "dataset");
  if (d.kind == "gaussian_mixture") {
    std::vector<std::vector<double>> means = from_vectors(d.mixture.means);
    read(j, "means", means, "dataset");
    d.mixture.means = to_vectors(means);
    read(j, "stddevs", d.mixture.stddevs, "dataset");
    read(j, "weights", d.mixture.weights, "dataset");
  } else if (d.kind == "two_rings") {
    read(j, "inner_radius", d.rings.inner_radius, "dataset");
    read(j, "outer_radius", d.rings.outer_radius, "dataset");
    read(j, "noise", d.rings.noise, "dataset");
  } else if (d.kind == "idx") {
    read(j, "images", d.images, "dataset");
    read(j, "labels", d.labels, "dataset");
    read(j, "limit", d.limit, "dataset");
    read(j, "exclude_labels", d.exclude_labels, "dataset");
    if (d.images.empty()) throw ConfigError("dataset kind idx requires 'images'");
  } else {
    throw ConfigError("dataset kind must be gaussian_mixture, two_rings or idx (got '" + d.kind + "')");
  }
  for (const char* k : {"means", "stddevs", "weights"})
    if (j.contains(k) && d.kind != "gaussian_mixture") throw ConfigError(std::string("'") + k + "' needs gaussian_mixture");
  for (const char* k : {"inner_radius", "outer_radius", "noise"})
    if (j.contains(k) && d.kind != "two_rings") throw ConfigError(std::string("'") + k + "' needs two_rings");
  for (const char* k : {"images", "labels", "limit", "exclude_labels"})
    if (j.contains(k) && d.kind != "idx") throw ConfigError(std::string("'") + k + "' needs dataset kind idx");
}

MaskSpec parse_mask(const json& j) {
  reject_unknown(j, {"kind", "params", "seed"}, "mask");
  MaskSpec m;
  std::string kind;
  read(j, "kind", kind, "mask");
  read(j, "seed", m.seed, "mask");
  const json params = j.contains("params") ? j.at("params") : json::object();
  if (kind == "salt_pepper") {
    m.kind = MaskSpec::Kind::SaltPepper;
    reject_unknown(params, {"fraction"}, "mask.params");
    read(params, "fraction", m.fraction, "mask.params");
  } else if (kind == "region") {
    m.kind = MaskSpec::Kind::Region;
    reject_unknown(params, {"side", "placement"}, "mask.params");
    read(params, "side", m.side, "mask.params");
    std::string placement = "random";
    read(params, "placement", placement, "mask.params");
    if (placement == "center") {
      m.placement = MaskSpec::Placement::Center;
    } else if (placement == "random") {
      m.placement = MaskSpec::Placement::Random;
    } else {
      throw ConfigError("mask placement must be center or random");
    }
  } else {
    throw ConfigError("mask kind must be salt_pepper or region (got '" + kind + "')");
  }
  return m;
}

}  // namespace

RunConfig profile_defaults(const std::string& profile, TrainMode mode) {
  RunConfig c;
  c.profile = profile;
  TrainConfig& t = c.train;
  t.mode = mode;
  t.batch_size = 100;
  t.langevin.step_size = 0.1;
  if (profile == "svhn") {
    t.langevin.steps = 20;
    c.test_steps = 400;
    t.latent_dim = 100;
    t.lr_prior = t.lr_generator = 0.0004;
  } else if (profile == "cifar10") {
    t.langevin.steps = 40;
    c.test_steps = 800;
    t.latent_dim = 128;
    t.lr_prior = t.lr_generator = 0.00038;
  } else if (profile == "celeba") {
    t.langevin.steps = 20;
    c.test_steps = 400;
    t.latent_dim = 100;
    t.lr_prior = t.lr_generator = 0.0003;
  } else {
    throw ConfigError("profile must be svhn, cifar10 or celeba (got '" + profile + "')");
  }
  t.sigma = 1.0;
  t.decay = 0.998;
  if (mode == TrainMode::Vae) {
    t.decay = 0.99;
    if (profile == "svhn") {
      t.sigma = 0.5;
      t.lr_generator = 0.008;
      t.lr_prior = 0.0006;
      t.lr_inference = 0.0004;
      t.inner_update_steps = 1;
    } else if (profile == "cifar10") {
      t.sigma = 0.25;
      t.lr_generator = 0.002;
      t.lr_prior = 0.0012;
      t.lr_inference = 0.0002;
      t.inner_update_steps = 6;
    } else {
      t.sigma = 0.25;
      t.batch_size = 256;
      t.lr_generator = 0.002;
      t.lr_prior = 0.00015;
      t.lr_inference = 0.0001;
      t.inner_update_steps = 6;
    }
  }
  return c;
}

RunConfig parse_config(const json& j) {
  reject_unknown(j, {"profile", "mode", "dataset", "model", "langevin", "optim", "mask", "seed", "out_dir"},
                 "config");
  std::string profile = "svhn";
  std::string mode = "mcmc";
  read(j, "profile", profile, "config");
  read(j, "mode", mode, "config");
  RunConfig c = profile_defaults(profile, parse_mode(mode));
  TrainConfig& t = c.train;
  read(j, "seed", t.seed, "config");
  read(j, "out_dir", c.out_dir, "config");

  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"latent_dim", "flow_depth", "flow_hidden", "decoder_hidden", "decoder_output", "sigma",
                       "prior", "encoder_hidden"},
                   "model");
    read(m, "latent_dim", t.latent_dim, "model");
    read(m, "flow_depth", t.flow_depth, "model");
    read(m, "flow_hidden", t.flow_hidden, "model");
    read(m, "decoder_hidden", t.decoder_hidden, "model");
    read(m, "sigma", t.sigma, "model");
    std::string output = "tanh";
    read(m, "decoder_output", output, "model");
    t.decoder_output = parse_output(output);
    std::string prior = "flow";
    read(m, "prior", prior, "model");
    if (prior != "flow" && prior != "gaussian") throw ConfigError("model.prior must be flow or gaussian");
    t.prior_trainable = prior == "flow";
    if (m.contains("encoder_hidden") && t.mode != TrainMode::Vae) {
      throw ConfigError("model.encoder_hidden is only valid in vae mode");
    }
    read(m, "encoder_hidden", t.encoder_hidden, "model");
  }
  if (j.contains("langevin")) {
    const json& l = j.at("langevin");
    reject_unknown(l, {"train_steps", "test_steps", "step_size"}, "langevin");
    read(l, "train_steps", t.langevin.steps, "langevin");
    read(l, "test_steps", c.test_steps, "langevin");
    read(l, "step_size", t.langevin.step_size, "langevin");
  }
  if (j.contains("optim")) {
    const json& o = j.at("optim");
    reject_unknown(o, {"lr_prior", "lr_generator", "lr_inference", "decay", "batch_size", "iterations",
                       "inner_update_steps", "log_every", "checkpoint_every_epochs"},
                   "optim");
    for (const char* k : {"lr_inference", "inner_update_steps"}) {
      if (o.contains(k) && t.mode != TrainMode::Vae) {
        throw ConfigError(std::string("optim.") + k + " is only valid in vae mode");
      }
    }
    read(o, "lr_prior", t.lr_prior, "optim");
    read(o, "lr_generator", t.lr_generator, "optim");
    read(o, "lr_inference", t.lr_inference, "optim");
    read(o, "decay", t.decay, "optim");
    read(o, "batch_size", t.batch_size, "optim");
    read(o, "iterations", t.iterations, "optim");
    read(o, "inner_update_steps", t.inner_update_steps, "optim");
    read(o, "log_every", t.log_every, "optim");
    read(o, "checkpoint_every_epochs", t.checkpoint_every_epochs, "optim");
  }
  if (j.contains("mask")) t.mask = parse_mask(j.at("mask"));
  if (c.test_steps < 0) throw ConfigError("langevin.test_steps must be >= 0");
  if (c.dataset.n < 1) throw ConfigError("dataset.n must be >= 1");
  validate(t);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  json dataset = {{"kind", c.dataset.kind}, {"n", c.dataset.n}};
  if (c.dataset.kind == "gaussian_mixture") {
    dataset["means"] = from_vectors(c.dataset.mixture.means);
    dataset["stddevs"] = c.dataset.mixture.stddevs;
    dataset["weights"] = c.dataset.mixture.weights;
  } else if (c.dataset.kind == "two_rings") {
    dataset["inner_radius"] = c.dataset.rings.inner_radius;
    dataset["outer_radius"] = c.dataset.rings.outer_radius;
    dataset["noise"] = c.dataset.rings.noise;
  } else {
    dataset["images"] = c.dataset.images;
    dataset["labels"] = c.dataset.labels;
    dataset["limit"] = c.dataset.limit;
    dataset["exclude_labels"] = c.dataset.exclude_labels;
  }
  json model = {{"latent_dim", t.latent_dim},
                {"flow_depth", t.flow_depth},
                {"flow_hidden", t.flow_hidden},
                {"decoder_hidden", t.decoder_hidden},
                {"decoder_output", t.decoder_output == Activation::Tanh ? "tanh" : "identity"},
                {"sigma", t.sigma},
                {"prior", t.prior_trainable ? "flow" : "gaussian"}};
  json optim = {{"lr_prior", t.lr_prior},     {"lr_generator", t.lr_generator}, {"decay", t.decay},
                {"batch_size", t.batch_size}, {"iterations", t.iterations},     {"log_every", t.log_every},
                {"checkpoint_every_epochs", t.checkpoint_every_epochs}};
  if (t.mode == TrainMode::Vae) {
    model["encoder_hidden"] = t.encoder_hidden;
    optim["lr_inference"] = t.lr_inference;
    optim["inner_update_steps"] = t.inner_update_steps;
  }
  json out = {{"profile", c.profile},
              {"mode", mode_name(t.mode)},
              {"dataset", dataset},
              {"model", model},
              {"langevin", {{"train_steps", t.langevin.steps}, {"test_steps", c.test_steps},
                            {"step_size", t.langevin.step_size}}},
              {"optim", optim},
              {"seed", t.seed},
              {"out_dir", c.out_dir}};
  if (t.mask) {
    const MaskSpec& m = *t.mask;
    json params = m.kind == MaskSpec::Kind::SaltPepper
                      ? json{{"fraction", m.fraction}}
                      : json{{"side", m.side}, {"placement", m.placement == MaskSpec::Placement::Center ? "center" : "random"}};
    out["mask"] = {{"kind", m.kind == MaskSpec::Kind::SaltPepper ? "salt_pepper" : "region"},
                   {"params", params},
                   {"seed", m.seed}};
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("out_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  Dataset ds;
  if (cfg.kind == "gaussian_mixture") {
    ds = gen_gaussian_mixture(cfg.mixture, cfg.n, seed);
  } else if (cfg.kind == "two_rings") {
    ds = gen_two_rings(cfg.rings, cfg.n, seed);
  } else if (cfg.kind == "idx") {
    ds = load_idx(cfg.images, cfg.labels.empty() ? std::nullopt : std::optional<std::string>(cfg.labels));
    if (!cfg.exclude_labels.empty()) {
      if (ds.labels.empty()) throw ConfigError("exclude_labels needs a label file");
      std::vector<Eigen::Index> keep;
      for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (std::find(cfg.exclude_labels.begin(), cfg.exclude_labels.end(), ds.labels[i]) == cfg.exclude_labels.end()) {
          keep.push_back(static_cast<Eigen::Index>(i));
        }
      }
      ds = subset(ds, keep);
    }
    if (cfg.limit > 0 && cfg.limit < ds.size()) {
      std::vector<Eigen::Index> keep(static_cast<std::size_t>(cfg.limit));
      for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<Eigen::Index>(i);
      ds = subset(ds, keep);
    }
  } else {
    throw ConfigError("unknown dataset kind '" + cfg.kind + "'");
  }
  validate(ds);
  return ds;
}

}  // namespace lfbm
