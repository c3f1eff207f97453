#include "lfbm/checkpoint.hpp"

#include "lfbm/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace lfbm {

using nlohmann::json;

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::LeakyReLU: return "leaky_relu";
  }
  return "identity";
}

Activation activation_from(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  if (s == "leaky_relu") return Activation::LeakyReLU;
  throw DataError("checkpoint: unknown activation '" + s + "'");
}

json opt_meta(const AdamState& s) {
  return {{"lr", s.options.lr},         {"beta1", s.options.beta1}, {"beta2", s.options.beta2},
          {"eps", s.options.eps},       {"decay", s.options.decay}, {"t", s.t},
          {"epochs_completed", s.epochs_completed}};
}

AdamState opt_from(const json& j) {
  AdamState s(AdamOptions{j.at("lr").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
                          j.at("eps").get<double>(), j.at("decay").get<double>()});
  s.t = j.at("t").get<long long>();
  s.epochs_completed = j.at("epochs_completed").get<long long>();
  return s;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void array(const std::string& name, const Matrix& m) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> b, std::string path) : b_(std::move(b)), path_(std::move(path)) {}
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{b_[off_ + static_cast<std::size_t>(i)]} << (8 * i);
    off_ += static_cast<std::size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(off_), b_.begin() + static_cast<std::ptrdiff_t>(off_ + n));
    off_ += n;
    return s;
  }
  std::size_t offset() const { return off_; }
  bool done() const { return off_ == b_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint '" + path_ + "': " + what + " at byte offset " + std::to_string(off_));
  }

 private:
  void need(std::size_t n) {
    if (off_ + n > b_.size()) fail("truncated file");
  }
  std::vector<unsigned char> b_;
  std::string path_;
  std::size_t off_ = 0;
};

void write_group(Writer& w, const std::string& prefix, const ParamGroup& g) {
  for (const auto& [name, t] : g) w.array(prefix + name, t.value());
}

void write_opt(Writer& w, const std::string& group, const AdamState& s) {
  for (const auto& [name, m] : s.m) w.array("opt/" + group + "/m/" + name, m);
  for (const auto& [name, v] : s.v) w.array("opt/" + group + "/v/" + name, v);
}

std::string shape_str(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void fill_group(ParamGroup& g, const std::string& prefix, std::map<std::string, Matrix>& arrays,
                const std::string& path) {
  for (auto& [name, t] : g) {
    auto it = arrays.find(prefix + name);
    if (it == arrays.end()) throw DataError("checkpoint '" + path + "': missing parameter '" + prefix + name + "'");
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw DataError("checkpoint '" + path + "': parameter '" + prefix + name + "' has shape " +
                      shape_str(it->second.rows(), it->second.cols()) + ", model expects " +
                      shape_str(t.rows(), t.cols()));
    }
    t.mutable_value() = it->second;
    arrays.erase(it);
  }
}

void fill_opt(AdamState& s, const std::string& group, std::map<std::string, Matrix>& arrays) {
  const std::string pm = "opt/" + group + "/m/";
  const std::string pv = "opt/" + group + "/v/";
  for (auto it = arrays.begin(); it != arrays.end();) {
    if (it->first.rfind(pm, 0) == 0) {
      s.m[it->first.substr(pm.size())] = it->second;
      it = arrays.erase(it);
    } else if (it->first.rfind(pv, 0) == 0) {
      s.v[it->first.substr(pv.size())] = it->second;
      it = arrays.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelState& state, const CheckpointInfo& info) {
  const FlowConfig& fc = state.prior.config();
  const GeneratorConfig& gc = state.gen.config();
  json meta = {
      {"byte_order", "little"},
      {"mode", info.mode},
      {"config_hash", info.config_hash},
      {"config", info.config},
      {"iteration", state.iteration},
      {"prior", {{"dim", fc.dim}, {"depth", fc.depth}, {"hidden", fc.hidden}, {"clamp", fc.clamp},
                 {"trainable", state.prior_trainable}, {"actnorm_initialized", state.prior.actnorm_initialized()}}},
      {"generator", {{"latent_dim", gc.latent_dim}, {"data_dim", gc.data_dim}, {"hidden", gc.hidden},
                     {"sigma", gc.sigma}, {"output", activation_name(gc.output)}}},
      {"optimizers", {{"prior", opt_meta(state.prior_opt)}, {"generator", opt_meta(state.gen_opt)},
                      {"inference", opt_meta(state.inference_opt)}}},
  };
  if (state.posterior) {
    const PosteriorNetConfig& pc = state.posterior->config();
    meta["posterior"] = {{"data_dim", pc.data_dim},       {"latent_dim", pc.latent_dim},
                         {"hidden", pc.hidden},           {"flow_steps", pc.flow_steps},
                         {"flow_hidden", pc.flow_hidden}, {"logvar_min", pc.logvar_min},
                         {"logvar_max", pc.logvar_max}};
  }

  Writer w;
  w.bytes("LFBM");
  w.u32(kCheckpointVersion);
  const std::string text = meta.dump();
  w.u64(text.size());
  w.bytes(text);
  std::uint32_t count = static_cast<std::uint32_t>(state.prior.params().size() + state.gen.params().size());
  for (const AdamState* s : {&state.prior_opt, &state.gen_opt, &state.inference_opt}) {
    count += static_cast<std::uint32_t>(s->m.size() + s->v.size());
  }
  if (state.posterior) count += static_cast<std::uint32_t>(state.posterior->params().size());
  w.u32(count);
  write_group(w, "prior/", state.prior.params());
  write_group(w, "generator/", state.gen.params());
  if (state.posterior) write_group(w, "posterior/", state.posterior->params());
  write_opt(w, "prior", state.prior_opt);
  write_opt(w, "generator", state.gen_opt);
  write_opt(w, "inference", state.inference_opt);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint '" + tmp + "'");
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw DataError("write failed for checkpoint '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw DataError("cannot move checkpoint into '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path, const ShapeExpectation* expect,
                                 const std::string* expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  Reader r({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}, path);
  if (r.bytes(4) != "LFBM") throw DataError("checkpoint '" + path + "': bad magic at byte offset 0");
  const auto version = static_cast<std::uint32_t>(r.uint(4));
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint '" + path + "': format version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  const std::uint64_t meta_len = r.uint(8);
  json meta;
  try {
    meta = json::parse(r.bytes(static_cast<std::size_t>(meta_len)));
  } catch (const json::exception& e) {
    r.fail(std::string("corrupt metadata (") + e.what() + ")");
  }
  const auto count = static_cast<std::uint32_t>(r.uint(4));
  std::map<std::string, Matrix> arrays;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.bytes(static_cast<std::size_t>(r.uint(4)));
    const std::uint64_t rows = r.uint(8);
    const std::uint64_t cols = r.uint(8);
    if (rows > (1u << 28) || cols > (1u << 28)) r.fail("implausible array shape for '" + name + "'");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    arrays[name] = std::move(m);
  }
  if (!r.done()) r.fail("trailing bytes");

  LoadedCheckpoint out;
  try {
    const json& pj = meta.at("prior");
    const json& gj = meta.at("generator");
    FlowConfig fc{pj.at("dim").get<int>(), pj.at("depth").get<int>(), pj.at("hidden").get<int>(),
                  pj.at("clamp").get<double>()};
    GeneratorConfig gc;
    gc.latent_dim = gj.at("latent_dim").get<int>();
    gc.data_dim = gj.at("data_dim").get<int>();
    gc.hidden = gj.at("hidden").get<std::vector<int>>();
    gc.sigma = gj.at("sigma").get<double>();
    gc.output = activation_from(gj.at("output").get<std::string>());
    if (expect) {
      if ((expect->latent_dim && expect->latent_dim != fc.dim) || (expect->data_dim && expect->data_dim != gc.data_dim) ||
          (expect->flow_depth && expect->flow_depth != fc.depth)) {
        throw DataError("checkpoint '" + path + "' holds a model with latent_dim " + std::to_string(fc.dim) +
                        ", data_dim " + std::to_string(gc.data_dim) + ", flow_depth " + std::to_string(fc.depth) +
                        "; run expects latent_dim " + std::to_string(expect->latent_dim) + ", data_dim " +
                        std::to_string(expect->data_dim) + ", flow_depth " + std::to_string(expect->flow_depth));
      }
    }
    out.state.prior = FlowModel(fc, 0);
    out.state.prior.set_actnorm_initialized(pj.at("actnorm_initialized").get<bool>());
    out.state.prior_trainable = pj.at("trainable").get<bool>();
    out.state.gen = Generator(gc, 0);
    fill_group(out.state.prior.params(), "prior/", arrays, path);
    fill_group(out.state.gen.params(), "generator/", arrays, path);
    if (meta.contains("posterior")) {
      const json& qj = meta.at("posterior");
      PosteriorNetConfig qc;
      qc.data_dim = qj.at("data_dim").get<int>();
      qc.latent_dim = qj.at("latent_dim").get<int>();
      qc.hidden = qj.at("hidden").get<std::vector<int>>();
      qc.flow_steps = qj.at("flow_steps").get<int>();
      qc.flow_hidden = qj.at("flow_hidden").get<int>();
      qc.logvar_min = qj.at("logvar_min").get<double>();
      qc.logvar_max = qj.at("logvar_max").get<double>();
      out.state.posterior = PosteriorNet(qc, 0);
      fill_group(out.state.posterior->params(), "posterior/", arrays, path);
    }
    const json& oj = meta.at("optimizers");
    out.state.prior_opt = opt_from(oj.at("prior"));
    out.state.gen_opt = opt_from(oj.at("generator"));
    out.state.inference_opt = opt_from(oj.at("inference"));
    fill_opt(out.state.prior_opt, "prior", arrays);
    fill_opt(out.state.gen_opt, "generator", arrays);
    fill_opt(out.state.inference_opt, "inference", arrays);
    out.state.iteration = meta.at("iteration").get<long long>();
    out.info.mode = meta.at("mode").get<std::string>();
    out.info.config_hash = meta.at("config_hash").get<std::string>();
    out.info.config = meta.at("config");
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path + "': invalid metadata (" + e.what() + ")");
  } catch (const ContractError& e) {
    throw DataError("checkpoint '" + path + "': invalid model description (" + e.what() + ")");
  }
  if (!arrays.empty()) throw DataError("checkpoint '" + path + "': unexpected array '" + arrays.begin()->first + "'");
  if (expected_hash && *expected_hash != out.info.config_hash) {
    out.warnings.push_back("checkpoint config hash " + out.info.config_hash + " differs from run config hash " +
                           *expected_hash);
  }
  return out;
}

ModelState clone(const ModelState& s) {
  ModelState out = s;
  out.prior.params() = s.prior.params().clone();
  out.gen.params() = s.gen.params().clone();
  if (s.posterior) out.posterior->params() = s.posterior->params().clone();
  return out;
}

}  // namespace lfbm
