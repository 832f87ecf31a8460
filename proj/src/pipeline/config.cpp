#include "motad/pipeline/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "motad/errors.hpp"

namespace motad::pipeline {

namespace {

using json = nlohmann::json;

// Typed field access over one JSON object; finish() rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + "expected an object");
  }

  void field(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) fail(key, "out of range");
      out = static_cast<int>(x);
    }
  }
  void field(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void field(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void field(const char* key, float& out) {
    double d = out;
    field(key, d);
    out = static_cast<float>(d);
  }
  void field(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void field(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void field(const char* key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(key, "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }

  /// Nested object, or nullptr when absent.
  const json* object(const char* key) { return find(key); }
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!known_.count(k)) throw ValidationError(where() + "unknown key '" + k + "'");
    }
  }

 private:
  const json* find(const char* key) {
    known_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const char* key, const std::string& msg) const {
    throw ValidationError("config key '" + child(key) + "': " + msg);
  }
  std::string where() const { return path_.empty() ? "config: " : "config key '" + path_ + "': "; }

  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

template <class Fn>
void nested(ObjectReader& parent, const char* key, Fn&& fn) {
  if (const json* v = parent.object(key)) {
    ObjectReader r(*v, parent.child(key));
    fn(r);
    r.finish();
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError("config: " + msg);
}

}  // namespace

void PipelineConfig::validate() const {
  require(!root.empty(), "root must not be empty");
  require(dataset.T >= 2, "dataset.T must be at least 2 (flow needs two frames)");
  require(dataset.image_side >= 16 && dataset.image_side % 2 == 0, "dataset.image_side must be even and >= 16");
  require(dataset.n_train >= 0 && dataset.n_val >= 0 && dataset.n_test_nominal >= 0 &&
              dataset.n_anomalous_per_kind >= 0,
          "dataset counts must be non-negative");
  require(dataset.n_train + dataset.n_val + dataset.n_test_nominal + 4 * dataset.n_anomalous_per_kind > 0,
          "dataset must contain at least one execution");
  require(model.side <= dataset.image_side, "model.side must not exceed dataset.image_side");
  require(train.epochs >= 1 && train.batch >= 1 && train.lr > 0.0, "train needs epochs >= 1, batch >= 1, lr > 0");
  require(flow.mask_threshold > 0.0f && flow.mask_threshold <= 1.0f, "flow.mask_threshold must lie in (0, 1]");
  require(flow.mask_dilation >= 0, "flow.mask_dilation must be >= 0");
  require(hmm.n_states >= 1 && hmm.max_iters >= 1 && hmm.tol >= 0.0 && hmm.var_floor > 0.0,
          "hmm needs n_states >= 1, max_iters >= 1, tol >= 0, var_floor > 0");
  require(depth > 0.0, "depth must be positive");
  require(camera_weights.translation >= 0.0 && camera_weights.scale >= 0.0 && camera_weights.rotation >= 0.0,
          "camera_weights must be non-negative");
  require(thresholds.policy == ThresholdPolicy::train_max || (thresholds.e_c >= 0.0 && thresholds.e_b >= 0.0),
          "fixed thresholds must be non-negative");
  require(jobs >= 1, "jobs must be >= 1");
  require(!sweep.A.empty() && !sweep.B.empty(), "sweep.A and sweep.B must be non-empty");
  for (int a : sweep.A) require(a >= 1, "sweep.A entries must be >= 1");
  for (int b : sweep.B) require(b >= 0, "sweep.B entries must be >= 0");
  try {
    range.validate();
    model.validate();
    flow.tvl1.validate();
    if (intrinsics) intrinsics->validate();
  } catch (const InvalidArgument& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

PipelineConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig c;
  ObjectReader r(j, "");
  std::string root = c.root.string();
  r.field("root", root);
  c.root = root;
  r.field("seed", c.seed);
  std::string variant(nn::to_string(c.variant));
  r.field("variant", variant);
  try {
    c.variant = nn::variant_from_string(variant);
  } catch (const InvalidArgument&) {
    throw ValidationError("config key 'variant': unknown variant '" + variant + "'");
  }
  nested(r, "range", [&](ObjectReader& o) {
    o.field("A", c.range.A);
    o.field("B", c.range.B);
    o.field("M", c.range.M);
  });
  nested(r, "model", [&](ObjectReader& o) {
    o.field("side", c.model.side);
    o.field("depth", c.model.depth);
    o.field("base", c.model.base);
    o.field("latent", c.model.latent);
    o.field("beta", c.model.beta);
  });
  nested(r, "train", [&](ObjectReader& o) {
    o.field("epochs", c.train.epochs);
    o.field("batch", c.train.batch);
    o.field("lr", c.train.lr);
  });
  nested(r, "flow", [&](ObjectReader& o) {
    o.field("native_resolution", c.flow.native_resolution);
    o.field("mask_threshold", c.flow.mask_threshold);
    o.field("mask_dilation", c.flow.mask_dilation);
    nested(o, "tvl1", [&](ObjectReader& t) {
      auto& p = c.flow.tvl1;
      t.field("lambda", p.lambda);
      t.field("theta", p.theta);
      t.field("tau", p.tau);
      t.field("n_scales", p.n_scales);
      t.field("zoom", p.zoom);
      t.field("n_warps", p.n_warps);
      t.field("n_iters", p.n_iters);
      t.field("stop_eps", p.stop_eps);
      t.field("median_filter", p.median_filter);
    });
  });
  nested(r, "thresholds", [&](ObjectReader& o) {
    std::string policy = "train_max";
    o.field("policy", policy);
    if (policy == "train_max") {
      c.thresholds.policy = ThresholdPolicy::train_max;
    } else if (policy == "fixed") {
      c.thresholds.policy = ThresholdPolicy::fixed;
    } else {
      throw ValidationError("config key 'thresholds.policy': expected train_max or fixed");
    }
    o.field("e_c", c.thresholds.e_c);
    o.field("e_b", c.thresholds.e_b);
  });
  nested(r, "hmm", [&](ObjectReader& o) {
    o.field("enabled", c.hmm.enabled);
    o.field("n_states", c.hmm.n_states);
    o.field("max_iters", c.hmm.max_iters);
    o.field("tol", c.hmm.tol);
    o.field("var_floor", c.hmm.var_floor);
  });
  nested(r, "dataset", [&](ObjectReader& o) {
    o.field("T", c.dataset.T);
    o.field("image_side", c.dataset.image_side);
    o.field("n_train", c.dataset.n_train);
    o.field("n_val", c.dataset.n_val);
    o.field("n_test_nominal", c.dataset.n_test_nominal);
    o.field("n_anomalous_per_kind", c.dataset.n_anomalous_per_kind);
  });
  nested(r, "sweep", [&](ObjectReader& o) {
    o.field("A", c.sweep.A);
    o.field("B", c.sweep.B);
  });
  r.field("depth", c.depth);
  nested(r, "intrinsics", [&](ObjectReader& o) {
    kinematics::CameraIntrinsics k;
    o.field("fx", k.fx);
    o.field("fy", k.fy);
    o.field("cx", k.cx);
    o.field("cy", k.cy);
    c.intrinsics = k;
  });
  nested(r, "camera_weights", [&](ObjectReader& o) {
    o.field("translation", c.camera_weights.translation);
    o.field("scale", c.camera_weights.scale);
    o.field("rotation", c.camera_weights.rotation);
  });
  r.field("include_warmup", c.include_warmup);
  r.field("jobs", c.jobs);
  std::string log_path;
  r.field("access_log", log_path);
  if (!log_path.empty()) c.access_log = log_path;
  r.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const PipelineConfig& c) {
  const auto& p = c.flow.tvl1;
  json j = {
      {"root", c.root.string()},
      {"seed", c.seed},
      {"variant", std::string(nn::to_string(c.variant))},
      {"range", {{"A", c.range.A}, {"B", c.range.B}, {"M", c.range.M}}},
      {"model",
       {{"side", c.model.side},
        {"depth", c.model.depth},
        {"base", c.model.base},
        {"latent", c.model.latent},
        {"beta", c.model.beta}}},
      {"train", {{"epochs", c.train.epochs}, {"batch", c.train.batch}, {"lr", c.train.lr}}},
      {"flow",
       {{"native_resolution", c.flow.native_resolution},
        {"mask_threshold", c.flow.mask_threshold},
        {"mask_dilation", c.flow.mask_dilation},
        {"tvl1",
         {{"lambda", p.lambda},
          {"theta", p.theta},
          {"tau", p.tau},
          {"n_scales", p.n_scales},
          {"zoom", p.zoom},
          {"n_warps", p.n_warps},
          {"n_iters", p.n_iters},
          {"stop_eps", p.stop_eps},
          {"median_filter", p.median_filter}}}}},
      {"thresholds",
       {{"policy", c.thresholds.policy == ThresholdPolicy::train_max ? "train_max" : "fixed"},
        {"e_c", c.thresholds.e_c},
        {"e_b", c.thresholds.e_b}}},
      {"hmm",
       {{"enabled", c.hmm.enabled},
        {"n_states", c.hmm.n_states},
        {"max_iters", c.hmm.max_iters},
        {"tol", c.hmm.tol},
        {"var_floor", c.hmm.var_floor}}},
      {"dataset",
       {{"T", c.dataset.T},
        {"image_side", c.dataset.image_side},
        {"n_train", c.dataset.n_train},
        {"n_val", c.dataset.n_val},
        {"n_test_nominal", c.dataset.n_test_nominal},
        {"n_anomalous_per_kind", c.dataset.n_anomalous_per_kind}}},
      {"sweep", {{"A", c.sweep.A}, {"B", c.sweep.B}}},
      {"depth", c.depth},
      {"camera_weights",
       {{"translation", c.camera_weights.translation},
        {"scale", c.camera_weights.scale},
        {"rotation", c.camera_weights.rotation}}},
      {"include_warmup", c.include_warmup},
      {"jobs", c.jobs},
  };
  if (c.intrinsics) {
    j["intrinsics"] = {{"fx", c.intrinsics->fx}, {"fy", c.intrinsics->fy}, {"cx", c.intrinsics->cx},
                       {"cy", c.intrinsics->cy}};
  }
  if (c.access_log) j["access_log"] = c.access_log->string();
  return j.dump(2);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace motad::pipeline
