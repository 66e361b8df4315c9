#include "mpts/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "mpts/error.hpp"

namespace mpts {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// A view on one JSON object with its path, used to read typed fields and
// reject keys nobody asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void only(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (auto key : keys) known = known || key == k;
      if (!known) throw ConfigError(path_ + "/" + k + ": unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return path_ + "/" + key; }

  void read(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
      throw ConfigError(child(key) + ": expected a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void read(const char* key, std::uint64_t& out, bool) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(child(key) + ": expected a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }

  void read(const char* key, double& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
    out = v.get<double>();
  }

  void read(const char* key, bool& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(child(key) + ": expected true or false");
    out = v.get<bool>();
  }

  void read(const char* key, std::string& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(child(key) + ": expected a string");
    out = v.get<std::string>();
  }

  template <typename T>
  void read_list(const char* key, std::vector<T>& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError(child(key) + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& e = v[i];
      const std::string p = child(key) + "/" + std::to_string(i);
      if constexpr (std::is_same_v<T, double>) {
        if (!e.is_number()) throw ConfigError(p + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) throw ConfigError(p + ": expected a string");
      } else if constexpr (std::is_same_v<T, std::size_t>) {
        if (!e.is_number_integer() || e.get<long long>() < 0) {
          throw ConfigError(p + ": expected a non-negative integer");
        }
      } else {
        if (!e.is_number_integer()) throw ConfigError(p + ": expected an integer");
      }
      out.push_back(e.get<T>());
    }
  }

 private:
  std::string where() const { return path_.empty() ? "/" : path_; }

  const json& j_;
  std::string path_;
};

void read_dataset(const ObjectReader& r, DatasetConfig& d) {
  r.only({"kind", "train_images", "train_labels", "test_images", "test_labels", "path",
          "label_column", "classes", "per_class", "dim", "separation", "test_fraction",
          "pool_size", "standardize"});
  std::string kind = "synthetic";
  r.read("kind", kind);
  if (kind == "synthetic") {
    d.kind = DatasetConfig::Kind::synthetic;
  } else if (kind == "mnist") {
    d.kind = DatasetConfig::Kind::mnist;
  } else if (kind == "csv") {
    d.kind = DatasetConfig::Kind::csv;
  } else {
    throw ConfigError(r.child("kind") + ": expected synthetic, mnist or csv");
  }
  r.read("train_images", d.train_images);
  r.read("train_labels", d.train_labels);
  r.read("test_images", d.test_images);
  r.read("test_labels", d.test_labels);
  r.read("path", d.path);
  r.read("label_column", d.label_column);
  r.read("classes", d.classes);
  r.read("per_class", d.per_class);
  r.read("dim", d.dim);
  r.read("separation", d.separation);
  r.read("test_fraction", d.test_fraction);
  r.read("pool_size", d.pool_size);
  std::string st = "pool";
  r.read("standardize", st);
  if (st == "none") {
    d.standardize = DatasetConfig::Standardize::none;
  } else if (st == "pool") {
    d.standardize = DatasetConfig::Standardize::pool;
  } else if (st == "labeled") {
    d.standardize = DatasetConfig::Standardize::labeled;
  } else {
    throw ConfigError(r.child("standardize") + ": expected none, pool or labeled");
  }
}

void read_train(const ObjectReader& r, TrainConfig& t) {
  r.only({"epochs", "base_lr", "batch_size", "lambda", "weight_decay", "n_checkpoints",
          "lr_floor_ratio", "kernel", "multi_bandwidth"});
  r.read("epochs", t.epochs);
  r.read("base_lr", t.base_lr);
  r.read("batch_size", t.batch_size);
  r.read("lambda", t.lambda);
  r.read("weight_decay", t.weight_decay);
  r.read("n_checkpoints", t.n_checkpoints);
  r.read("lr_floor_ratio", t.lr_floor_ratio);
  r.read("multi_bandwidth", t.kernel.multi_scale);
  if (r.has("kernel")) {
    const json& k = r.at("kernel");
    if (k.is_string()) {
      if (k.get<std::string>() != "median") {
        throw ConfigError(r.child("kernel") + ": expected \"median\" or a list of bandwidths");
      }
      t.kernel.bandwidths.clear();
    } else {
      r.read_list("kernel", t.kernel.bandwidths);
      if (t.kernel.bandwidths.empty()) {
        throw ConfigError(r.child("kernel") + ": bandwidth list is empty");
      }
    }
  }
}

std::string default_output_dir() {
  if (const char* env = std::getenv("MPTS_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "mpts_results";
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  c.output_dir = default_output_dir();
  ObjectReader root(doc, "");
  root.only({"dataset", "initial_count", "budget", "rounds", "repeats", "methods", "train",
             "model", "bald", "bias_classes", "master_seed", "output_dir", "record_wall_time",
             "dump_scores", "dump_history"});
  if (root.has("dataset")) read_dataset(ObjectReader(root.at("dataset"), "/dataset"), c.dataset);
  root.read("initial_count", c.initial_count);
  root.read("budget", c.budget);
  root.read("rounds", c.rounds);
  root.read("repeats", c.repeats);
  std::vector<std::string> methods;
  root.read_list("methods", methods);
  for (std::size_t i = 0; i < methods.size(); ++i) {
    try {
      c.methods.push_back(parse_method(methods[i]));
    } catch (const ConfigError& e) {
      throw ConfigError("/methods/" + std::to_string(i) + ": " + e.what());
    }
  }
  if (root.has("train")) read_train(ObjectReader(root.at("train"), "/train"), c.train);
  if (root.has("model")) {
    ObjectReader m(root.at("model"), "/model");
    m.only({"hidden", "split_index"});
    m.read_list("hidden", c.model.hidden);
    m.read("split_index", c.model.split_index);
  }
  if (root.has("bald")) {
    ObjectReader b(root.at("bald"), "/bald");
    b.only({"passes", "dropout"});
    b.read("passes", c.bald.passes);
    b.read("dropout", c.bald.dropout);
  }
  root.read_list("bias_classes", c.bias_classes);
  root.read("master_seed", c.master_seed, true);
  root.read("output_dir", c.output_dir);
  root.read("record_wall_time", c.record_wall_time);
  root.read("dump_scores", c.dump_scores);
  root.read("dump_history", c.dump_history);

  if (c.model.hidden.empty()) {
    c.model.hidden = c.dataset.kind == DatasetConfig::Kind::mnist ? std::vector<std::size_t>{128}
                                                                  : std::vector<std::size_t>{64, 64};
  }
  c.validate();
  if (c.model.split_index == 0) c.model.split_index = c.model.hidden.size();
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json d;
  const auto& ds = c.dataset;
  switch (ds.kind) {
    case DatasetConfig::Kind::synthetic:
      d["kind"] = "synthetic";
      d["classes"] = ds.classes;
      d["per_class"] = ds.per_class;
      d["dim"] = ds.dim;
      d["separation"] = ds.separation;
      d["test_fraction"] = ds.test_fraction;
      break;
    case DatasetConfig::Kind::mnist:
      d["kind"] = "mnist";
      d["train_images"] = ds.train_images;
      d["train_labels"] = ds.train_labels;
      d["test_images"] = ds.test_images;
      d["test_labels"] = ds.test_labels;
      break;
    case DatasetConfig::Kind::csv:
      d["kind"] = "csv";
      d["path"] = ds.path;
      d["label_column"] = ds.label_column;
      d["test_fraction"] = ds.test_fraction;
      break;
  }
  d["pool_size"] = ds.pool_size;
  d["standardize"] = ds.standardize == DatasetConfig::Standardize::none    ? "none"
                     : ds.standardize == DatasetConfig::Standardize::pool ? "pool"
                                                                          : "labeled";

  ordered_json t;
  t["epochs"] = c.train.epochs;
  t["base_lr"] = c.train.base_lr;
  t["batch_size"] = c.train.batch_size;
  t["lambda"] = c.train.lambda;
  t["weight_decay"] = c.train.weight_decay;
  t["n_checkpoints"] = c.train.n_checkpoints;
  t["lr_floor_ratio"] = c.train.lr_floor_ratio;
  if (c.train.kernel.bandwidths.empty()) {
    t["kernel"] = "median";
  } else {
    t["kernel"] = c.train.kernel.bandwidths;
  }
  t["multi_bandwidth"] = c.train.kernel.multi_scale;

  ordered_json j;
  j["dataset"] = d;
  j["initial_count"] = c.initial_count;
  j["budget"] = c.budget;
  j["rounds"] = c.rounds;
  j["repeats"] = c.repeats;
  ordered_json methods = ordered_json::array();
  for (Method m : c.methods) methods.push_back(std::string(method_name(m)));
  j["methods"] = methods;
  j["train"] = t;
  j["model"] = {{"hidden", c.model.hidden}, {"split_index", c.model.split_index}};
  j["bald"] = {{"passes", c.bald.passes}, {"dropout", c.bald.dropout}};
  j["bias_classes"] = c.bias_classes;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["record_wall_time"] = c.record_wall_time;
  j["dump_scores"] = c.dump_scores;
  j["dump_history"] = c.dump_history;
  return j.dump(2);
}

}  // namespace mpts
