#include "qwait/bundle_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <json.hpp>

#include "qwait/error.hpp"

namespace qwait {
namespace {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

constexpr char kMagic[8] = {'Q', 'W', 'A', 'I', 'T', 'B', 'N', 'D'};

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void i32(std::int32_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
  }
  void doubles(std::span<const double> v) {
    u64(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string section) : data_(data), section_(std::move(section)) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int32_t i32() { return pod<std::int32_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = u64();
    if (n > (data_.size() - pos_) / sizeof(double)) fail();
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void finish() const {
    if (pos_ != data_.size()) throw Error("bundle section " + section_ + " has trailing bytes");
  }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) fail();
  }
  [[noreturn]] void fail() const { throw Error("bundle section " + section_ + " is truncated"); }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string section_;
};

void write_gbt(Writer& w, const GbtEnsemble& m) {
  w.i32(static_cast<std::int32_t>(m.loss));
  w.i32(m.num_outputs);
  w.f64(m.learning_rate);
  w.i32(m.max_depth);
  w.i32(m.min_leaf);
  w.f64(m.reg_lambda);
  w.doubles(m.base_score);
  w.u64(m.trees.size());
  for (const auto& t : m.trees) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.f64(n.value);
    }
  }
}

GbtEnsemble read_gbt(Reader& r) {
  GbtEnsemble m;
  const auto loss = r.i32();
  if (loss < 0 || loss > 2) throw Error("bundle contains an unknown loss type");
  m.loss = static_cast<GbtLoss>(loss);
  m.num_outputs = r.i32();
  m.learning_rate = r.f64();
  m.max_depth = r.i32();
  m.min_leaf = r.i32();
  m.reg_lambda = r.f64();
  m.base_score = r.doubles();
  if (m.num_outputs < 1 || m.base_score.size() != static_cast<std::size_t>(m.num_outputs)) {
    throw Error("bundle ensemble has inconsistent output count");
  }
  const auto trees = r.u64();
  m.trees.resize(trees);
  for (auto& t : m.trees) {
    const auto count = r.u64();
    if (count == 0) throw Error("bundle contains an empty tree");
    t.nodes.resize(count);
    for (auto& n : t.nodes) {
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.value = r.f64();
      const auto limit = static_cast<std::int32_t>(count);
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= limit || n.right >= limit)) {
        throw Error("bundle tree has out-of-range children");
      }
    }
  }
  return m;
}

void write_knn(Writer& w, const KnnModel& m) {
  w.i32(m.k());
  w.f64(m.p());
  w.u64(m.points().rows());
  w.u64(m.points().cols());
  w.doubles(m.points().data());
  w.doubles(m.targets());
}

KnnModel read_knn(Reader& r) {
  const int k = r.i32();
  const double p = r.f64();
  const auto rows = r.u64();
  const auto cols = r.u64();
  auto data = r.doubles();
  auto targets = r.doubles();
  return KnnModel(Matrix(rows, cols, std::move(data)), std::move(targets), k, p);
}

nlohmann::json config_json(const PipelineConfig& c) {
  return {{"states", c.states},
          {"seed", c.seed},
          {"knn_k", c.knn_k},
          {"knn_p", c.knn_p},
          {"min_category_jobs", c.min_category_jobs},
          {"gbt",
           {{"n_trees", c.gbt.n_trees},
            {"max_depth", c.gbt.max_depth},
            {"learning_rate", c.gbt.learning_rate},
            {"min_leaf", c.gbt.min_leaf},
            {"reg_lambda", c.gbt.reg_lambda}}}};
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.states = j.at("states").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.knn_k = j.at("knn_k").get<int>();
  c.knn_p = j.at("knn_p").get<double>();
  c.min_category_jobs = j.at("min_category_jobs").get<int>();
  const auto& g = j.at("gbt");
  c.gbt.n_trees = g.at("n_trees").get<int>();
  c.gbt.max_depth = g.at("max_depth").get<int>();
  c.gbt.learning_rate = g.at("learning_rate").get<double>();
  c.gbt.min_leaf = g.at("min_leaf").get<int>();
  c.gbt.reg_lambda = g.at("reg_lambda").get<double>();
  return c;
}

std::map<std::string, std::string> sections_of(const TrainedBundle& b) {
  std::map<std::string, std::string> s;
  {
    nlohmann::json meta = {{"machine", b.machine},
                           {"train_begin", b.train_begin},
                           {"train_end", b.train_end},
                           {"train_jobs", b.train_jobs},
                           {"node_capacity", b.node_capacity},
                           {"config", config_json(b.config)},
                           {"immediate_is_positive", b.immediate_is_positive},
                           {"regressor_route", b.regressor_route},
                           {"warnings", b.warnings},
                           {"model_version", b.model_version}};
    s["metadata"] = meta.dump();
  }
  {
    Writer w;
    w.doubles(b.normalizer.mean());
    w.doubles(b.normalizer.stddev());
    s["normalizer"] = w.take();
  }
  {
    Writer w;
    for (const auto& fam : b.bins.edges) {
      for (double e : fam) w.f64(e);
    }
    s["bins"] = w.take();
  }
  {
    Writer w;
    w.u64(b.ratio_model.strata().size());
    for (const auto& st : b.ratio_model.strata()) {
      w.i32(st.lo);
      w.i32(st.hi);
      w.u64(st.count);
      w.doubles(st.pdf);
      w.doubles(st.cdf);
      w.u32(st.point_mass.has_value());
      w.f64(st.point_mass.value_or(0.0));
    }
    s["ratio_model"] = w.take();
  }
  auto knn = [&](const char* name, const KnnModel& m) {
    Writer w;
    write_knn(w, m);
    s[name] = w.take();
  };
  knn("knn_basic", b.knn_basic);
  knn("knn_temporal", b.knn_temporal);
  knn("knn_queue", b.knn_queue);
  auto gbt = [&](const char* name, const GbtEnsemble& m) {
    Writer w;
    write_gbt(w, m);
    s[name] = w.take();
  };
  gbt("immediate_model", b.immediate_model);
  gbt("category_model", b.category_model);
  gbt("global_regressor", b.global_regressor);
  {
    Writer w;
    w.u64(b.regressors.size());
    for (const auto& m : b.regressors) write_gbt(w, m);
    s["regressors"] = w.take();
  }
  return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string serialize_bundle(const TrainedBundle& b) {
  const auto sections = sections_of(b);
  Writer w;
  for (char c : kMagic) w.pod(c);
  w.u32(b.format_version);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  std::string out = w.take();
  for (const auto& [name, payload] : sections) {
    Writer h;
    h.u32(static_cast<std::uint32_t>(name.size()));
    std::string head = h.take();
    head += name;
    Writer len;
    len.u64(payload.size());
    head += len.take();
    out += head;
    out += payload;
  }
  return out;
}

std::string compute_model_version(const TrainedBundle& bundle) {
  TrainedBundle copy = bundle;
  copy.model_version.clear();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize_bundle(copy))));
  return buf;
}

TrainedBundle deserialize_bundle(std::string_view bytes) {
  Reader head(bytes, "header");
  for (char c : kMagic) {
    if (head.pod<char>() != c) throw Error("not a qwait bundle file");
  }
  const std::uint32_t version = head.u32();
  if (version > TrainedBundle::kFormatVersion) {
    throw Error("bundle format version " + std::to_string(version) + " is newer than supported version " +
                std::to_string(TrainedBundle::kFormatVersion));
  }
  if (version == 0) throw Error("bundle format version 0 is invalid");
  const std::uint32_t count = head.u32();
  std::size_t pos = sizeof(kMagic) + 8;
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    Reader r(bytes.substr(pos), "table");
    const auto name_len = r.u32();
    if (name_len > 256 || bytes.size() - pos < 4 + name_len + 8) throw Error("bundle section table is truncated");
    const std::string name(bytes.substr(pos + 4, name_len));
    Reader lr(bytes.substr(pos + 4 + name_len), "table");
    const auto len = lr.u64();
    const std::size_t start = pos + 4 + name_len + 8;
    if (len > bytes.size() - start) throw Error("bundle section " + name + " is truncated");
    sections[name] = bytes.substr(start, len);
    pos = start + len;
  }
  if (pos != bytes.size()) throw Error("bundle has trailing bytes");
  auto section = [&](const std::string& name) {
    auto it = sections.find(name);
    if (it == sections.end()) throw Error("bundle is missing section " + name);
    return Reader(it->second, name);
  };

  TrainedBundle b;
  b.format_version = version;
  try {
    const auto meta = nlohmann::json::parse(sections.at("metadata"));
    b.machine = meta.at("machine").get<std::string>();
    b.train_begin = meta.at("train_begin").get<Instant>();
    b.train_end = meta.at("train_end").get<Instant>();
    b.train_jobs = meta.at("train_jobs").get<std::uint64_t>();
    b.node_capacity = meta.at("node_capacity").get<int>();
    b.config = config_from_json(meta.at("config"));
    b.immediate_is_positive = meta.at("immediate_is_positive").get<bool>();
    b.regressor_route = meta.at("regressor_route").get<std::array<int, kWaitingCategories>>();
    b.warnings = meta.at("warnings").get<std::vector<std::string>>();
    b.model_version = meta.at("model_version").get<std::string>();
  } catch (const std::out_of_range&) {
    throw Error("bundle is missing section metadata");
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bundle metadata is invalid: ") + e.what());
  }
  for (int route : b.regressor_route) {
    if (route < -1 || route >= kWaitingCategories) throw Error("bundle regressor route out of range");
  }

  {
    auto r = section("normalizer");
    auto mean = r.doubles();
    auto sd = r.doubles();
    r.finish();
    if (mean.size() != feature::count) throw Error("bundle normalizer has the wrong width");
    b.normalizer = Normalizer(std::move(mean), std::move(sd));
  }
  {
    auto r = section("bins");
    for (auto& fam : b.bins.edges) {
      for (double& e : fam) e = r.f64();
    }
    r.finish();
  }
  {
    auto r = section("ratio_model");
    const auto n = r.u64();
    if (n == 0 || n > 1000) throw Error("bundle ratio model has an invalid stratum count");
    std::vector<RatioStratum> strata(n);
    for (auto& st : strata) {
      st.lo = r.i32();
      st.hi = r.i32();
      st.count = r.u64();
      const auto pdf = r.doubles();
      const auto cdf = r.doubles();
      if (pdf.size() != kRatioBins || cdf.size() != kRatioBins) throw Error("bundle ratio histogram has the wrong size");
      std::copy(pdf.begin(), pdf.end(), st.pdf.begin());
      std::copy(cdf.begin(), cdf.end(), st.cdf.begin());
      const bool has_mass = r.u32() != 0;
      const double mass = r.f64();
      if (has_mass) st.point_mass = mass;
    }
    r.finish();
    b.ratio_model = WallTimeRatioModel(std::move(strata));
  }
  auto knn = [&](const char* name) {
    auto r = section(name);
    auto m = read_knn(r);
    r.finish();
    return m;
  };
  b.knn_basic = knn("knn_basic");
  b.knn_temporal = knn("knn_temporal");
  b.knn_queue = knn("knn_queue");
  auto gbt = [&](const char* name) {
    auto r = section(name);
    auto m = read_gbt(r);
    r.finish();
    return m;
  };
  b.immediate_model = gbt("immediate_model");
  b.category_model = gbt("category_model");
  b.global_regressor = gbt("global_regressor");
  {
    auto r = section("regressors");
    if (r.u64() != kWaitingCategories) throw Error("bundle has the wrong number of regressors");
    for (auto& m : b.regressors) m = read_gbt(r);
    r.finish();
  }

  if (compute_model_version(b) != b.model_version) {
    throw Error("bundle checksum mismatch (file corrupted or edited)");
  }
  return b;
}

void save_bundle(const TrainedBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write bundle file " + path.string());
  const auto bytes = serialize_bundle(bundle);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing bundle file " + path.string());
}

TrainedBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open bundle file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace qwait
