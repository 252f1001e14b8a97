#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

#include "kdstr/reduction.hpp"

namespace kdstr {
namespace {

constexpr char kMagic[8] = {'K', 'D', 'S', 'T', 'R', 'R', 'E', 'D'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void i32(int v) { put<std::int32_t>(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void ints(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i32(x);
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  int i32() { return get<std::int32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  std::size_t count(std::size_t elem_size) {
    const auto n = u64();
    if (elem_size && n > (b_.size() - pos_) / elem_size) truncated();
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const auto n = count(1);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    std::vector<double> v(count(8));
    for (auto& x : v) x = f64();
    return v;
  }
  std::vector<int> ints() {
    std::vector<int> v(count(4));
    for (auto& x : v) x = i32();
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) truncated();
  }
  [[noreturn]] static void truncated() { throw Error(ErrorCode::CorruptPayload, "reduction payload is truncated"); }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

template <class E>
E checked_enum(int v, int count, const char* what) {
  if (v < 0 || v >= count) throw Error(ErrorCode::CorruptPayload, std::string("invalid ") + what + " tag");
  return static_cast<E>(v);
}

void put_standardizer(Writer& w, const Standardizer& s) {
  w.doubles(s.center);
  w.doubles(s.scale);
}

Standardizer get_standardizer(Reader& r) {
  Standardizer s;
  s.center = r.doubles();
  s.scale = r.doubles();
  return s;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize(const Reduction& r) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put(kFormatMajor);
  w.put(kFormatMinor);

  w.i32(r.spatial_dims);
  w.u64(r.feature_names.size());
  for (const auto& f : r.feature_names) w.str(f);
  w.f64(r.alpha);
  w.i32(static_cast<int>(r.technique));
  w.i32(static_cast<int>(r.link_mode));
  w.i32(static_cast<int>(r.error_metric));
  w.f64(r.final_error);
  w.f64(r.final_storage_ratio);
  w.doubles(r.time_axis.times);
  w.doubles(r.time_axis.boundaries);

  w.u64(r.regions.size());
  for (const auto& g : r.regions) {
    w.i32(g.id);
    w.i32(g.cluster);
    w.i32(g.t_begin);
    w.i32(g.t_end);
    w.ints(g.sensors);
    w.u64(g.outline.size());
    for (const auto& p : g.outline) {
      w.f64(p.x);
      w.f64(p.y);
    }
  }

  w.u64(r.models.size());
  for (const auto& m : r.models) {
    w.i32(static_cast<int>(m.technique));
    w.i32(m.complexity);
    w.i32(m.num_features);
    w.i32(m.num_predictors);
    w.put<std::uint8_t>(m.saturated ? 1 : 0);
    w.u64(m.serial);
    w.i32(static_cast<int>(m.payload.index()));
    if (const auto* p = std::get_if<PlrPayload>(&m.payload)) {
      w.i32(p->degree);
      put_standardizer(w, p->standardizer);
      w.doubles(p->coefficients);
    } else if (const auto* p = std::get_if<DctPayload>(&m.payload)) {
      w.u64(p->features.size());
      for (const auto& s : p->features) {
        w.i32(s.length);
        w.ints(s.indices);
        w.doubles(s.values);
      }
    } else {
      const auto& t = std::get<DtrPayload>(m.payload);
      put_standardizer(w, t.standardizer);
      w.u64(t.nodes.size());
      for (const auto& n : t.nodes) {
        w.i32(n.dimension);
        w.f64(n.threshold);
        w.i32(n.left);
        w.i32(n.right);
        w.doubles(n.value);
      }
    }
  }
  w.ints(r.region_model);
  w.put<std::uint32_t>(crc_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

Reduction deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::CorruptPayload, "not a reduction file (bad magic)");
  Reader rd(bytes.subspan(sizeof(kMagic)));
  const auto major = rd.get<std::uint16_t>();
  const auto minor = rd.get<std::uint16_t>();
  if (major != kFormatMajor)
    throw Error(ErrorCode::VersionMismatch, "reduction format " + std::to_string(major) + "." + std::to_string(minor) +
                                                " is not readable by this build (format " +
                                                std::to_string(kFormatMajor) + ")");
  if (bytes.size() < sizeof(kMagic) + 8) throw Error(ErrorCode::CorruptPayload, "reduction payload is truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != crc_of(bytes.data(), body)) throw Error(ErrorCode::CorruptPayload, "reduction checksum mismatch");
  rd = Reader(bytes.subspan(sizeof(kMagic) + 4, body - sizeof(kMagic) - 4));

  Reduction r;
  r.spatial_dims = rd.i32();
  r.feature_names.resize(rd.count(8));
  for (auto& f : r.feature_names) f = rd.str();
  r.alpha = rd.f64();
  r.technique = checked_enum<Technique>(rd.i32(), 3, "technique");
  r.link_mode = checked_enum<LinkMode>(rd.i32(), 2, "link mode");
  r.error_metric = checked_enum<ErrorMetric>(rd.i32(), 2, "error metric");
  r.final_error = rd.f64();
  r.final_storage_ratio = rd.f64();
  r.time_axis.times = rd.doubles();
  r.time_axis.boundaries = rd.doubles();

  r.regions.resize(rd.count(24));
  for (auto& g : r.regions) {
    g.id = rd.i32();
    g.cluster = rd.i32();
    g.t_begin = rd.i32();
    g.t_end = rd.i32();
    g.sensors = rd.ints();
    g.outline.resize(rd.count(16));
    for (auto& p : g.outline) {
      p.x = rd.f64();
      p.y = rd.f64();
    }
  }

  r.models.resize(rd.count(29));
  for (auto& m : r.models) {
    m.technique = checked_enum<Technique>(rd.i32(), 3, "technique");
    m.complexity = rd.i32();
    m.num_features = rd.i32();
    m.num_predictors = rd.i32();
    m.saturated = rd.get<std::uint8_t>() != 0;
    m.serial = rd.u64();
    const int kind = rd.i32();
    if (kind != static_cast<int>(m.technique)) throw Error(ErrorCode::CorruptPayload, "model payload does not match its technique");
    if (kind == 0) {
      PlrPayload p;
      p.degree = rd.i32();
      p.standardizer = get_standardizer(rd);
      p.coefficients = rd.doubles();
      m.payload = std::move(p);
    } else if (kind == 1) {
      DctPayload p;
      p.features.resize(rd.count(20));
      for (auto& s : p.features) {
        s.length = rd.i32();
        s.indices = rd.ints();
        s.values = rd.doubles();
      }
      m.payload = std::move(p);
    } else {
      DtrPayload p;
      p.standardizer = get_standardizer(rd);
      p.nodes.resize(rd.count(28));
      for (auto& n : p.nodes) {
        n.dimension = rd.i32();
        n.threshold = rd.f64();
        n.left = rd.i32();
        n.right = rd.i32();
        n.value = rd.doubles();
      }
      m.payload = std::move(p);
    }
  }
  r.region_model = rd.ints();
  if (r.region_model.size() != r.regions.size())
    throw Error(ErrorCode::CorruptPayload, "region/model links do not match the region table");
  for (int mi : r.region_model)
    if (mi < 0 || static_cast<std::size_t>(mi) >= r.models.size())
      throw Error(ErrorCode::CorruptPayload, "region links to a missing model");
  return r;
}

// ---------------------------------------------------------------- JSON

namespace {

using nlohmann::json;

json standardizer_json(const Standardizer& s) { return {{"center", s.center}, {"scale", s.scale}}; }

Standardizer standardizer_from(const json& j) {
  return {j.at("center").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

json model_json(const ModelArtifact& m) {
  json j{{"technique", to_string(m.technique)},
         {"complexity", m.complexity},
         {"num_features", m.num_features},
         {"num_predictors", m.num_predictors},
         {"saturated", m.saturated},
         {"serial", m.serial}};
  if (const auto* p = std::get_if<PlrPayload>(&m.payload)) {
    j["degree"] = p->degree;
    j["standardizer"] = standardizer_json(p->standardizer);
    j["coefficients"] = p->coefficients;
  } else if (const auto* p = std::get_if<DctPayload>(&m.payload)) {
    auto& arr = j["series"] = json::array();
    for (const auto& s : p->features) arr.push_back({{"length", s.length}, {"indices", s.indices}, {"values", s.values}});
  } else {
    const auto& t = std::get<DtrPayload>(m.payload);
    j["standardizer"] = standardizer_json(t.standardizer);
    auto& arr = j["nodes"] = json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf())
        arr.push_back({{"value", n.value}});
      else
        arr.push_back({{"dimension", n.dimension}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
  }
  return j;
}

ModelArtifact model_from(const json& j) {
  ModelArtifact m;
  m.technique = parse_technique(j.at("technique").get<std::string>());
  m.complexity = j.at("complexity");
  m.num_features = j.at("num_features");
  m.num_predictors = j.at("num_predictors");
  m.saturated = j.at("saturated");
  m.serial = j.at("serial");
  switch (m.technique) {
    case Technique::PLR: {
      PlrPayload p;
      p.degree = j.at("degree");
      p.standardizer = standardizer_from(j.at("standardizer"));
      p.coefficients = j.at("coefficients").get<std::vector<double>>();
      m.payload = std::move(p);
      break;
    }
    case Technique::DCT: {
      DctPayload p;
      for (const auto& s : j.at("series"))
        p.features.push_back({s.at("length"), s.at("indices").get<std::vector<int>>(),
                              s.at("values").get<std::vector<double>>()});
      m.payload = std::move(p);
      break;
    }
    case Technique::DTR: {
      DtrPayload p;
      p.standardizer = standardizer_from(j.at("standardizer"));
      for (const auto& n : j.at("nodes")) {
        DtrNode node;
        if (n.contains("value")) {
          node.value = n.at("value").get<std::vector<double>>();
        } else {
          node.dimension = n.at("dimension");
          node.threshold = n.at("threshold");
          node.left = n.at("left");
          node.right = n.at("right");
        }
        p.nodes.push_back(std::move(node));
      }
      m.payload = std::move(p);
      break;
    }
  }
  return m;
}

}  // namespace

std::string to_json(const Reduction& r, int indent) {
  json j{{"format", {kFormatMajor, kFormatMinor}},
         {"spatial_dims", r.spatial_dims},
         {"features", r.feature_names},
         {"alpha", r.alpha},
         {"technique", to_string(r.technique)},
         {"link", to_string(r.link_mode)},
         {"metric", to_string(r.error_metric)},
         {"final_error", r.final_error},
         {"final_storage_ratio", r.final_storage_ratio},
         {"times", r.time_axis.times},
         {"time_boundaries", r.time_axis.boundaries}};
  auto& regions = j["regions"] = json::array();
  for (std::size_t i = 0; i < r.regions.size(); ++i) {
    const auto& g = r.regions[i];
    json outline = json::array();
    for (const auto& p : g.outline) {
      if (r.spatial_dims == 1)
        outline.push_back({p.x});
      else
        outline.push_back({p.x, p.y});
    }
    regions.push_back({{"id", g.id},
                       {"cluster", g.cluster},
                       {"t_begin", g.t_begin},
                       {"t_end", g.t_end},
                       {"sensors", g.sensors},
                       {"outline", std::move(outline)},
                       {"model", r.region_model[i]}});
  }
  auto& models = j["models"] = json::array();
  for (const auto& m : r.models) models.push_back(model_json(m));
  return j.dump(indent);
}

Reduction from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const auto format = j.at("format").get<std::vector<int>>();
    if (format.empty() || format[0] != kFormatMajor)
      throw Error(ErrorCode::VersionMismatch, "unsupported reduction format");
    Reduction r;
    r.spatial_dims = j.at("spatial_dims");
    r.feature_names = j.at("features").get<std::vector<std::string>>();
    r.alpha = j.at("alpha");
    r.technique = parse_technique(j.at("technique").get<std::string>());
    r.link_mode = parse_link_mode(j.at("link").get<std::string>());
    r.error_metric = parse_error_metric(j.at("metric").get<std::string>());
    r.final_error = j.at("final_error");
    r.final_storage_ratio = j.at("final_storage_ratio");
    r.time_axis.times = j.at("times").get<std::vector<double>>();
    r.time_axis.boundaries = j.at("time_boundaries").get<std::vector<double>>();
    for (const auto& g : j.at("regions")) {
      Region region;
      region.id = g.at("id");
      region.cluster = g.at("cluster");
      region.t_begin = g.at("t_begin");
      region.t_end = g.at("t_end");
      region.sensors = g.at("sensors").get<std::vector<int>>();
      for (const auto& p : g.at("outline")) region.outline.push_back({p.at(0), p.size() > 1 ? p.at(1).get<double>() : 0.0});
      r.regions.push_back(std::move(region));
      r.region_model.push_back(g.at("model"));
    }
    for (const auto& m : j.at("models")) r.models.push_back(model_from(m));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptPayload, std::string("malformed reduction JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw Error(ErrorCode::CorruptPayload, e.detail());
    throw;
  }
}

void write_reduction(const std::string& path, const Reduction& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  const auto bytes = serialize(r);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

Reduction read_reduction(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace kdstr
