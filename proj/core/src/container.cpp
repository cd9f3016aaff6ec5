#include "fpk/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fpk/error.hpp"

namespace fpk::io {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'K', 'C'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  void add_chunk(const double* data, std::size_t count, nlohmann::json meta = nlohmann::json::object()) {
    meta["offset"] = payload_.size() * sizeof(double);
    meta["count"] = count;
    chunks_.push_back(std::move(meta));
    for (std::size_t i = 0; i < count; ++i) payload_.push_back(to_little(data[i]));
  }

  void write(const std::filesystem::path& path, nlohmann::json header) {
    header["chunks"] = chunks_;
    const std::string text = header.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    const std::uint32_t version = to_little(kContainerVersion);
    const std::uint64_t length = to_little(static_cast<std::uint64_t>(text.size()));
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&length), sizeof length);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload_.data()),
              static_cast<std::streamsize>(payload_.size() * sizeof(double)));
    if (!out) throw Error("write failed for " + path.string());
  }

 private:
  nlohmann::json chunks_ = nlohmann::json::array();
  std::vector<double> payload_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open " + path.string());
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t length = 0;
    in_.read(magic, 4);
    in_.read(reinterpret_cast<char*>(&version), sizeof version);
    in_.read(reinterpret_cast<char*>(&length), sizeof length);
    if (!in_ || std::memcmp(magic, kMagic, 4) != 0) throw Error(path.string() + " is not a container");
    if (to_little(version) != kContainerVersion) throw Error("unsupported container version");
    std::string text(to_little(length), '\0');
    in_.read(text.data(), static_cast<std::streamsize>(text.size()));
    if (!in_) throw Error("truncated container header in " + path.string());
    header_ = nlohmann::json::parse(text);
    data_start_ = in_.tellg();
  }

  const nlohmann::json& header() const { return header_; }

  void read_chunk(std::size_t index, double* out, std::size_t expected) {
    const auto& c = header_.at("chunks").at(index);
    const auto count = c.at("count").get<std::size_t>();
    if (count != expected) throw Error("container chunk has an unexpected size");
    in_.seekg(data_start_ + static_cast<std::streamoff>(c.at("offset").get<std::uint64_t>()));
    in_.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in_) throw Error("truncated container payload");
    for (std::size_t i = 0; i < count; ++i) out[i] = to_little(out[i]);
  }

 private:
  std::ifstream in_;
  nlohmann::json header_;
  std::streampos data_start_;
};

std::string quoted(const std::string& field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_flow(const std::filesystem::path& path, const MarginalFlow& flow) {
  flow.validate();
  Writer w;
  for (const auto& node : flow.nodes) {
    if (const auto* e = std::get_if<EmpiricalMeasure>(&node)) {
      w.add_chunk(e->points.data(), static_cast<std::size_t>(e->points.size()),
                  {{"measure", "empirical"}, {"size", e->size()}, {"weighted", false}});
      if (!e->equally_weighted()) {
        w.add_chunk(e->weights.data(), e->size(), {{"measure", "weights"}});
      }
    } else {
      const auto& g = std::get<GridDensity>(node);
      nlohmann::json axes = nlohmann::json::array();
      for (const auto& a : g.axes) axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"cells", a.cells}});
      w.add_chunk(g.values.data(), static_cast<std::size_t>(g.values.size()),
                  {{"measure", "grid"}, {"axes", axes}});
    }
  }
  w.write(path, {{"kind", "flow"},
                 {"n", flow.dim},
                 {"times", flow.times},
                 {"initial_point", to_std(flow.initial_point)},
                 {"initial_bandwidth", flow.initial_bandwidth}});
}

MarginalFlow read_flow(const std::filesystem::path& path) {
  Reader r(path);
  const auto& h = r.header();
  if (h.at("kind") != "flow") throw Error(path.string() + " does not hold a flow");
  MarginalFlow flow;
  flow.dim = h.at("n").get<std::size_t>();
  flow.times = h.at("times").get<std::vector<double>>();
  flow.initial_point = from_std(h.at("initial_point").get<std::vector<double>>());
  flow.initial_bandwidth = h.at("initial_bandwidth").get<double>();
  const auto& chunks = h.at("chunks");
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const std::string kind = chunks[c].at("measure").get<std::string>();
    if (kind == "empirical") {
      const auto size = chunks[c].at("size").get<std::size_t>();
      Matrix pts(static_cast<Eigen::Index>(flow.dim), static_cast<Eigen::Index>(size));
      r.read_chunk(c, pts.data(), flow.dim * size);
      Vector weights;
      if (c + 1 < chunks.size() && chunks[c + 1].at("measure") == "weights") {
        weights.resize(static_cast<Eigen::Index>(size));
        r.read_chunk(++c, weights.data(), size);
      }
      flow.nodes.emplace_back(EmpiricalMeasure(std::move(pts), std::move(weights)));
    } else if (kind == "grid") {
      std::vector<GridAxis> axes;
      std::size_t cells = 1;
      for (const auto& a : chunks[c].at("axes")) {
        axes.push_back({a.at("lo").get<double>(), a.at("hi").get<double>(),
                        a.at("cells").get<std::size_t>()});
        cells *= axes.back().cells;
      }
      Vector values(static_cast<Eigen::Index>(cells));
      r.read_chunk(c, values.data(), cells);
      flow.nodes.emplace_back(GridDensity(std::move(axes), std::move(values)));
    } else {
      throw Error("unknown measure chunk '" + kind + "'");
    }
  }
  flow.validate();
  return flow;
}

void write_ensemble(const std::filesystem::path& path, const PathEnsemble& ens) {
  Writer w;
  for (std::size_t k = 0; k < ens.nodes(); ++k) {
    w.add_chunk(ens.states.data() + k * ens.paths * ens.dim, ens.paths * ens.dim);
  }
  w.write(path, {{"kind", "ensemble"},
                 {"n", ens.dim},
                 {"paths", ens.paths},
                 {"times", ens.times},
                 {"initial_point", to_std(ens.initial_point)},
                 {"seed", ens.seed},
                 {"model", ens.model_name},
                 {"steps", ens.steps},
                 {"dt", ens.dt},
                 {"max_path_integral", ens.max_path_integral}});
}

PathEnsemble read_ensemble(const std::filesystem::path& path) {
  Reader r(path);
  const auto& h = r.header();
  if (h.at("kind") != "ensemble") throw Error(path.string() + " does not hold an ensemble");
  PathEnsemble ens;
  ens.dim = h.at("n").get<std::size_t>();
  ens.paths = h.at("paths").get<std::size_t>();
  ens.times = h.at("times").get<std::vector<double>>();
  ens.initial_point = from_std(h.at("initial_point").get<std::vector<double>>());
  ens.seed = h.at("seed").get<std::uint64_t>();
  ens.model_name = h.at("model").get<std::string>();
  ens.steps = h.at("steps").get<std::size_t>();
  ens.dt = h.at("dt").get<double>();
  ens.max_path_integral = h.at("max_path_integral").get<double>();
  ens.states.resize(static_cast<Eigen::Index>(ens.dim),
                    static_cast<Eigen::Index>(ens.paths * ens.nodes()));
  for (std::size_t k = 0; k < ens.nodes(); ++k) {
    r.read_chunk(k, ens.states.data() + k * ens.paths * ens.dim, ens.paths * ens.dim);
  }
  return ens;
}

nlohmann::json read_header(const std::filesystem::path& path) { return Reader(path).header(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string family_integrals_csv(const MarginalFlow& flow, const TestFamily& family) {
  std::ostringstream os;
  os.precision(17);
  os << 't';
  for (const auto& f : family) os << ',' << quoted(f.name());
  os << '\n';
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const Vector v = family_integrals(flow.nodes[k], family);
    os << flow.times[k];
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << v[i];
    os << '\n';
  }
  return os.str();
}

std::string martingale_csv(const std::vector<MartingaleStat>& stats) {
  std::ostringstream os;
  os.precision(17);
  os << "f,g,s,t,statistic,standard_error,z,paths\n";
  for (const auto& s : stats) {
    os << quoted(s.f) << ',' << quoted(s.g) << ',' << s.s << ',' << s.t << ',' << s.statistic << ','
       << s.standard_error << ',' << s.z << ',' << s.paths << '\n';
  }
  return os.str();
}

}  // namespace fpk::io
