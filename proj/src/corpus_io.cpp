#include "ltm/corpus_io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ltm/synth.hpp"

namespace ltm {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace

CorpusManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ManifestError(std::string("manifest is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ManifestError("manifest must be a mapping");
  CorpusManifest m;
  try {
    if (root["format"] && root["format"].as<std::string>() != "ltm-manifest/1") {
      throw ManifestError("unsupported manifest format " + root["format"].as<std::string>());
    }
    if (root["name"]) m.name = root["name"].as<std::string>();
    if (root["seed"]) m.seed = root["seed"].as<std::uint64_t>();
    if (root["f_d"]) m.f_d = root["f_d"].as<double>();
    if (root["seq_len"]) m.seq_len = root["seq_len"].as<int>();
    if (auto synth = root["synthetic"]) {
      auto spec = SynthSpec::standard(synth["total_points"].as<std::uint64_t>());
      for (const auto& s : spec.sources) {
        m.entries.push_back({s.label, s.family, {}, "wide", s.points, s.min_length, s.max_length});
      }
    }
    if (auto sources = root["sources"]) {
      for (const auto& node : sources) {
        ManifestEntry e;
        e.label = node["label"].as<std::string>();
        if (node["generator"]) {
          e.generator = node["generator"].as<std::string>();
          e.points = node["points"].as<std::uint64_t>();
          if (node["min_length"]) e.min_length = node["min_length"].as<std::size_t>();
          if (node["max_length"]) e.max_length = node["max_length"].as<std::size_t>();
        } else if (node["csv"]) {
          e.csv = base_dir / node["csv"].as<std::string>();
          if (node["layout"]) e.layout = node["layout"].as<std::string>();
        } else {
          throw ManifestError("source '" + e.label + "' needs either 'generator' or 'csv'");
        }
        m.entries.push_back(std::move(e));
      }
    }
  } catch (const YAML::Exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  if (m.entries.empty()) throw ManifestError("manifest lists no sources");
  if (!(m.f_d > 0.0 && m.f_d <= 1.0)) throw ManifestError("manifest f_d must lie in (0, 1]");
  if (m.seq_len < 2) throw ManifestError("manifest seq_len must be >= 2");
  return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

Corpus read_csv_series(const std::filesystem::path& path, const std::string& layout, const std::string& source) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open CSV " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    rows.push_back(split_fields(line));
  }
  if (rows.empty()) throw ManifestError("CSV " + path.string() + " is empty");

  const std::string stem = path.stem().string();
  Corpus out;
  if (layout == "wide") {
    double probe = 0.0;
    const bool header = !parse_double(rows[0][0], probe);
    const std::size_t cols = rows[0].size();
    std::vector<SeriesRecord> series(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      series[c].source = source;
      series[c].id = header ? stem + "/" + rows[0][c] : (cols == 1 ? stem : stem + "/" + std::to_string(c));
    }
    for (std::size_t r = header ? 1 : 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols && c < rows[r].size(); ++c) {
        if (rows[r][c].empty()) continue;
        double v = 0.0;
        if (!parse_double(rows[r][c], v) || !std::isfinite(v)) {
          throw ManifestError(path.string() + ":" + std::to_string(r + 1) + ": bad value '" + rows[r][c] + "'");
        }
        series[c].values.push_back(v);
      }
    }
    for (auto& s : series) {
      if (!s.values.empty()) out.push_back(std::move(s));
    }
  } else if (layout == "long") {
    if (rows[0].size() < 3 || rows[0][0] != "id") throw ManifestError(path.string() + ": expected header id,timestamp,value");
    struct Point {
      std::string stamp;
      double value;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Point>> groups;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() < 3) throw ManifestError(path.string() + ":" + std::to_string(r + 1) + ": short row");
      double v = 0.0;
      if (!parse_double(rows[r][2], v) || !std::isfinite(v)) {
        throw ManifestError(path.string() + ":" + std::to_string(r + 1) + ": bad value '" + rows[r][2] + "'");
      }
      auto [it, inserted] = groups.try_emplace(rows[r][0]);
      if (inserted) order.push_back(rows[r][0]);
      it->second.push_back({rows[r][1], v});
    }
    for (const auto& id : order) {
      auto& pts = groups[id];
      std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        double x = 0.0;
        double y = 0.0;
        if (parse_double(a.stamp, x) && parse_double(b.stamp, y)) return x < y;
        return a.stamp < b.stamp;
      });
      SeriesRecord s{source, stem + "/" + id, {}};
      for (const auto& p : pts) s.values.push_back(p.value);
      out.push_back(std::move(s));
    }
  } else {
    throw ManifestError("unknown CSV layout '" + layout + "'");
  }
  return out;
}

IngestResult ingest(const CorpusManifest& manifest) {
  IngestResult result;
  Corpus raw;
  for (const auto& e : manifest.entries) {
    Corpus part;
    if (!e.generator.empty()) {
      SynthSpec spec;
      spec.sources.push_back({e.label, e.generator, e.points, e.min_length, e.max_length});
      part = synth_corpus(spec, manifest.seed);
    } else {
      part = read_csv_series(e.csv, e.layout, e.label);
    }
    for (auto& s : part) {
      if (s.length() < 2) {
        result.warnings.push_back("dropped series '" + s.id + "' with fewer than two points");
        continue;
      }
      raw.push_back(std::move(s));
    }
  }
  result.balance = balance_report(raw);
  normalize_corpus(raw);
  result.corpus = split(raw, manifest.seed, &result.warnings);
  if (manifest.f_d < 1.0) {
    Rng rng(derive_seed(manifest.seed, "scale_dataset"));
    result.corpus.train = scale_dataset(result.corpus.train, manifest.f_d, manifest.seq_len, rng);
  }
  return result;
}

namespace {

static_assert(std::endian::native == std::endian::little, "corpus cache assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ManifestError("corpus cache truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw ManifestError("corpus cache: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ManifestError("corpus cache truncated");
  return s;
}

void put_corpus(std::ostream& out, const Corpus& c) {
  put<std::uint64_t>(out, c.size());
  for (const auto& s : c) {
    put_string(out, s.source);
    put_string(out, s.id);
    put<std::uint64_t>(out, s.values.size());
    out.write(reinterpret_cast<const char*>(s.values.data()), static_cast<std::streamsize>(s.values.size() * 8));
  }
}

Corpus get_corpus(std::istream& in) {
  auto n = get<std::uint64_t>(in);
  Corpus c;
  c.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    SeriesRecord s;
    s.source = get_string(in);
    s.id = get_string(in);
    auto len = get<std::uint64_t>(in);
    s.values.resize(static_cast<std::size_t>(len));
    in.read(reinterpret_cast<char*>(s.values.data()), static_cast<std::streamsize>(len * 8));
    if (!in) throw ManifestError("corpus cache truncated");
    c.push_back(std::move(s));
  }
  return c;
}

}  // namespace

void write_corpus_cache(const std::filesystem::path& path, const CorpusCache& cache) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ManifestError("cannot write corpus cache " + path.string());
  out.write(kCorpusMagic, sizeof(kCorpusMagic));
  put<std::uint32_t>(out, kCorpusVersion);
  put_string(out, cache.name);
  put<std::uint64_t>(out, cache.seed);
  put_corpus(out, cache.corpus.train);
  put_corpus(out, cache.corpus.test);
}

CorpusCache read_corpus_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open corpus cache " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCorpusMagic, sizeof(magic)) != 0) {
    throw ManifestError(path.string() + " is not an ltm corpus cache");
  }
  auto version = get<std::uint32_t>(in);
  if (version != kCorpusVersion) throw ManifestError("unsupported corpus cache version " + std::to_string(version));
  CorpusCache cache;
  cache.name = get_string(in);
  cache.seed = get<std::uint64_t>(in);
  cache.corpus.train = get_corpus(in);
  cache.corpus.test = get_corpus(in);
  return cache;
}

std::filesystem::path cache_root() {
  if (const char* env = std::getenv("LTM_CACHE_ROOT"); env && *env) return env;
  return ".ltm-cache";
}

}  // namespace ltm
