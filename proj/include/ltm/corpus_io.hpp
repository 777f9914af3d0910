#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ltm/series.hpp"

namespace ltm {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One source in a corpus manifest: either a synthetic generator or a CSV file.
struct ManifestEntry {
  std::string label;
  std::string generator;          // synthetic family, empty for CSV sources
  std::filesystem::path csv;      // resolved relative to the manifest directory
  std::string layout = "wide";    // "wide" (one series per column) or "long" (id,timestamp,value)
  std::uint64_t points = 0;       // requested count for generators
  std::size_t min_length = 300;
  std::size_t max_length = 3000;
};

struct CorpusManifest {
  std::string name = "corpus";
  std::uint64_t seed = 0;
  double f_d = 1.0;
  int seq_len = 256;
  std::vector<ManifestEntry> entries;
};

/// Parses the YAML manifest format described in docs/formats.md.
CorpusManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
CorpusManifest load_manifest(const std::filesystem::path& path);

/// Wide layout: each column is one series (optional header row names it).
/// Long layout: header id,timestamp,value; rows grouped by id and ordered by timestamp.
Corpus read_csv_series(const std::filesystem::path& path, const std::string& layout, const std::string& source);

struct IngestResult {
  SplitCorpus corpus;
  BalanceReport balance;
  std::vector<std::string> warnings;
};

/// Loads every source, drops series shorter than two points, reports balance on the raw
/// corpus, normalizes each series, splits 95/5 per source and applies f_d to the train split.
IngestResult ingest(const CorpusManifest& manifest);

inline constexpr char kCorpusMagic[8] = {'L', 'T', 'M', 'C', 'O', 'R', 'P', '1'};
inline constexpr std::uint32_t kCorpusVersion = 1;

struct CorpusCache {
  std::string name;
  std::uint64_t seed = 0;
  SplitCorpus corpus;
};

void write_corpus_cache(const std::filesystem::path& path, const CorpusCache& cache);
CorpusCache read_corpus_cache(const std::filesystem::path& path);

/// $LTM_CACHE_ROOT when set, else ".ltm-cache" under the working directory.
std::filesystem::path cache_root();

}  // namespace ltm
