#pragma once

#include <filesystem>
#include <iosfwd>

#include "ltm/model.hpp"

namespace ltm {

/// Binary checkpoint, little-endian. Layout is documented in docs/formats.md.
inline constexpr char kCheckpointMagic[8] = {'L', 'T', 'M', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const Model& model);
Model read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ltm
