#pragma once

#include <filesystem>
#include <iosfwd>

#include "phyulstm/training.hpp"

namespace phyulstm {

/// Binary layout: "PHYULSTM", u64 little-endian header length, JSON header,
/// then every parameter as little-endian doubles in header order.
void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck);
void write_checkpoint(std::ostream& out, const Checkpoint& ck);

/// Throws std::runtime_error naming the offending field, shape or byte count.
Checkpoint load_checkpoint(const std::filesystem::path& file);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace phyulstm
