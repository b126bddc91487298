#pragma once

#include <string>

#include "sdd/network.hpp"

namespace sdd {

// Checkpoint file: magic "SDD1", little-endian. Header carries the input
// geometry and layer specs (LifParams as f64), followed by f32 weight
// matrices in row-major order; a u32 CRC-32 of everything before it trails
// the file.
void save_checkpoint(const NetworkModel& model, const std::string& path);

// Throws CorruptError on bad magic or CRC mismatch, IoError if unreadable.
NetworkModel load_checkpoint(const std::string& path);

}  // namespace sdd
