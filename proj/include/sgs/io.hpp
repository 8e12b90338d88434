#pragma once

#include <string>

#include "sgs/tensor.hpp"

namespace sgs {

// SGT1 tensor file: magic "SGT1", little-endian u32 rank, rank little-endian
// u32 dims, payload of little-endian f32 values, no padding. Values are
// widened to f64 on read and must be finite.
Tensor read_sgt(const std::string& path);
void write_sgt(const std::string& path, const Tensor& tensor);

// Shortest round-trip decimal form; identical input bits give identical text.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace sgs
