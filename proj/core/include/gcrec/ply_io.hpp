#pragma once

#include <string>

#include "gcrec/point_cloud.hpp"

namespace gcrec {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Reads vertex elements with float/double x/y/z and optional uchar
/// red/green/blue. Colors dequantize as (v + 0.5) / 256.
PointCloud load_ply(const std::string& path);

/// Binary mode stores positions as doubles so a round trip is bit exact.
void save_ply(const PointCloud& cloud, const std::string& path,
              PlyFormat format = PlyFormat::BinaryLittleEndian);

}  // namespace gcrec
