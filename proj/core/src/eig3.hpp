#pragma once

#include <cmath>

#include "gcrec/geometry.hpp"

namespace gcrec::detail {

struct Eig3 {
  double values[3];  // ascending
  Vec3 vectors[3];
};

// Jacobi sweeps for a symmetric 3x3 matrix (destroys the input).
inline Eig3 sym_eig3(double m[3][3]) {
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int sweep = 0; sweep < 32; ++sweep) {
    const double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
    if (off < 1e-14) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(m[p][q]) < 1e-300) continue;
        const double phi = 0.5 * std::atan2(2.0 * m[p][q], m[q][q] - m[p][p]);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int i = 0; i < 3; ++i) {
          const double mip = m[i][p], miq = m[i][q];
          m[i][p] = c * mip - s * miq;
          m[i][q] = s * mip + c * miq;
        }
        for (int i = 0; i < 3; ++i) {
          const double mpi = m[p][i], mqi = m[q][i];
          m[p][i] = c * mpi - s * mqi;
          m[q][i] = s * mpi + c * mqi;
        }
        for (int i = 0; i < 3; ++i) {
          const double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
  }
  int order[3] = {0, 1, 2};
  for (int i = 0; i < 2; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (m[order[j]][order[j]] < m[order[i]][order[i]]) std::swap(order[i], order[j]);
  Eig3 out;
  for (int i = 0; i < 3; ++i) {
    const int k = order[i];
    out.values[i] = m[k][k];
    out.vectors[i] = Vec3{v[0][k], v[1][k], v[2][k]}.normalized();
  }
  return out;
}

}  // namespace gcrec::detail
