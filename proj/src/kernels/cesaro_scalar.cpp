// Copyright 2026 The patree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>

#include "patree/kernels.hpp"
#include "patree/pa_model.hpp"

namespace patree::kernels {

void cesaro_accumulate_scalar(const CesaroBlock& block, double* acc) {
  const int d = block.dim;
  const std::size_t len = block.len;
  const double* sf = block.data;
  double logs = 0.0;
  for (std::size_t i = 0; i < len; ++i) logs += std::log(sf[i]);
  acc[0] += logs;
  if (block.order < 1) return;
  for (int j = 0; j < d; ++j) {
    const double* sg = block.data + (1 + j) * block.stride;
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += sg[i] / sf[i];
    acc[1 + j] += s;
  }
  if (block.order < 2) return;
  for (int j = 0; j < d; ++j) {
    const double* gj = block.data + (1 + j) * block.stride;
    for (int l = j; l < d; ++l) {
      const double* gl = block.data + (1 + l) * block.stride;
      const int p = packed_index(j, l, d);
      const double* sh = block.data + (1 + d + p) * block.stride;
      double s = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double inv = 1.0 / sf[i];
        s += sh[i] * inv - (gj[i] * inv) * (gl[i] * inv);
      }
      acc[1 + d + p] += s;
    }
  }
}

void log_array_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

}  // namespace patree::kernels
