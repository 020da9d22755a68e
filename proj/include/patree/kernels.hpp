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


#pragma once

#include <cstddef>
#include <string_view>

namespace patree::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend backend);
bool avx2_available();

// The backend used by the dispatching entry points. Defaults to the best one
// the CPU supports; PATREE_BACKEND=scalar|avx2 in the environment overrides
// it at first use.
Backend active_backend();
// Throws DomainError if the backend is not available on this machine.
void set_backend(Backend backend);

// One block of total-preference values laid out as rows of `stride` doubles:
// row 0 holds S_f(t), rows 1..dim hold S_{grad_j f}(t), and the following
// dim*(dim+1)/2 rows hold S_{hess_jl f}(t) in packed upper-triangular order.
// Rows beyond `order` are ignored.
struct CesaroBlock {
  const double* data = nullptr;
  std::size_t stride = 0;
  std::size_t len = 0;
  int dim = 0;
  int order = 0;
};

inline int cesaro_rows(int dim) { return 1 + dim + dim * (dim + 1) / 2; }

// Adds the block's contributions to acc:
//   acc[0]                 += sum log S_f
//   acc[1 + j]             += sum S_gj / S_f
//   acc[1 + dim + p(j,l)]  += sum S_Hjl / S_f - S_gj S_gl / S_f^2
void cesaro_accumulate(const CesaroBlock& block, double* acc);
void cesaro_accumulate_scalar(const CesaroBlock& block, double* acc);
// Requires avx2_available(); dim <= kAvx2MaxDim.
void cesaro_accumulate_avx2(const CesaroBlock& block, double* acc);
inline constexpr int kAvx2MaxDim = 8;

// Elementwise natural log of positive finite doubles.
void log_array(const double* x, double* out, std::size_t n);
void log_array_scalar(const double* x, double* out, std::size_t n);
void log_array_avx2(const double* x, double* out, std::size_t n);

}  // namespace patree::kernels
