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


#include <atomic>
#include <cstdlib>
#include <string>

#include "patree/error.hpp"
#include "patree/kernels.hpp"

namespace patree::kernels {
namespace {

Backend detect() {
  if (const char* env = std::getenv("PATREE_BACKEND")) {
    const std::string want(env);
    if (want == "scalar") return Backend::kScalar;
    if (want == "avx2" && avx2_available()) return Backend::kAvx2;
  }
  return avx2_available() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<int>& backend_slot() {
  static std::atomic<int> slot{static_cast<int>(detect())};
  return slot;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

bool avx2_available() {
#if defined(PATREE_HAVE_AVX2)
  static const bool ok =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() {
  return static_cast<Backend>(backend_slot().load(std::memory_order_relaxed));
}

void set_backend(Backend backend) {
  if (backend == Backend::kAvx2 && !avx2_available()) {
    throw DomainError("avx2 backend not available on this machine");
  }
  backend_slot().store(static_cast<int>(backend), std::memory_order_relaxed);
}

void cesaro_accumulate(const CesaroBlock& block, double* acc) {
#if defined(PATREE_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2 && block.dim <= kAvx2MaxDim) {
    cesaro_accumulate_avx2(block, acc);
    return;
  }
#endif
  cesaro_accumulate_scalar(block, acc);
}

void log_array(const double* x, double* out, std::size_t n) {
#if defined(PATREE_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2) {
    log_array_avx2(x, out, n);
    return;
  }
#endif
  log_array_scalar(x, out, n);
}

#if !defined(PATREE_HAVE_AVX2)
void cesaro_accumulate_avx2(const CesaroBlock&, double*) {
  throw DomainError("built without avx2 kernels");
}
void log_array_avx2(const double*, double*, std::size_t) {
  throw DomainError("built without avx2 kernels");
}
#endif

}  // namespace patree::kernels
