#pragma once

namespace icebench::kernels {

// True when the running CPU exposes AVX2 and FMA.
bool cpu_has_avx2_fma();

}  // namespace icebench::kernels
