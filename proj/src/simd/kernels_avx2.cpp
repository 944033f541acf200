// Compiled with -mavx2 -mfma; only reached after the CPUID check in dispatch.
#if defined(__AVX2__)

#include "kernels_impl.hpp"

namespace opd::simd::detail {

const KernelTable kAvx2Table = make_table<VecAvx2>();

}  // namespace opd::simd::detail

#endif
