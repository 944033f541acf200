#include "kernels_impl.hpp"

namespace opd::simd::detail {

const KernelTable kScalarTable = make_table<VecScalar>();

}  // namespace opd::simd::detail
