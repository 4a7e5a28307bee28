#pragma once

namespace lsi {

// Unbiased pass@k estimate from n samples with c passes:
// 1 - C(n-c, k) / C(n, k), evaluated as a telescoping product so large n
// never overflows. pass@1 reduces to c / n exactly.
double pass_at_k(int n, int c, int k);

} // namespace lsi
