#include "passk.hpp"

#include <string>

#include "error.hpp"

namespace lsi {

double pass_at_k(int n, int c, int k) {
    if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
        fail(ErrorCode::invalid_argument,
             "pass_at_k: need 0 <= c <= n and 1 <= k <= n, got n=" + std::to_string(n) +
                 " c=" + std::to_string(c) + " k=" + std::to_string(k));
    }
    if (n - c < k) return 1.0; // every size-k draw contains a passing sample
    if (k == 1) return static_cast<double>(c) / n;
    // C(n-c,k)/C(n,k) = prod_{j=0..k-1} (n-c-j)/(n-j)
    double miss = 1.0;
    for (int j = 0; j < k; j++) {
        miss *= static_cast<double>(n - c - j) / static_cast<double>(n - j);
    }
    return 1.0 - miss;
}

} // namespace lsi
