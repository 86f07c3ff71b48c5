#pragma once

// Reproducible Brownian increments on dyadic grids with exact coarsening.

#include "sdae/linalg.hpp"

#include <cstdint>
#include <iosfwd>

namespace sdae {

/**
 * Brownian increments dW_n = W(t_{n+1}) - W(t_n) on a uniform grid of
 * N = 2^k steps over [0, T]. Row n of `increments` holds the m coordinates
 * of step n.
 */
struct WienerGrid {
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    int m = 0;
    long N = 0;
    double T = 0.0;
    Matrix increments;

    double h() const { return T / static_cast<double>(N); }
    Vector increment(long n) const { return increments.row(n).transpose(); }
    /// W(T) - W(0) in dyadic (pairwise) summation order, the same order coarsen uses.
    Vector total() const;
    /// Sum of increments [begin, end), left to right.
    Vector partial_sum(long begin, long end) const;
};

/**
 * Increments are i.i.d. N(0, T/N). The stream for (seed, path_index) is a
 * Philox-4x32-10 counter generator keyed by seed and path_index; counter word
 * 0 is the draw index. Normals come from Box-Muller on pairs of 53-bit
 * uniforms, so the output depends only on (seed, path_index, N, m, T).
 */
WienerGrid generate(std::uint64_t seed, std::uint64_t path_index, int m, long N, double T);

/**
 * Sums blocks of `factor` consecutive increments; factor must be a power of
 * two dividing N. Blocks are reduced by repeated pairwise halving, so
 * coarsen(coarsen(w, a), b) == coarsen(w, a * b) and total() are bit-exact.
 */
WienerGrid coarsen(const WienerGrid& w, long factor);

/// CSV columns: t, dW_1..dW_m  (t is the left endpoint of each step).
void write_csv(std::ostream& out, const WienerGrid& w);

bool is_power_of_two(long n);

namespace detail {

/// One Philox-4x32-10 block.
void philox4x32_10(const std::uint32_t ctr_in[4], const std::uint32_t key_in[2], std::uint32_t out[4]);

}  // namespace detail
}  // namespace sdae
