#include "sdae/wiener.hpp"

#include "sdae/format.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace sdae {

bool is_power_of_two(long n)
{
    return n > 0 && (n & (n - 1)) == 0;
}

namespace detail {

void philox4x32_10(const std::uint32_t ctr_in[4], const std::uint32_t key_in[2], std::uint32_t out[4])
{
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    std::uint32_t c0 = ctr_in[0], c1 = ctr_in[1], c2 = ctr_in[2], c3 = ctr_in[3];
    std::uint32_t k0 = key_in[0], k1 = key_in[1];
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
}

}  // namespace detail

namespace {

double to_unit_open(std::uint32_t hi, std::uint32_t lo)
{
    // 53-bit uniform on (0, 1): never 0, so log() below is finite.
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

WienerGrid generate(std::uint64_t seed, std::uint64_t path_index, int m, long N, double T)
{
    if (!is_power_of_two(N)) throw std::invalid_argument("wiener::generate: N must be a power of two");
    if (m < 1) throw std::invalid_argument("wiener::generate: m must be >= 1");
    if (!(T > 0) || !std::isfinite(T)) throw std::invalid_argument("wiener::generate: T must be positive");

    WienerGrid w;
    w.seed = seed;
    w.path_index = path_index;
    w.m = m;
    w.N = N;
    w.T = T;
    w.increments.resize(N, m);

    const std::uint32_t key[2] = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const double scale = std::sqrt(T / static_cast<double>(N));
    const long total = N * m;
    std::uint64_t counter = 0;
    for (long k = 0; k < total; k += 2, ++counter) {
        const std::uint32_t ctr[4] = {static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                                      static_cast<std::uint32_t>(path_index),
                                      static_cast<std::uint32_t>(path_index >> 32)};
        std::uint32_t out[4];
        detail::philox4x32_10(ctr, key, out);
        const double u1 = to_unit_open(out[0], out[1]);
        const double u2 = to_unit_open(out[2], out[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        const double z[2] = {radius * std::cos(angle), radius * std::sin(angle)};
        for (int j = 0; j < 2 && k + j < total; ++j) {
            const long idx = k + j;
            w.increments(idx / m, idx % m) = scale * z[j];
        }
    }
    return w;
}

Vector WienerGrid::partial_sum(long begin, long end) const
{
    Vector sum = Vector::Zero(m);
    for (long n = begin; n < end; ++n) sum += increments.row(n).transpose();
    return sum;
}

Vector WienerGrid::total() const
{
    return coarsen(*this, N).increment(0);
}

WienerGrid coarsen(const WienerGrid& w, long factor)
{
    if (!is_power_of_two(factor) || factor > w.N || w.N % factor != 0)
        throw std::invalid_argument("wiener::coarsen: factor must be a power of two dividing N");
    WienerGrid out = w;
    for (; factor > 1; factor /= 2) {
        const long half = out.N / 2;
        Matrix halved(half, out.m);
        for (long j = 0; j < half; ++j)
            halved.row(j) = out.increments.row(2 * j) + out.increments.row(2 * j + 1);
        out.increments = std::move(halved);
        out.N = half;
    }
    return out;
}

void write_csv(std::ostream& out, const WienerGrid& w)
{
    out << "t";
    for (int j = 0; j < w.m; ++j) out << ",dW_" << (j + 1);
    out << '\n';
    for (long n = 0; n < w.N; ++n) {
        out << format_double(static_cast<double>(n) * w.h());
        for (int j = 0; j < w.m; ++j) out << ',' << format_double(w.increments(n, j));
        out << '\n';
    }
}

}  // namespace sdae
