#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedlab/rng.hpp"

namespace fedlab {

// Additive masking over a power-of-two ring. Masks sum to zero mod m, so
// the server recovers only the sum of client inputs.

struct MaskedIntVector {
  std::vector<uint64_t> values;  // each in [0, m)
  unsigned modulus_bits = 0;
};

// Ring-size rule: ceil(log2((t * sqrt(n) * sigma + max_mu_inf) * K_size)),
// clamped to at least 2 bits.
unsigned modulus_bits(double n, double sigma, std::size_t k_size,
                      double max_mu_inf, double t = 12.0);

// Pairwise cancelling masks: K_k = sum_{j>k} PRG(s_kj) - sum_{j<k} PRG(s_jk)
// mod m, seeds derived from (round_seed, k, j). Sum over clients is zero.
std::vector<std::vector<uint64_t>> gen_masks(
    const std::vector<std::size_t>& client_ids, std::size_t dim,
    unsigned mod_bits, uint64_t round_seed);

// (z + mask) mod m; negative inputs are reduced into [0, m) first.
MaskedIntVector enc(const std::vector<int64_t>& z,
                    const std::vector<uint64_t>& mask, unsigned mod_bits);

// Sums masked vectors mod m (masks cancel).
std::vector<uint64_t> sum_masked(const std::vector<MaskedIntVector>& parts,
                                 unsigned mod_bits);

// Recenters [0, m) into [-m/2, m/2). Correct whenever |true sum| < m/2.
std::vector<int64_t> decode_sum(const std::vector<uint64_t>& sum_mod_m,
                                unsigned mod_bits);

}  // namespace fedlab
