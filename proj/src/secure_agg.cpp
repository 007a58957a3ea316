#include "fedlab/secure_agg.hpp"

#include <cmath>
#include <stdexcept>

namespace fedlab {

unsigned modulus_bits(double n, double sigma, std::size_t k_size,
                      double max_mu_inf, double t) {
  double bound = (t * std::sqrt(n) * sigma + max_mu_inf) *
                 static_cast<double>(k_size);
  double bits = std::ceil(std::log2(bound));
  if (!(bits >= 2.0)) return 2;
  if (bits > 62.0) throw std::overflow_error("modulus_bits: ring too large");
  return static_cast<unsigned>(bits);
}

std::vector<std::vector<uint64_t>> gen_masks(
    const std::vector<std::size_t>& client_ids, std::size_t dim,
    unsigned mod_bits, uint64_t round_seed) {
  const uint64_t m = uint64_t(1) << mod_bits;
  std::vector<std::vector<uint64_t>> masks(client_ids.size(),
                                           std::vector<uint64_t>(dim, 0));
  for (std::size_t a = 0; a < client_ids.size(); ++a) {
    for (std::size_t b = a + 1; b < client_ids.size(); ++b) {
      // Shared pairwise stream; contributes +PRG to the lower id, -PRG to
      // the higher, so the pair telescopes to zero.
      Rng prg = Rng::derive(round_seed,
                            {kStreamMask, client_ids[a], client_ids[b]});
      for (std::size_t i = 0; i < dim; ++i) {
        uint64_t r = prg.next_u64() & (m - 1);
        masks[a][i] = (masks[a][i] + r) & (m - 1);
        masks[b][i] = (masks[b][i] + m - r) & (m - 1);
      }
    }
  }
  return masks;
}

MaskedIntVector enc(const std::vector<int64_t>& z,
                    const std::vector<uint64_t>& mask, unsigned mod_bits) {
  const uint64_t m = uint64_t(1) << mod_bits;
  MaskedIntVector out;
  out.modulus_bits = mod_bits;
  out.values.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    uint64_t zi = static_cast<uint64_t>(z[i]) & (m - 1);  // reduce, incl. negatives
    out.values[i] = (zi + mask[i]) & (m - 1);
  }
  return out;
}

std::vector<uint64_t> sum_masked(const std::vector<MaskedIntVector>& parts,
                                 unsigned mod_bits) {
  const uint64_t m = uint64_t(1) << mod_bits;
  std::vector<uint64_t> sum(parts.empty() ? 0 : parts[0].values.size(), 0);
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] = (sum[i] + p.values[i]) & (m - 1);
    }
  }
  return sum;
}

std::vector<int64_t> decode_sum(const std::vector<uint64_t>& sum_mod_m,
                                unsigned mod_bits) {
  const uint64_t m = uint64_t(1) << mod_bits;
  std::vector<int64_t> out(sum_mod_m.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    uint64_t v = sum_mod_m[i];
    out[i] = v >= m / 2 ? int64_t(v) - int64_t(m) : int64_t(v);
  }
  return out;
}

}  // namespace fedlab
