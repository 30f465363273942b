#pragma once

#include <cstddef>
#include <vector>

#include "mmconcept/bpe.hpp"
#include "mmconcept/nn/rng.hpp"
#include "mmconcept/nn/transformer.hpp"

namespace mmconcept::nn {

struct MaskedSequence {
  std::vector<int> ids;
  std::vector<MaskedPosition> labels;
};

/// MLM corruption. Each non-special position is selected with probability
/// `mask_rate`; a selected position becomes <mask> 80% of the time, a random
/// non-special token 10% of the time, and is left unchanged otherwise.
/// Labels hold the original ids at selected positions.
inline MaskedSequence apply_mlm_masking(const std::vector<int>& ids, double mask_rate, std::size_t vocab_size,
                                        Rng& rng) {
  MaskedSequence out{ids, {}};
  if (mask_rate <= 0.0) return out;
  const auto random_range = static_cast<std::uint64_t>(vocab_size - Vocabulary::kSpecialCount);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (Vocabulary::is_special(ids[i])) continue;
    if (rng.uniform() >= mask_rate) continue;
    out.labels.push_back({i, ids[i]});
    const double r = rng.uniform();
    if (r < 0.8) {
      out.ids[i] = Vocabulary::kMask;
    } else if (r < 0.9) {
      out.ids[i] = Vocabulary::kSpecialCount + static_cast<int>(rng.below(random_range));
    }
  }
  return out;
}

inline std::vector<MaskedSequence> apply_mlm_masking(const std::vector<std::vector<int>>& batch, double mask_rate,
                                                     std::size_t vocab_size, Rng& rng) {
  std::vector<MaskedSequence> out;
  out.reserve(batch.size());
  for (const auto& seq : batch) out.push_back(apply_mlm_masking(seq, mask_rate, vocab_size, rng));
  return out;
}

}  // namespace mmconcept::nn
