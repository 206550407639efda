#pragma once
#include "constructions.hpp"
#include "transformer.hpp"

namespace dyf {

// RMS-norm FFN -> LayerNorm FFN with hidden [W1; -W1], W2' = [W2 0], beta' = (beta; 0), gamma' = (gamma; 1).
Ffn rmsln_ffn_to_ln_ffn(const Ffn& f);

// QK-norm conversions; both throw std::invalid_argument on the wrong variant.
Attention qkln_to_qkrmsln(const Attention& a);  // row means removed from W_Q, W_K
Attention qkrmsln_to_qkln(const Attention& a);  // 3x query/key dimension

// Fixed-norm QK-RMSLN version of one attention layer of a constructed network.
// Scores are unchanged except in the prefix check, where keys become unit directions.
// Throws std::invalid_argument for an unknown block role.
Attention qk_fixed_norm_wrap(const BuiltNetwork& n, std::size_t block);
// Every attention layer wrapped.
BuiltNetwork with_qk_norm(const BuiltNetwork& n);
// Every FFN converted to LayerNorm.
BuiltNetwork with_ln_ffn(const BuiltNetwork& n);

}  // namespace dyf
