#pragma once
#include <functional>
#include <set>
#include <vector>

#include "lang_core.hpp"

namespace dyf {

// Independent enumerations used to cross-check the stack/counter oracles.
// Bodies only (no BOS/EOS).

// All Dyck_k bodies of length <= max_len, by expanding X -> eps | open_t X close_t X.
std::set<Seq> enumerate_dyck_grammar(const Alphabet& A, int max_len);

// All interleavings of u and v (memoized on suffix pair).
std::set<Seq> shuffle_set(const Seq& u, const Seq& v);

// All Shuffle-Dyck_k bodies of length <= max_len (max_len <= 12), built as the shuffle of
// k single-type Dyck_1 languages.
std::set<Seq> enumerate_shuffle_dyck(const Alphabet& A, int max_len);

// Every body over the 2k bracket tokens of length exactly len, in lexicographic id order.
void for_each_body(const Alphabet& A, int len, const std::function<void(const Seq&)>& f);

Seq frame(const Alphabet& A, const Seq& body);  // BOS body EOS

}  // namespace dyf
