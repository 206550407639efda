#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "constructions.hpp"

namespace dyf {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Stack oracle vs grammar expansion and counter oracle vs brute-force shuffles, bodies up to max_len.
CheckResult check_lang_oracles(int k, int max_len);
// Process log-probability finite iff member, and above the member bound, on every framed body up to max_len.
CheckResult check_prop2(int k, int max_len);
// Share of sampled sequences whose first two tokens coincide, against 1/k + 3 sigma.
CheckResult check_collision_rate(int k, int samples, std::uint64_t seed);
CheckResult check_recov();
// Positional and depth channels of the recognizer against their closed forms.
CheckResult check_channels(int k, int n_max, int count, std::uint64_t seed);

// Every body up to max_len, framed and malformed, plus all insertions into members of length max_len.
// Recognizers are compared with the oracle in hardmax mode and with the softmax build verdict for verdict.
CheckResult check_recognition_exhaustive(Task t, int k, int max_len, int n_max);
// Sampled members (length <= max_tokens) and one corruption or malformed framing per member.
CheckResult check_recognition_random(Task t, int k, int count, int max_tokens, int n_max, std::uint64_t seed);
// Member margins equal the head bias (1/4 at a = 0) within 1e-9.
CheckResult check_member_margin(int k, int max_len, int random_count, int max_tokens, std::uint64_t seed);

// Max TV over every prefix of sampled sequences against bound.
CheckResult check_generation_tv(Task t, int k, int sequences, int max_tokens, double bound, std::uint64_t seed,
                                double c0 = 12.0);
// Max TV over the first `prefixes` prefixes of sampled sequences.
CheckResult check_shuffle_generation_tv(int k, int prefixes, double bound, std::uint64_t seed);
// The pseudo start signal is exactly 1 at position 0 and 0 elsewhere.
CheckResult check_pseudo_bos(int k, int count, int max_tokens, std::uint64_t seed);

CheckResult check_conversions_random(int cases, std::uint64_t seed);
CheckResult check_conversions_end_to_end(int k, int max_len);

// Named suites: lang, recov, channels, recognition, generation, pseudo-bos, conversions, all.
// Throws std::invalid_argument for an unknown name.
std::vector<CheckResult> run_suite(const std::string& suite, int k, int n_max, std::uint64_t seed);
const std::vector<std::string>& suite_names();

}  // namespace dyf
