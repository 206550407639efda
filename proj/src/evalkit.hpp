#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "constructions.hpp"
#include "lang_core.hpp"

namespace dyf {

// Positions 0..n_max are in-distribution; test sets reach floor(ood_factor * n_max).
struct SplitSpec {
    int n_max = 256;
    double ood_factor = 1.2;

    void validate() const;  // throws std::invalid_argument
    int test_cap() const;   // last allowed position in a test-style sequence
    bool is_id(std::size_t position) const { return position <= static_cast<std::size_t>(n_max); }
};

enum class DatasetStyle { Train, Test };

using Dataset = std::vector<Sample>;

// Train-style sequences stop at position n_max, test-style ones at test_cap().
Dataset generate_dataset(const Alphabet& A, const GenParams& g, int count, const SplitSpec& split, DatasetStyle style,
                         std::uint64_t seed);

// Half the l1 distance; both inputs must be distributions of equal length.
double tv_distance(const Vec& p, const Vec& q);

// Next-token distributions after s[0..i] for every i; an empty Vec means "no prediction here".
using DistSource = std::function<std::vector<Vec>(const Seq&)>;
DistSource oracle_source(const Alphabet& A, const GenParams& g);
DistSource network_source(const BuiltNetwork& n);
DistSource uniform_source(const Alphabet& A);

struct SplitValue {
    double value = 0.0;
    long count = 0;  // qualifying positions
};

struct AccClosed {
    SplitValue id, ood;
};
// Mean of p(valid closers) / p(all closers) over prefixes with depth >= 1.
// Throws std::invalid_argument when no position qualifies in either split.
AccClosed acc_closed(const DistSource& src, const Alphabet& A, Lang L, const Dataset& data, const SplitSpec& split);

struct MaxTv {
    SplitValue id, ood;
    long skipped_sequences = 0;  // no prefix predicted, e.g. outside the no-BOS domain
};
// Worst TV between two sources over every prefix both of them predict.
MaxTv max_tv(const DistSource& a, const DistSource& b, const Dataset& data, const SplitSpec& split);
// Exact TV against the process at every prefix. Throws for a recognizer.
MaxTv max_tv_over_prefixes(const BuiltNetwork& n, const GenParams& g, const Dataset& data, const SplitSpec& split);

struct NearMiss {
    Seq seq;
    bool member = false;
    double margin = 0.0;
};

struct Recognition {
    double accuracy = 0.0;
    long tp = 0, tn = 0, fp = 0, fn = 0;
    long skipped = 0;  // inputs outside the network's domain
    std::vector<NearMiss> nearest;  // smallest |margin| first
};
using Verdictor = std::function<Verdict(const Seq&)>;
Recognition recognition_accuracy(const Verdictor& v, const std::vector<Seq>& positives, const std::vector<Seq>& negatives,
                                 std::size_t keep_nearest = 5);
// Wraps a recognizer; no-BOS inputs are fed without BOS and skipped when their first two tokens are equal.
Recognition recognition_accuracy(const BuiltNetwork& n, const std::vector<Seq>& positives,
                                 const std::vector<Seq>& negatives, std::size_t keep_nearest = 5);

enum class Corruption { SwapType, Flip, Delete, Insert };
// One edit of the body. Returns the input unchanged if the edit does not apply.
Seq corrupt(const Alphabet& A, const Seq& framed, Corruption c, std::size_t pos, int token);
// A random single edit that leaves the language; empty if none was found in a few tries.
Seq random_negative(const Alphabet& A, Lang L, const Seq& member, Rng& rng);
// Missing EOS, repeated EOS, and an EOS inside the body.
std::vector<Seq> malformed_framings(const Alphabet& A, const Seq& member);

// Negatives for a member corpus: one corruption per member plus every malformed framing.
std::vector<Seq> negative_corpus(const Alphabet& A, Lang L, const std::vector<Seq>& members, std::uint64_t seed);

// Worker count from DYCKFORMER_THREADS, else the hardware count; at least 1.
unsigned eval_threads();
// Runs f(i) for i in [0, n) on eval_threads() workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace dyf
