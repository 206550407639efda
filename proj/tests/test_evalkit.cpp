#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "evalkit.hpp"
#include "io.hpp"
#include "oracles.hpp"

using namespace dyf;

namespace {

ConstructionParams small(int n_max) {
    ConstructionParams p;
    p.n_max = n_max;
    return p;
}

Dataset wrap(const std::vector<Seq>& seqs) {
    Dataset d;
    for (const auto& s : seqs) d.push_back({s, false});
    return d;
}

}  // namespace

TEST_CASE("generate_dataset: determinism and caps") {
    Alphabet A(2);
    auto g = GenParams::dyck(2, 0.5, 0.9);
    SplitSpec sp{40, 1.2};
    auto a = generate_dataset(A, g, 200, sp, DatasetStyle::Test, 7);
    auto b = generate_dataset(A, g, 200, sp, DatasetStyle::Test, 7);
    auto c = generate_dataset(A, g, 200, sp, DatasetStyle::Test, 8);
    CHECK(dataset_to_jsonl(A, a) == dataset_to_jsonl(A, b));
    CHECK(dataset_to_jsonl(A, a) != dataset_to_jsonl(A, c));
    long trunc = 0;
    for (const auto& s : a) {
        CHECK(s.tokens.size() <= static_cast<std::size_t>(sp.test_cap()) + 1);
        CHECK(is_dyck_prefix(A, s.tokens));
        if (s.truncated) {
            ++trunc;
            CHECK(s.tokens.size() == static_cast<std::size_t>(sp.test_cap()) + 1);
            CHECK(s.tokens.back() != A.eos());
        } else {
            CHECK(is_dyck_member(A, s.tokens));
        }
    }
    CHECK(trunc > 0);
    auto tr = generate_dataset(A, g, 200, sp, DatasetStyle::Train, 7);
    for (const auto& s : tr) CHECK(s.tokens.size() <= 41);
    CHECK_THROWS_AS(generate_dataset(A, g, 0, sp, DatasetStyle::Test, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset(A, g, 1, SplitSpec{40, 1.0}, DatasetStyle::Test, 1), std::invalid_argument);
}

TEST_CASE("generate_dataset: mean length matches the process") {
    // Depth 0 opens with prob r, else EOS; deeper positions open with prob q < 1/2.
    // Each excursion takes 1 + 1/(1 - 2q) tokens and there are r/(1-r) of them on average.
    // (Shuffle renormalizes over closable types, so its depth is not a simple walk.)
    const double q = 0.3, r = 0.8;
    {
        Alphabet A(3);
        auto g = GenParams::dyck(3, q, r);
        auto d = generate_dataset(A, g, 20000, SplitSpec{4000, 1.2}, DatasetStyle::Train, 11);
        double sum = 0.0, sq = 0.0;
        for (const auto& s : d) {
            CHECK_FALSE(s.truncated);
            const double n = static_cast<double>(s.tokens.size());
            sum += n;
            sq += n * n;
        }
        const double N = static_cast<double>(d.size()), mean = sum / N;
        const double sd = std::sqrt(sq / N - mean * mean);
        const double expect = 2.0 + r / (1.0 - r) * (1.0 + 1.0 / (1.0 - 2.0 * q));
        INFO("mean ", mean, " expected ", expect, " sigma ", sd / std::sqrt(N));
        CHECK(std::abs(mean - expect) <= 3.0 * sd / std::sqrt(N));
    }
}

TEST_CASE("tv_distance") {
    CHECK(tv_distance({0.2, 0.8}, {0.2, 0.8}) == 0.0);
    CHECK(tv_distance({1, 0, 0}, {0, 1, 0}) == 1.0);
    CHECK_THROWS_AS(tv_distance({1.0}, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(tv_distance({0.5, 0.6}, {0.5, 0.5}), std::invalid_argument);
    Rng rng(3);
    auto rand_dist = [&](std::size_t n) {
        Vec v(n);
        double s = 0.0;
        for (double& x : v) s += (x = rng.uniform());
        for (double& x : v) x /= s;
        return v;
    };
    for (int i = 0; i < 500; ++i) {
        Vec a = rand_dist(6), b = rand_dist(6), c = rand_dist(6);
        const double ab = tv_distance(a, b), ba = tv_distance(b, a);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(tv_distance(a, c) <= ab + tv_distance(b, c) + 1e-15);
    }
}

TEST_CASE("acc_closed: oracle, uniform and split bookkeeping") {
    for (Lang L : {Lang::Dyck, Lang::Shuffle}) {
        const int k = 3;
        Alphabet A(k);
        auto g = L == Lang::Dyck ? GenParams::dyck(k, 0.5, 0.9) : GenParams::shuffle(k, 0.5, 0.9);
        SplitSpec sp{30, 1.2};
        auto d = generate_dataset(A, g, 300, sp, DatasetStyle::Test, 5);
        auto acc = acc_closed(oracle_source(A, g), A, L, d, sp);
        CHECK(acc.id.value == 1.0);
        CHECK(acc.ood.value == 1.0);
        CHECK(acc.ood.count > 0);
        auto uni = acc_closed(uniform_source(A), A, L, d, sp);
        if (L == Lang::Dyck) {
            CHECK(uni.id.value == doctest::Approx(1.0 / k).epsilon(1e-12));
            CHECK(uni.ood.value == doctest::Approx(1.0 / k).epsilon(1e-12));
        } else {
            CHECK(uni.id.value >= 1.0 / k);
            CHECK(uni.id.value < 1.0);
        }
        // Every position with depth >= 1 is counted exactly once.
        long expect[2] = {0, 0};
        for (const auto& s : d) {
            int dep = 0;
            for (std::size_t i = 0; i < s.tokens.size() && s.tokens[i] != A.eos(); ++i) {
                dep += A.kind(s.tokens[i]) == Kind::Open ? 1 : A.kind(s.tokens[i]) == Kind::Close ? -1 : 0;
                if (dep >= 1) ++expect[i + 1 <= 30 ? 0 : 1];
            }
        }
        CHECK(acc.id.count == expect[0]);
        CHECK(acc.ood.count == expect[1]);
    }
    Alphabet A(2);
    CHECK_THROWS_AS(acc_closed(uniform_source(A), A, Lang::Dyck, wrap({A.parse_seq("BOS EOS")}), SplitSpec{10, 1.2}),
                    std::invalid_argument);
}

TEST_CASE("acc_closed and max TV of the constructed generator, k = 8") {
    const int k = 8;
    Alphabet A(k);
    auto g = GenParams::dyck(k, 0.5, 0.9);
    auto n = build_dyck_generator(k, g, small(120));
    SplitSpec sp{100, 1.2};
    auto d = generate_dataset(A, g, 40, sp, DatasetStyle::Test, 9);
    const double bound = 2.0 * (k + 1) * std::exp(-12.0);
    auto tv = max_tv_over_prefixes(n, g, d, sp);
    MESSAGE("max TV id ", tv.id.value, " ood ", tv.ood.value);
    CHECK(tv.id.value <= bound);
    CHECK(tv.ood.value <= bound);
    CHECK(tv.skipped_sequences == 0);
    auto acc = acc_closed(network_source(n), A, Lang::Dyck, d, sp);
    CHECK(acc.id.value >= 1.0 - 10.0 * bound);
    CHECK(acc.ood.value >= 1.0 - 10.0 * bound);

    auto self = max_tv(oracle_source(A, g), oracle_source(A, g), d, sp);
    CHECK(self.id.value == 0.0);
    CHECK(self.ood.value == 0.0);
    CHECK_THROWS_AS(max_tv_over_prefixes(build_dyck_recognizer(2, small(16)), g, d, sp), std::invalid_argument);
}

TEST_CASE("max TV shrinks as the generator constant grows") {
    const int k = 2;
    Alphabet A(k);
    auto g = GenParams::dyck(k, 0.5, 0.9);
    SplitSpec sp{60, 1.2};
    auto d = generate_dataset(A, g, 30, sp, DatasetStyle::Test, 4);
    double prev = 1.0;
    for (double c0 : {4.0, 8.0, 12.0}) {
        auto p = small(80);
        p.C0_gen = c0;
        auto tv = max_tv_over_prefixes(build_dyck_generator(k, g, p), g, d, sp);
        const double worst = std::max(tv.id.value, tv.ood.value);
        MESSAGE("C0 ", c0, " max TV ", worst);
        CHECK(worst < prev);
        prev = worst;
    }
}

TEST_CASE("recognition_accuracy on the exhaustive k = 2 suite") {
    Alphabet A(2);
    auto n = build_dyck_recognizer(2, small(32));
    std::vector<Seq> pos, neg;
    for (int len = 0; len <= 6; ++len)
        for_each_body(A, len, [&](const Seq& b) {
            Seq s = frame(A, b);
            (is_dyck_member(A, s) ? pos : neg).push_back(s);
        });
    for (const auto& m : std::vector<Seq>(pos)) {
        auto f = malformed_framings(A, m);
        neg.insert(neg.end(), f.begin(), f.end());
    }
    auto r = recognition_accuracy(n, pos, neg);
    CHECK(r.accuracy == 1.0);
    CHECK(r.tp == static_cast<long>(pos.size()));
    CHECK(r.tn == static_cast<long>(neg.size()));
    CHECK(r.nearest.size() == 5);
    for (std::size_t i = 1; i < r.nearest.size(); ++i)
        CHECK(std::abs(r.nearest[i - 1].margin) <= std::abs(r.nearest[i].margin));
    auto members_only = recognition_accuracy(n, pos, {}, pos.size());
    for (const auto& nm : members_only.nearest) CHECK(nm.margin >= 0.25 - 1e-9);

    auto always = recognition_accuracy([](const Seq&) { return Verdict{1, 1.0}; }, pos, neg);
    CHECK(always.accuracy == doctest::Approx(static_cast<double>(pos.size()) / static_cast<double>(pos.size() + neg.size())));
    CHECK_THROWS_AS(recognition_accuracy(build_dyck_generator(2, GenParams::dyck(2, 0.5, 0.9), small(16)), pos, neg),
                    std::invalid_argument);
}

TEST_CASE("corruptions") {
    Alphabet A(2);
    Seq m = A.parse_seq("BOS O1 O2 C2 C1 EOS");
    CHECK(corrupt(A, m, Corruption::SwapType, 1, 2) == A.parse_seq("BOS O2 O2 C2 C1 EOS"));
    CHECK(corrupt(A, m, Corruption::SwapType, 1, 1) == m);
    CHECK(corrupt(A, m, Corruption::Flip, 3, 0) == A.parse_seq("BOS O1 O2 O2 C1 EOS"));
    CHECK(corrupt(A, m, Corruption::Delete, 4, 0) == A.parse_seq("BOS O1 O2 C2 EOS"));
    CHECK(corrupt(A, m, Corruption::Delete, 0, 0) == m);
    CHECK(corrupt(A, m, Corruption::Insert, 5, A.close(1)) == A.parse_seq("BOS O1 O2 C2 C1 C1 EOS"));
    CHECK(corrupt(A, m, Corruption::Insert, 0, A.open(1)) == m);
    auto f = malformed_framings(A, m);
    CHECK(f.size() == 3);
    for (const auto& s : f) CHECK_FALSE(is_dyck_member(A, s));
    CHECK(malformed_framings(A, A.parse_seq("BOS EOS")).size() == 2);

    for (Lang L : {Lang::Dyck, Lang::Shuffle}) {
        auto g = L == Lang::Dyck ? GenParams::dyck(2, 0.5, 0.9) : GenParams::shuffle(2, 0.5, 0.9);
        auto d = generate_dataset(A, g, 200, SplitSpec{40, 1.2}, DatasetStyle::Train, 2);
        std::vector<Seq> mem;
        for (const auto& s : d)
            if (!s.truncated) mem.push_back(s.tokens);
        auto neg = negative_corpus(A, L, mem, 17);
        CHECK(neg.size() >= 2 * mem.size());
        for (const auto& s : neg) CHECK_FALSE(is_member(L, A, s));
        CHECK(neg == negative_corpus(A, L, mem, 17));
    }
}

TEST_CASE("thread count does not change results") {
    Alphabet A(2);
    auto g = GenParams::dyck(2, 0.5, 0.9);
    SplitSpec sp{40, 1.2};
    auto d = generate_dataset(A, g, 60, sp, DatasetStyle::Test, 12);
    auto n = build_dyck_generator(2, g, small(64));
    setenv("DYCKFORMER_THREADS", "1", 1);
    CHECK(eval_threads() == 1);
    auto a = acc_closed(network_source(n), A, Lang::Dyck, d, sp);
    auto ta = max_tv_over_prefixes(n, g, d, sp);
    setenv("DYCKFORMER_THREADS", "3", 1);
    CHECK(eval_threads() == 3);
    auto b = acc_closed(network_source(n), A, Lang::Dyck, d, sp);
    auto tb = max_tv_over_prefixes(n, g, d, sp);
    unsetenv("DYCKFORMER_THREADS");
    CHECK(a.id.value == b.id.value);
    CHECK(a.ood.value == b.ood.value);
    CHECK(ta.id.value == tb.id.value);
    CHECK(ta.ood.value == tb.ood.value);
}
