#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "lang_core.hpp"
#include "oracles.hpp"

using namespace dyf;

namespace {

// Random token string over the whole vocabulary, BOS first.
Seq random_string(const Alphabet& A, Rng& rng, std::size_t len) {
    Seq s{A.bos()};
    for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(2 * A.k))));
    return s;
}

Seq with_bos(const Alphabet& A, const Seq& body) {
    Seq s{A.bos()};
    s.insert(s.end(), body.begin(), body.end());
    return s;
}

}  // namespace

TEST_CASE("alphabet ids and names") {
    Alphabet A(3);
    CHECK(A.size() == 8);
    CHECK(A.open(1) == 0);
    CHECK(A.close(3) == 5);
    CHECK(A.bos() == 6);
    CHECK(A.eos() == 7);
    CHECK(A.format(A.parse_seq("BOS O1 C3 EOS")) == "BOS O1 C3 EOS");
    CHECK_THROWS(A.parse("O4"));
    CHECK_THROWS(A.parse("X1"));
    CHECK_THROWS(A.parse("O1x"));
    CHECK_THROWS(Alphabet(0));
}

TEST_CASE("depth and per-type depth") {
    Alphabet A(2);
    CHECK(depth(A, {A.bos()}) == 0);
    CHECK(depth(A, A.parse_seq("BOS O1 O2 C2")) == 1);
    CHECK(per_type_depth(A, A.parse_seq("BOS O1 O2 C1"), 1) == 0);
    CHECK(per_type_depth(A, A.parse_seq("BOS O1 O2 C1"), 2) == 1);
    CHECK_THROWS(per_type_depth(A, {A.bos()}, 3));

    Alphabet B(5);
    Rng rng(11);
    for (int rep = 0; rep < 500; ++rep) {
        Seq s = random_string(B, rng, 200);
        // Second pass: opens minus closes by id range.
        int opens = 0, closes = 0;
        for (int id : s) {
            if (id < B.k) ++opens;
            else if (id < 2 * B.k) ++closes;
        }
        CHECK(depth(B, s) == opens - closes);
        int sum = 0;
        for (int t = 1; t <= B.k; ++t) sum += per_type_depth(B, s, t);
        CHECK(sum == depth(B, s));
    }
}

TEST_CASE("dyck prefix and membership examples") {
    Alphabet A(2);
    CHECK(is_dyck_prefix(A, A.parse_seq("BOS O1 O2")));
    CHECK_FALSE(is_dyck_prefix(A, A.parse_seq("BOS O1 C2")));
    CHECK(is_dyck_member(A, A.parse_seq("BOS EOS")));
    CHECK(is_dyck_member(A, A.parse_seq("BOS O1 O2 C2 C1 EOS")));
    CHECK_FALSE(is_dyck_member(A, A.parse_seq("BOS O1 O2 C1 C2 EOS")));
    // Malformed framing is a plain "no".
    CHECK_FALSE(is_dyck_member(A, A.parse_seq("O1 C1 EOS")));
    CHECK_FALSE(is_dyck_member(A, A.parse_seq("BOS O1 C1")));
    CHECK_FALSE(is_dyck_member(A, A.parse_seq("BOS O1 C1 EOS EOS")));
    CHECK_FALSE(is_dyck_member(A, A.parse_seq("BOS EOS O1 C1 EOS")));
    CHECK_FALSE(is_dyck_prefix(A, A.parse_seq("BOS O1 BOS")));
    CHECK_FALSE(is_dyck_prefix(A, Seq{}));
    CHECK_FALSE(is_dyck_prefix(A, Seq{A.bos(), 99}));
}

TEST_CASE("stack oracle equals grammar enumeration") {
    for (int k : {1, 2, 3}) {
        Alphabet A(k);
        const int max_len = k == 3 ? 6 : 8;
        const int prefix_len = k == 3 ? 4 : 6;
        auto members = enumerate_dyck_grammar(A, max_len);
        // A prefix of length l extends to a member of length <= 2l, so members up to 2 * prefix_len
        // give an independent prefix set.
        auto long_members = enumerate_dyck_grammar(A, 2 * prefix_len);
        std::set<Seq> prefixes;
        for (const auto& m : long_members)
            for (std::size_t i = 0; i <= m.size(); ++i) prefixes.insert(Seq(m.begin(), m.begin() + static_cast<long>(i)));
        std::size_t checked = 0;
        for (int len = 0; len <= max_len; ++len)
            for_each_body(A, len, [&](const Seq& body) {
                Seq s = with_bos(A, body);
                if (len <= prefix_len) CHECK(is_dyck_prefix(A, s) == (prefixes.count(body) > 0));
                s.push_back(A.eos());
                CHECK(is_dyck_member(A, s) == (members.count(body) > 0));
                ++checked;
            });
        CHECK(checked > 0);
    }
}

TEST_CASE("shuffle oracle examples and enumeration") {
    Alphabet A(2);
    CHECK(is_shuffle_member(A, A.parse_seq("BOS O1 O2 C1 C2 EOS")));
    CHECK_FALSE(is_dyck_member(A, A.parse_seq("BOS O1 O2 C1 C2 EOS")));
    CHECK_FALSE(is_shuffle_prefix(A, A.parse_seq("BOS C1")));
    CHECK(shuffle_set({1, 2}, {3}).size() == 3);

    for (int k : {1, 2}) {
        Alphabet B(k);
        auto members = enumerate_shuffle_dyck(B, 8);
        for (int len = 0; len <= 8; ++len)
            for_each_body(B, len, [&](const Seq& body) {
                Seq s = with_bos(B, body);
                s.push_back(B.eos());
                CHECK(is_shuffle_member(B, s) == (members.count(body) > 0));
            });
    }
}

TEST_CASE("valid close types") {
    Alphabet A(2);
    CHECK(valid_close_types(Lang::Dyck, A, A.parse_seq("BOS O1 O2")) == std::vector<int>{2});
    CHECK(valid_close_types(Lang::Dyck, A, A.parse_seq("BOS")).empty());
    CHECK(valid_close_types(Lang::Shuffle, A, A.parse_seq("BOS O1 O2")) == std::vector<int>{1, 2});
    CHECK_THROWS(valid_close_types(Lang::Dyck, A, A.parse_seq("BOS C1")));
}

TEST_CASE("dyck next distribution") {
    Alphabet A(8);
    auto p = GenParams::dyck(8, 0.5, 0.9);
    Vec d = dyck_next_distribution(A, {A.bos()}, p);
    CHECK(d[static_cast<std::size_t>(A.eos())] == doctest::Approx(0.1).epsilon(1e-15));
    for (int t = 1; t <= 8; ++t) CHECK(d[static_cast<std::size_t>(A.open(t))] == doctest::Approx(0.1125).epsilon(1e-15));
    Vec e = dyck_next_distribution(A, A.parse_seq("BOS O3"), p);
    CHECK(e[static_cast<std::size_t>(A.close(3))] == 0.5);
    CHECK_THROWS(dyck_next_distribution(A, A.parse_seq("BOS C1"), p));
    CHECK_THROWS(dyck_next_distribution(A, A.parse_seq("BOS EOS"), p));

    // Support equals the set of one-token continuations that remain prefixes.
    Rng rng(5);
    for (int rep = 0; rep < 1000; ++rep) {
        Sample smp = sample_sequence(A, p, rng, 1 + rng.below(40));
        Seq pre = smp.tokens;
        if (pre.back() == A.eos()) pre.pop_back();
        Vec dist = dyck_next_distribution(A, pre, p);
        double sum = 0.0;
        for (int id = 0; id < A.size(); ++id) {
            Seq ext = pre;
            ext.push_back(id);
            CHECK((dist[static_cast<std::size_t>(id)] > 0.0) == is_dyck_prefix(A, ext));
            sum += dist[static_cast<std::size_t>(id)];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("shuffle next distribution") {
    Alphabet A(2);
    auto p = GenParams::shuffle(2, 0.3, 0.97);
    Vec d = shuffle_next_distribution(A, {A.bos()}, p);
    CHECK(d[static_cast<std::size_t>(A.eos())] == doctest::Approx(0.03).epsilon(1e-14));
    Vec e = shuffle_next_distribution(A, A.parse_seq("BOS O1"), p);
    // Z by hand: 0.3 * (0.5 + 0.5) + 0.7 * 0.5
    CHECK(e[static_cast<std::size_t>(A.close(1))] == doctest::Approx(0.35 / 0.65).epsilon(1e-14));
    CHECK(e[static_cast<std::size_t>(A.close(2))] == 0.0);

    Alphabet B(4);
    auto pb = GenParams::shuffle(4, 0.4, 0.9, {0.1, 0.2, 0.3, 0.4}, {0.4, 0.3, 0.2, 0.1});
    Rng rng(6);
    for (int rep = 0; rep < 1000; ++rep) {
        Sample smp = sample_sequence(B, pb, rng, 1 + rng.below(40));
        Seq pre = smp.tokens;
        if (pre.back() == B.eos()) pre.pop_back();
        Vec dist = shuffle_next_distribution(B, pre, pb);
        double sum = 0.0;
        for (int t = 1; t <= 4; ++t)
            if (per_type_depth(B, pre, t) == 0) CHECK(dist[static_cast<std::size_t>(B.close(t))] == 0.0);
        for (double v : dist) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("generation params validation") {
    CHECK_THROWS(GenParams::dyck(2, 0.0, 0.5));
    CHECK_THROWS(GenParams::dyck(2, 0.5, 1.0));
    CHECK_THROWS(GenParams::dyck(2, 0.5, 0.5, {0.7, 0.2}));
    CHECK_THROWS(GenParams::dyck(2, 0.5, 0.5, {1.0, 0.0}));
    CHECK_THROWS(GenParams::dyck(2, 0.5, 0.5, {1.0}));
    CHECK_NOTHROW(GenParams::shuffle(2, 0.5, 0.5, {0.25, 0.75}, {0.5, 0.5}));
}

TEST_CASE("sampling") {
    Alphabet A(3);
    auto p = GenParams::dyck(3, 0.5, 0.9);
    Rng r1(42), r2(42);
    for (int rep = 0; rep < 20; ++rep) CHECK(sample_sequence(A, p, r1, 300).tokens == sample_sequence(A, p, r2, 300).tokens);

    Rng rng(7);
    for (int rep = 0; rep < 300; ++rep) {
        Sample s = sample_sequence(A, p, rng, 60);
        for (std::size_t i = 1; i <= s.tokens.size(); ++i)
            CHECK(is_dyck_prefix(A, Seq(s.tokens.begin(), s.tokens.begin() + static_cast<long>(i))));
        CHECK(s.truncated == (s.tokens.back() != A.eos()));
        CHECK(s.tokens.size() <= 60);
    }

    // The first step is always a depth-0 state; its EOS frequency is Binomial(N, 1 - r).
    const int N = 100000;
    int eos = 0;
    Rng mc(8);
    for (int i = 0; i < N; ++i) eos += sample_sequence(A, p, mc, 2).tokens[1] == A.eos();
    double mean = N * 0.1, sd = std::sqrt(N * 0.1 * 0.9);
    CHECK(std::abs(eos - mean) <= 3.0 * sd);
}

TEST_CASE("process log probability") {
    Alphabet A(2);
    auto p = GenParams::dyck(2, 0.5, 0.9);
    CHECK(process_log_probability(A, A.parse_seq("BOS EOS"), p) == doctest::Approx(std::log(0.1)));
    CHECK(process_log_probability(A, A.parse_seq("BOS O1 C2 EOS"), p) == -std::numeric_limits<double>::infinity());
    CHECK(process_log_probability(A, A.parse_seq("BOS O1 C1"), p) == -std::numeric_limits<double>::infinity());
    // BOS O1 C1 EOS: 0.45 * 0.5 * 0.1
    CHECK(process_log_probability(A, A.parse_seq("BOS O1 C1 EOS"), p) == doctest::Approx(std::log(0.0225)));

    for (Lang L : {Lang::Dyck, Lang::Shuffle}) {
        auto gp = L == Lang::Dyck ? p : GenParams::shuffle(2, 0.5, 0.9);
        for (int len = 0; len <= 6; ++len)
            for_each_body(A, len, [&](const Seq& body) {
                Seq s = with_bos(A, body);
                s.push_back(A.eos());
                double lp = process_log_probability(A, s, gp);
                CHECK(std::isfinite(lp) == is_member(L, A, s));
                if (L == Lang::Dyck && std::isfinite(lp))
                    CHECK(lp >= std::log(member_probability_bound(gp, len)) - 1e-12);
            });
    }
}

TEST_CASE("published member bound fails when r is small, safe bound holds") {
    Alphabet A(2);
    auto p = GenParams::dyck(2, 0.9, 0.1);
    Seq s = A.parse_seq("BOS O1 C1 EOS");
    double lp = process_log_probability(A, s, p);
    CHECK(std::exp(lp) == doctest::Approx(0.0045));
    CHECK(std::exp(lp) < member_probability_bound(p, 2));
    for (int len = 0; len <= 6; ++len)
        for_each_body(A, len, [&](const Seq& body) {
            Seq w = with_bos(A, body);
            w.push_back(A.eos());
            double v = process_log_probability(A, w, p);
            if (std::isfinite(v)) CHECK(v >= std::log(member_probability_bound_safe(p, len)) - 1e-12);
        });
}
