#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>

#include "conversions.hpp"
#include "oracles.hpp"

using namespace dyf;

namespace {

Mat rand_mat(std::mt19937_64& g, std::size_t r, std::size_t c) {
    std::normal_distribution<double> nd;
    Mat m(r, c);
    for (double& v : m.a) v = nd(g);
    return m;
}

Vec rand_vec(std::mt19937_64& g, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (double& x : v) x = u(g);
    return v;
}

Stream rand_stream(std::mt19937_64& g, std::size_t n, std::size_t d) {
    Stream x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(rand_vec(g, d, -2.0, 2.0));
    return x;
}

double max_score_diff(const Attention& a, const Attention& b, const Stream& x) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec s = attention_scores(a, x, i), t = attention_scores(b, x, i);
        for (std::size_t j = 0; j < s.size(); ++j) m = std::max(m, std::abs(s[j] - t[j]));
    }
    return m;
}

ConstructionParams params(bool soft) {
    ConstructionParams p;
    p.n_max = 64;
    p.softmax_selection = soft;
    return p;
}

}  // namespace

TEST_CASE("RMS FFN to LN FFN") {
    std::mt19937_64 g(1);
    Ffn z = zero_ffn(4, 4);
    Ffn zl = rmsln_ffn_to_ln_ffn(z);
    CHECK(zl.w1.rows == 8);
    CHECK(ffn_apply(zl, Vec{1, 2, 3, 4}) == Vec{1, 2, 3, 4});
    double worst = 0.0;
    for (int c = 0; c < 200; ++c) {
        const std::size_t d = 3 + static_cast<std::size_t>(c % 9);
        Ffn f = zero_ffn(d, d);
        f.w1 = rand_mat(g, d, d);
        f.w2 = rand_mat(g, d, d);
        f.gamma = rand_vec(g, d, 0.1, 2.0);
        f.beta = rand_vec(g, d);
        Ffn h = rmsln_ffn_to_ln_ffn(f);
        Vec x = rand_vec(g, d, -3.0, 3.0);
        Vec a = ffn_apply(f, x), b = ffn_apply(h, x);
        for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    MESSAGE("max |diff| = ", worst);
    CHECK(worst <= 1e-12);
    CHECK_THROWS_AS(rmsln_ffn_to_ln_ffn(rmsln_ffn_to_ln_ffn(zero_ffn(2))), std::invalid_argument);
}

TEST_CASE("QK-LN <-> QK-RMSLN score equality") {
    std::mt19937_64 g(2);
    double w1 = 0.0, w2 = 0.0, w3 = 0.0;
    for (int c = 0; c < 200; ++c) {
        const std::size_t d = 4 + static_cast<std::size_t>(c % 6), r = 2 + static_cast<std::size_t>(c % 5);
        Attention a = zero_attention(d, r);
        a.wq = rand_mat(g, r, d);
        a.wk = rand_mat(g, r, d);
        a.qk = QKNorm{NormKind::LN, rand_vec(g, r, 0.2, 2.0), rand_vec(g, r), rand_vec(g, r, 0.2, 2.0), rand_vec(g, r)};
        Stream x = rand_stream(g, 6, d);
        Attention b = qkln_to_qkrmsln(a);
        w1 = std::max(w1, max_score_diff(a, b, x));
        Attention rms = a;
        rms.qk->kind = NormKind::RMS;
        Attention ln = qkrmsln_to_qkln(rms);
        CHECK(ln.wq.rows == 3 * r);
        w2 = std::max(w2, max_score_diff(rms, ln, x));
        w3 = std::max(w3, max_score_diff(a, qkrmsln_to_qkln(b), x));
    }
    MESSAGE("ln->rms ", w1, "  rms->ln ", w2, "  round trip ", w3);
    CHECK(w1 <= 1e-12);
    CHECK(w2 <= 1e-12);
    CHECK(w3 <= 1e-12);

    Attention z = zero_attention(3, 2);
    z.qk = QKNorm{NormKind::LN, Vec(2, 1.0), Vec{0.5, -0.5}, Vec(2, 1.0), Vec{1.0, 2.0}};
    Stream x{{1, 2, 3}, {0, 1, 0}, {-1, 0, 2}};
    Vec s = attention_scores(z, x, 2);
    CHECK(s[0] == s[1]);
    CHECK(s[1] == s[2]);
    CHECK_THROWS_AS(qkrmsln_to_qkln(z), std::invalid_argument);
    CHECK_THROWS_AS(qkln_to_qkrmsln(zero_attention(3, 2)), std::invalid_argument);
}

TEST_CASE("fixed-norm wrap: query norm and prefix-check keys") {
    Alphabet A(2);
    auto n = build_dyck_generator(2, GenParams::dyck(2, 0.5, 0.9), params(false));
    auto w = qk_fixed_norm_wrap(n, 2);
    Seq s = A.parse_seq("BOS O1 O2 C2 O1 C1 C1");
    auto x = model_trace(n.model, s)[4];
    const double c2 = n.params.gen_C2, c1 = n.params.gen_C1;
    for (const auto& xi : x) {
        Vec q = linear(w.wq, xi);
        Vec k = linear(w.wk, xi);
        CHECK(norm2(q) == doctest::Approx(c2 * std::sqrt(2.0 * c1 * c1 + 1.0)).epsilon(1e-14));
        CHECK(norm2(k) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-14));
    }
    CHECK(max_score_diff(n.model.blocks[2].attn, w, x) <= 1e-9 * c2 * c1);

    auto r = build_dyck_recognizer(2, params(false));
    std::size_t pc = 0;
    for (std::size_t b = 0; b < r.roles.size(); ++b)
        if (r.roles[b] == "prefix-check") pc = b;
    auto pw = qk_fixed_norm_wrap(r, pc);
    Seq t = A.parse_seq("BOS O1 C2 O2 C2 EOS");
    auto tr = model_trace(r.model, t)[2 * pc];
    const double r2 = 1.0 / std::sqrt(2.0);
    auto key = [&](std::size_t i) { return rms_layernorm(linear(pw.wk, tr[i]), pw.qk->gamma_k, pw.qk->beta_k); };
    CHECK(key(0)[0] == doctest::Approx(-r2));
    CHECK(key(0)[1] == doctest::Approx(r2));
    CHECK(key(1)[0] == doctest::Approx(-1.0));  // open
    CHECK(key(1)[1] == doctest::Approx(0.0));
    CHECK(key(2)[0] == doctest::Approx(1.0));  // type conflict
    CHECK(key(2)[1] == doctest::Approx(0.0));
}

TEST_CASE("end-to-end: conversions preserve verdicts and distributions") {
    const Task rec_tasks[] = {Task::DyckRec, Task::ShuffleRec, Task::DyckRecNoBos};
    for (bool soft : {false, true}) {
        for (Task t : rec_tasks) {
            if (soft && t == Task::ShuffleRec) continue;
            const int k = 2;
            Alphabet A(k);
            auto n = build(t, k, std::nullopt, params(soft));
            INFO(task_name(t), " soft=", soft);
            auto q = with_qk_norm(n);
            auto l = with_ln_ffn(n);
            auto both = with_ln_ffn(q);
            long bad = 0, cases = 0;
            for (int len = 0; len <= 6; ++len)
                for_each_body(A, len, [&](const Seq& body) {
                    Seq f = frame(A, body);
                    for (int variant = 0; variant < 2; ++variant) {
                        Seq s = variant == 0 ? f : Seq(f.begin(), f.end() - 1);
                        Seq in = network_input(t, A, s);
                        if (in.empty() || (!uses_bos(t) && in.size() >= 2 && in[0] == in[1])) continue;
                        ++cases;
                        const int v = recognize(n.model, n.head, in).sign;
                        if (recognize(q.model, q.head, in).sign != v || recognize(l.model, l.head, in).sign != v ||
                            recognize(both.model, both.head, in).sign != v)
                            ++bad;
                    }
                });
            INFO(task_name(t), " soft=", soft, " cases=", cases);
            CHECK(bad == 0);
        }
    }
    for (Task t : {Task::DyckGen, Task::ShuffleGen, Task::DyckGenNoBos}) {
        const int k = 3;
        Alphabet A(k);
        auto g = task_lang(t) == Lang::Dyck ? GenParams::dyck(k, 0.5, 0.9) : GenParams::shuffle(k, 0.5, 0.9);
        auto n = build(t, k, g, params(false));
        auto q = with_qk_norm(n);
        auto l = with_ln_ffn(n);
        Rng rng(5);
        double worst = 0.0;
        for (int it = 0; it < 20; ++it) {
            auto smp = sample_sequence(A, g, rng, 60);
            Seq s = smp.tokens;
            if (s.back() == A.eos()) s.pop_back();
            Seq in = network_input(t, A, s);
            if (in.empty() || (!uses_bos(t) && in.size() >= 2 && in[0] == in[1])) continue;
            auto a = next_token_distributions(n.model, n.head, in);
            auto b = next_token_distributions(q.model, q.head, in);
            auto c = next_token_distributions(l.model, l.head, in);
            for (std::size_t i = 0; i < a.size(); ++i)
                for (std::size_t j = 0; j < a[i].size(); ++j)
                    worst = std::max({worst, std::abs(a[i][j] - b[i][j]), std::abs(a[i][j] - c[i][j])});
        }
        INFO(task_name(t), " worst=", worst);
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("fixed-norm wrap: raw query/key norms are constant per layer") {
    const int k = 2;
    Alphabet A(k);
    for (Task t : {Task::DyckRec, Task::DyckGen, Task::ShuffleRec, Task::ShuffleGen, Task::DyckRecNoBos, Task::DyckGenNoBos}) {
        std::optional<GenParams> g;
        if (is_generator(t)) g = task_lang(t) == Lang::Dyck ? GenParams::dyck(k, 0.5, 0.9) : GenParams::shuffle(k, 0.5, 0.9);
        auto n = build(t, k, g, params(false));
        Seq in = network_input(t, A, A.parse_seq("BOS O1 O2 C2 O2 O1 C1 C2 C1 EOS"));
        auto tr = model_trace(n.model, in);
        for (std::size_t b = 0; b < n.model.blocks.size(); ++b) {
            auto w = qk_fixed_norm_wrap(n, b);
            double qlo = HUGE_VAL, qhi = 0.0, klo = HUGE_VAL, khi = 0.0;
            for (const auto& xi : tr[2 * b]) {
                const double qn = norm2(linear(w.wq, xi)), kn = norm2(linear(w.wk, xi));
                qlo = std::min(qlo, qn);
                qhi = std::max(qhi, qn);
                klo = std::min(klo, kn);
                khi = std::max(khi, kn);
            }
            INFO(task_name(t), " block ", b, " ", n.roles[b]);
            CHECK(qhi - qlo <= 1e-9 * std::max(1.0, qhi));
            if (n.roles[b] != "prefix-check") CHECK(khi - klo <= 1e-9 * std::max(1.0, khi));
        }
    }
}
