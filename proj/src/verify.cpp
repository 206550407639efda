#include "verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "conversions.hpp"
#include "evalkit.hpp"
#include "oracles.hpp"

namespace dyf {

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
CheckResult timed(std::string name, F&& body) {
    const auto t0 = Clock::now();
    CheckResult r;
    r.name = std::move(name);
    try {
        body(r);
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

ConstructionParams with_n_max(int n_max, bool soft = false) {
    ConstructionParams p;
    p.n_max = std::max(n_max, 8);
    p.softmax_selection = soft;
    return p;
}

GenParams default_gen(Lang L, int k) { return L == Lang::Dyck ? GenParams::dyck(k, 0.5, 0.9) : GenParams::shuffle(k, 0.5, 0.9); }

// Largest body length whose exhaustive enumeration stays under `budget` strings.
int exhaustive_len(int k, double budget, int cap) {
    int len = 0;
    while (len < cap && std::pow(2.0 * k, len + 1) <= budget) ++len;
    return len;
}

bool first_two_equal(const Seq& in) { return in.size() >= 2 && in[0] == in[1]; }

Seq random_member(const Alphabet& A, const GenParams& g, Rng& rng, int max_tokens) {
    for (;;) {
        auto s = sample_sequence(A, g, rng, static_cast<std::size_t>(max_tokens));
        if (!s.truncated) return s.tokens;
    }
}

struct Sweep {
    long cases = 0, wrong = 0, soft_disagree = 0, skipped = 0;
    std::string first_wrong;
};

}  // namespace

CheckResult check_lang_oracles(int k, int max_len) {
    return timed("lang oracles (k=" + std::to_string(k) + ", len<=" + std::to_string(max_len) + ")", [&](CheckResult& r) {
        const Alphabet A(k);
        const auto dyck = enumerate_dyck_grammar(A, max_len);
        const auto shuffle = enumerate_shuffle_dyck(A, std::min(max_len, 12));
        long checked = 0, bad = 0;
        for (int len = 0; len <= max_len; ++len)
            for_each_body(A, len, [&](const Seq& body) {
                const Seq s = frame(A, body);
                ++checked;
                if (is_dyck_member(A, s) != (dyck.count(body) > 0)) ++bad;
                if (len <= 12 && is_shuffle_member(A, s) != (shuffle.count(body) > 0)) ++bad;
            });
        r.pass = bad == 0;
        r.detail = std::to_string(checked) + " bodies, " + std::to_string(bad) + " disagreements";
    });
}

CheckResult check_prop2(int k, int max_len) {
    return timed("membership <=> positive probability (k=" + std::to_string(k) + ", len<=" + std::to_string(max_len) + ")",
                 [&](CheckResult& r) {
                     const Alphabet A(k);
                     // Published bound at the default parameters; safe bound where the published one fails.
                     const GenParams g = GenParams::dyck(k, 0.5, 0.9), h = GenParams::dyck(k, 0.9, 0.1);
                     long members = 0, bad = 0, below = 0;
                     for (int len = 0; len <= max_len; ++len)
                         for_each_body(A, len, [&](const Seq& body) {
                             const Seq s = frame(A, body);
                             const bool mem = is_dyck_member(A, s);
                             for (const GenParams* p : {&g, &h}) {
                                 const double lp = process_log_probability(A, s, *p);
                                 if (std::isfinite(lp) != mem) ++bad;
                                 if (!mem) continue;
                                 const double eps = p == &g ? member_probability_bound(*p, len)
                                                            : member_probability_bound_safe(*p, len);
                                 if (lp < std::log(eps)) ++below;
                             }
                             members += mem ? 1 : 0;
                         });
                     r.pass = bad == 0 && below == 0;
                     r.detail = std::to_string(members) + " members; " + std::to_string(bad) + " dichotomy failures, " +
                                std::to_string(below) + " below the bound";
                 });
}

CheckResult check_collision_rate(int k, int samples, std::uint64_t seed) {
    return timed("first-two collision rate (k=" + std::to_string(k) + ")", [&](CheckResult& r) {
        const Alphabet A(k);
        const GenParams g = GenParams::dyck(k, 0.5, 0.9);
        Rng rng(seed);
        long hits = 0;
        for (int i = 0; i < samples; ++i) {
            auto s = sample_sequence(A, g, rng, 4);
            if (s.tokens.size() >= 3 && s.tokens[1] == s.tokens[2]) ++hits;
        }
        const double rate = static_cast<double>(hits) / samples;
        const double p = 1.0 / k, sigma = std::sqrt(p * (1.0 - p) / samples);
        double exact = 0.0;
        for (double x : g.pi) exact += x * x;
        exact *= g.r * g.q;
        const double sig_e = std::sqrt(exact * (1.0 - exact) / samples);
        r.pass = rate <= p + 3.0 * sigma && std::abs(rate - exact) <= 3.0 * sig_e + 1e-12;
        r.detail = "rate " + fmt(rate) + " vs ceiling 1/k + 3 sigma = " + fmt(p + 3.0 * sigma) + ", exact r*q*sum(pi^2) = " +
                   fmt(exact);
    });
}

CheckResult check_recov() {
    return timed("recovering function plateaus", [&](CheckResult& r) {
        const double e = 1.0 / 32.0;
        long bad = 0, n = 0;
        auto sweep = [&](double lo, double hi, double want) {
            for (int i = 0; i <= 2000; ++i) {
                const double y = lo + (hi - lo) * i / 2000.0;
                ++n;
                if (recov(y, e) != want) ++bad;
            }
        };
        sweep(-0.4, 0.4, 0.0);
        sweep(0.5, 1.2, 1.0);
        sweep(4.0 / 3.0, 2.0, 2.0);
        r.pass = bad == 0;
        r.detail = std::to_string(n) + " points on [-0.4,0.4], [0.5,1.2], [4/3,2]; " + std::to_string(bad) + " off-plateau";
    });
}

CheckResult check_channels(int k, int n_max, int count, std::uint64_t seed) {
    return timed("positional/depth channel exactness (k=" + std::to_string(k) + ")", [&](CheckResult& r) {
        const Alphabet A(k);
        auto n = build_dyck_recognizer(k, with_n_max(n_max));
        std::size_t after = 0;
        for (std::size_t b = 0; b < n.roles.size(); ++b)
            if (n.roles[b] == "depth-next") after = 2 * (b + 1);
        const char* names[] = {"cphi", "sphi", "cd", "sd", "cd1", "sd1"};
        std::size_t ch[6];
        for (int i = 0; i < 6; ++i) ch[i] = channel(n, names[i]);
        const GenParams g = default_gen(Lang::Dyck, k);
        Rng rng(seed);
        double worst = 0.0;
        long positions = 0;
        for (int c = 0; c < count; ++c) {
            // Arbitrary bracket strings reach negative depths too.
            Seq s{A.bos()};
            const std::size_t len = 1 + rng.below(static_cast<std::size_t>(n_max - 1));
            if (c % 2 == 0) {
                s = sample_sequence(A, g, rng, len + 1).tokens;
                if (s.back() == A.eos()) s.pop_back();
            } else {
                for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(2 * k))));
            }
            const auto x = model_trace(n.model, s)[after];
            int dep = 0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (A.kind(s[i]) == Kind::Open) ++dep;
                if (A.kind(s[i]) == Kind::Close) --dep;
                const double phi = theta(static_cast<double>(i), n.params.a), th = theta(dep, n.params.a),
                             th1 = theta(dep + 1.0, n.params.a);
                const double want[6] = {std::cos(phi), std::sin(phi), std::cos(th), std::sin(th), std::cos(th1), std::sin(th1)};
                for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(x[i][ch[j]] - want[j]));
                ++positions;
            }
        }
        r.pass = worst <= 1e-9;
        r.detail = std::to_string(positions) + " positions, max |error| " + fmt(worst);
    });
}

namespace {

void record(const BuiltNetwork& hard, const Alphabet& A, const Seq& framed, int v, int soft_v, bool compare_soft,
            Sweep& sw) {
    ++sw.cases;
    if ((v == 1) != is_member(task_lang(hard.task), A, framed)) {
        if (sw.wrong++ == 0) sw.first_wrong = A.format(framed);
    }
    if (compare_soft && soft_v != v) ++sw.soft_disagree;
}

bool outside(const BuiltNetwork& n, const Seq& in) { return in.empty() || (!uses_bos(n.task) && first_two_equal(in)); }

void judge(const BuiltNetwork& hard, const BuiltNetwork& soft, bool compare_soft, const Alphabet& A, const Seq& framed,
           Sweep& sw) {
    const Seq in = network_input(hard.task, A, framed);
    if (outside(hard, in)) {
        ++sw.skipped;
        return;
    }
    const int v = recognize(hard.model, hard.head, in).sign;
    record(hard, A, framed, v, compare_soft ? recognize(soft.model, soft.head, in).sign : v, compare_soft, sw);
}

std::string sweep_detail(const Sweep& sw, bool soft) {
    std::string d = std::to_string(sw.cases) + " inputs, " + std::to_string(sw.wrong) + " wrong";
    if (soft) d += ", " + std::to_string(sw.soft_disagree) + " softmax/hardmax disagreements";
    if (sw.skipped) d += ", " + std::to_string(sw.skipped) + " outside the first-two-distinct domain";
    if (sw.wrong) d += "; first wrong: " + sw.first_wrong;
    return d;
}

}  // namespace

namespace {

// Walks every framed input of the exhaustive sweep as a trie of network tokens, so each prefix is computed once.
class TrieSweep {
public:
    TrieSweep(const BuiltNetwork& hard, const BuiltNetwork& soft, const Alphabet& A, int max_len, Sweep& sw)
        : hard_(hard), soft_(soft), A_(A), max_len_(max_len), sw_(sw), h_(hard.model), s_(soft.model),
          drop_(uses_bos(hard.task) ? 0 : 1) {}

    void run() {
        push(A_.bos());
        body(0);
        pop();
    }

private:
    void push(int tok) {
        framed_.push_back(tok);
        if (framed_.size() > drop_) {
            h_.push(tok);
            s_.push(tok);
        }
    }
    void pop() {
        if (framed_.size() > drop_) {
            h_.pop();
            s_.pop();
        }
        framed_.pop_back();
    }
    void judge_here() {
        const Seq in(framed_.begin() + static_cast<std::ptrdiff_t>(drop_), framed_.end());
        if (outside(hard_, in)) {
            ++sw_.skipped;
            return;
        }
        record(hard_, A_, framed_, recognize_final(hard_.head, h_.state(in.size() - 1)).sign,
               recognize_final(soft_.head, s_.state(in.size() - 1)).sign, true, sw_);
    }
    // framed_ = BOS b with |b| = len: judge BOS b, BOS b EOS, BOS b EOS EOS.
    void body(int len) {
        judge_here();
        push(A_.eos());
        judge_here();
        const bool mem = is_member(task_lang(hard_.task), A_, framed_);
        push(A_.eos());
        judge_here();
        pop();
        if (mem && len == max_len_) insertions();
        pop();
        if (len == 1) {
            // EOS right after the first body token, then every continuation.
            push(A_.eos());
            misplaced(1);
            pop();
        }
        if (len == max_len_) return;
        for (int tok = 0; tok < 2 * A_.k; ++tok) {
            push(tok);
            body(len + 1);
            pop();
        }
    }
    // framed_ = BOS b0 EOS r with 1 + |r| = len: judge BOS b0 EOS r EOS.
    void misplaced(int len) {
        push(A_.eos());
        judge_here();
        pop();
        if (len == max_len_) return;
        for (int tok = 0; tok < 2 * A_.k; ++tok) {
            push(tok);
            misplaced(len + 1);
            pop();
        }
    }
    void insertions() {
        const Seq s = framed_;
        for (std::size_t pos = 1; pos < s.size(); ++pos)
            for (int tok = 0; tok < 2 * A_.k; ++tok) judge(hard_, soft_, true, A_, corrupt(A_, s, Corruption::Insert, pos, tok), sw_);
    }

    const BuiltNetwork &hard_, &soft_;
    const Alphabet& A_;
    const int max_len_;
    Sweep& sw_;
    Decoder h_, s_;
    const std::size_t drop_;
    Seq framed_;
};

}  // namespace

CheckResult check_recognition_exhaustive(Task t, int k, int max_len, int n_max) {
    return timed(task_name(t) + " exhaustive (k=" + std::to_string(k) + ", len<=" + std::to_string(max_len) + ")",
                 [&](CheckResult& r) {
                     const Alphabet A(k);
                     auto hard = build(t, k, std::nullopt, with_n_max(n_max));
                     auto soft = build(t, k, std::nullopt, with_n_max(n_max, true));
                     Sweep sw;
                     TrieSweep(hard, soft, A, max_len, sw).run();
                     r.pass = sw.wrong == 0 && sw.soft_disagree == 0 && sw.cases > 0;
                     r.detail = sweep_detail(sw, true);
                 });
}

CheckResult check_recognition_random(Task t, int k, int count, int max_tokens, int n_max, std::uint64_t seed) {
    return timed(task_name(t) + " random (k=" + std::to_string(k) + ", " + std::to_string(count) + " instances, n<=" +
                     std::to_string(max_tokens) + ")",
                 [&](CheckResult& r) {
                     const Alphabet A(k);
                     const Lang L = task_lang(t);
                     const GenParams g = default_gen(L, k);
                     auto hard = build(t, k, std::nullopt, with_n_max(n_max));
                     auto soft = build(t, k, std::nullopt, with_n_max(n_max, true));
                     Rng rng(seed);
                     std::vector<Seq> inputs;
                     // No-BOS inputs are drawn until `count` of them lie in the first-two-distinct domain.
                     auto keep = [&](Seq s) {
                         if (!s.empty() && !outside(hard, network_input(t, A, s))) inputs.push_back(std::move(s));
                     };
                     while (static_cast<int>(inputs.size()) < count) {
                         const Seq m = random_member(A, g, rng, max_tokens);
                         keep(m);
                         if (static_cast<int>(inputs.size()) == count) break;
                         Seq neg;
                         if (rng.below(2) == 0 || m.size() + 1 > static_cast<std::size_t>(max_tokens)) {
                             auto f = malformed_framings(A, m);
                             neg = f[rng.below(f.size())];
                             if (neg.size() > static_cast<std::size_t>(max_tokens)) neg = f[0];
                         } else {
                             neg = random_negative(A, L, m, rng);
                         }
                         keep(std::move(neg));
                     }
                     std::vector<Sweep> parts(inputs.size());
                     parallel_for(inputs.size(), [&](std::size_t i) { judge(hard, soft, true, A, inputs[i], parts[i]); });
                     Sweep sw;
                     for (const auto& p : parts) {
                         sw.cases += p.cases;
                         sw.skipped += p.skipped;
                         sw.soft_disagree += p.soft_disagree;
                         if (p.wrong && !sw.wrong) sw.first_wrong = p.first_wrong;
                         sw.wrong += p.wrong;
                     }
                     r.pass = sw.wrong == 0 && sw.soft_disagree == 0 && sw.cases > 0;
                     r.detail = sweep_detail(sw, true);
                 });
}

CheckResult check_member_margin(int k, int max_len, int random_count, int max_tokens, std::uint64_t seed) {
    return timed("member margin = 1/4 at a = 0 (k=" + std::to_string(k) + ")", [&](CheckResult& r) {
        const Alphabet A(k);
        auto n = build_dyck_recognizer(k, with_n_max(max_tokens));
        double worst = 0.0;
        long members = 0;
        auto look = [&](const Seq& s) {
            const double m = recognize(n.model, n.head, s).margin;
            worst = std::max(worst, std::abs(m - 0.25));
            ++members;
        };
        for (const auto& body : enumerate_dyck_grammar(A, max_len)) look(frame(A, body));
        Rng rng(seed);
        const GenParams g = default_gen(Lang::Dyck, k);
        for (int i = 0; i < random_count; ++i) look(random_member(A, g, rng, max_tokens));
        r.pass = n.params.a == 0.0 && std::abs(n.head.b - 0.25) <= 1e-15 && worst <= 1e-9;
        r.detail = std::to_string(members) + " members, max |margin - 1/4| " + fmt(worst) + ", head bias " + fmt(n.head.b);
    });
}

CheckResult check_generation_tv(Task t, int k, int sequences, int max_tokens, double bound, std::uint64_t seed, double c0) {
    return timed(task_name(t) + " TV (k=" + std::to_string(k) + ", " + std::to_string(sequences) + " sequences, n<=" +
                     std::to_string(max_tokens) + ")",
                 [&](CheckResult& r) {
                     const Alphabet A(k);
                     const GenParams g = default_gen(task_lang(t), k);
                     auto p = with_n_max(max_tokens);
                     p.C0_gen = c0;
                     auto n = build(t, k, g, p);
                     Rng rng(seed);
                     Dataset d;
                     while (static_cast<int>(d.size()) < sequences) {
                         auto s = sample_sequence(A, g, rng, static_cast<std::size_t>(max_tokens));
                         // The no-BOS generator is only claimed on first-two-distinct inputs.
                         if (!uses_bos(t) && first_two_equal(network_input(t, A, s.tokens))) continue;
                         d.push_back(std::move(s));
                     }
                     auto tv = max_tv_over_prefixes(n, g, d, SplitSpec{max_tokens, 1.2});
                     const double worst = std::max(tv.id.value, tv.ood.value);
                     r.pass = worst <= bound && tv.id.count + tv.ood.count > 0;
                     r.detail = "max TV " + fmt(worst) + " over " + std::to_string(tv.id.count + tv.ood.count) +
                                " prefixes (bound " + fmt(bound) + ")";
                     if (tv.skipped_sequences)
                         r.detail += ", " + std::to_string(tv.skipped_sequences) + " sequences without a scored prefix";
                 });
}

CheckResult check_shuffle_generation_tv(int k, int prefixes, double bound, std::uint64_t seed) {
    return timed("shuffle-gen TV (k=" + std::to_string(k) + ", " + std::to_string(prefixes) + " prefixes)", [&](CheckResult& r) {
        const Alphabet A(k);
        const GenParams g = default_gen(Lang::Shuffle, k);
        auto n = build_shuffle_generator(k, g, with_n_max(256));
        const DistSource net = network_source(n), ref = oracle_source(A, g);
        Rng rng(seed);
        double worst = 0.0;
        int seen = 0;
        while (seen < prefixes) {
            const Seq s = sample_sequence(A, g, rng, 200).tokens;
            auto a = net(s), b = ref(s);
            for (std::size_t i = 0; i < s.size() && seen < prefixes; ++i) {
                if (a[i].empty() || b[i].empty()) continue;
                worst = std::max(worst, tv_distance(a[i], b[i]));
                ++seen;
            }
        }
        r.pass = worst <= bound;
        r.detail = "max TV " + fmt(worst) + " (bound " + fmt(bound) + ")";
    });
}

CheckResult check_pseudo_bos(int k, int count, int max_tokens, std::uint64_t seed) {
    return timed("pseudo-BOS exactness (k=" + std::to_string(k) + ", " + std::to_string(count) + " sequences)",
                 [&](CheckResult& r) {
                     const Alphabet A(k);
                     long bad = 0, positions = 0;
                     for (Task t : {Task::DyckRecNoBos, Task::DyckGenNoBos}) {
                         std::optional<GenParams> g;
                         if (is_generator(t)) g = default_gen(Lang::Dyck, k);
                         auto n = build(t, k, g, with_n_max(max_tokens));
                         Model first = n.model;
                         first.blocks.resize(1);
                         const std::size_t sh = channel(n, "sh");
                         Rng rng(seed);
                         for (int c = 0; c < count; ++c) {
                             const std::size_t len = 2 + rng.below(static_cast<std::size_t>(max_tokens - 1));
                             Seq s;
                             while (s.size() < len) {
                                 const int tok = static_cast<int>(rng.below(static_cast<std::size_t>(2 * k + 1)));
                                 s.push_back(tok == 2 * k ? A.eos() : tok);
                                 if (s.size() == 2 && s[0] == s[1]) s.pop_back();
                             }
                             const auto x = model_forward(first, s);
                             for (std::size_t i = 0; i < s.size(); ++i, ++positions)
                                 if (x[i][sh] != (i == 0 ? 1.0 : 0.0)) ++bad;
                         }
                     }
                     r.pass = bad == 0;
                     r.detail = std::to_string(positions) + " positions in both no-BOS networks, " + std::to_string(bad) +
                                " inexact";
                 });
}

CheckResult check_conversions_random(int cases, std::uint64_t seed) {
    return timed("conversion equalities (" + std::to_string(cases) + " random cases each)", [&](CheckResult& r) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> nd;
        std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.2, 2.0);
        auto mat = [&](std::size_t a, std::size_t b) {
            Mat m(a, b);
            for (double& v : m.a) v = nd(gen);
            return m;
        };
        auto vec = [&](std::size_t n, auto& dist, double scale = 1.0) {
            Vec v(n);
            for (double& x : v) x = scale * dist(gen);
            return v;
        };
        auto score_gap = [](const Attention& a, const Attention& b, const Stream& x) {
            double m = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const Vec s = attention_scores(a, x, i), t = attention_scores(b, x, i);
                for (std::size_t j = 0; j < s.size(); ++j) m = std::max(m, std::abs(s[j] - t[j]));
            }
            return m;
        };
        double ffn = 0.0, fwd = 0.0, rev = 0.0, trip = 0.0;
        for (int c = 0; c < cases; ++c) {
            const std::size_t d = 3 + static_cast<std::size_t>(c % 9), q = 2 + static_cast<std::size_t>(c % 5);
            Ffn f = zero_ffn(d, d);
            f.w1 = mat(d, d);
            f.w2 = mat(d, d);
            f.gamma = vec(d, pos);
            f.beta = vec(d, u);
            const Vec x = vec(d, u, 3.0);
            const Vec a = ffn_apply(f, x), b = ffn_apply(rmsln_ffn_to_ln_ffn(f), x);
            for (std::size_t i = 0; i < d; ++i) ffn = std::max(ffn, std::abs(a[i] - b[i]));

            Attention at = zero_attention(d, q);
            at.wq = mat(q, d);
            at.wk = mat(q, d);
            at.qk = QKNorm{NormKind::LN, vec(q, pos), vec(q, u), vec(q, pos), vec(q, u)};
            Stream xs;
            for (int i = 0; i < 6; ++i) xs.push_back(vec(d, u, 2.0));
            const Attention rms = qkln_to_qkrmsln(at);
            fwd = std::max(fwd, score_gap(at, rms, xs));
            Attention plain = at;
            plain.qk->kind = NormKind::RMS;
            rev = std::max(rev, score_gap(plain, qkrmsln_to_qkln(plain), xs));
            trip = std::max(trip, score_gap(at, qkrmsln_to_qkln(rms), xs));
        }
        r.pass = ffn <= 1e-12 && fwd <= 1e-12 && rev <= 1e-12 && trip <= 1e-12;
        r.detail = "max gap: RMS->LN FFN " + fmt(ffn) + ", QK-LN->QK-RMSLN " + fmt(fwd) + ", QK-RMSLN->QK-LN " + fmt(rev) +
                   ", round trip " + fmt(trip);
    });
}

CheckResult check_conversions_end_to_end(int k, int max_len) {
    return timed("conversions swapped into every construction (k=" + std::to_string(k) + ")", [&](CheckResult& r) {
        const Alphabet A(k);
        long cases = 0, flips = 0;
        for (Task t : {Task::DyckRec, Task::ShuffleRec, Task::DyckRecNoBos}) {
            auto n = build(t, k, std::nullopt, with_n_max(64));
            const BuiltNetwork variants[3] = {with_qk_norm(n), with_ln_ffn(n), with_ln_ffn(with_qk_norm(n))};
            for (int len = 0; len <= max_len; ++len)
                for_each_body(A, len, [&](const Seq& body) {
                    const Seq f = frame(A, body);
                    for (const Seq& s : {f, Seq(f.begin(), f.end() - 1)}) {
                        const Seq in = network_input(t, A, s);
                        if (in.empty() || (!uses_bos(t) && first_two_equal(in))) continue;
                        ++cases;
                        const int v = recognize(n.model, n.head, in).sign;
                        for (const auto& w : variants)
                            if (recognize(w.model, w.head, in).sign != v) ++flips;
                    }
                });
        }
        double gap = 0.0;
        for (Task t : {Task::DyckGen, Task::ShuffleGen, Task::DyckGenNoBos}) {
            const GenParams g = default_gen(task_lang(t), k);
            auto n = build(t, k, g, with_n_max(64));
            const BuiltNetwork variants[2] = {with_qk_norm(n), with_ln_ffn(n)};
            Rng rng(21);
            for (int i = 0; i < 20; ++i) {
                Seq s = sample_sequence(A, g, rng, 60).tokens;
                if (s.back() == A.eos()) s.pop_back();
                const Seq in = network_input(t, A, s);
                if (in.empty() || (!uses_bos(t) && first_two_equal(in))) continue;
                const auto a = next_token_distributions(n.model, n.head, in);
                for (const auto& w : variants) {
                    const auto b = next_token_distributions(w.model, w.head, in);
                    for (std::size_t p = 0; p < a.size(); ++p) gap = std::max(gap, 2.0 * tv_distance(a[p], b[p]));
                }
            }
        }
        r.pass = flips == 0 && gap <= 1e-9;
        r.detail = std::to_string(cases) + " recognizer inputs x 3 variants, " + std::to_string(flips) +
                   " verdict changes; generator max l1 change " + fmt(gap);
    });
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"lang",       "recov",       "channels", "recognition",
                                                "generation", "pseudo-bos", "conversions", "all"};
    return names;
}

std::vector<CheckResult> run_suite(const std::string& suite, int k, int n_max, std::uint64_t seed) {
    if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
        throw std::invalid_argument("unknown suite '" + suite + "'");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (n_max < 16) throw std::invalid_argument("n_max must be >= 16 for the verification suite");
    const bool all = suite == "all";
    const int len = exhaustive_len(k, 70000, 8), short_len = exhaustive_len(k, 5000, 6);
    const int cap = std::min(n_max, 200);
    std::vector<CheckResult> out;
    if (all || suite == "lang") {
        out.push_back(check_lang_oracles(k, len));
        out.push_back(check_prop2(k, std::min(len, 6)));
        out.push_back(check_collision_rate(k, 20000, seed));
    }
    if (all || suite == "recov") out.push_back(check_recov());
    if (all || suite == "channels") out.push_back(check_channels(k, n_max, 100, seed));
    if (all || suite == "recognition") {
        for (Task t : {Task::DyckRec, Task::ShuffleRec, Task::DyckRecNoBos}) {
            out.push_back(check_recognition_exhaustive(t, k, short_len, n_max));
            out.push_back(check_recognition_random(t, k, 200, cap, n_max, seed));
        }
        out.push_back(check_member_margin(k, short_len, 50, cap, seed));
    }
    if (all || suite == "generation") {
        out.push_back(check_generation_tv(Task::DyckGen, k, 50, n_max, 2.0 * (k + 1) * std::exp(-12.0), seed));
        out.push_back(check_generation_tv(Task::DyckGenNoBos, k, 50, n_max, 2.0 * (k + 1) * std::exp(-12.0), seed));
        out.push_back(check_shuffle_generation_tv(k, 500, 1e-3, seed));
    }
    if (all || suite == "pseudo-bos") out.push_back(check_pseudo_bos(k, 200, cap, seed));
    if (all || suite == "conversions") {
        out.push_back(check_conversions_random(200, seed));
        out.push_back(check_conversions_end_to_end(k, std::min(short_len, 6)));
    }
    return out;
}

}  // namespace dyf
