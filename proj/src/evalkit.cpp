#include "evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace dyf {

void SplitSpec::validate() const {
    if (n_max < 1) throw std::invalid_argument("split: n_max must be >= 1");
    if (!(ood_factor > 1.0)) throw std::invalid_argument("split: ood_factor must be > 1");
}

int SplitSpec::test_cap() const { return static_cast<int>(std::floor(ood_factor * n_max)); }

Dataset generate_dataset(const Alphabet& A, const GenParams& g, int count, const SplitSpec& split, DatasetStyle style,
                         std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
    split.validate();
    g.validate(A.k);
    const int last = style == DatasetStyle::Train ? split.n_max : split.test_cap();
    Rng rng(seed);
    Dataset out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(sample_sequence(A, g, rng, static_cast<std::size_t>(last) + 1));
    return out;
}

double tv_distance(const Vec& p, const Vec& q) {
    if (p.size() != q.size()) throw std::invalid_argument("tv_distance: length mismatch");
    auto check = [](const Vec& v) {
        double s = 0.0;
        for (double x : v) {
            if (!(x >= 0.0)) throw std::invalid_argument("tv_distance: negative or NaN entry");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("tv_distance: input does not sum to 1");
    };
    check(p);
    check(q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return std::min(1.0, s / 2.0);
}

namespace {

// Constructed no-BOS networks are only defined when the first two tokens differ.
bool in_domain(const BuiltNetwork& n, const Seq& input) {
    if (uses_bos(n.task) || n.roles.empty()) return true;
    return !(input.size() >= 2 && input[0] == input[1]);
}

}  // namespace

DistSource oracle_source(const Alphabet& A, const GenParams& g) {
    return [A, g](const Seq& s) {
        std::vector<Vec> out(s.size());
        Seq pre;
        for (std::size_t i = 0; i < s.size(); ++i) {
            pre.push_back(s[i]);
            if (s[i] == A.eos()) break;
            out[i] = next_distribution(A, pre, g);
        }
        return out;
    };
}

DistSource network_source(const BuiltNetwork& n) {
    if (!is_generator(n.task)) throw std::invalid_argument("network_source: not a generator");
    return [&n](const Seq& s) {
        const Alphabet A(n.k);
        std::vector<Vec> out(s.size());
        Seq in = network_input(n.task, A, s);
        const std::size_t off = s.size() - in.size();
        while (!in.empty() && in.back() == A.eos()) in.pop_back();
        if (in.empty() || !in_domain(n, in)) return out;
        auto d = next_token_distributions(n.model, n.head, in);
        for (std::size_t j = 0; j < d.size(); ++j) out[j + off] = std::move(d[j]);
        return out;
    };
}

DistSource uniform_source(const Alphabet& A) {
    return [A](const Seq& s) {
        std::vector<Vec> out(s.size());
        for (std::size_t i = 0; i < s.size() && s[i] != A.eos(); ++i)
            out[i] = Vec(static_cast<std::size_t>(A.size()), 1.0 / A.size());
        return out;
    };
}

unsigned eval_threads() {
    if (const char* e = std::getenv("DYCKFORMER_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(e, &end, 10);
        if (end != e && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
    const std::size_t workers = std::min<std::size_t>(eval_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) f(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

AccClosed acc_closed(const DistSource& src, const Alphabet& A, Lang L, const Dataset& data, const SplitSpec& split) {
    split.validate();
    struct Part {
        double sum[2] = {0.0, 0.0};
        long count[2] = {0, 0};
    };
    std::vector<Part> parts(data.size());
    parallel_for(data.size(), [&](std::size_t idx) {
        const Seq& s = data[idx].tokens;
        auto dist = src(s);
        Part& p = parts[idx];
        Seq pre;
        int dep = 0;
        for (std::size_t i = 0; i < s.size() && s[i] != A.eos(); ++i) {
            pre.push_back(s[i]);
            if (A.kind(s[i]) == Kind::Open) ++dep;
            if (A.kind(s[i]) == Kind::Close) --dep;
            if (dep < 1 || dist[i].empty()) continue;
            double num = 0.0, den = 0.0;
            for (int t = 1; t <= A.k; ++t) den += dist[i][static_cast<std::size_t>(A.close(t))];
            for (int t : valid_close_types(L, A, pre)) num += dist[i][static_cast<std::size_t>(A.close(t))];
            const int b = split.is_id(i + 1) ? 0 : 1;
            p.sum[b] += den > 0.0 ? num / den : 0.0;
            ++p.count[b];
        }
    });
    double sum[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    for (const auto& p : parts)
        for (int b = 0; b < 2; ++b) {
            sum[b] += p.sum[b];
            count[b] += p.count[b];
        }
    if (count[0] + count[1] == 0) throw std::invalid_argument("acc_closed: no position with depth >= 1");
    AccClosed r;
    r.id = {count[0] ? sum[0] / static_cast<double>(count[0]) : 0.0, count[0]};
    r.ood = {count[1] ? sum[1] / static_cast<double>(count[1]) : 0.0, count[1]};
    return r;
}

MaxTv max_tv(const DistSource& a, const DistSource& b, const Dataset& data, const SplitSpec& split) {
    split.validate();
    struct Part {
        double worst[2] = {0.0, 0.0};
        long count[2] = {0, 0};
        bool skipped = true;
    };
    std::vector<Part> parts(data.size());
    parallel_for(data.size(), [&](std::size_t idx) {
        const Seq& s = data[idx].tokens;
        Part& p = parts[idx];
        auto da = a(s), db = b(s);
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (da[i].empty() || db[i].empty()) continue;
            const int k = split.is_id(i + 1) ? 0 : 1;
            p.worst[k] = std::max(p.worst[k], tv_distance(da[i], db[i]));
            ++p.count[k];
            p.skipped = false;
        }
    });
    MaxTv r;
    for (const auto& p : parts) {
        r.id.value = std::max(r.id.value, p.worst[0]);
        r.ood.value = std::max(r.ood.value, p.worst[1]);
        r.id.count += p.count[0];
        r.ood.count += p.count[1];
        r.skipped_sequences += p.skipped ? 1 : 0;
    }
    return r;
}

MaxTv max_tv_over_prefixes(const BuiltNetwork& n, const GenParams& g, const Dataset& data, const SplitSpec& split) {
    if (!is_generator(n.task)) throw std::invalid_argument("max_tv_over_prefixes: not a generator network");
    return max_tv(network_source(n), oracle_source(Alphabet(n.k), g), data, split);
}

Recognition recognition_accuracy(const Verdictor& v, const std::vector<Seq>& positives, const std::vector<Seq>& negatives,
                                 std::size_t keep_nearest) {
    const std::size_t np = positives.size(), total = np + negatives.size();
    std::vector<Verdict> out(total);
    parallel_for(total, [&](std::size_t i) { out[i] = v(i < np ? positives[i] : negatives[i - np]); });
    Recognition r;
    std::vector<NearMiss> near;
    for (std::size_t i = 0; i < total; ++i) {
        const bool mem = i < np;
        const bool yes = out[i].sign == 1;
        if (mem && yes) ++r.tp;
        else if (mem) ++r.fn;
        else if (yes) ++r.fp;
        else ++r.tn;
        near.push_back({mem ? positives[i] : negatives[i - np], mem, out[i].margin});
    }
    const long judged = r.tp + r.tn + r.fp + r.fn;
    r.accuracy = judged ? static_cast<double>(r.tp + r.tn) / static_cast<double>(judged) : 0.0;
    const std::size_t keep = std::min(keep_nearest, near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(keep), near.end(),
                      [](const NearMiss& a, const NearMiss& b) { return std::abs(a.margin) < std::abs(b.margin); });
    near.resize(keep);
    r.nearest = std::move(near);
    return r;
}

Recognition recognition_accuracy(const BuiltNetwork& n, const std::vector<Seq>& positives,
                                 const std::vector<Seq>& negatives, std::size_t keep_nearest) {
    if (is_generator(n.task)) throw std::invalid_argument("recognition_accuracy: not a recognizer network");
    const Alphabet A(n.k);
    const std::size_t np = positives.size();
    std::vector<Seq> pos, neg;
    long skipped = 0;
    for (std::size_t i = 0; i < positives.size() + negatives.size(); ++i) {
        const Seq& s = i < np ? positives[i] : negatives[i - np];
        Seq in = network_input(n.task, A, s);
        if (in.empty() || !in_domain(n, in)) {
            ++skipped;
            continue;
        }
        (i < np ? pos : neg).push_back(s);
    }
    Recognition r = recognition_accuracy(
        [&](const Seq& s) { return recognize(n.model, n.head, network_input(n.task, A, s)); }, pos, neg, keep_nearest);
    r.skipped += skipped;
    return r;
}

Seq corrupt(const Alphabet& A, const Seq& s, Corruption c, std::size_t pos, int token) {
    Seq out = s;
    const bool bracket = pos < s.size() && (A.kind(s[pos]) == Kind::Open || A.kind(s[pos]) == Kind::Close);
    switch (c) {
        case Corruption::SwapType:
            if (!bracket || token < 1 || token > A.k || token == A.type(s[pos])) return s;
            out[pos] = A.kind(s[pos]) == Kind::Open ? A.open(token) : A.close(token);
            return out;
        case Corruption::Flip:
            if (!bracket) return s;
            out[pos] = A.kind(s[pos]) == Kind::Open ? A.close(A.type(s[pos])) : A.open(A.type(s[pos]));
            return out;
        case Corruption::Delete:
            if (!bracket) return s;
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos));
            return out;
        case Corruption::Insert:
            if (pos < 1 || pos > s.size() || !A.valid(token) || token >= A.bos()) return s;
            out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), token);
            return out;
    }
    return s;
}

Seq random_negative(const Alphabet& A, Lang L, const Seq& member, Rng& rng) {
    for (int attempt = 0; attempt < 32; ++attempt) {
        const auto c = static_cast<Corruption>(rng.below(4));
        const std::size_t pos = c == Corruption::Insert ? 1 + rng.below(member.size() - 1) : rng.below(member.size());
        const int token = c == Corruption::Insert ? static_cast<int>(rng.below(static_cast<std::size_t>(2 * A.k)))
                                                  : 1 + static_cast<int>(rng.below(static_cast<std::size_t>(A.k)));
        Seq s = corrupt(A, member, c, pos, token);
        if (s != member && !is_member(L, A, s)) return s;
    }
    return {};
}

std::vector<Seq> malformed_framings(const Alphabet& A, const Seq& member) {
    std::vector<Seq> out;
    if (member.empty() || member.back() != A.eos()) return out;
    out.emplace_back(member.begin(), member.end() - 1);
    Seq twice = member;
    twice.push_back(A.eos());
    out.push_back(twice);
    if (member.size() > 2) {
        Seq mid = member;
        mid.insert(mid.begin() + 1 + static_cast<std::ptrdiff_t>((member.size() - 2) / 2), A.eos());
        out.push_back(mid);
    }
    return out;
}

std::vector<Seq> negative_corpus(const Alphabet& A, Lang L, const std::vector<Seq>& members, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Seq> out;
    for (const Seq& m : members) {
        Seq c = random_negative(A, L, m, rng);
        if (!c.empty()) out.push_back(std::move(c));
        for (auto& f : malformed_framings(A, m)) out.push_back(std::move(f));
    }
    return out;
}

}  // namespace dyf
