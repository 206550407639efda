#include "oracles.hpp"

#include <map>
#include <stdexcept>

namespace dyf {

namespace {

// Dyck bodies of exactly length n, memoized by n.
const std::set<Seq>& dyck_exact(const Alphabet& A, int n, std::map<int, std::set<Seq>>& memo) {
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    std::set<Seq> out;
    if (n == 0) {
        out.insert(Seq{});
    } else {
        // open_t X close_t Y with |X| = m, |Y| = n - 2 - m
        for (int m = 0; m + 2 <= n; m += 2) {
            const auto& xs = dyck_exact(A, m, memo);
            const auto& ys = dyck_exact(A, n - 2 - m, memo);
            for (int t = 1; t <= A.k; ++t)
                for (const auto& x : xs)
                    for (const auto& y : ys) {
                        Seq w{A.open(t)};
                        w.insert(w.end(), x.begin(), x.end());
                        w.push_back(A.close(t));
                        w.insert(w.end(), y.begin(), y.end());
                        out.insert(std::move(w));
                    }
        }
    }
    return memo.emplace(n, std::move(out)).first->second;
}

using Key = std::pair<Seq, Seq>;

const std::set<Seq>& shuffle_memo(const Seq& u, const Seq& v, std::map<Key, std::set<Seq>>& memo) {
    Key key{u, v};
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::set<Seq> out;
    if (u.empty()) {
        out.insert(v);
    } else if (v.empty()) {
        out.insert(u);
    } else {
        Seq u1(u.begin() + 1, u.end()), v1(v.begin() + 1, v.end());
        for (const auto& w : shuffle_memo(u1, v, memo)) {
            Seq x{u[0]};
            x.insert(x.end(), w.begin(), w.end());
            out.insert(std::move(x));
        }
        for (const auto& w : shuffle_memo(u, v1, memo)) {
            Seq x{v[0]};
            x.insert(x.end(), w.begin(), w.end());
            out.insert(std::move(x));
        }
    }
    return memo.emplace(std::move(key), std::move(out)).first->second;
}

// Dyck_1 bodies over a single type t, length exactly n.
std::vector<Seq> dyck1(const Alphabet& A, int t, int n) {
    Alphabet one(1);
    std::map<int, std::set<Seq>> memo;
    std::vector<Seq> out;
    for (const auto& w : dyck_exact(one, n, memo)) {
        Seq x;
        for (int id : w) x.push_back(id == one.open(1) ? A.open(t) : A.close(t));
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace

std::set<Seq> enumerate_dyck_grammar(const Alphabet& A, int max_len) {
    std::map<int, std::set<Seq>> memo;
    std::set<Seq> out;
    for (int n = 0; n <= max_len; n += 2) {
        const auto& s = dyck_exact(A, n, memo);
        out.insert(s.begin(), s.end());
    }
    return out;
}

std::set<Seq> shuffle_set(const Seq& u, const Seq& v) {
    std::map<Key, std::set<Seq>> memo;
    return shuffle_memo(u, v, memo);
}

std::set<Seq> enumerate_shuffle_dyck(const Alphabet& A, int max_len) {
    if (max_len > 12) throw std::invalid_argument("enumerate_shuffle_dyck: max_len capped at 12");
    std::map<Key, std::set<Seq>> memo;
    // acc[n] = bodies of length n in the shuffle of the first t single-type languages
    std::map<int, std::set<Seq>> acc;
    for (int n = 0; n <= max_len; n += 2)
        for (auto& w : dyck1(A, 1, n)) acc[n].insert(w);
    for (int t = 2; t <= A.k; ++t) {
        std::map<int, std::set<Seq>> next;
        for (int n = 0; n <= max_len; n += 2)
            for (int m = 0; m <= n; m += 2) {
                auto vs = dyck1(A, t, n - m);
                for (const auto& u : acc[m])
                    for (const auto& v : vs) {
                        const auto& s = shuffle_memo(u, v, memo);
                        next[n].insert(s.begin(), s.end());
                    }
            }
        acc = std::move(next);
    }
    std::set<Seq> out;
    for (auto& [n, s] : acc) out.insert(s.begin(), s.end());
    return out;
}

void for_each_body(const Alphabet& A, int len, const std::function<void(const Seq&)>& f) {
    const int base = 2 * A.k;
    Seq w(static_cast<std::size_t>(len), 0);
    while (true) {
        f(w);
        int i = len - 1;
        while (i >= 0 && w[static_cast<std::size_t>(i)] == base - 1) w[static_cast<std::size_t>(i--)] = 0;
        if (i < 0) return;
        ++w[static_cast<std::size_t>(i)];
    }
}

Seq frame(const Alphabet& A, const Seq& body) {
    Seq s{A.bos()};
    s.insert(s.end(), body.begin(), body.end());
    s.push_back(A.eos());
    return s;
}

}  // namespace dyf
