#include "lang_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dyf {

Alphabet::Alphabet(int k_) : k(k_) {
    if (k < 1) throw std::invalid_argument("alphabet: k must be >= 1");
}

int Alphabet::open(int t) const {
    if (t < 1 || t > k) throw std::out_of_range("bracket type out of range");
    return t - 1;
}

int Alphabet::close(int t) const {
    if (t < 1 || t > k) throw std::out_of_range("bracket type out of range");
    return k + t - 1;
}

Kind Alphabet::kind(int id) const {
    if (!valid(id)) throw std::out_of_range("token id out of range");
    if (id < k) return Kind::Open;
    if (id < 2 * k) return Kind::Close;
    return id == bos() ? Kind::Bos : Kind::Eos;
}

int Alphabet::type(int id) const {
    switch (kind(id)) {
        case Kind::Open: return id + 1;
        case Kind::Close: return id - k + 1;
        default: return 0;
    }
}

std::string Alphabet::name(int id) const {
    switch (kind(id)) {
        case Kind::Open: return "O" + std::to_string(type(id));
        case Kind::Close: return "C" + std::to_string(type(id));
        case Kind::Bos: return "BOS";
        default: return "EOS";
    }
}

int Alphabet::parse(const std::string& s) const {
    if (s == "BOS") return bos();
    if (s == "EOS") return eos();
    if (s.size() >= 2 && (s[0] == 'O' || s[0] == 'C')) {
        std::size_t used = 0;
        int t = 0;
        try {
            t = std::stoi(s.substr(1), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == s.size() - 1 && t >= 1 && t <= k) return s[0] == 'O' ? open(t) : close(t);
    }
    throw std::invalid_argument("unknown token '" + s + "' for k=" + std::to_string(k));
}

Seq Alphabet::parse_seq(const std::string& text) const {
    std::istringstream in(text);
    Seq out;
    for (std::string w; in >> w;) out.push_back(parse(w));
    return out;
}

std::string Alphabet::format(const Seq& s) const {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ' ';
        out += name(s[i]);
    }
    return out;
}

GenParams GenParams::dyck(int k, double q, double r, Vec pi) {
    GenParams p;
    p.lang = Lang::Dyck;
    p.q = q;
    p.r = r;
    p.pi = pi.empty() ? Vec(static_cast<std::size_t>(k), 1.0 / k) : std::move(pi);
    p.validate(k);
    return p;
}

GenParams GenParams::shuffle(int k, double q, double r, Vec pi, Vec pibar) {
    GenParams p;
    p.lang = Lang::Shuffle;
    p.q = q;
    p.r = r;
    p.pi = pi.empty() ? Vec(static_cast<std::size_t>(k), 1.0 / k) : std::move(pi);
    p.pibar = pibar.empty() ? Vec(static_cast<std::size_t>(k), 1.0 / k) : std::move(pibar);
    p.validate(k);
    return p;
}

namespace {
void check_simplex(const Vec& v, int k, const char* name) {
    if (v.size() != static_cast<std::size_t>(k))
        throw std::invalid_argument(std::string(name) + ": expected length k");
    double sum = 0.0;
    for (double x : v) {
        if (!(x > 0.0)) throw std::invalid_argument(std::string(name) + ": entries must be > 0");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument(std::string(name) + ": must sum to 1");
}
}  // namespace

void GenParams::validate(int k) const {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q must lie in (0,1)");
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("r must lie in (0,1)");
    check_simplex(pi, k, "pi");
    if (lang == Lang::Shuffle) check_simplex(pibar, k, "pibar");
}

double GenParams::pi_min() const { return *std::min_element(pi.begin(), pi.end()); }

int depth(const Alphabet& A, const Seq& s) {
    int d = 0;
    for (int id : s) {
        Kind kd = A.kind(id);
        d += kd == Kind::Open ? 1 : kd == Kind::Close ? -1 : 0;
    }
    return d;
}

int per_type_depth(const Alphabet& A, const Seq& s, int t) {
    if (t < 1 || t > A.k) throw std::out_of_range("per_type_depth: type out of range");
    int d = 0;
    for (int id : s) {
        if (A.type(id) != t) continue;
        d += A.kind(id) == Kind::Open ? 1 : -1;
    }
    return d;
}

namespace {

// Body = tokens after the leading BOS, up to an optional final EOS.
// Returns false when framing is malformed; sets has_eos.
bool split_frame(const Alphabet& A, const Seq& s, std::size_t& body_end, bool& has_eos) {
    if (s.empty() || !A.valid(s[0]) || s[0] != A.bos()) return false;
    has_eos = false;
    body_end = s.size();
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!A.valid(s[i])) return false;
        Kind kd = A.kind(s[i]);
        if (kd == Kind::Bos) return false;
        if (kd == Kind::Eos) {
            if (i + 1 != s.size()) return false;
            has_eos = true;
            body_end = i;
        }
    }
    return true;
}

// Stack run; returns false on pop-empty or mismatched pop. Leaves the stack.
bool run_stack(const Alphabet& A, const Seq& s, std::size_t end, std::vector<int>& stack) {
    stack.clear();
    for (std::size_t i = 1; i < end; ++i) {
        int t = A.type(s[i]);
        if (A.kind(s[i]) == Kind::Open) {
            stack.push_back(t);
        } else {
            if (stack.empty() || stack.back() != t) return false;
            stack.pop_back();
        }
    }
    return true;
}

bool run_counters(const Alphabet& A, const Seq& s, std::size_t end, std::vector<int>& cnt) {
    cnt.assign(static_cast<std::size_t>(A.k) + 1, 0);
    for (std::size_t i = 1; i < end; ++i) {
        int t = A.type(s[i]);
        if (A.kind(s[i]) == Kind::Open) {
            ++cnt[static_cast<std::size_t>(t)];
        } else if (--cnt[static_cast<std::size_t>(t)] < 0) {
            return false;
        }
    }
    return true;
}

}  // namespace

bool is_dyck_prefix(const Alphabet& A, const Seq& s) {
    std::size_t end = 0;
    bool eos = false;
    if (!split_frame(A, s, end, eos)) return false;
    std::vector<int> st;
    if (!run_stack(A, s, end, st)) return false;
    return !eos || st.empty();
}

bool is_dyck_member(const Alphabet& A, const Seq& s) {
    std::size_t end = 0;
    bool eos = false;
    if (!split_frame(A, s, end, eos) || !eos) return false;
    std::vector<int> st;
    return run_stack(A, s, end, st) && st.empty();
}

bool is_shuffle_prefix(const Alphabet& A, const Seq& s) {
    std::size_t end = 0;
    bool eos = false;
    if (!split_frame(A, s, end, eos)) return false;
    std::vector<int> c;
    if (!run_counters(A, s, end, c)) return false;
    return !eos || std::all_of(c.begin(), c.end(), [](int v) { return v == 0; });
}

bool is_shuffle_member(const Alphabet& A, const Seq& s) {
    std::size_t end = 0;
    bool eos = false;
    if (!split_frame(A, s, end, eos) || !eos) return false;
    std::vector<int> c;
    return run_counters(A, s, end, c) && std::all_of(c.begin(), c.end(), [](int v) { return v == 0; });
}

bool is_prefix(Lang L, const Alphabet& A, const Seq& s) {
    return L == Lang::Dyck ? is_dyck_prefix(A, s) : is_shuffle_prefix(A, s);
}

bool is_member(Lang L, const Alphabet& A, const Seq& s) {
    return L == Lang::Dyck ? is_dyck_member(A, s) : is_shuffle_member(A, s);
}

std::vector<int> valid_close_types(Lang L, const Alphabet& A, const Seq& s) {
    if (!is_prefix(L, A, s)) throw std::invalid_argument("valid_close_types: not a prefix");
    std::size_t end = 0;
    bool eos = false;
    split_frame(A, s, end, eos);
    std::vector<int> out;
    if (eos) return out;
    if (L == Lang::Dyck) {
        std::vector<int> st;
        run_stack(A, s, end, st);
        if (!st.empty()) out.push_back(st.back());
    } else {
        std::vector<int> c;
        run_counters(A, s, end, c);
        for (int t = 1; t <= A.k; ++t)
            if (c[static_cast<std::size_t>(t)] > 0) out.push_back(t);
    }
    return out;
}

namespace {
void require_open_prefix(Lang L, const Alphabet& A, const Seq& s) {
    if (!is_prefix(L, A, s)) throw std::invalid_argument("next distribution: not a prefix");
    if (s.back() == A.eos()) throw std::invalid_argument("next distribution: prefix already ended");
}
}  // namespace

Vec dyck_next_distribution(const Alphabet& A, const Seq& prefix, const GenParams& p) {
    require_open_prefix(Lang::Dyck, A, prefix);
    Vec out(static_cast<std::size_t>(A.size()), 0.0);
    auto close = valid_close_types(Lang::Dyck, A, prefix);
    const double scale = close.empty() ? p.r : p.q;
    for (int t = 1; t <= A.k; ++t) out[static_cast<std::size_t>(A.open(t))] = scale * p.pi[static_cast<std::size_t>(t - 1)];
    if (close.empty())
        out[static_cast<std::size_t>(A.eos())] = 1.0 - p.r;
    else
        out[static_cast<std::size_t>(A.close(close[0]))] = 1.0 - p.q;
    return out;
}

Vec shuffle_next_distribution(const Alphabet& A, const Seq& prefix, const GenParams& p) {
    require_open_prefix(Lang::Shuffle, A, prefix);
    Vec out(static_cast<std::size_t>(A.size()), 0.0);
    auto close = valid_close_types(Lang::Shuffle, A, prefix);
    if (close.empty()) {
        for (int t = 1; t <= A.k; ++t) out[static_cast<std::size_t>(A.open(t))] = p.r * p.pi[static_cast<std::size_t>(t - 1)];
        out[static_cast<std::size_t>(A.eos())] = 1.0 - p.r;
        return out;
    }
    double z = 0.0;
    for (int t = 1; t <= A.k; ++t) z += p.q * p.pi[static_cast<std::size_t>(t - 1)];
    for (int t : close) z += (1.0 - p.q) * p.pibar[static_cast<std::size_t>(t - 1)];
    for (int t = 1; t <= A.k; ++t) out[static_cast<std::size_t>(A.open(t))] = p.q * p.pi[static_cast<std::size_t>(t - 1)] / z;
    for (int t : close) out[static_cast<std::size_t>(A.close(t))] = (1.0 - p.q) * p.pibar[static_cast<std::size_t>(t - 1)] / z;
    return out;
}

Vec next_distribution(const Alphabet& A, const Seq& prefix, const GenParams& p) {
    return p.lang == Lang::Dyck ? dyck_next_distribution(A, prefix, p) : shuffle_next_distribution(A, prefix, p);
}

double Rng::uniform() { return std::generate_canonical<double, 53>(eng_); }

std::size_t Rng::categorical(const Vec& p) {
    double u = uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        last = i;
        acc += p[i];
        if (u < acc) return i;
    }
    return last;
}

std::size_t Rng::below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
}

Sample sample_sequence(const Alphabet& A, const GenParams& p, Rng& rng, std::size_t max_tokens) {
    Sample out;
    out.tokens.push_back(A.bos());
    // Incremental state so a long sample stays linear time.
    std::vector<int> stack, cnt(static_cast<std::size_t>(A.k) + 1, 0);
    int open_total = 0;
    Vec dist(static_cast<std::size_t>(A.size()));
    while (true) {
        if (out.tokens.size() >= max_tokens) {
            out.truncated = true;
            return out;
        }
        std::fill(dist.begin(), dist.end(), 0.0);
        if (open_total == 0) {
            for (int t = 1; t <= A.k; ++t) dist[static_cast<std::size_t>(A.open(t))] = p.r * p.pi[static_cast<std::size_t>(t - 1)];
            dist[static_cast<std::size_t>(A.eos())] = 1.0 - p.r;
        } else if (p.lang == Lang::Dyck) {
            for (int t = 1; t <= A.k; ++t) dist[static_cast<std::size_t>(A.open(t))] = p.q * p.pi[static_cast<std::size_t>(t - 1)];
            dist[static_cast<std::size_t>(A.close(stack.back()))] = 1.0 - p.q;
        } else {
            double z = 0.0;
            for (int t = 1; t <= A.k; ++t) {
                z += p.q * p.pi[static_cast<std::size_t>(t - 1)];
                if (cnt[static_cast<std::size_t>(t)] > 0) z += (1.0 - p.q) * p.pibar[static_cast<std::size_t>(t - 1)];
            }
            for (int t = 1; t <= A.k; ++t) {
                dist[static_cast<std::size_t>(A.open(t))] = p.q * p.pi[static_cast<std::size_t>(t - 1)] / z;
                if (cnt[static_cast<std::size_t>(t)] > 0)
                    dist[static_cast<std::size_t>(A.close(t))] = (1.0 - p.q) * p.pibar[static_cast<std::size_t>(t - 1)] / z;
            }
        }
        int id = static_cast<int>(rng.categorical(dist));
        out.tokens.push_back(id);
        if (id == A.eos()) return out;
        int t = A.type(id);
        if (A.kind(id) == Kind::Open) {
            stack.push_back(t);
            ++cnt[static_cast<std::size_t>(t)];
            ++open_total;
        } else {
            if (!stack.empty()) stack.pop_back();
            --cnt[static_cast<std::size_t>(t)];
            --open_total;
        }
    }
}

double process_log_probability(const Alphabet& A, const Seq& s, const GenParams& p) {
    const double ninf = -std::numeric_limits<double>::infinity();
    if (s.empty() || s[0] != A.bos()) return ninf;
    for (int id : s)
        if (!A.valid(id)) return ninf;
    double lp = 0.0;
    Seq prefix{s[0]};
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (prefix.back() == A.eos() || !is_prefix(p.lang, A, prefix)) return ninf;
        double pr = next_distribution(A, prefix, p)[static_cast<std::size_t>(s[i])];
        if (pr <= 0.0) return ninf;
        lp += std::log(pr);
        prefix.push_back(s[i]);
    }
    return prefix.back() == A.eos() ? lp : ninf;
}

double member_probability_bound(const GenParams& p, int n) {
    double m = std::min({p.r, 1.0 - p.q, p.q * p.pi_min()});
    return (1.0 - p.r) * std::pow(m, n);
}

double member_probability_bound_safe(const GenParams& p, int n) {
    double m = std::min({p.r * p.pi_min(), 1.0 - p.q, p.q * p.pi_min()});
    return (1.0 - p.r) * std::pow(m, n);
}

}  // namespace dyf
