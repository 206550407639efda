#include "constructions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <stdexcept>

#include "build_util.hpp"

namespace dyf {

std::string task_name(Task t) {
    switch (t) {
        case Task::DyckRec: return "dyck-rec";
        case Task::DyckGen: return "dyck-gen";
        case Task::ShuffleRec: return "shuffle-rec";
        case Task::ShuffleGen: return "shuffle-gen";
        case Task::DyckRecNoBos: return "dyck-rec-nobos";
        case Task::DyckGenNoBos: return "dyck-gen-nobos";
    }
    return "?";
}

Task parse_task(const std::string& s) {
    for (Task t : {Task::DyckRec, Task::DyckGen, Task::ShuffleRec, Task::ShuffleGen, Task::DyckRecNoBos,
                   Task::DyckGenNoBos})
        if (task_name(t) == s) return t;
    throw std::invalid_argument("unknown task '" + s + "'");
}

bool is_generator(Task t) { return t == Task::DyckGen || t == Task::ShuffleGen || t == Task::DyckGenNoBos; }
bool uses_bos(Task t) { return t != Task::DyckRecNoBos && t != Task::DyckGenNoBos; }
Lang task_lang(Task t) { return t == Task::ShuffleRec || t == Task::ShuffleGen ? Lang::Shuffle : Lang::Dyck; }

int type_bits(int k) {
    int L = 0;
    while ((1 << L) < k) ++L;
    return std::max(2, L);
}

Vec type_code(int k, int t) {
    if (t < 1 || t > k) throw std::out_of_range("type_code: type out of range");
    const int L = type_bits(k);
    Vec c(static_cast<std::size_t>(L));
    for (int b = 0; b < L; ++b) c[static_cast<std::size_t>(b)] = ((t - 1) >> b) & 1 ? 1.0 : -1.0;
    return c;
}

double theta(double d, double a) { return std::atan(d / std::exp(a)); }

std::size_t channel(const BuiltNetwork& n, const std::string& name) {
    auto it = std::find(n.channels.begin(), n.channels.end(), name);
    if (it == n.channels.end()) throw std::out_of_range("no channel '" + name + "'");
    return static_cast<std::size_t>(it - n.channels.begin());
}

double recov(double y, double eps) {
    if (!(eps > 0.0 && eps <= 1.0 / 20.0)) throw std::invalid_argument("recov: eps must lie in (0, 1/20]");
    auto ramp = [](double x) { return std::max(x, 0.0) - std::max(x - 1.0, 0.0); };
    return ramp((y - 9.0 / 20.0) / eps) + ramp((y - 19.0 / 15.0) / eps);
}

namespace {

double one_minus_cos(double x) {
    double s = std::sin(0.5 * x);
    return 2.0 * s * s;
}

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Smallest gap 1 - cos(theta(D) - theta(D')) over distinct depths in [0, n].
double min_depth_gap(int n, double a) {
    double g = std::numeric_limits<double>::infinity();
    for (int D = 0; D < n; ++D) g = std::min(g, one_minus_cos(theta(D + 1, a) - theta(D, a)));
    return g;
}

double pow2_at_least(const std::function<bool(double)>& ok) {
    for (int e = -10; e < 200; ++e) {
        double c = std::ldexp(1.0, e);
        if (ok(c)) return c;
    }
    throw std::runtime_error("constant search did not terminate");
}

}  // namespace

double depth_selection_worst_log_ratio(int n, double a, double C1, double C2, bool generator, double stop_above) {
    const double ninf = -std::numeric_limits<double>::infinity();
    const double delta = min_depth_gap(n, a);
    const double other_gap = C1 * delta - 1.0;
    if (other_gap <= 0.0) return std::numeric_limits<double>::infinity();
    // Keys at another depth (and closers, EOS): each trails the target by at least C2 * other_gap.
    const double other = std::log(static_cast<double>(n)) - C2 * other_gap;
    std::vector<double> phi(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) phi[static_cast<std::size_t>(p)] = theta(p, a);
    double worst = other;
    for (int i = 1; i < n; ++i) {
        const int last = generator ? i : i - 1;
        for (int js = 1; js <= last; ++js) {
            // Earlier keys at the target's depth lose only through the positional term.
            const double base = std::sin(phi[static_cast<std::size_t>(i)] - phi[static_cast<std::size_t>(js)]);
            double lse = ninf;
            for (int j = js - 1; j >= 0; --j) {
                double gap = std::sin(phi[static_cast<std::size_t>(i)] - phi[static_cast<std::size_t>(j)]) - base;
                double term = -C2 * gap;
                lse = log_add(lse, term);
                if (term < lse - 45.0) break;  // remaining terms are smaller still
            }
            worst = std::max(worst, log_add(lse, other));
            if (worst > stop_above) return worst;
        }
    }
    return worst;
}

double shift_worst_log_ratio(int n, double a, double C, double stop_above) {
    const double ninf = -std::numeric_limits<double>::infinity();
    double worst = ninf;
    for (int p = 1; p < n; ++p) {
        const double target = theta(p - 1, a);
        double lse = ninf;
        for (int j = p - 2; j >= 0; --j) {
            double term = -C * one_minus_cos(target - theta(j, a));
            lse = log_add(lse, term);
            if (term < lse - 45.0) break;
        }
        lse = log_add(lse, -C * one_minus_cos(target - theta(p, a)));
        worst = std::max(worst, lse);
        if (worst > stop_above) return worst;
    }
    return worst;
}

double min_positive_q(int k, bool recovered) {
    if (recovered) return 2.0;
    const double L = type_bits(k);
    const double g = 8.0 * std::sqrt(L);
    const double c3 = 2.0 * (L + 1.0);
    auto q = [&](double l1, double l2sq, double o1) { return g * (-l1 + c3 * o1 + 1.0) / std::sqrt(2.0 * l2sq + o1 * o1 + 1.0); };
    // matched close; open after BOS target; BOS or EOS
    return std::min({q(0.0, 0.0, 0.0), q(L, L, 2.0), q(0.0, 0.0, 1.0)});
}

namespace {

double head_bias(double a) { return std::sin(theta(1.0, a)) / (2.0 * std::sqrt(2.0)); }

void select_into(ConstructionParams& p, int k) {
    const int n = p.n_max;
    const double log_tail = std::log((1.0 - p.target_weight) / p.target_weight);
    const double delta = min_depth_gap(n, p.a);
    // Strictly above 2 so that every other-depth key trails by more than the positional term.
    const double C1 = pow2_at_least([&](double c) { return c * delta > 2.0; });
    if (p.C1_4 == 0.0) p.C1_4 = C1;
    if (p.C2_4 == 0.0)
        p.C2_4 = pow2_at_least(
            [&](double c) { return depth_selection_worst_log_ratio(n, p.a, p.C1_4, c, false, log_tail) <= log_tail; });
    if (p.gen_C1 == 0.0) p.gen_C1 = C1;
    if (p.gen_C2 == 0.0)
        p.gen_C2 = pow2_at_least(
            [&](double c) { return depth_selection_worst_log_ratio(n, p.a, p.gen_C1, c, true, p.gen_log_tail) <= p.gen_log_tail; });
    if (p.C1_5 == 0.0) {
        // Members must keep v below half the head bias.
        const double b = head_bias(p.a);
        const double tw = std::max(p.target_weight, 1.0 - b / 2.0);
        const double lt = std::log((1.0 - tw) / tw);
        const double qmin = std::min(min_positive_q(k, true), min_positive_q(k, false));
        p.C1_5 = pow2_at_least([&](double c) { return std::log(static_cast<double>(n)) - c * qmin <= lt; });
    }
    if (p.C_shift == 0.0)
        p.C_shift = pow2_at_least([&](double c) { return shift_worst_log_ratio(n, p.a, c, p.gen_log_tail) <= p.gen_log_tail; });
}

}  // namespace

ConstructionParams select_constants(int k, int n_max, double target_weight) {
    if (k < 1) throw std::invalid_argument("select_constants: k must be >= 1");
    if (n_max < 1) throw std::invalid_argument("select_constants: n_max must be >= 1");
    ConstructionParams p;
    p.n_max = n_max;
    p.target_weight = target_weight;
    if (!(target_weight > 2.0 / 3.0 && target_weight < 1.0))
        throw std::invalid_argument("select_constants: target weight must lie in (2/3, 1)");
    select_into(p, k);
    return p;
}

void validate_params(const ConstructionParams& p, int k) {
    auto bad = [](const std::string& m) { throw std::invalid_argument("construction params: " + m); };
    if (k < 1) bad("k must be >= 1");
    if (!std::isfinite(p.a)) bad("a must be finite");
    if (p.n_max < 1) bad("n_max must be >= 1");
    if (!(p.target_weight > 2.0 / 3.0 && p.target_weight < 1.0)) bad("target weight must lie in (2/3, 1)");
    if (!(p.C1_4 * min_depth_gap(p.n_max, p.a) > 2.0))
        bad("C1_4 * (1 - cos(theta(d) - theta(d'))) must exceed 2 for all depths <= n_max");
    if (!(p.gen_C1 * min_depth_gap(p.n_max, p.a) > 2.0)) bad("gen_C1 too small for n_max");
    for (double c : {p.C2_4, p.C1_5, p.gen_C2, p.C_shift, p.C_F, p.C3_shuffle})
        if (!(c > 0.0 && std::isfinite(c))) bad("selection constants must be positive and finite");
    if (!(p.eps_3 > 0.0 && p.eps_3 < std::sin(theta(1.0, p.a)))) bad("eps_3 must lie in (0, sin theta(1))");
    if (!(p.C0_gen > 0.0 && std::isfinite(p.C0_gen))) bad("C0_gen must be positive");
    if (!(p.eps_q > 0.0)) bad("eps_q must be positive");
    if (!(p.eps_recov > 0.0 && p.eps_recov <= 1.0 / 20.0)) bad("eps_recov must lie in (0, 1/20]");
    if (!(p.shuffle_tv > 0.0 && p.shuffle_tv < 1.0)) bad("shuffle_tv must lie in (0, 1)");
    if (!(p.gen_log_tail < 0.0)) bad("gen_log_tail must be negative");
}

ConstructionParams resolve_params(int k, ConstructionParams p) {
    if (p.n_max < 1) throw std::invalid_argument("construction params: n_max must be >= 1");
    if (!(p.target_weight > 2.0 / 3.0 && p.target_weight < 1.0))
        throw std::invalid_argument("construction params: target weight must lie in (2/3, 1)");
    if (!std::isfinite(p.a)) throw std::invalid_argument("construction params: a must be finite");
    select_into(p, k);
    if (p.eps_3 == 0.0) p.eps_3 = std::min(std::sin(theta(1.0, p.a)), 1e-2) / 2.0;
    validate_params(p, k);
    return p;
}

double pseudo_bos_eps(double R, int n_max) {
    const double n = n_max;
    const double bound = 1.0 - 1.0 / std::sqrt(1.0 + 4.0 / (n * n * R * R));
    double e = 1.0;
    while (e > bound / 2.0) e /= 2.0;
    return e;
}

Block build_pseudo_bos_block(std::size_t d, const PseudoBosSpec& s) {
    const std::size_t m = s.subspace.size();
    if (s.mean.size() != m) throw std::invalid_argument("pseudo-BOS: one mean channel per subspace channel");
    const double eps = s.eps > 0.0 ? s.eps : pseudo_bos_eps(s.R, s.n_max);
    const std::size_t h = std::max(d, m + 1);
    Block b = blank_block(d, "pseudo-bos", 1, h);
    for (std::size_t c = 0; c < m; ++c) b.attn.wv(s.mean[c], s.subspace[c].first) = 1.0;
    auto& f = b.ffn;
    for (std::size_t c = 0; c < m; ++c) {
        f.w1(c, s.subspace[c].first) = s.subspace[c].second;
        f.w1(c, s.mean[c]) = -s.subspace[c].second;
    }
    f.w1(m, s.one) = 1.0;
    std::fill(f.gamma.begin(), f.gamma.end(), std::sqrt(1.0 / static_cast<double>(h)));
    // With every other row zero the constant row must normalize to exactly 1.
    f.gamma[m] = unit_gamma(1.0, h);
    f.beta[m] = -1.0 + eps;
    f.w2(s.out, m) = 1.0 / eps;
    return b;
}

double shuffle_gen_constant(const GenParams& g, double tv_target) {
    const double B = 1.0 + (1.0 - g.r) / g.r + (1.0 - g.q) / g.q;
    return std::log(B / tv_target);
}

Seq network_input(Task t, const Alphabet& A, const Seq& framed) {
    if (uses_bos(t) || framed.empty() || framed[0] != A.bos()) return framed;
    return Seq(framed.begin() + 1, framed.end());
}

BuiltNetwork build(Task t, int k, const std::optional<GenParams>& g, const ConstructionParams& p) {
    if (is_generator(t) && !g) throw std::invalid_argument("build: generator task needs generation params");
    switch (t) {
        case Task::DyckRec: return build_dyck_recognizer(k, p);
        case Task::DyckGen: return build_dyck_generator(k, *g, p);
        case Task::ShuffleRec: return build_shuffle_recognizer(k, p);
        case Task::ShuffleGen: return build_shuffle_generator(k, *g, p);
        case Task::DyckRecNoBos: return build_dyck_recognizer_nobos(k, p);
        case Task::DyckGenNoBos: return build_dyck_generator_nobos(k, *g, p);
    }
    throw std::invalid_argument("build: unknown task");
}

}  // namespace dyf
