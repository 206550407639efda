#include "conversions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "build_util.hpp"

namespace dyf {

Ffn rmsln_ffn_to_ln_ffn(const Ffn& f) {
    if (f.norm != NormKind::RMS) throw std::invalid_argument("rmsln_ffn_to_ln_ffn: FFN is not RMS-normalized");
    const std::size_t h = f.w1.rows, d = f.w1.cols;
    Ffn g;
    g.norm = NormKind::LN;
    Mat neg(h, d);
    for (std::size_t i = 0; i < f.w1.a.size(); ++i) neg.a[i] = -f.w1.a[i];
    g.w1 = vstack(f.w1, neg);
    g.w2 = hstack(f.w2, Mat(f.w2.rows, h));
    g.gamma = f.gamma;
    g.gamma.insert(g.gamma.end(), h, 1.0);
    g.beta = f.beta;
    g.beta.insert(g.beta.end(), h, 0.0);
    return g;
}

namespace {

Mat center_rows(const Mat& w) {
    Mat out = w;
    for (std::size_t c = 0; c < w.cols; ++c) {
        double mu = 0.0;
        for (std::size_t r = 0; r < w.rows; ++r) mu += w(r, c);
        mu /= static_cast<double>(w.rows);
        for (std::size_t r = 0; r < w.rows; ++r) out(r, c) = w(r, c) - mu;
    }
    return out;
}

Mat scaled(const Mat& w, double s) {
    Mat out = w;
    for (double& v : out.a) v *= s;
    return out;
}

Vec concat(std::initializer_list<Vec> parts) {
    Vec out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

Vec times(const Vec& v, double s) {
    Vec out = v;
    for (double& x : out) x *= s;
    return out;
}

}  // namespace

Attention qkln_to_qkrmsln(const Attention& a) {
    if (!a.qk || a.qk->kind != NormKind::LN) throw std::invalid_argument("qkln_to_qkrmsln: attention has no QK-LN");
    Attention b = a;
    b.wq = center_rows(a.wq);
    b.wk = center_rows(a.wk);
    b.qk->kind = NormKind::RMS;
    return b;
}

Attention qkrmsln_to_qkln(const Attention& a) {
    if (!a.qk || a.qk->kind != NormKind::RMS) throw std::invalid_argument("qkrmsln_to_qkln: attention has no QK-RMSLN");
    const auto& n = *a.qk;
    const std::size_t r = a.wq.rows, d = a.wq.cols;
    const Mat zero(r, d);
    const Vec zr(r, 0.0), ones(r, 1.0);
    const double s = std::sqrt(2.0 / 3.0);
    Attention b = a;
    b.wq = vstack(vstack(a.wq, scaled(a.wq, -1.0)), zero);
    b.wk = vstack(vstack(a.wk, zero), scaled(a.wk, -1.0));
    QKNorm m;
    m.kind = NormKind::LN;
    m.gamma_q = times(concat({n.gamma_q, n.gamma_q, ones}), s);
    m.beta_q = concat({n.beta_q, times(n.beta_q, -1.0), zr});
    m.gamma_k = times(concat({n.gamma_k, ones, n.gamma_k}), s);
    m.beta_k = concat({n.beta_k, zr, times(n.beta_k, -1.0)});
    b.qk = m;
    return b;
}

namespace {

using Terms = std::vector<std::pair<std::string, double>>;

// Query/key rows built from named channels; each side has a fixed 2-norm.
struct FixedNorm {
    const BuiltNetwork& n;
    std::vector<Terms> q, k;

    void row(Terms qt, Terms kt) {
        q.push_back(std::move(qt));
        k.push_back(std::move(kt));
    }

    Attention make(const Attention& src, double norm_q, double norm_k) const {
        const std::size_t d = n.model.d_model, r = q.size();
        Attention a = src;
        a.wq = Mat(r, d);
        a.wk = Mat(r, d);
        for (std::size_t i = 0; i < r; ++i) {
            for (const auto& [c, w] : q[i]) a.wq(i, channel(n, c)) += w;
            for (const auto& [c, w] : k[i]) a.wk(i, channel(n, c)) += w;
        }
        QKNorm m;
        const double sr = std::sqrt(static_cast<double>(r));
        m.gamma_q.assign(r, norm_q / sr);
        m.gamma_k.assign(r, norm_k / sr);
        m.beta_q.assign(r, 0.0);
        m.beta_k.assign(r, 0.0);
        a.qk = m;
        return a;
    }
};

std::size_t only_col(const Mat& w, std::size_t r) {
    std::size_t found = w.cols;
    for (std::size_t c = 0; c < w.cols; ++c)
        if (w(r, c) != 0.0) {
            if (found != w.cols) throw std::invalid_argument("qk wrap: unexpected query/key row");
            found = c;
        }
    if (found == w.cols) throw std::invalid_argument("qk wrap: empty query/key row");
    return found;
}

Stream5 stream_of(Task t) {
    if (t == Task::DyckRecNoBos) return Stream5{"tv", "ov", "sh", "ev", "one"};
    if (t == Task::DyckGenNoBos) return Stream5{"t", "o", "sh", "e", "one"};
    return Stream5{};
}

}  // namespace

Attention qk_fixed_norm_wrap(const BuiltNetwork& n, std::size_t block) {
    if (block >= n.model.blocks.size()) throw std::out_of_range("qk wrap: block index");
    const Attention& src = n.model.blocks[block].attn;
    const std::string& role = n.model.blocks[block].name;
    const Stream5 x = stream_of(n.task);
    const auto& names = n.channels;
    FixedNorm fn{n, {}, {}};

    if (role == "pseudo-bos" || role == "violation-mean" || role == "zero-depth") {
        // Uniform attention: both sides normalize to zero.
        Attention a = src;
        const std::size_t r = src.wq.rows;
        a.qk = QKNorm{NormKind::RMS, Vec(r, 1.0), Vec(r, 0.0), Vec(r, 1.0), Vec(r, 0.0)};
        return a;
    }
    if (role == "positional" || role == "positional-prev" || role == "depth" || role == "depth-next") {
        // Query 1, key a * anchor with anchor in {0, 1}.
        Attention a = src;
        double coef = 0.0;
        for (double v : src.wk.a) coef += v;
        a.qk = QKNorm{NormKind::RMS, Vec(1, 1.0), Vec(1, 0.0), Vec(1, std::abs(coef)), Vec(1, 0.0)};
        return a;
    }
    if (role == "depth-select" || role == "gen-select") {
        const bool rec = role == "depth-select";
        const std::string cq = names[only_col(src.wq, 0)], sq = names[only_col(src.wq, 1)];
        const std::string ck = names[only_col(src.wk, 0)], sk = names[only_col(src.wk, 1)];
        const double c21 = src.wq(0, channel(n, cq));
        const double c2 = src.wq(rec ? 5 : 4, channel(n, "cphi"));
        const bool bos = uses_bos(n.task);
        fn.row({{cq, c21}}, rec ? Terms{{ck, 1.0}, {x.s, -1.0}} : Terms{{ck, 1.0}});
        fn.row({{sq, c21}}, {{sk, 1.0}});
        fn.row({{"sphi", -c2}}, {{"cphi", 1.0}});
        fn.row({{"cphi", c2}}, {{"sphi", 1.0}});
        // Key row of the open/start terms; the recognizer also folds T_open into it.
        Terms k4{{x.o, 1.0}, {x.one, -1.0}};
        if (rec) k4 = {{x.s, 3.0}, {x.o, 1.0}, {x.one, -1.0}};
        else if (bos) k4.push_back({x.s, 1.0});
        fn.row({{x.one, c21}}, k4);
        double qn2 = 2.0 * c21 * c21 + c2 * c2;
        if (rec) {
            fn.row({{x.o, c21}, {x.s, -c21}}, {{x.s, 1.0}});
            fn.row({{x.e, c21}}, {});  // o - s vanishes only at EOS
            qn2 += c21 * c21;
        }
        // Key pad from a probe covering start, open, closer and EOS positions.
        const Seq probe = bos ? Seq{2 * n.k, 0, n.k, 2 * n.k + 1} : Seq{0, n.k, 0, n.k, 2 * n.k + 1};
        const Stream xs = model_trace(n.model, probe)[2 * block];
        const Mat wk = fn.make(src, 1.0, 1.0).wk;
        std::vector<double> n2(xs.size());
        double M2 = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const Vec kv = linear(wk, xs[i]);
            n2[i] = dot(kv, kv);
            M2 = std::max(M2, n2[i]);
        }
        // Classify probe positions by their stream flags: start, open, closer, EOS.
        std::size_t slot[4] = {xs.size(), xs.size(), xs.size(), xs.size()};
        const std::size_t co = channel(n, x.o), cs = channel(n, x.s), ce = channel(n, x.e);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const std::size_t c = xs[i][cs] != 0.0 ? 0 : xs[i][ce] != 0.0 ? 3 : xs[i][co] > 0.0 ? 1 : 2;
            if (slot[c] == xs.size()) slot[c] = i;
            else if (std::abs(n2[i] - n2[slot[c]]) > 1e-9 * M2)
                throw std::logic_error("qk wrap: key norm is not a function of the position kind");
        }
        if (slot[0] == xs.size() || slot[1] == xs.size() || slot[2] == xs.size())
            throw std::logic_error("qk wrap: probe misses a position kind");
        auto pad = [&](std::size_t c) { return std::sqrt(M2 - n2[slot[c]]); };
        const double alpha = (pad(1) + pad(2)) / 2.0, beta = (pad(1) - pad(2)) / 2.0;
        const double o0 = xs[slot[0]][co], s0 = xs[slot[0]][cs];
        const double gamma = (pad(0) - alpha - beta * o0) / s0;
        const double delta = slot[3] == xs.size() ? 0.0 : pad(3) - alpha;
        fn.row({}, {{x.one, alpha}, {x.o, beta}, {x.s, gamma}, {x.e, delta}});
        return fn.make(src, std::sqrt(qn2), std::sqrt(M2));
    }
    if (role == "prefix-check") {
        // Keys become unit directions; the query is scaled by the smallest positive q so that
        // non-conflicting keys trail the BOS by at least as much as before.
        Attention a = src;
        const double c5 = src.wq(0, channel(n, x.one));
        const double qf = min_positive_q(n.k, n.params.softmax_selection);
        const double r2 = std::sqrt(2.0);
        a.qk = QKNorm{NormKind::RMS, Vec(2, qf * c5), Vec(2, 0.0), Vec(2, 1.0 / r2), Vec(2, 0.0)};
        return a;
    }
    if (role == "framing") {
        // Keys are BOS/EOS indicators, at most one of them set.
        Terms key, comp{{"one", 1.0}};
        for (std::size_t c = 0; c < src.wk.cols; ++c)
            if (src.wk(0, c) != 0.0) {
                key.push_back({names[c], 1.0});
                comp.push_back({names[c], -1.0});
            }
        const double cf = src.wq(0, channel(n, "one"));
        fn.row({{"one", cf}}, key);
        fn.row({}, comp);
        return fn.make(src, cf, 1.0);
    }
    if (role == "shift") {
        const double cs = src.wq(0, channel(n, "cphi1"));
        fn.row({{"cphi1", cs}}, {{"cphi", 1.0}});
        fn.row({{"sphi1", cs}}, {{"sphi", 1.0}});
        // The first position's previous-position angle is off the unit circle; pad it on sh.
        const Vec x0 = model_trace(n.model, Seq{0})[2 * block][0];
        const double c0 = x0[channel(n, "cphi1")], s0 = x0[channel(n, "sphi1")];
        fn.row({{"sh", cs * std::sqrt(std::max(0.0, 1.0 - c0 * c0 - s0 * s0)) / x0[channel(n, "sh")]}}, {});
        return fn.make(src, cs, 1.0);
    }
    if (role == "type-count") {
        const int bits = type_bits(n.k);
        const double c3 = src.wq(0, channel(n, "t0"));
        const double ks = src.wk(static_cast<std::size_t>(bits), channel(n, "s"));
        const double M = std::max(std::abs(ks), std::sqrt(static_cast<double>(bits)));
        for (int l = 0; l < bits; ++l) {
            const std::string t = "t" + std::to_string(l);
            fn.row({{t, c3}}, {{t, 1.0}});
        }
        fn.row({{"one", 1.0}}, {{"s", ks}});
        const double rb = c3 * std::sqrt(static_cast<double>(bits));
        fn.row({{"s", rb}, {"e", rb}}, {});
        const double alpha = std::sqrt(M * M - bits);
        fn.row({}, {{"one", alpha}, {"s", std::sqrt(M * M - ks * ks) - alpha}, {"e", M - alpha}});
        return fn.make(src, std::sqrt(rb * rb + 1.0), M);
    }
    throw std::invalid_argument("qk wrap: no fixed-norm form for block role '" + role + "'");
}

BuiltNetwork with_qk_norm(const BuiltNetwork& n) {
    BuiltNetwork out = n;
    for (std::size_t b = 0; b < n.model.blocks.size(); ++b) out.model.blocks[b].attn = qk_fixed_norm_wrap(n, b);
    out.model.validate();
    return out;
}

BuiltNetwork with_ln_ffn(const BuiltNetwork& n) {
    BuiltNetwork out = n;
    for (auto& b : out.model.blocks) b.ffn = rmsln_ffn_to_ln_ffn(b.ffn);
    out.model.validate();
    return out;
}

}  // namespace dyf
