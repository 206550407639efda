#include "build_util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dyf {

std::size_t Layout::add(const std::string& name) {
    if (at_.count(name)) throw std::logic_error("layout: duplicate channel " + name);
    at_[name] = names_.size();
    names_.push_back(name);
    return names_.size() - 1;
}

void Layout::add_vec(const std::string& prefix, int count) {
    for (int i = 0; i < count; ++i) add(prefix + std::to_string(i));
}

std::size_t Layout::operator()(const std::string& name) const {
    auto it = at_.find(name);
    if (it == at_.end()) throw std::logic_error("layout: no channel " + name);
    return it->second;
}

Block blank_block(std::size_t d, std::string name, std::size_t dqk, std::size_t hidden) {
    return Block{std::move(name), zero_attention(d, dqk), zero_ffn(d, hidden)};
}

double unit_gamma(double ss, std::size_t h) {
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(h));
    double g = 1.0 / inv;
    for (int step = 0; step < 64 && g * inv != 1.0; ++step)
        g = std::nextafter(g, g * inv > 1.0 ? 0.0 : 2.0 * g);
    if (g * inv != 1.0) throw std::logic_error("unit_gamma: no exact calibration");
    return g;
}

Mat bracket_embedding(int k, const Layout& L) {
    Alphabet A(k);
    const int bits = type_bits(k);
    Mat E(L.size(), static_cast<std::size_t>(A.size()));
    for (int id = 0; id < A.size(); ++id) {
        auto c = static_cast<std::size_t>(id);
        E(L("one"), c) = 1.0;
        switch (A.kind(id)) {
            case Kind::Open:
            case Kind::Close: {
                Vec code = type_code(k, A.type(id));
                for (int b = 0; b < bits; ++b) E(L("t", b), c) = code[static_cast<std::size_t>(b)];
                E(L("o"), c) = A.kind(id) == Kind::Open ? 1.0 : -1.0;
                break;
            }
            case Kind::Bos: E(L("s"), c) = 1.0; break;
            case Kind::Eos: E(L("e"), c) = 1.0; break;
        }
    }
    return E;
}

namespace {
void anchor_scores(Attention& at, const Layout& L, const std::string& anchor, double a) {
    at.wq(0, L("one")) = 1.0;
    at.wk(0, L(anchor)) = a;
}
}  // namespace

Block positional_block(const Layout& L, const std::string& anchor, double a, const std::string& A, const std::string& B,
                       const std::string& cos, const std::string& sin, double shift) {
    const std::size_t d = L.size();
    Block b = blank_block(d, "positional", 1, d);
    anchor_scores(b.attn, L, anchor, a);
    b.attn.wv(L(A), L(anchor)) = 1.0;
    b.attn.wv(L(B), L("one")) = 1.0;
    b.attn.wv(L(B), L(anchor)) = -1.0 - shift;
    b.ffn.w1(0, L(A)) = 1.0;
    b.ffn.w1(1, L(B)) = 1.0;
    std::fill(b.ffn.gamma.begin(), b.ffn.gamma.end(), std::sqrt(1.0 / static_cast<double>(d)));
    b.ffn.w2(L(cos), 0) = 1.0;
    b.ffn.w2(L(sin), 1) = 1.0;
    return b;
}

Block depth_block(const Layout& L, const std::string& name, const std::string& anchor, double a, const std::string& C,
                  const std::string& D, const std::string& cos, const std::string& sin,
                  const std::vector<std::pair<std::string, double>>& d_value, bool write_cos, bool sin_positive_only) {
    const std::size_t d = L.size();
    Block b = blank_block(d, name, 1, d);
    anchor_scores(b.attn, L, anchor, a);
    b.attn.wv(L(C), L(anchor)) = 1.0;
    for (const auto& [ch, w] : d_value) b.attn.wv(L(D), L(ch)) += w;
    b.ffn.w1(0, L(C)) = 1.0;
    b.ffn.w1(1, L(C)) = -1.0;
    b.ffn.w1(2, L(D)) = 1.0;
    b.ffn.w1(3, L(D)) = -1.0;
    std::fill(b.ffn.gamma.begin(), b.ffn.gamma.end(), std::sqrt(2.0 / static_cast<double>(d)));
    if (write_cos) b.ffn.w2(L(cos), 0) = 1.0;
    b.ffn.w2(L(sin), 2) = 1.0;
    if (!sin_positive_only) b.ffn.w2(L(sin), 3) = -1.0;
    return b;
}

Block recognizer_select_block(const Layout& L, int k, const Stream5& x, const SelectNames& n, double C1, double C2,
                              AttnMode mode) {
    const std::size_t d = L.size();
    const int bits = type_bits(k);
    Block b = blank_block(d, "depth-select", 7, d);
    auto& q = b.attn.wq;
    auto& kk = b.attn.wk;
    const double c = C2 * C1;
    // T_depth: cos, sin, (1 - cos) s_k, (o_k + s_k - 1)
    q(0, L(n.cq)) = c;
    kk(0, L(n.ck)) = 1.0;
    q(1, L(n.sq)) = c;
    kk(1, L(n.sk)) = 1.0;
    q(2, L(x.one)) = c;
    q(2, L(n.cq)) = -c;
    kk(2, L(x.s)) = 1.0;
    q(3, L(x.one)) = c;
    kk(3, L(x.o)) = 1.0;
    kk(3, L(x.s)) = 1.0;
    kk(3, L(x.one)) = -1.0;
    // T_pos = -sin(phi_q - phi_k)
    q(4, L(n.sphi)) = -C2;
    kk(4, L(n.cphi)) = 1.0;
    q(5, L(n.cphi)) = C2;
    kk(5, L(n.sphi)) = 1.0;
    // T_open = (o_q - s_q + 1) s_k
    q(6, L(x.o)) = c;
    q(6, L(x.s)) = -c;
    q(6, L(x.one)) = c;
    kk(6, L(x.s)) = 1.0;
    for (int l = 0; l < bits; ++l) b.attn.wv(L(n.tt, l), L(x.t, l)) = 1.0;
    b.attn.selection = true;
    b.attn.mode = mode;
    return b;
}

Block generator_select_block(const Layout& L, int k, const Stream5& x, const SelectNames& n, double C1, double C2,
                             AttnMode mode, bool with_bos) {
    const std::size_t d = L.size();
    const int bits = type_bits(k);
    Block b = blank_block(d, "depth-select", 5, d);
    auto& q = b.attn.wq;
    auto& kk = b.attn.wk;
    const double c = C2 * C1;
    q(0, L(n.cq)) = c;
    kk(0, L(n.ck)) = 1.0;
    q(1, L(n.sq)) = c;
    kk(1, L(n.sk)) = 1.0;
    q(2, L(x.one)) = c;
    kk(2, L(x.o)) = 1.0;
    if (with_bos) kk(2, L(x.s)) = 1.0;
    kk(2, L(x.one)) = -1.0;
    q(3, L(n.sphi)) = -C2;
    kk(3, L(n.cphi)) = 1.0;
    q(4, L(n.cphi)) = C2;
    kk(4, L(n.sphi)) = 1.0;
    for (int l = 0; l < bits; ++l) b.attn.wv(L(n.tt, l), L(x.t, l)) = 1.0;
    b.attn.selection = true;
    b.attn.mode = mode;
    return b;
}

void q_ffn_plain(Block& b, const Layout& L, int k, const Stream5& x, const std::string& tt, const std::string& q) {
    const std::size_t d = L.size();
    const int bits = type_bits(k);
    auto& f = b.ffn;
    const auto B = static_cast<std::size_t>(bits);
    for (int l = 0; l < bits; ++l) {
        const auto r = static_cast<std::size_t>(l);
        f.w1(r, L(x.t, l)) = 1.0;
        f.w1(r, L(tt, l)) = -1.0;
        f.w1(B + r, L(x.t, l)) = -1.0;
        f.w1(B + r, L(tt, l)) = 1.0;
        f.w2(L(q), r) = -1.0;
        f.w2(L(q), B + r) = -1.0;
    }
    f.w1(2 * B, L(x.o)) = 1.0;
    f.w1(2 * B, L(x.one)) = 1.0;
    f.w1(2 * B + 1, L(x.one)) = 1.0;
    f.w2(L(q), 2 * B) = 2.0 * (bits + 1);
    f.w2(L(q), 2 * B + 1) = 1.0;
    std::fill(f.gamma.begin(), f.gamma.end(), 8.0 * std::sqrt(bits / static_cast<double>(d)));
}

double recov_norm_constant(int k, double eps) {
    const double bits = type_bits(k);
    // rho = sqrt(2C^2 / (2C^2 + extra)) must keep every scaled input inside its plateau.
    const double need = std::max({0.9 + 2.0 * eps, 0.95 + 0.75 * eps, 0.45 + eps}) + 0.01;
    const double extra = 32.0 * bits + 16.0;
    double C = 1.0;
    while (1.0 / std::sqrt(1.0 + extra / (2.0 * C * C)) < need) C *= 2.0;
    return C;
}

void q_ffn_recov(Block& b, const Layout& L, int k, const Stream5& x, const std::string& tt, const std::string& q,
                 double eps, double C) {
    const int bits = type_bits(k);
    const std::size_t rows = 8 * static_cast<std::size_t>(bits) + 6;
    const std::size_t h = std::max(L.size(), rows);
    b.ffn = zero_ffn(L.size(), h);
    auto& f = b.ffn;
    const double th[4] = {-9.0 / (20.0 * eps), -(1.0 + 9.0 / (20.0 * eps)), -19.0 / (15.0 * eps),
                          -(1.0 + 19.0 / (15.0 * eps))};
    const double sgn[4] = {1.0, -1.0, 1.0, -1.0};
    const double g = (1.0 / eps) * std::sqrt(2.0 * C * C / static_cast<double>(h));
    std::size_t r = 0;
    // Four staircase rows per scalar: both signs of t - tt, then o + 1.
    auto staircase = [&](const std::vector<std::pair<std::size_t, double>>& input, double out_w) {
        for (int c = 0; c < 4; ++c, ++r) {
            for (const auto& [ch, w] : input) f.w1(r, ch) += w;
            f.gamma[r] = g;
            f.beta[r] = th[c];
            f.w2(L(q), r) = out_w * sgn[c];
        }
    };
    for (int l = 0; l < bits; ++l) {
        staircase({{L(x.t, l), 1.0}, {L(tt, l), -1.0}}, -2.0);
        staircase({{L(x.t, l), -1.0}, {L(tt, l), 1.0}}, -2.0);
    }
    staircase({{L(x.o), 1.0}, {L(x.one), 1.0}}, 4.0 * (bits + 1));
    // Constant C carries the norm; its own ramp adds 2.
    for (int c = 0; c < 2; ++c, ++r) {
        f.w1(r, L(x.one)) = C;
        f.gamma[r] = g / C;
        f.beta[r] = th[c];
        f.w2(L(q), r) = 2.0 * sgn[c];
    }
}

Block prefix_check_block(const Layout& L, const Stream5& x, double C5, double q0, const std::string& q,
                         const std::string& ql, const std::string& cd, const std::string& sd, const std::string& v,
                         AttnMode mode) {
    const std::size_t d = L.size();
    Block b = blank_block(d, "prefix-check", 2, d);
    b.attn.wq(0, L(x.one)) = C5;
    b.attn.wq(1, L(x.one)) = C5;
    b.attn.wk(0, L(q)) = -1.0;
    b.attn.wk(1, L(x.s)) = q0;
    b.attn.wv(L(ql), L(x.one)) = 1.0;
    b.attn.wv(L(ql), L(x.s)) = -1.0;
    b.attn.selection = true;
    b.attn.mode = mode;
    b.ffn.w1(0, L(ql)) = 1.0;
    b.ffn.w1(1, L(cd)) = 1.0;
    b.ffn.w1(2, L(sd)) = 1.0;
    std::fill(b.ffn.gamma.begin(), b.ffn.gamma.end(), std::sqrt(1.0 / static_cast<double>(d)));
    b.ffn.w2(L(v), 0) = 1.0;
    b.ffn.w2(L(v), 2) = 1.0;
    return b;
}

Block framing_block(const Layout& L, double C_F, const std::string& key_a, const std::string& key_b,
                    const std::string& value, const std::string& e_real, double e_coef, double const_coef,
                    const std::string& m, const std::string& f, AttnMode mode) {
    const std::size_t d = L.size();
    Block b = blank_block(d, "framing", 1, d);
    b.attn.wq(0, L("one")) = C_F;
    b.attn.wk(0, L(key_a)) = 1.0;
    b.attn.wk(0, L(key_b)) = 1.0;
    b.attn.wv(L(m), L(value)) = 1.0;
    b.attn.selection = true;
    b.attn.mode = mode;
    auto& w1 = b.ffn.w1;
    w1(0, L(m)) = 1.0;
    w1(0, L(e_real)) = -e_coef;
    w1(0, L("one")) = -const_coef;
    w1(1, L("one")) = 1.0;
    w1(1, L(e_real)) = -1.0;
    w1(2, L("one")) = 1.0;
    std::fill(b.ffn.gamma.begin(), b.ffn.gamma.end(), std::sqrt(1.0 / static_cast<double>(d)));
    b.ffn.w2(L(f), 0) = 1.0;
    b.ffn.w2(L(f), 1) = 1.0;
    return b;
}

double framing_f_min(double u1_eos_min, double const_coef) {
    // Last token not EOS: u2 = 1 and m anywhere in [0, 1].
    double fa = 1e300;
    for (int i = 0; i <= 1000; ++i) {
        double u1 = i / 1000.0 - const_coef;
        fa = std::min(fa, (1.0 + std::max(u1, 0.0)) / std::sqrt(u1 * u1 + 2.0));
    }
    const double fb = u1_eos_min / std::sqrt(u1_eos_min * u1_eos_min + 1.0);
    return 0.99 * std::min(fa, fb);
}

void generator_indicator_ffn(Block& b, const Layout& L, const std::string& cd, const std::string& sd, double eps3,
                             const std::string& ind) {
    const std::size_t d = L.size();
    auto& f = b.ffn;
    f.w1(0, L(sd)) = 1.0;
    f.w1(1, L(sd)) = 1.0;
    f.w1(2, L(sd)) = -1.0;
    f.w1(3, L(sd)) = -1.0;
    f.w1(4, L(cd)) = 2.0;
    f.beta[1] = -eps3;
    f.beta[3] = eps3;
    std::fill(f.gamma.begin(), f.gamma.end(), std::sqrt(4.0 / static_cast<double>(d)));
    for (int r = 0; r < 4; ++r) f.w2(L(ind, r), static_cast<std::size_t>(r)) = 1.0;
}

Head dyck_generator_head(int k, const GenParams& g, const Layout& L, double C0, double eps3, const std::string& tt,
                         const std::string& ind) {
    Alphabet A(k);
    const int bits = type_bits(k);
    Head h;
    h.kind = Head::Kind::Generator;
    h.W = Mat(static_cast<std::size_t>(A.size()), L.size());
    h.bias.assign(static_cast<std::size_t>(A.size()), 0.0);
    const double C1 = std::log((1.0 - g.q) / g.q) + C0;
    const double C2 = std::log((1.0 - g.r) / g.r) + C0;
    for (int t = 1; t <= k; ++t) {
        const auto o = static_cast<std::size_t>(A.open(t));
        const auto c = static_cast<std::size_t>(A.close(t));
        h.bias[o] = C0 + std::log(g.pi[static_cast<std::size_t>(t - 1)]);
        Vec code = type_code(k, t);
        for (int l = 0; l < bits; ++l) h.W(c, L(tt, l)) = C0 * code[static_cast<std::size_t>(l)];
        h.bias[c] = -C0 * bits;
        h.W(c, L(ind, 0)) = C1 / eps3;
        h.W(c, L(ind, 1)) = -C1 / eps3;
    }
    const auto e = static_cast<std::size_t>(A.eos());
    h.W(e, L(ind, 3)) = C2 / eps3;
    h.W(e, L(ind, 2)) = -C2 / eps3;
    return h;
}

void base_channels(Layout& L, int bits) {
    L.add_vec("t", bits);
    for (const char* c : {"o", "s", "one", "e"}) L.add(c);
}

BuiltNetwork finish_network(Task task, int k, const Layout& L, std::vector<Block> blocks, Head head,
                    const ConstructionParams& p) {
    BuiltNetwork n;
    n.task = task;
    n.k = k;
    n.params = p;
    n.channels = L.names();
    n.model.d_model = L.size();
    n.model.k = k;
    n.model.emb = bracket_embedding(k, L);
    for (const auto& b : blocks) n.roles.push_back(b.name);
    n.model.blocks = std::move(blocks);
    n.head = std::move(head);
    n.model.validate();
    return n;
}

double recognizer_head_bias(double a) { return std::sin(theta(1.0, a)) / (2.0 * std::sqrt(2.0)); }

}  // namespace dyf
