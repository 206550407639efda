#include <algorithm>
#include <cmath>

#include "build_util.hpp"
#include "constructions.hpp"

namespace dyf {

BuiltNetwork build_shuffle_recognizer(int k, const ConstructionParams& raw) {
    const ConstructionParams p = resolve_params(k, raw);
    const int bits = type_bits(k);
    const AttnMode sel = p.softmax_selection ? AttnMode::Softmax : AttnMode::Hardmax;
    Layout L;
    base_channels(L, bits);
    for (const char* c : {"A1", "B1", "cphi", "sphi", "C2c", "D2c", "sp", "A3", "B3", "r3", "m", "f"}) L.add(c);
    const std::size_t d = L.size();

    std::vector<Block> blocks;
    blocks.push_back(positional_block(L, "s", p.a, "A1", "B1", "cphi", "sphi", 0.0));
    // Only [sin theta(total depth)]+ survives: a negative total is caught by the per-type counts.
    blocks.push_back(depth_block(L, "depth", "s", p.a, "C2c", "D2c", "sp", "sp", {{"o", 1.0}}, false, true));

    // Per-type depth: attend to same-type brackets and BOS.
    Block b3 = blank_block(d, "type-count", static_cast<std::size_t>(bits) + 1, d);
    const double C3 = p.C3_shuffle;
    for (int l = 0; l < bits; ++l) {
        const auto r = static_cast<std::size_t>(l);
        b3.attn.wq(r, L("t", l)) = C3;
        b3.attn.wk(r, L("t", l)) = 1.0;
    }
    const auto rb = static_cast<std::size_t>(bits);
    b3.attn.wq(rb, L("one")) = 1.0;
    b3.attn.wk(rb, L("s")) = C3 * bits + p.a;
    b3.attn.wv(L("A3"), L("s")) = 1.0;
    b3.attn.wv(L("B3"), L("o")) = 1.0;
    b3.ffn.w1(0, L("A3")) = 1.0;
    b3.ffn.w1(1, L("B3")) = -1.0;
    std::fill(b3.ffn.gamma.begin(), b3.ffn.gamma.end(), std::sqrt(1.0 / static_cast<double>(d)));
    b3.ffn.w2(L("r3"), 1) = 1.0;
    blocks.push_back(b3);

    Block b4 = blank_block(d, "violation-mean", 1, d);
    b4.attn.wv(L("sp"), L("r3")) = 1.0;
    blocks.push_back(b4);

    blocks.push_back(framing_block(L, p.C_F, "s", "e", "e", "e", 0.25, 0.25, "m", "f", sel));

    const double q_min = std::sin(theta(1.0, p.a)) / (p.n_max + 1.0);
    const double eps_h = q_min / 4.0;
    const double f_min = framing_f_min(1.0 / 8.0, 0.25);
    Head h;
    h.kind = Head::Kind::Recognizer;
    h.w.assign(d, 0.0);
    h.w[L("sp")] = -1.0;
    h.w[L("f")] = -2.0 * eps_h / f_min;
    h.b = eps_h;

    BuiltNetwork n = finish_network(Task::ShuffleRec, k, L, std::move(blocks), std::move(h), p);
    n.constants = {{"q_min", q_min}, {"head_bias", eps_h}, {"f_min", f_min}, {"c_f", 2.0 * eps_h / f_min},
                   {"C3", C3},       {"C_F", p.C_F},       {"a", p.a}};
    return n;
}

BuiltNetwork build_shuffle_generator(int k, const GenParams& g, const ConstructionParams& raw) {
    g.validate(k);
    if (g.lang != Lang::Shuffle) throw std::invalid_argument("shuffle generator: params are not for Shuffle");
    const ConstructionParams p = resolve_params(k, raw);
    Alphabet A(k);
    Layout L;
    L.add_vec("t", k);
    L.add("s");
    L.add("e");
    L.add_vec("mean", k);
    L.add_vec("m", k);
    const std::size_t d = L.size();
    const auto K = static_cast<std::size_t>(k);

    Block b = blank_block(d, "zero-depth", 1, std::max(d, 3 * K));
    for (int t = 0; t < k; ++t) b.attn.wv(L("mean", t), L("t", t)) = 1.0;
    // Fewer than sqrt(3) (n+1) in norm; a nonzero mean therefore kills the +1 row.
    double eps = 1.0;
    while (eps > 1.0 / (std::sqrt(3.0) * (p.n_max + 1.0))) eps /= 2.0;
    const std::size_t h = b.ffn.gamma.size();
    for (int t = 0; t < k; ++t) {
        const auto r = static_cast<std::size_t>(t);
        b.ffn.w1(r, L("mean", t)) = -1.0;
        b.ffn.w1(K + r, L("mean", t)) = -1.0;
        b.ffn.w1(2 * K + r, L("t", t)) = 1.0;
        b.ffn.beta[K + r] = 1.0;
        b.ffn.w2(L("m", t), r) = -1.0;
        b.ffn.w2(L("m", t), K + r) = 1.0;
    }
    std::fill(b.ffn.gamma.begin(), b.ffn.gamma.end(), 1.0 / (eps * std::sqrt(static_cast<double>(h))));

    Model m;
    m.d_model = d;
    m.k = k;
    m.emb = Mat(d, static_cast<std::size_t>(A.size()));
    for (int t = 1; t <= k; ++t) {
        m.emb(L("t", t - 1), static_cast<std::size_t>(A.open(t))) = 1.0;
        m.emb(L("t", t - 1), static_cast<std::size_t>(A.close(t))) = -1.0;
    }
    m.emb(L("s"), static_cast<std::size_t>(A.bos())) = 1.0;
    m.emb(L("e"), static_cast<std::size_t>(A.eos())) = 1.0;
    m.blocks.push_back(std::move(b));
    m.validate();

    const double C = shuffle_gen_constant(g, p.shuffle_tv);
    Head hd;
    hd.kind = Head::Kind::Generator;
    hd.W = Mat(static_cast<std::size_t>(A.size()), d);
    hd.bias.assign(static_cast<std::size_t>(A.size()), 0.0);
    for (int t = 1; t <= k; ++t) {
        const auto ti = static_cast<std::size_t>(t - 1);
        hd.bias[static_cast<std::size_t>(A.open(t))] = std::log(g.pi[ti]);
        const auto c = static_cast<std::size_t>(A.close(t));
        hd.bias[c] = std::log((1.0 - g.q) * g.pibar[ti] / g.q);
        hd.W(c, L("m", t - 1)) = -C;
        hd.W(static_cast<std::size_t>(A.eos()), L("m", t - 1)) = C;
    }
    hd.bias[static_cast<std::size_t>(A.bos())] = -C;
    hd.bias[static_cast<std::size_t>(A.eos())] = std::log((1.0 - g.r) / g.r) - C * k;

    BuiltNetwork n;
    n.task = Task::ShuffleGen;
    n.k = k;
    n.params = p;
    n.gen = g;
    n.channels = L.names();
    n.model = std::move(m);
    n.head = std::move(hd);
    n.roles = {"zero-depth"};
    n.constants = {{"C", C}, {"eps", eps}, {"shuffle_tv", p.shuffle_tv}};
    return n;
}

}  // namespace dyf
