#include <algorithm>
#include <cmath>

#include "build_util.hpp"
#include "constructions.hpp"

namespace dyf {

namespace {

// Subspace t, o, sqrt(L+1) e: every bracket and EOS row has norm sqrt(L+1).
Block pseudo_bos(const Layout& L, int bits, int n_max) {
    PseudoBosSpec s;
    for (int l = 0; l < bits; ++l) s.subspace.push_back({L("t", l), 1.0});
    s.subspace.push_back({L("o"), 1.0});
    s.subspace.push_back({L("e"), std::sqrt(bits + 1.0)});
    for (int c = 0; c < bits + 2; ++c) s.mean.push_back(L("pm", c));
    s.one = L("one");
    s.out = L("sh");
    s.R = std::sqrt(bits + 1.0);
    s.n_max = n_max;
    return build_pseudo_bos_block(L.size(), s);
}

void pseudo_bos_channels(Layout& L, int bits) {
    L.add_vec("pm", bits + 2);
    L.add("sh");
    for (const char* c : {"A1", "B1", "cphi", "sphi"}) L.add(c);
}

}  // namespace

BuiltNetwork build_dyck_recognizer_nobos(int k, const ConstructionParams& raw) {
    const ConstructionParams p = resolve_params(k, raw);
    const int bits = type_bits(k);
    const AttnMode sel = p.softmax_selection ? AttnMode::Softmax : AttnMode::Hardmax;
    Layout L;
    base_channels(L, bits);
    pseudo_bos_channels(L, bits);
    for (const char* c : {"A1p", "B1p", "cphi1", "sphi1"}) L.add(c);
    L.add_vec("tp", bits);
    L.add("op");
    L.add("ep");
    L.add_vec("tv", bits);
    L.add("ov");
    L.add("ev");
    for (const char* c : {"C2c", "D2c", "cd", "sd", "C3c", "D3c", "cd1", "sd1"}) L.add(c);
    L.add_vec("tt", bits);
    for (const char* c : {"q", "ql", "v", "m", "f"}) L.add(c);
    const std::size_t d = L.size();
    const Stream5 x{"tv", "ov", "sh", "ev", "one"};

    std::vector<Block> blocks;
    blocks.push_back(pseudo_bos(L, bits, p.n_max));
    blocks.push_back(positional_block(L, "sh", p.a, "A1", "B1", "cphi", "sphi", 0.0));
    Block prev = positional_block(L, "sh", p.a, "A1p", "B1p", "cphi1", "sphi1", std::exp(-p.a));
    prev.name = "positional-prev";
    blocks.push_back(prev);

    // Shift: position p reads token p - 1; position 0 becomes the virtual BOS.
    const std::size_t rows = 2 * static_cast<std::size_t>(bits + 2) + 1;
    Block sh = blank_block(d, "shift", 2, std::max(d, rows));
    sh.attn.wq(0, L("cphi1")) = p.C_shift;
    sh.attn.wq(1, L("sphi1")) = p.C_shift;
    sh.attn.wk(0, L("cphi")) = 1.0;
    sh.attn.wk(1, L("sphi")) = 1.0;
    struct Copy {
        std::string src, fetched, out;
    };
    std::vector<Copy> copy;
    for (int l = 0; l < bits; ++l) {
        const std::string i = std::to_string(l);
        copy.push_back({"t" + i, "tp" + i, "tv" + i});
    }
    copy.push_back({"o", "op", "ov"});
    copy.push_back({"e", "ep", "ev"});
    for (const auto& c : copy) sh.attn.wv(L(c.fetched), L(c.src)) = 1.0;
    sh.attn.selection = true;
    sh.attn.mode = sel;
    // Gated copy: both signs minus 2 sh, so position 0 writes nothing. The extra row fixes the norm at 2(L+1).
    const double g = unit_gamma(2.0 * (bits + 1), sh.ffn.gamma.size());
    std::size_t r = 0;
    for (const auto& c : copy) {
        for (double sgn : {1.0, -1.0}) {
            sh.ffn.w1(r, L(c.fetched)) = sgn;
            sh.ffn.w1(r, L("sh")) = -2.0;
            sh.ffn.w2(L(c.out), r) = sgn;
            ++r;
        }
    }
    sh.ffn.w1(r, L("ep")) = std::sqrt(2.0 * bits);
    std::fill(sh.ffn.gamma.begin(), sh.ffn.gamma.end(), g);
    blocks.push_back(sh);

    blocks.push_back(depth_block(L, "depth", "sh", p.a, "C2c", "D2c", "cd", "sd", {{"ov", 1.0}}));
    blocks.push_back(depth_block(L, "depth-next", "sh", p.a, "C3c", "D3c", "cd1", "sd1",
                                 {{"ov", 1.0}, {"sh", std::exp(-p.a)}}));
    Block sel_b = recognizer_select_block(L, k, x, SelectNames{"cd1", "sd1", "cd", "sd"}, p.C1_4, p.C2_4, sel);
    double C_recov = 0.0;
    if (p.softmax_selection) {
        C_recov = recov_norm_constant(k, p.eps_recov);
        q_ffn_recov(sel_b, L, k, x, "tt", "q", p.eps_recov, C_recov);
    } else {
        q_ffn_plain(sel_b, L, k, x, "tt", "q");
    }
    blocks.push_back(sel_b);

    // The virtual BOS is position 0 of any input; a lone open bracket exposes its q.
    Model partial;
    partial.d_model = d;
    partial.k = k;
    partial.emb = bracket_embedding(k, L);
    partial.blocks = blocks;
    const double q0 = model_forward(partial, Seq{Alphabet(k).open(1)})[0][L("q")];

    blocks.push_back(prefix_check_block(L, x, p.C1_5, q0, "q", "ql", "cd", "sd", "v", sel));
    // A shifted EOS anywhere is malformed, so u1 = m; the real EOS must close the input.
    blocks.push_back(framing_block(L, p.C_F, "sh", "ev", "ev", "e", 0.0, 0.0, "m", "f", sel));

    const double f_min = framing_f_min(3.0 / 8.0, 0.0);
    const double b = recognizer_head_bias(p.a);
    Head h;
    h.kind = Head::Kind::Recognizer;
    h.w.assign(d, 0.0);
    h.w[L("v")] = -1.0;
    h.w[L("f")] = -2.0 * b / f_min;
    h.b = b;

    BuiltNetwork n = finish_network(Task::DyckRecNoBos, k, L, std::move(blocks), std::move(h), p);
    n.constants = {{"q0", q0},           {"f_min", f_min},   {"head_bias", b},     {"c_f", 2.0 * b / f_min},
                   {"C1_4", p.C1_4},     {"C2_4", p.C2_4},   {"C1_5", p.C1_5},     {"C_F", p.C_F},
                   {"C_shift", p.C_shift}, {"a", p.a},       {"C_recov", C_recov}, {"eps_recov", p.eps_recov},
                   {"pseudo_bos_eps", pseudo_bos_eps(std::sqrt(bits + 1.0), p.n_max)}};
    return n;
}

BuiltNetwork build_dyck_generator_nobos(int k, const GenParams& g, const ConstructionParams& raw) {
    g.validate(k);
    if (g.lang != Lang::Dyck) throw std::invalid_argument("dyck generator: params are not for Dyck");
    const ConstructionParams p = resolve_params(k, raw);
    const int bits = type_bits(k);
    const AttnMode sel = p.softmax_selection ? AttnMode::Softmax : AttnMode::Hardmax;
    Layout L;
    base_channels(L, bits);
    pseudo_bos_channels(L, bits);
    for (const char* c : {"C2c", "D2c", "cd", "sd"}) L.add(c);
    L.add_vec("tt", bits);
    L.add_vec("ind", 4);
    const Stream5 x{"t", "o", "sh", "e", "one"};

    std::vector<Block> blocks;
    blocks.push_back(pseudo_bos(L, bits, p.n_max));
    blocks.push_back(positional_block(L, "sh", p.a, "A1", "B1", "cphi", "sphi", 0.0));
    // The first token is a real open bracket: its own contribution to the depth is 1, not 0.
    blocks.push_back(depth_block(L, "depth", "sh", p.a, "C2c", "D2c", "cd", "sd",
                                 {{"o", 1.0}, {"sh", -(1.0 - std::exp(-p.a))}}));
    Block b4 = generator_select_block(L, k, x, SelectNames{"cd", "sd", "cd", "sd"}, p.gen_C1, p.gen_C2, sel, false);
    b4.name = "gen-select";
    generator_indicator_ffn(b4, L, "cd", "sd", p.eps_3, "ind");
    blocks.push_back(b4);

    Head h = dyck_generator_head(k, g, L, p.C0_gen, p.eps_3, "tt", "ind");
    BuiltNetwork n = finish_network(Task::DyckGenNoBos, k, L, std::move(blocks), std::move(h), p);
    n.gen = g;
    n.constants = {{"gen_C1", p.gen_C1}, {"gen_C2", p.gen_C2}, {"eps_3", p.eps_3}, {"C0_gen", p.C0_gen},
                   {"a", p.a},           {"pseudo_bos_eps", pseudo_bos_eps(std::sqrt(bits + 1.0), p.n_max)}};
    return n;
}

}  // namespace dyf
