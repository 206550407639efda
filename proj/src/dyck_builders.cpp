#include <cmath>

#include "build_util.hpp"
#include "constructions.hpp"

namespace dyf {

BuiltNetwork build_dyck_recognizer(int k, const ConstructionParams& raw) {
    const ConstructionParams p = resolve_params(k, raw);
    const int bits = type_bits(k);
    const AttnMode sel = p.softmax_selection ? AttnMode::Softmax : AttnMode::Hardmax;
    Layout L;
    base_channels(L, bits);
    for (const char* c : {"A1", "B1", "cphi", "sphi", "C2c", "D2c", "cd", "sd", "C3c", "D3c", "cd1", "sd1"}) L.add(c);
    L.add_vec("tt", bits);
    for (const char* c : {"q", "ql", "v", "m", "f"}) L.add(c);
    const Stream5 x;

    std::vector<Block> blocks;
    blocks.push_back(positional_block(L, "s", p.a, "A1", "B1", "cphi", "sphi", 0.0));
    blocks.push_back(depth_block(L, "depth", "s", p.a, "C2c", "D2c", "cd", "sd", {{"o", 1.0}}));
    blocks.push_back(depth_block(L, "depth-next", "s", p.a, "C3c", "D3c", "cd1", "sd1",
                                 {{"o", 1.0}, {"s", std::exp(-p.a)}}));

    Block b4 = recognizer_select_block(L, k, x, SelectNames{"cd1", "sd1", "cd", "sd"}, p.C1_4, p.C2_4, sel);
    double C_recov = 0.0;
    if (p.softmax_selection) {
        C_recov = recov_norm_constant(k, p.eps_recov);
        q_ffn_recov(b4, L, k, x, "tt", "q", p.eps_recov, C_recov);
    } else {
        q_ffn_plain(b4, L, k, x, "tt", "q");
    }
    blocks.push_back(b4);

    // Score of the BOS key: the prefix check cancels it exactly.
    Model partial;
    partial.d_model = L.size();
    partial.k = k;
    partial.emb = bracket_embedding(k, L);
    partial.blocks = blocks;
    const double q0 = model_forward(partial, Seq{Alphabet(k).bos()})[0][L("q")];

    blocks.push_back(prefix_check_block(L, x, p.C1_5, q0, "q", "ql", "cd", "sd", "v", sel));
    blocks.push_back(framing_block(L, p.C_F, "s", "e", "e", "e", 0.25, 0.25, "m", "f", sel));

    const double f_min = framing_f_min(1.0 / 8.0, 0.25);
    const double b = recognizer_head_bias(p.a);
    Head h;
    h.kind = Head::Kind::Recognizer;
    h.w.assign(L.size(), 0.0);
    h.w[L("v")] = -1.0;
    h.w[L("f")] = -2.0 * b / f_min;
    h.b = b;

    BuiltNetwork n = finish_network(Task::DyckRec, k, L, std::move(blocks), std::move(h), p);
    n.constants = {{"q0", q0},       {"f_min", f_min},   {"head_bias", b},   {"c_f", 2.0 * b / f_min},
                   {"C1_4", p.C1_4}, {"C2_4", p.C2_4},   {"C1_5", p.C1_5},   {"C_F", p.C_F},
                   {"a", p.a},       {"C_recov", C_recov}, {"eps_recov", p.eps_recov}};
    return n;
}

BuiltNetwork build_dyck_generator(int k, const GenParams& g, const ConstructionParams& raw) {
    g.validate(k);
    if (g.lang != Lang::Dyck) throw std::invalid_argument("dyck generator: params are not for Dyck");
    const ConstructionParams p = resolve_params(k, raw);
    const int bits = type_bits(k);
    const AttnMode sel = p.softmax_selection ? AttnMode::Softmax : AttnMode::Hardmax;
    Layout L;
    base_channels(L, bits);
    for (const char* c : {"A1", "B1", "cphi", "sphi", "C2c", "D2c", "cd", "sd"}) L.add(c);
    L.add_vec("tt", bits);
    L.add_vec("ind", 4);
    const Stream5 x;

    std::vector<Block> blocks;
    blocks.push_back(positional_block(L, "s", p.a, "A1", "B1", "cphi", "sphi", 0.0));
    blocks.push_back(depth_block(L, "depth", "s", p.a, "C2c", "D2c", "cd", "sd", {{"o", 1.0}}));
    Block b3 = generator_select_block(L, k, x, SelectNames{"cd", "sd", "cd", "sd"}, p.gen_C1, p.gen_C2, sel, true);
    b3.name = "gen-select";
    generator_indicator_ffn(b3, L, "cd", "sd", p.eps_3, "ind");
    blocks.push_back(b3);

    Head h = dyck_generator_head(k, g, L, p.C0_gen, p.eps_3, "tt", "ind");
    BuiltNetwork n = finish_network(Task::DyckGen, k, L, std::move(blocks), std::move(h), p);
    n.gen = g;
    n.constants = {{"gen_C1", p.gen_C1}, {"gen_C2", p.gen_C2}, {"eps_3", p.eps_3}, {"C0_gen", p.C0_gen}, {"a", p.a}};
    return n;
}

}  // namespace dyf
