#pragma once
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "constructions.hpp"

namespace dyf {

// Named residual channels, allocated before any matrix.
class Layout {
public:
    std::size_t add(const std::string& name);
    void add_vec(const std::string& prefix, int count);  // prefix0, prefix1, ...
    std::size_t operator()(const std::string& name) const;
    std::size_t operator()(const std::string& prefix, int i) const { return (*this)(prefix + std::to_string(i)); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> at_;
};

Block blank_block(std::size_t d, std::string name, std::size_t dqk, std::size_t hidden);

// gamma with fl(gamma * inv) == 1, inv computed exactly as the RMS norm does for sum of squares ss over h rows.
double unit_gamma(double ss, std::size_t h);

// Channel names of the bracket stream a Dyck block reads; the no-BOS networks read a shifted copy.
struct Stream5 {
    std::string t = "t", o = "o", s = "s", e = "e", one = "one";
};

// Bracket embedding: t (L), o, s, one, e at their layout positions.
Mat bracket_embedding(int k, const Layout& L);

// Counting layers anchored on a channel with score a * anchor.
Block positional_block(const Layout& L, const std::string& anchor, double a, const std::string& A, const std::string& B,
                       const std::string& cos, const std::string& sin, double shift);
Block depth_block(const Layout& L, const std::string& name, const std::string& anchor, double a, const std::string& C,
                  const std::string& D, const std::string& cos, const std::string& sin,
                  const std::vector<std::pair<std::string, double>>& d_value, bool write_cos = true,
                  bool sin_positive_only = false);

struct SelectNames {
    std::string cq, sq;      // query depth angle
    std::string ck, sk;      // key depth angle
    std::string cphi = "cphi", sphi = "sphi";
    std::string tt = "tt";
};

// Depth-matched selection: C2 (C1 T_depth + T_pos + C1 T_open); generator form drops T_open and the s-term.
Block recognizer_select_block(const Layout& L, int k, const Stream5& x, const SelectNames& n, double C1, double C2,
                              AttnMode mode);
Block generator_select_block(const Layout& L, int k, const Stream5& x, const SelectNames& n, double C1, double C2,
                             AttnMode mode, bool with_bos);

// q_i from t, the fetched type and o.
void q_ffn_plain(Block& b, const Layout& L, int k, const Stream5& x, const std::string& tt, const std::string& q);
// Same sign contract through the recovering staircase; output in {.., -2} U {2} U {6, ..}.
void q_ffn_recov(Block& b, const Layout& L, int k, const Stream5& x, const std::string& tt, const std::string& q,
                 double eps, double C);
double recov_norm_constant(int k, double eps);

Block prefix_check_block(const Layout& L, const Stream5& x, double C5, double q0, const std::string& q,
                         const std::string& ql, const std::string& cd, const std::string& sd, const std::string& v,
                         AttnMode mode);

// Framing check: attention over the special tokens, f > 0 exactly on malformed framing.
// u1 = m - e_coef * e - const_coef.
Block framing_block(const Layout& L, double C_F, const std::string& key_a, const std::string& key_b,
                    const std::string& value, const std::string& e_real, double e_coef, double const_coef,
                    const std::string& m, const std::string& f, AttnMode mode);
// Smallest f over malformed inputs given the worst u1 reached when the last token is EOS.
double framing_f_min(double u1_eos_min, double const_coef);

// Generator indicator ReLUs [sin]+, [sin - eps]+, [-sin]+, [-(sin - eps)]+ into ind0..ind3.
void generator_indicator_ffn(Block& b, const Layout& L, const std::string& cd, const std::string& sd, double eps3,
                             const std::string& ind);
Head dyck_generator_head(int k, const GenParams& g, const Layout& L, double C0, double eps3, const std::string& tt,
                         const std::string& ind);

void base_channels(Layout& L, int bits);  // t (bits), o, s, one, e
BuiltNetwork finish_network(Task task, int k, const Layout& L, std::vector<Block> blocks, Head head,
                            const ConstructionParams& p);
double recognizer_head_bias(double a);  // sin theta(1) / (2 sqrt 2)

}  // namespace dyf
