#pragma once
#include <optional>
#include <string>
#include <vector>

#include "lang_core.hpp"
#include "tensor_ops.hpp"

namespace dyf {

enum class AttnMode { Softmax, Hardmax };
enum class NormKind { RMS, LN };

struct QKNorm {
    NormKind kind = NormKind::RMS;
    Vec gamma_q, beta_q, gamma_k, beta_k;
};

struct Attention {
    Mat wq, wk;  // d_qk x d_model
    Mat wv;      // d_model x d_model
    AttnMode mode = AttnMode::Softmax;
    bool selection = false;  // selection layers may be switched between hardmax and softmax
    std::optional<QKNorm> qk;
};

struct Ffn {
    Mat w1;  // hidden x d_model
    Mat w2;  // d_model x hidden
    Vec gamma, beta;  // hidden
    NormKind norm = NormKind::RMS;
};

struct Block {
    std::string name;
    Attention attn;
    Ffn ffn;
};

struct Model {
    std::size_t d_model = 0;
    int k = 1;
    Mat emb;                 // d_model x K
    std::optional<Mat> pos;  // d_model x max positions; absent for constructed models
    std::vector<Block> blocks;

    void validate() const;  // throws DimError
};

struct Head {
    enum class Kind { Recognizer, Generator } kind = Kind::Recognizer;
    Vec w;      // recognizer weights
    double b = 0.0;
    Mat W;      // generator: K x d_model
    Vec bias;   // generator: K
};

using Stream = std::vector<Vec>;  // one d_model column per position

Attention zero_attention(std::size_t d_model, std::size_t d_qk = 0);
Ffn zero_ffn(std::size_t d_model, std::size_t hidden = 0);
Block zero_block(std::size_t d_model, std::string name = {});

Stream embed(const Model& m, const Seq& s);
// Attention probabilities of query position i over keys 0..i.
Vec attention_weights(const Attention& a, const Stream& x, std::size_t i);
Vec attention_scores(const Attention& a, const Stream& x, std::size_t i);
Stream attention_forward(const Attention& a, const Stream& x);
Vec ffn_apply(const Ffn& f, const Vec& h);
Stream ffn_forward(const Ffn& f, const Stream& h);
Stream model_forward(const Model& m, const Seq& s);
// States after the embedding and after each attention and FFN sublayer (size 1 + 2*blocks).
std::vector<Stream> model_trace(const Model& m, const Seq& s);

struct Verdict {
    int sign = -1;
    double margin = 0.0;
};

// Throw std::invalid_argument on head-kind mismatch.
Verdict recognize(const Model& m, const Head& h, const Seq& s);
Verdict recognize_final(const Head& h, const Vec& x_last);
Vec next_token_distribution(const Model& m, const Head& h, const Seq& s);
// Causal: entry i is the distribution after s[0..i], from a single forward pass.
std::vector<Vec> next_token_distributions(const Model& m, const Head& h, const Seq& s);
Vec generator_distribution(const Head& h, const Vec& x);  // softmax(W x + b)
Vec generator_logits(const Head& h, const Vec& x);

// Causal forward pass one token at a time, with per-layer key/value caches.
// States are bitwise equal to model_forward on the same prefix; pop() undoes the last push().
class Decoder {
public:
    explicit Decoder(const Model& m);
    const Vec& push(int token);  // final state of the new position
    void pop();
    std::size_t size() const { return states_.size(); }
    const Vec& state(std::size_t i) const { return states_.at(i); }

private:
    struct Layer {
        std::vector<std::size_t> vrows, dims;
        std::vector<Vec> k, v;
    };
    const Model& m_;
    std::vector<Layer> layers_;
    Stream states_;
};

// Force every selection layer to the given mode.
Model with_selection_mode(Model m, AttnMode mode);

}  // namespace dyf
