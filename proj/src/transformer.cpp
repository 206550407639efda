#include "transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dyf {

namespace {

void need(bool ok, const std::string& what) {
    if (!ok) throw DimError(what);
}

std::vector<std::size_t> nonzero_rows(const Mat& m) {
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < m.rows; ++i)
        if (!m.row_is_zero(i)) r.push_back(i);
    return r;
}

Vec norm_apply(NormKind k, const Vec& y, const Vec& g, const Vec& b) {
    return k == NormKind::RMS ? rms_layernorm(y, g, b) : layernorm(y, g, b);
}

// Query and key vectors for every position, restricted to dims that can contribute.
struct QK {
    std::vector<Vec> q, k;
};

// Dims where either side is identically zero add exactly 0 to every score.
std::vector<std::size_t> qk_dims(const Attention& a) {
    std::vector<std::size_t> dims;
    for (std::size_t r = 0; r < a.wq.rows; ++r)
        if (!a.wq.row_is_zero(r) && !a.wk.row_is_zero(r)) dims.push_back(r);
    return dims;
}

void project_one(const Attention& a, const std::vector<std::size_t>& dims, const Vec& xi, Vec& q, Vec& k) {
    if (a.qk) {
        q = norm_apply(a.qk->kind, linear(a.wq, xi), a.qk->gamma_q, a.qk->beta_q);
        k = norm_apply(a.qk->kind, linear(a.wk, xi), a.qk->gamma_k, a.qk->beta_k);
        return;
    }
    q.assign(dims.size(), 0.0);
    k.assign(dims.size(), 0.0);
    for (std::size_t t = 0; t < dims.size(); ++t) {
        const double* rq = a.wq.row(dims[t]);
        const double* rk = a.wk.row(dims[t]);
        double sq = 0.0, sk = 0.0;
        for (std::size_t j = 0; j < xi.size(); ++j) {
            sq += rq[j] * xi[j];
            sk += rk[j] * xi[j];
        }
        q[t] = sq;
        k[t] = sk;
    }
}

QK project(const Attention& a, const Stream& x) {
    QK out;
    out.q.resize(x.size());
    out.k.resize(x.size());
    const auto dims = a.qk ? std::vector<std::size_t>{} : qk_dims(a);
    for (std::size_t i = 0; i < x.size(); ++i) project_one(a, dims, x[i], out.q[i], out.k[i]);
    return out;
}

Vec value_of(const Mat& wv, const std::vector<std::size_t>& vrows, const Vec& x) {
    Vec v(vrows.size());
    for (std::size_t t = 0; t < vrows.size(); ++t) {
        const double* r = wv.row(vrows[t]);
        double acc = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) acc += r[c] * x[c];
        v[t] = acc;
    }
    return v;
}

double score(const Vec& q, const Vec& k) {
    double s = 0.0;
    for (std::size_t t = 0; t < q.size(); ++t) s += q[t] * k[t];
    return s;
}

void fill_weights(AttnMode mode, Vec& s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : s) {
        if (std::isnan(v)) throw std::invalid_argument("attention: NaN score");
        mx = std::max(mx, v);
    }
    if (mode == AttnMode::Hardmax) {
        double cnt = 0.0;
        for (double v : s) cnt += v == mx ? 1.0 : 0.0;
        for (double& v : s) v = v == mx ? 1.0 / cnt : 0.0;
        return;
    }
    double z = 0.0;
    for (double& v : s) z += (v = std::exp(v - mx));
    for (double& v : s) v /= z;
}

}  // namespace

void Model::validate() const {
    need(emb.rows == d_model, "model: embedding rows != d_model");
    need(emb.cols == static_cast<std::size_t>(2 * k + 2), "model: embedding columns != vocabulary size");
    if (pos) need(pos->rows == d_model, "model: positional table rows != d_model");
    for (const auto& b : blocks) {
        const auto& a = b.attn;
        need(a.wq.cols == d_model && a.wk.cols == d_model, "attention: W_Q/W_K columns != d_model");
        need(a.wq.rows == a.wk.rows, "attention: W_Q/W_K row mismatch");
        need(a.wv.rows == d_model && a.wv.cols == d_model, "attention: W_V must be d_model x d_model");
        if (a.qk) {
            std::size_t r = a.wq.rows;
            need(a.qk->gamma_q.size() == r && a.qk->beta_q.size() == r && a.qk->gamma_k.size() == r &&
                     a.qk->beta_k.size() == r,
                 "attention: qk-norm parameter size");
        }
        const auto& f = b.ffn;
        need(f.w1.cols == d_model && f.w2.rows == d_model && f.w2.cols == f.w1.rows, "ffn: W1/W2 shape");
        need(f.gamma.size() == f.w1.rows && f.beta.size() == f.w1.rows, "ffn: gamma/beta size");
    }
}

Attention zero_attention(std::size_t d, std::size_t dqk) {
    Attention a;
    if (dqk == 0) dqk = d;
    a.wq = Mat(dqk, d);
    a.wk = Mat(dqk, d);
    a.wv = Mat(d, d);
    return a;
}

Ffn zero_ffn(std::size_t d, std::size_t hidden) {
    Ffn f;
    if (hidden == 0) hidden = d;
    f.w1 = Mat(hidden, d);
    f.w2 = Mat(d, hidden);
    f.gamma.assign(hidden, 0.0);
    f.beta.assign(hidden, 0.0);
    return f;
}

Block zero_block(std::size_t d, std::string name) {
    return Block{std::move(name), zero_attention(d), zero_ffn(d)};
}

namespace {

Vec embed_one(const Model& m, int token, std::size_t i) {
    if (token < 0 || token >= static_cast<int>(m.emb.cols)) throw std::invalid_argument("embed: token id outside vocabulary");
    Vec c(m.d_model);
    for (std::size_t r = 0; r < m.d_model; ++r) c[r] = m.emb(r, static_cast<std::size_t>(token));
    if (m.pos) {
        if (i >= m.pos->cols) throw std::invalid_argument("embed: sequence longer than positional table");
        for (std::size_t r = 0; r < m.d_model; ++r) c[r] += (*m.pos)(r, i);
    }
    return c;
}

}  // namespace

Stream embed(const Model& m, const Seq& s) {
    Stream x;
    x.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) x.push_back(embed_one(m, s[i], i));
    return x;
}

Vec attention_scores(const Attention& a, const Stream& x, std::size_t i) {
    if (i >= x.size()) throw std::out_of_range("attention_scores: position");
    Stream pre(x.begin(), x.begin() + static_cast<long>(i) + 1);
    QK qk = project(a, pre);
    Vec s(i + 1);
    for (std::size_t j = 0; j <= i; ++j) s[j] = score(qk.q[i], qk.k[j]);
    return s;
}

Vec attention_weights(const Attention& a, const Stream& x, std::size_t i) {
    Vec s = attention_scores(a, x, i);
    fill_weights(a.mode, s);
    return s;
}

Stream attention_forward(const Attention& a, const Stream& x) {
    if (x.empty()) throw DimError("attention: empty input");
    const std::size_t d = x[0].size();
    need(a.wv.rows == d && a.wv.cols == d && a.wq.cols == d, "attention: dimension mismatch");
    const auto vrows = nonzero_rows(a.wv);
    Stream out = x;
    if (vrows.empty()) return out;
    QK qk = project(a, x);
    // Value vectors on the rows W_V can write.
    std::vector<Vec> v(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) v[j] = value_of(a.wv, vrows, x[j]);
    Vec s, acc(vrows.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        s.resize(i + 1);
        for (std::size_t j = 0; j <= i; ++j) s[j] = score(qk.q[i], qk.k[j]);
        fill_weights(a.mode, s);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j <= i; ++j) {
            if (s[j] == 0.0) continue;
            for (std::size_t t = 0; t < vrows.size(); ++t) acc[t] += s[j] * v[j][t];
        }
        for (std::size_t t = 0; t < vrows.size(); ++t) out[i][vrows[t]] = x[i][vrows[t]] + acc[t];
    }
    return out;
}

Vec ffn_apply(const Ffn& f, const Vec& h) {
    Vec y = linear(f.w1, h);
    y = relu(norm_apply(f.norm, y, f.gamma, f.beta));
    Vec z = linear(f.w2, y);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += h[i];
    return z;
}

Stream ffn_forward(const Ffn& f, const Stream& h) {
    Stream out;
    out.reserve(h.size());
    for (const auto& hi : h) out.push_back(ffn_apply(f, hi));
    return out;
}

Stream model_forward(const Model& m, const Seq& s) {
    Stream x = embed(m, s);
    for (const auto& b : m.blocks) x = ffn_forward(b.ffn, attention_forward(b.attn, x));
    return x;
}

std::vector<Stream> model_trace(const Model& m, const Seq& s) {
    std::vector<Stream> t{embed(m, s)};
    for (const auto& b : m.blocks) {
        t.push_back(attention_forward(b.attn, t.back()));
        t.push_back(ffn_forward(b.ffn, t.back()));
    }
    return t;
}

Verdict recognize_final(const Head& h, const Vec& x) {
    if (h.kind != Head::Kind::Recognizer) throw std::invalid_argument("recognize: generator head");
    Verdict v;
    v.margin = dot(h.w, x) + h.b;
    v.sign = v.margin > 0.0 ? 1 : -1;
    return v;
}

Verdict recognize(const Model& m, const Head& h, const Seq& s) {
    if (h.kind != Head::Kind::Recognizer) throw std::invalid_argument("recognize: generator head");
    if (s.empty()) throw std::invalid_argument("recognize: empty sequence");
    return recognize_final(h, model_forward(m, s).back());
}

Vec generator_logits(const Head& h, const Vec& x) {
    if (h.kind != Head::Kind::Generator) throw std::invalid_argument("generator: recognizer head");
    Vec z = linear(h.W, x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += h.bias[i];
    return z;
}

Vec generator_distribution(const Head& h, const Vec& x) { return softmax(generator_logits(h, x)); }

Vec next_token_distribution(const Model& m, const Head& h, const Seq& s) {
    if (h.kind != Head::Kind::Generator) throw std::invalid_argument("next_token_distribution: recognizer head");
    if (s.empty()) throw std::invalid_argument("next_token_distribution: empty sequence");
    return generator_distribution(h, model_forward(m, s).back());
}

std::vector<Vec> next_token_distributions(const Model& m, const Head& h, const Seq& s) {
    if (h.kind != Head::Kind::Generator) throw std::invalid_argument("next_token_distributions: recognizer head");
    std::vector<Vec> out;
    if (s.empty()) return out;
    for (const auto& x : model_forward(m, s)) out.push_back(generator_distribution(h, x));
    return out;
}

Model with_selection_mode(Model m, AttnMode mode) {
    for (auto& b : m.blocks)
        if (b.attn.selection) b.attn.mode = mode;
    return m;
}

Decoder::Decoder(const Model& m) : m_(m) {
    m.validate();
    for (const auto& b : m.blocks) {
        Layer l;
        l.vrows = nonzero_rows(b.attn.wv);
        if (!b.attn.qk) l.dims = qk_dims(b.attn);
        layers_.push_back(std::move(l));
    }
}

const Vec& Decoder::push(int token) {
    Vec x = embed_one(m_, token, states_.size());
    Vec q, k, s, acc;
    for (std::size_t b = 0; b < layers_.size(); ++b) {
        const Block& blk = m_.blocks[b];
        Layer& l = layers_[b];
        if (!l.vrows.empty()) {
            project_one(blk.attn, l.dims, x, q, k);
            l.k.push_back(std::move(k));
            l.v.push_back(value_of(blk.attn.wv, l.vrows, x));
            const std::size_t n = l.k.size();
            s.resize(n);
            for (std::size_t j = 0; j < n; ++j) s[j] = score(q, l.k[j]);
            fill_weights(blk.attn.mode, s);
            acc.assign(l.vrows.size(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (s[j] == 0.0) continue;
                for (std::size_t t = 0; t < l.vrows.size(); ++t) acc[t] += s[j] * l.v[j][t];
            }
            for (std::size_t t = 0; t < l.vrows.size(); ++t) x[l.vrows[t]] += acc[t];
        }
        x = ffn_apply(blk.ffn, x);
    }
    states_.push_back(std::move(x));
    return states_.back();
}

void Decoder::pop() {
    if (states_.empty()) throw std::logic_error("Decoder::pop on an empty sequence");
    for (auto& l : layers_)
        if (!l.vrows.empty()) {
            l.k.pop_back();
            l.v.pop_back();
        }
    states_.pop_back();
}

}  // namespace dyf
