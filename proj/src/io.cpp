#include "io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace dyf {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp.string());
        f << content;
        f.flush();
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename onto " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

namespace {

double finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("save_weights: non-finite value in ") + what);
    return v;
}

ojson vec_json(const Vec& v, const char* what) {
    ojson a = ojson::array();
    for (double x : v) a.push_back(finite(x, what));
    return a;
}

ojson mat_json(const Mat& m, const char* what) {
    ojson o;
    o["rows"] = m.rows;
    o["cols"] = m.cols;
    o["data"] = vec_json(m.a, what);
    return o;
}

const char* norm_name(NormKind k) { return k == NormKind::RMS ? "rms" : "ln"; }
const char* mode_name(AttnMode m) { return m == AttnMode::Softmax ? "softmax" : "hardmax"; }

// Schema-checked accessors.
const json& at(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    return j.at(key);
}

double num(const json& j, const char* key) {
    const json& v = at(j, key);
    if (!v.is_number()) throw SchemaError(std::string("field '") + key + "' is not a number");
    return v.get<double>();
}

long long integer(const json& j, const char* key) {
    const json& v = at(j, key);
    if (!v.is_number_integer()) throw SchemaError(std::string("field '") + key + "' is not an integer");
    return v.get<long long>();
}

std::string str(const json& j, const char* key) {
    const json& v = at(j, key);
    if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' is not a string");
    return v.get<std::string>();
}

bool boolean(const json& j, const char* key) {
    const json& v = at(j, key);
    if (!v.is_boolean()) throw SchemaError(std::string("field '") + key + "' is not a boolean");
    return v.get<bool>();
}

Vec vec_of(const json& v, const char* key) {
    if (!v.is_array()) throw SchemaError(std::string("field '") + key + "' is not an array");
    Vec out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw SchemaError(std::string("field '") + key + "' holds a non-number");
        out.push_back(x.get<double>());
    }
    return out;
}

Vec vec(const json& j, const char* key) { return vec_of(at(j, key), key); }

Mat mat(const json& j, const char* key) {
    const json& o = at(j, key);
    const long long r = integer(o, "rows"), c = integer(o, "cols");
    if (r < 0 || c < 0) throw SchemaError(std::string("matrix '") + key + "' has a negative size");
    Mat m(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    m.a = vec(o, "data");
    if (m.a.size() != m.rows * m.cols) throw SchemaError(std::string("matrix '") + key + "' data length mismatch");
    return m;
}

NormKind norm_of(const std::string& s) {
    if (s == "rms") return NormKind::RMS;
    if (s == "ln") return NormKind::LN;
    throw SchemaError("unknown norm '" + s + "'");
}

AttnMode mode_of(const std::string& s) {
    if (s == "softmax") return AttnMode::Softmax;
    if (s == "hardmax") return AttnMode::Hardmax;
    throw SchemaError("unknown attention mode '" + s + "'");
}

ojson params_json(const ConstructionParams& p) {
    ojson o;
    o["a"] = p.a;
    o["C1_4"] = p.C1_4;
    o["C2_4"] = p.C2_4;
    o["C1_5"] = p.C1_5;
    o["gen_C1"] = p.gen_C1;
    o["gen_C2"] = p.gen_C2;
    o["C_shift"] = p.C_shift;
    o["eps_3"] = p.eps_3;
    o["C0_gen"] = p.C0_gen;
    o["eps_q"] = p.eps_q;
    o["C_F"] = p.C_F;
    o["C3_shuffle"] = p.C3_shuffle;
    o["eps_recov"] = p.eps_recov;
    o["shuffle_tv"] = p.shuffle_tv;
    o["target_weight"] = p.target_weight;
    o["gen_log_tail"] = p.gen_log_tail;
    o["n_max"] = p.n_max;
    o["softmax_selection"] = p.softmax_selection;
    for (auto& [k, v] : o.items())
        if (v.is_number_float()) finite(v.get<double>(), "construction params");
    return o;
}

ConstructionParams params_of(const json& o) {
    ConstructionParams p;
    p.a = num(o, "a");
    p.C1_4 = num(o, "C1_4");
    p.C2_4 = num(o, "C2_4");
    p.C1_5 = num(o, "C1_5");
    p.gen_C1 = num(o, "gen_C1");
    p.gen_C2 = num(o, "gen_C2");
    p.C_shift = num(o, "C_shift");
    p.eps_3 = num(o, "eps_3");
    p.C0_gen = num(o, "C0_gen");
    p.eps_q = num(o, "eps_q");
    p.C_F = num(o, "C_F");
    p.C3_shuffle = num(o, "C3_shuffle");
    p.eps_recov = num(o, "eps_recov");
    p.shuffle_tv = num(o, "shuffle_tv");
    p.target_weight = num(o, "target_weight");
    p.gen_log_tail = num(o, "gen_log_tail");
    p.n_max = static_cast<int>(integer(o, "n_max"));
    p.softmax_selection = boolean(o, "softmax_selection");
    return p;
}

}  // namespace

ojson gen_params_to_json(const GenParams& g) {
    ojson o;
    o["lang"] = g.lang == Lang::Dyck ? "dyck" : "shuffle";
    o["q"] = g.q;
    o["r"] = g.r;
    o["pi"] = vec_json(g.pi, "pi");
    if (g.lang == Lang::Shuffle) o["pibar"] = vec_json(g.pibar, "pibar");
    return o;
}

GenParams gen_params_from_json(const json& j, int k) {
    const std::string lang = str(j, "lang");
    GenParams g;
    try {
        if (lang == "dyck") g = GenParams::dyck(k, num(j, "q"), num(j, "r"), vec(j, "pi"));
        else if (lang == "shuffle") g = GenParams::shuffle(k, num(j, "q"), num(j, "r"), vec(j, "pi"), vec(j, "pibar"));
        else throw SchemaError("unknown language '" + lang + "'");
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("generation params: ") + e.what());
    }
    return g;
}

void read_pi_file(const std::string& path, int k, Vec& pi, Vec& pibar) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw SchemaError("pi file " + path + ": " + e.what());
    }
    if (j.is_array()) {
        pi = vec_of(j, "pi");
    } else {
        pi = vec(j, "pi");
        if (j.contains("pibar")) pibar = vec(j, "pibar");
    }
    if (static_cast<int>(pi.size()) != k || (!pibar.empty() && static_cast<int>(pibar.size()) != k))
        throw SchemaError("pi file " + path + ": expected " + std::to_string(k) + " entries");
}

ojson weights_to_json(const BuiltNetwork& n) {
    const Model& m = n.model;
    ojson o;
    o["schema_version"] = kSchemaVersion;
    o["task"] = task_name(n.task);
    o["k"] = n.k;
    o["d_model"] = m.d_model;
    o["positional_encoding"] = m.pos ? "learned" : "none";
    o["embedding"] = mat_json(m.emb, "embedding");
    o["pos"] = m.pos ? mat_json(*m.pos, "pos") : ojson(nullptr);
    ojson blocks = ojson::array();
    for (const Block& b : m.blocks) {
        ojson at;
        at["wq"] = mat_json(b.attn.wq, "wq");
        at["wk"] = mat_json(b.attn.wk, "wk");
        at["wv"] = mat_json(b.attn.wv, "wv");
        at["mode"] = mode_name(b.attn.mode);
        at["selection"] = b.attn.selection;
        if (b.attn.qk) {
            ojson q;
            q["kind"] = norm_name(b.attn.qk->kind);
            q["gamma_q"] = vec_json(b.attn.qk->gamma_q, "gamma_q");
            q["beta_q"] = vec_json(b.attn.qk->beta_q, "beta_q");
            q["gamma_k"] = vec_json(b.attn.qk->gamma_k, "gamma_k");
            q["beta_k"] = vec_json(b.attn.qk->beta_k, "beta_k");
            at["qk_norm"] = q;
        } else {
            at["qk_norm"] = nullptr;
        }
        ojson ff;
        ff["w1"] = mat_json(b.ffn.w1, "w1");
        ff["w2"] = mat_json(b.ffn.w2, "w2");
        ff["gamma"] = vec_json(b.ffn.gamma, "gamma");
        ff["beta"] = vec_json(b.ffn.beta, "beta");
        ff["norm"] = norm_name(b.ffn.norm);
        ojson bj;
        bj["name"] = b.name;
        bj["attention"] = at;
        bj["ffn"] = ff;
        blocks.push_back(bj);
    }
    o["blocks"] = blocks;
    ojson h;
    if (n.head.kind == Head::Kind::Recognizer) {
        h["kind"] = "recognizer";
        h["w"] = vec_json(n.head.w, "head w");
        h["b"] = finite(n.head.b, "head b");
    } else {
        h["kind"] = "generator";
        h["W"] = mat_json(n.head.W, "head W");
        h["bias"] = vec_json(n.head.bias, "head bias");
    }
    o["head"] = h;
    if (n.roles.empty() && n.channels.empty()) {
        o["construction"] = nullptr;
        o["gen"] = n.gen ? gen_params_to_json(*n.gen) : ojson(nullptr);
        return o;
    }
    ojson c;
    c["params"] = params_json(n.params);
    c["channels"] = n.channels;
    c["roles"] = n.roles;
    ojson consts = ojson::object();
    for (const auto& [k, v] : n.constants) consts[k] = finite(v, "constants");
    c["constants"] = consts;
    o["construction"] = c;
    o["gen"] = n.gen ? gen_params_to_json(*n.gen) : ojson(nullptr);
    return o;
}

BuiltNetwork weights_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("weights: top level is not an object");
    const long long ver = integer(j, "schema_version");
    if (ver != kSchemaVersion)
        throw SchemaError("weights: schema_version " + std::to_string(ver) + " is not supported (expected " +
                          std::to_string(kSchemaVersion) + ")");
    BuiltNetwork n;
    try {
        n.task = parse_task(str(j, "task"));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
    }
    n.k = static_cast<int>(integer(j, "k"));
    if (n.k < 1) throw SchemaError("weights: k must be >= 1");
    Model& m = n.model;
    m.k = n.k;
    const long long d = integer(j, "d_model");
    if (d < 0) throw SchemaError("weights: negative d_model");
    m.d_model = static_cast<std::size_t>(d);
    m.emb = mat(j, "embedding");
    if (!at(j, "pos").is_null()) m.pos = mat(j, "pos");
    const json& blocks = at(j, "blocks");
    if (!blocks.is_array()) throw SchemaError("weights: 'blocks' is not an array");
    for (const json& bj : blocks) {
        Block b;
        b.name = str(bj, "name");
        const json& a = at(bj, "attention");
        b.attn.wq = mat(a, "wq");
        b.attn.wk = mat(a, "wk");
        b.attn.wv = mat(a, "wv");
        b.attn.mode = mode_of(str(a, "mode"));
        b.attn.selection = boolean(a, "selection");
        const json& q = at(a, "qk_norm");
        if (!q.is_null()) {
            QKNorm qn;
            qn.kind = norm_of(str(q, "kind"));
            qn.gamma_q = vec(q, "gamma_q");
            qn.beta_q = vec(q, "beta_q");
            qn.gamma_k = vec(q, "gamma_k");
            qn.beta_k = vec(q, "beta_k");
            const std::size_t r = b.attn.wq.rows;
            if (qn.gamma_q.size() != r || qn.beta_q.size() != r || qn.gamma_k.size() != r || qn.beta_k.size() != r)
                throw SchemaError("weights: qk_norm parameter length mismatch in block '" + b.name + "'");
            b.attn.qk = qn;
        }
        const json& f = at(bj, "ffn");
        b.ffn.w1 = mat(f, "w1");
        b.ffn.w2 = mat(f, "w2");
        b.ffn.gamma = vec(f, "gamma");
        b.ffn.beta = vec(f, "beta");
        b.ffn.norm = norm_of(str(f, "norm"));
        m.blocks.push_back(std::move(b));
    }
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("weights: ") + e.what());
    }
    const json& h = at(j, "head");
    const std::string kind = str(h, "kind");
    const auto K = static_cast<std::size_t>(2 * n.k + 2);
    if (kind == "recognizer") {
        n.head.kind = Head::Kind::Recognizer;
        n.head.w = vec(h, "w");
        n.head.b = num(h, "b");
        if (n.head.w.size() != m.d_model) throw SchemaError("weights: recognizer head width mismatch");
    } else if (kind == "generator") {
        n.head.kind = Head::Kind::Generator;
        n.head.W = mat(h, "W");
        n.head.bias = vec(h, "bias");
        if (n.head.W.rows != K || n.head.W.cols != m.d_model || n.head.bias.size() != K)
            throw SchemaError("weights: generator head shape mismatch");
    } else {
        throw SchemaError("weights: unknown head kind '" + kind + "'");
    }
    if (is_generator(n.task) != (n.head.kind == Head::Kind::Generator))
        throw SchemaError("weights: head kind does not match task");
    if (j.contains("gen") && !j.at("gen").is_null()) n.gen = gen_params_from_json(j.at("gen"), n.k);
    const json& c = at(j, "construction");
    if (!c.is_null()) {
        n.params = params_of(at(c, "params"));
        for (const auto& s : at(c, "channels")) n.channels.push_back(s.get<std::string>());
        for (const auto& s : at(c, "roles")) n.roles.push_back(s.get<std::string>());
        for (const auto& [key, v] : at(c, "constants").items()) {
            if (!v.is_number()) throw SchemaError("weights: constant '" + key + "' is not a number");
            n.constants[key] = v.get<double>();
        }
        if (n.channels.size() != m.d_model) throw SchemaError("weights: channel map size mismatch");
        if (n.roles.size() != m.blocks.size()) throw SchemaError("weights: role list size mismatch");
    }
    return n;
}

void save_weights(const std::string& path, const BuiltNetwork& n) { write_atomic(path, weights_to_json(n).dump(1) + "\n"); }

BuiltNetwork load_weights(const std::string& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError("weights " + path + ": " + e.what());
    }
    try {
        return weights_from_json(j);
    } catch (const json::exception& e) {
        throw SchemaError("weights " + path + ": " + e.what());
    }
}

std::string dataset_to_jsonl(const Alphabet& A, const Dataset& d) {
    std::string out;
    for (const Sample& s : d) {
        ojson o;
        ojson toks = ojson::array();
        for (int t : s.tokens) toks.push_back(A.name(t));
        o["tokens"] = toks;
        o["truncated"] = s.truncated;
        out += o.dump();
        out += '\n';
    }
    return out;
}

Dataset dataset_from_jsonl(const Alphabet& A, const std::string& text) {
    Dataset d;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "dataset line " + std::to_string(lineno) + ": ";
        try {
            const json o = json::parse(line);
            Sample s;
            const json& toks = at(o, "tokens");
            if (!toks.is_array()) throw SchemaError("'tokens' is not an array");
            for (const auto& t : toks) {
                if (!t.is_string()) throw SchemaError("token is not a string");
                s.tokens.push_back(A.parse(t.get<std::string>()));
            }
            s.truncated = boolean(o, "truncated");
            d.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw SchemaError(where + e.what());
        } catch (const std::invalid_argument& e) {
            throw SchemaError(where + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError(where + e.what());
        }
    }
    return d;
}

void save_dataset(const std::string& path, const Alphabet& A, const Dataset& d) {
    write_atomic(path, dataset_to_jsonl(A, d));
}

Dataset load_dataset(const std::string& path, const Alphabet& A) { return dataset_from_jsonl(A, read_file(path)); }

ojson metrics_json(const std::string& task, int k, ojson id, ojson ood, ojson params) {
    ojson o;
    o["task"] = task;
    o["k"] = k;
    o["splits"]["id"] = std::move(id);
    o["splits"]["ood"] = std::move(ood);
    o["params"] = std::move(params);
    return o;
}

void save_metrics(const std::string& path, const ojson& m) { write_atomic(path, m.dump(2) + "\n"); }

}  // namespace dyf
