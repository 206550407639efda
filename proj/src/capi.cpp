#include <dyckformer/dyckformer.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <new>
#include <stdexcept>
#include <string>

#include "conversions.hpp"
#include "evalkit.hpp"
#include "io.hpp"
#include "verify.hpp"

struct dyf_network {
    dyf::BuiltNetwork net;
};

namespace {

using dyf::BuiltNetwork;
using nlohmann::ordered_json;

thread_local std::string last_error;

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class F>
dyf_status guarded(F&& f) {
    try {
        f();
        last_error.clear();
        return DYF_OK;
    } catch (const DomainError& e) {
        last_error = e.what();
        return DYF_ERR_DOMAIN;
    } catch (const dyf::SchemaError& e) {
        last_error = e.what();
        return DYF_ERR_SCHEMA;
    } catch (const dyf::IoError& e) {
        last_error = e.what();
        return DYF_ERR_IO;
    } catch (const std::invalid_argument& e) {
        last_error = e.what();
        return DYF_ERR_ARG;
    } catch (const std::out_of_range& e) {
        last_error = e.what();
        return DYF_ERR_ARG;
    } catch (const std::exception& e) {
        last_error = e.what();
        return DYF_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return DYF_ERR_INTERNAL;
    }
}

void need(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

dyf::Lang parse_lang(const char* s) {
    need(s != nullptr, "language is required");
    if (std::strcmp(s, "dyck") == 0) return dyf::Lang::Dyck;
    if (std::strcmp(s, "shuffle") == 0) return dyf::Lang::Shuffle;
    throw std::invalid_argument(std::string("unknown language '") + s + "' (expected dyck or shuffle)");
}

dyf::GenParams process(dyf::Lang L, int k, double q, double r, const char* pi_path) {
    dyf::Vec pi, pibar;
    if (pi_path) dyf::read_pi_file(pi_path, k, pi, pibar);
    auto g = L == dyf::Lang::Dyck ? dyf::GenParams::dyck(k, q, r, pi) : dyf::GenParams::shuffle(k, q, r, pi, pibar);
    g.validate(k);
    return g;
}

dyf::Seq tokens_of(const BuiltNetwork& n, const int* tokens, size_t len) {
    need(tokens != nullptr || len == 0, "tokens is NULL");
    need(len > 0, "empty input");
    const dyf::Alphabet A(n.k);
    dyf::Seq s(tokens, tokens + len);
    for (std::size_t i = 0; i < s.size(); ++i) {
        need(A.valid(s[i]), "token id " + std::to_string(s[i]) + " out of range for k = " + std::to_string(n.k));
        if (s[i] == A.bos() && (i > 0 || !dyf::uses_bos(n.task)))
            throw DomainError("BOS at position " + std::to_string(i) + " is outside the network's domain");
    }
    if (!dyf::uses_bos(n.task) && !n.roles.empty() && s.size() >= 2 && s[0] == s[1])
        throw DomainError("no-BOS network requires the first two tokens to differ");
    return s;
}

ordered_json split_json(const dyf::SplitValue& v, const char* key) {
    ordered_json j;
    j[key] = v.count ? ordered_json(v.value) : ordered_json(nullptr);
    j["positions"] = v.count;
    return j;
}

ordered_json recognition_json(const dyf::Recognition& r) {
    ordered_json j;
    const long n = r.tp + r.tn + r.fp + r.fn;
    j["accuracy"] = n ? ordered_json(r.accuracy) : ordered_json(nullptr);
    j["inputs"] = n;
    j["tp"] = r.tp;
    j["tn"] = r.tn;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["skipped"] = r.skipped;
    return j;
}

ordered_json evaluate(const BuiltNetwork& n, const std::string& data_path, const dyf_eval_options& o) {
    need(o.metric != nullptr, "metric is required");
    const std::string metric = o.metric;
    const dyf::Alphabet A(n.k);
    const dyf::Lang L = dyf::task_lang(n.task);
    const dyf::SplitSpec split{o.n_max > 0 ? o.n_max : n.params.n_max, o.ood_factor};
    split.validate();
    const dyf::Dataset data = dyf::load_dataset(data_path, A);
    need(!data.empty(), "dataset '" + data_path + "' is empty");

    ordered_json params;
    params["metric"] = metric;
    params["data"] = data_path;
    params["sequences"] = data.size();
    params["n_max"] = split.n_max;
    params["ood_factor"] = split.ood_factor;
    ordered_json id, ood;
    if (metric == "tv") {
        need(dyf::is_generator(n.task), "the tv metric needs a generator network");
        dyf::GenParams g;
        if (o.q >= 0.0)
            g = process(L, n.k, o.q, o.r, o.pi_path);
        else if (n.gen)
            g = *n.gen;
        else
            throw std::invalid_argument("weights carry no process parameters; pass q and r");
        auto tv = dyf::max_tv_over_prefixes(n, g, data, split);
        id = split_json(tv.id, "max_tv");
        ood = split_json(tv.ood, "max_tv");
        params["process"] = dyf::gen_params_to_json(g);
        params["skipped_sequences"] = tv.skipped_sequences;
        params["max_tv"] = std::max(tv.id.value, tv.ood.value);
    } else if (metric == "acc-closed") {
        need(dyf::is_generator(n.task), "the acc-closed metric needs a generator network");
        auto acc = dyf::acc_closed(dyf::network_source(n), A, L, data, split);
        id = split_json(acc.id, "acc_closed");
        ood = split_json(acc.ood, "acc_closed");
    } else if (metric == "recognition") {
        need(!dyf::is_generator(n.task), "the recognition metric needs a recognizer network");
        std::vector<dyf::Seq> members;
        for (const auto& s : data)
            if (!s.truncated && dyf::is_member(L, A, s.tokens)) members.push_back(s.tokens);
        need(!members.empty(), "dataset has no complete member sequences");
        const auto negatives = dyf::negative_corpus(A, L, members, o.seed);
        // A whole input is in-distribution when its last position is.
        std::vector<dyf::Seq> pos[2], neg[2];
        for (const auto& s : members) pos[split.is_id(s.size() - 1) ? 0 : 1].push_back(s);
        for (const auto& s : negatives) neg[split.is_id(s.size() - 1) ? 0 : 1].push_back(s);
        id = recognition_json(dyf::recognition_accuracy(n, pos[0], neg[0]));
        ood = recognition_json(dyf::recognition_accuracy(n, pos[1], neg[1]));
        params["seed"] = o.seed;
        params["members"] = members.size();
        params["negatives"] = negatives.size();
    } else {
        throw std::invalid_argument("unknown metric '" + metric + "' (expected tv, acc-closed or recognition)");
    }
    return dyf::metrics_json(dyf::task_name(n.task), n.k, id, ood, params);
}

}  // namespace

extern "C" {

const char* dyf_last_error(void) { return last_error.c_str(); }

const char* dyf_version(void) { return "0.1.0"; }

void dyf_string_free(char* s) { std::free(s); }

void dyf_build_options_init(dyf_build_options* o) {
    if (!o) return;
    o->q = 0.5;
    o->r = 0.9;
    o->pi_path = nullptr;
    o->n_max = 256;
    o->attn = DYF_ATTN_PER_CONSTRUCTION;
    o->c0 = 0.0;
}

dyf_status dyf_build(const char* task, int k, const dyf_build_options* o, dyf_network** out) {
    return guarded([&] {
        need(task && o && out, "task, options and out must be non-NULL");
        *out = nullptr;
        need(k >= 1, "k must be >= 1");
        const dyf::Task t = dyf::parse_task(task);
        need(o->attn == DYF_ATTN_PER_CONSTRUCTION || o->attn == DYF_ATTN_HARDMAX || o->attn == DYF_ATTN_SOFTMAX,
             "unknown attention mode");
        need(o->c0 >= 0.0, "c0 must be positive");
        dyf::ConstructionParams p;
        p.n_max = o->n_max;
        p.softmax_selection = o->attn == DYF_ATTN_SOFTMAX;
        if (o->c0 > 0.0) p.C0_gen = o->c0;
        std::optional<dyf::GenParams> g;
        if (dyf::is_generator(t)) g = process(dyf::task_lang(t), k, o->q, o->r, o->pi_path);
        auto net = dyf::build(t, k, g, p);
        if (o->attn == DYF_ATTN_HARDMAX) net.model = dyf::with_selection_mode(net.model, dyf::AttnMode::Hardmax);
        *out = new dyf_network{std::move(net)};
    });
}

dyf_status dyf_load(const char* path, dyf_network** out) {
    return guarded([&] {
        need(path && out, "path and out must be non-NULL");
        *out = nullptr;
        *out = new dyf_network{dyf::load_weights(path)};
    });
}

dyf_status dyf_save(const dyf_network* n, const char* path) {
    return guarded([&] {
        need(n && path, "network and path must be non-NULL");
        dyf::save_weights(path, n->net);
    });
}

void dyf_free(dyf_network* n) { delete n; }

dyf_status dyf_task(const dyf_network* n, const char** task_out, int* k_out) {
    return guarded([&] {
        need(n != nullptr, "network is NULL");
        static thread_local std::string name;
        name = dyf::task_name(n->net.task);
        if (task_out) *task_out = name.c_str();
        if (k_out) *k_out = n->net.k;
    });
}

dyf_status dyf_info(const dyf_network* n, char** json_out) {
    return guarded([&] {
        need(n && json_out, "network and out must be non-NULL");
        *json_out = nullptr;
        const auto& b = n->net;
        auto w = dyf::weights_to_json(b);
        ordered_json j;
        j["schema_version"] = dyf::kSchemaVersion;
        j["task"] = dyf::task_name(b.task);
        j["k"] = b.k;
        j["d_model"] = b.model.d_model;
        j["blocks"] = b.model.blocks.size();
        j["positional_encoding"] = w["positional_encoding"];
        ordered_json blocks = ordered_json::array();
        for (std::size_t i = 0; i < b.model.blocks.size(); ++i) {
            const auto& blk = b.model.blocks[i];
            ordered_json e;
            e["name"] = blk.name;
            e["role"] = i < b.roles.size() ? ordered_json(b.roles[i]) : ordered_json(nullptr);
            e["attention"] = blk.attn.mode == dyf::AttnMode::Hardmax ? "hardmax" : "softmax";
            e["selection"] = blk.attn.selection;
            e["qk_norm"] = blk.attn.qk ? (blk.attn.qk->kind == dyf::NormKind::LN ? "ln" : "rms") : ordered_json(nullptr);
            e["ffn_norm"] = blk.ffn.norm == dyf::NormKind::LN ? "ln" : "rms";
            e["ffn_hidden"] = blk.ffn.w1.rows;
            blocks.push_back(e);
        }
        j["layers"] = blocks;
        ordered_json ch = ordered_json::object();
        for (std::size_t i = 0; i < b.channels.size(); ++i) ch[b.channels[i]] = i;
        j["channels"] = ch;
        j["construction"] = w["construction"];
        j["gen"] = w.contains("gen") ? w["gen"] : ordered_json(nullptr);
        *json_out = dup_string(j.dump(2));
    });
}

dyf_status dyf_recognize(const dyf_network* n, const int* tokens, size_t len, int* accept_out, double* margin_out) {
    return guarded([&] {
        need(n != nullptr, "network is NULL");
        need(!dyf::is_generator(n->net.task), "network is a generator");
        const auto s = tokens_of(n->net, tokens, len);
        const auto v = dyf::recognize(n->net.model, n->net.head, s);
        if (accept_out) *accept_out = v.sign == 1 ? 1 : 0;
        if (margin_out) *margin_out = v.margin;
    });
}

dyf_status dyf_next_distribution(const dyf_network* n, const int* tokens, size_t len, double* out, size_t out_len) {
    return guarded([&] {
        need(n != nullptr && out != nullptr, "network and out must be non-NULL");
        need(dyf::is_generator(n->net.task), "network is a recognizer");
        const std::size_t K = static_cast<std::size_t>(2 * n->net.k + 2);
        need(out_len >= K, "output buffer needs " + std::to_string(K) + " entries");
        const auto s = tokens_of(n->net, tokens, len);
        const auto p = dyf::next_token_distribution(n->net.model, n->net.head, s);
        std::copy(p.begin(), p.end(), out);
    });
}

dyf_status dyf_convert(const dyf_network* n, const char* to, dyf_network** out) {
    return guarded([&] {
        need(n && to && out, "network, target and out must be non-NULL");
        *out = nullptr;
        const std::string t = to;
        BuiltNetwork c;
        if (t == "ln-ffn") {
            c = dyf::with_ln_ffn(n->net);
        } else if (t == "qk-rmsln" || t == "qk-ln") {
            c = dyf::with_qk_norm(n->net);
            if (t == "qk-ln")
                for (auto& b : c.model.blocks) b.attn = dyf::qkrmsln_to_qkln(b.attn);
            c.model.validate();
        } else {
            throw std::invalid_argument("unknown conversion '" + t + "' (expected ln-ffn, qk-rmsln or qk-ln)");
        }
        *out = new dyf_network{std::move(c)};
    });
}

void dyf_data_options_init(dyf_data_options* o) {
    if (!o) return;
    o->lang = "dyck";
    o->k = 2;
    o->q = 0.5;
    o->r = 0.9;
    o->pi_path = nullptr;
    o->n_max = 256;
    o->ood_factor = 1.2;
    o->count = 1000;
    o->seed = 0;
    o->test_split = 0;
}

dyf_status dyf_generate_dataset(const dyf_data_options* o, const char* out_path) {
    return guarded([&] {
        need(o && out_path, "options and path must be non-NULL");
        need(o->k >= 1, "k must be >= 1");
        need(o->count >= 1, "count must be >= 1");
        const dyf::SplitSpec split{o->n_max, o->ood_factor};
        split.validate();
        const auto g = process(parse_lang(o->lang), o->k, o->q, o->r, o->pi_path);
        const dyf::Alphabet A(o->k);
        const auto d = dyf::generate_dataset(A, g, o->count, split,
                                             o->test_split ? dyf::DatasetStyle::Test : dyf::DatasetStyle::Train, o->seed);
        dyf::save_dataset(out_path, A, d);
    });
}

void dyf_eval_options_init(dyf_eval_options* o) {
    if (!o) return;
    o->metric = "tv";
    o->n_max = 0;
    o->ood_factor = 1.2;
    o->seed = 0;
    o->q = -1.0;
    o->r = -1.0;
    o->pi_path = nullptr;
}

dyf_status dyf_eval(const dyf_network* n, const char* data_path, const dyf_eval_options* o, const char* out_path,
                    char** json_out) {
    return guarded([&] {
        need(n && data_path && o, "network, data path and options must be non-NULL");
        if (json_out) *json_out = nullptr;
        const auto m = evaluate(n->net, data_path, *o);
        if (out_path) dyf::save_metrics(out_path, m);
        if (json_out) *json_out = dup_string(m.dump(2));
    });
}

dyf_status dyf_verify(const char* suite, int k, int n_max, uint64_t seed, char** json_out, int* all_pass_out) {
    return guarded([&] {
        need(suite != nullptr, "suite is NULL");
        if (json_out) *json_out = nullptr;
        const auto rs = dyf::run_suite(suite, k, n_max, seed);
        bool all = true;
        ordered_json checks = ordered_json::array();
        for (const auto& r : rs) {
            all = all && r.pass;
            checks.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
        }
        ordered_json j;
        j["suite"] = suite;
        j["k"] = k;
        j["n_max"] = n_max;
        j["seed"] = seed;
        j["pass"] = all;
        j["checks"] = checks;
        if (all_pass_out) *all_pass_out = all ? 1 : 0;
        if (json_out) *json_out = dup_string(j.dump(2));
    });
}

}  // extern "C"
