#include <dyckformer/dyckformer.h>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

int report(dyf_status s, const char* what) {
    if (s == DYF_OK) return 0;
    std::fprintf(stderr, "dyckformer: %s: %s\n", what, dyf_last_error());
    return s == DYF_ERR_ARG ? kUsage : kFailure;
}

// Temporary file plus rename, like the library's own writers.
bool write_text(const std::string& path, const char* text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!(f << text << '\n')) return false;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    return !ec;
}

void print_and_free(char* s) {
    if (!s) return;
    std::printf("%s\n", s);
    dyf_string_free(s);
}

struct Process {
    double q = 0.5, r = 0.9;
    std::string pi;
};

void add_process(CLI::App* c, Process& p) {
    c->add_option("--q", p.q, "open probability at depth >= 1")->check(CLI::Range(0.0, 1.0));
    c->add_option("--r", p.r, "open probability at depth 0")->check(CLI::Range(0.0, 1.0));
    c->add_option("--pi", p.pi, "JSON file with the type distribution (default uniform)")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hand-built transformers for Dyck and Shuffle-Dyck"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dyf_version()));

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "sample a JSONL dataset from the generating process");
    std::string lang, split = "train", out;
    int k = 0, count = 0, n_max = 256;
    double ood = 1.2;
    std::uint64_t seed = 0;
    Process proc;
    gen->add_option("--lang", lang, "language")->required()->check(CLI::IsMember({"dyck", "shuffle"}));
    gen->add_option("--k", k, "number of bracket types")->required()->check(CLI::PositiveNumber);
    add_process(gen, proc);
    gen->add_option("--n-max", n_max, "in-distribution length")->check(CLI::PositiveNumber);
    gen->add_option("--ood-factor", ood, "test sequences reach floor(ood-factor * n-max)")->check(CLI::Range(1.0, 100.0));
    gen->add_option("--count", count, "number of sequences")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "random seed")->required();
    gen->add_option("--split", split, "train caps at n-max, test at the OOD cap")->check(CLI::IsMember({"train", "test"}));
    gen->add_option("--out", out, "output JSONL path")->required();

    // build
    auto* bld = app.add_subcommand("build", "construct a network and write its weight file");
    std::string task, attn = "per-construction";
    double c0 = 0.0;
    bld->add_option("--task", task, "task")->required()->check(CLI::IsMember(
        {"dyck-rec", "dyck-gen", "shuffle-rec", "shuffle-gen", "dyck-rec-nobos", "dyck-gen-nobos"}));
    bld->add_option("--k", k, "number of bracket types")->required()->check(CLI::PositiveNumber);
    add_process(bld, proc);
    bld->add_option("--n-max", n_max, "longest supported input")->check(CLI::Range(8, 1 << 20));
    bld->add_option("--attn", attn, "attention mode")->check(CLI::IsMember({"softmax", "hardmax", "per-construction"}));
    bld->add_option("--c0", c0, "generator output constant")->check(CLI::PositiveNumber);
    bld->add_option("--out", out, "output weight file")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a weight file on a dataset");
    std::string weights, data, metric;
    std::optional<std::uint64_t> eval_seed;
    std::optional<int> eval_n_max;
    Process eval_proc;
    ev->add_option("--weights", weights, "weight file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", data, "JSONL dataset")->required()->check(CLI::ExistingFile);
    ev->add_option("--metric", metric, "metric")->required()->check(CLI::IsMember({"tv", "acc-closed", "recognition"}));
    ev->add_option("--n-max", eval_n_max, "in-distribution length (default: the network's)")->check(CLI::PositiveNumber);
    ev->add_option("--ood-factor", ood, "OOD cap factor")->check(CLI::Range(1.0, 100.0));
    ev->add_option("--seed", eval_seed, "seed of the recognition negatives");
    auto* eq = ev->add_option("--q", eval_proc.q, "process parameter q (default: from the weights)")->check(CLI::Range(0.0, 1.0));
    auto* er = ev->add_option("--r", eval_proc.r, "process parameter r")->check(CLI::Range(0.0, 1.0));
    ev->add_option("--pi", eval_proc.pi, "JSON type distribution")->check(CLI::ExistingFile);
    eq->needs(er);
    er->needs(eq);
    ev->add_option("--out", out, "metrics JSON path (default: stdout only)");

    // verify
    auto* ver = app.add_subcommand("verify", "run the invariant suite");
    std::string suite = "all";
    std::uint64_t verify_seed = 1;
    ver->add_option("--suite", suite, "suite")->check(
        CLI::IsMember({"lang", "recov", "channels", "recognition", "generation", "pseudo-bos", "conversions", "all"}));
    ver->add_option("--k", k, "number of bracket types")->required()->check(CLI::PositiveNumber);
    ver->add_option("--n-max", n_max, "longest input")->check(CLI::Range(16, 4096));
    ver->add_option("--seed", verify_seed, "seed of the sampled inputs");
    ver->add_option("--out", out, "report JSON path");

    // convert
    auto* cv = app.add_subcommand("convert", "rewrite a weight file with LayerNorm FFNs or QK normalization");
    std::string to;
    cv->add_option("--weights", weights, "weight file")->required()->check(CLI::ExistingFile);
    cv->add_option("--to", to, "target form")->required()->check(CLI::IsMember({"ln-ffn", "qk-rmsln", "qk-ln"}));
    cv->add_option("--out", out, "output weight file")->required();

    // info
    auto* inf = app.add_subcommand("info", "print weight-file metadata and the channel map");
    inf->add_option("--weights", weights, "weight file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    if (gen->parsed()) {
        dyf_data_options o;
        dyf_data_options_init(&o);
        o.lang = lang.c_str();
        o.k = k;
        o.q = proc.q;
        o.r = proc.r;
        o.pi_path = proc.pi.empty() ? nullptr : proc.pi.c_str();
        o.n_max = n_max;
        o.ood_factor = ood;
        o.count = count;
        o.seed = seed;
        o.test_split = split == "test";
        return report(dyf_generate_dataset(&o, out.c_str()), "gen-data");
    }

    if (bld->parsed()) {
        dyf_build_options o;
        dyf_build_options_init(&o);
        o.q = proc.q;
        o.r = proc.r;
        o.pi_path = proc.pi.empty() ? nullptr : proc.pi.c_str();
        o.n_max = n_max;
        o.c0 = c0;
        o.attn = attn == "softmax" ? DYF_ATTN_SOFTMAX : attn == "hardmax" ? DYF_ATTN_HARDMAX : DYF_ATTN_PER_CONSTRUCTION;
        dyf_network* n = nullptr;
        if (int rc = report(dyf_build(task.c_str(), k, &o, &n), "build")) return rc;
        const int rc = report(dyf_save(n, out.c_str()), "build");
        dyf_free(n);
        return rc;
    }

    if (ev->parsed()) {
        if (metric == "recognition" && !eval_seed) {
            std::fprintf(stderr, "dyckformer: eval: --seed is required for the recognition metric\n");
            return kUsage;
        }
        dyf_network* n = nullptr;
        if (int rc = report(dyf_load(weights.c_str(), &n), "eval")) return rc;
        dyf_eval_options o;
        dyf_eval_options_init(&o);
        o.metric = metric.c_str();
        o.n_max = eval_n_max.value_or(0);
        o.ood_factor = ood;
        o.seed = eval_seed.value_or(0);
        if (eq->count()) {
            o.q = eval_proc.q;
            o.r = eval_proc.r;
        }
        o.pi_path = eval_proc.pi.empty() ? nullptr : eval_proc.pi.c_str();
        char* json = nullptr;
        const int rc = report(dyf_eval(n, data.c_str(), &o, out.empty() ? nullptr : out.c_str(), &json), "eval");
        dyf_free(n);
        print_and_free(json);
        return rc;
    }

    if (ver->parsed()) {
        char* json = nullptr;
        int pass = 0;
        if (int rc = report(dyf_verify(suite.c_str(), k, n_max, verify_seed, &json, &pass), "verify")) return rc;
        std::printf("%s\n", json);
        const bool saved = out.empty() || write_text(out, json);
        dyf_string_free(json);
        if (!saved) {
            std::fprintf(stderr, "dyckformer: verify: cannot write '%s'\n", out.c_str());
            return kFailure;
        }
        return pass ? 0 : kFailure;
    }

    if (cv->parsed()) {
        dyf_network* n = nullptr;
        if (int rc = report(dyf_load(weights.c_str(), &n), "convert")) return rc;
        dyf_network* c = nullptr;
        int rc = report(dyf_convert(n, to.c_str(), &c), "convert");
        if (rc == 0) rc = report(dyf_save(c, out.c_str()), "convert");
        dyf_free(c);
        dyf_free(n);
        return rc;
    }

    if (inf->parsed()) {
        dyf_network* n = nullptr;
        if (int rc = report(dyf_load(weights.c_str(), &n), "info")) return rc;
        char* json = nullptr;
        const int rc = report(dyf_info(n, &json), "info");
        dyf_free(n);
        print_and_free(json);
        return rc;
    }
    return kUsage;
}
