#ifndef DYCKFORMER_H
#define DYCKFORMER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define DYF_API __attribute__((visibility("default")))
#else
#define DYF_API
#endif

typedef enum {
    DYF_OK = 0,
    DYF_ERR_ARG = 1,      /* invalid argument or option */
    DYF_ERR_DOMAIN = 2,   /* input outside what the network accepts */
    DYF_ERR_IO = 3,       /* file could not be read or written */
    DYF_ERR_SCHEMA = 4,   /* malformed weight, dataset or pi file */
    DYF_ERR_INTERNAL = 5
} dyf_status;

typedef enum {
    DYF_ATTN_PER_CONSTRUCTION = 0, /* counting layers softmax, selection layers hardmax */
    DYF_ATTN_HARDMAX = 1,          /* same network as per-construction */
    DYF_ATTN_SOFTMAX = 2           /* selection layers softmax with derived constants */
} dyf_attn;

typedef struct dyf_network dyf_network;

/* Message of the last failed call on this thread; empty after success. */
DYF_API const char* dyf_last_error(void);
DYF_API const char* dyf_version(void);
/* Strings returned through char** out-parameters are released with this. */
DYF_API void dyf_string_free(char* s);

typedef struct {
    double q, r;               /* process parameters of generator tasks */
    const char* pi_path;       /* JSON pi file or NULL for uniform */
    int n_max;                 /* longest supported input */
    dyf_attn attn;
    double c0;                 /* generator output constant; 0 keeps the default */
} dyf_build_options;

DYF_API void dyf_build_options_init(dyf_build_options* o);
/* task: dyck-rec, dyck-gen, shuffle-rec, shuffle-gen, dyck-rec-nobos, dyck-gen-nobos */
DYF_API dyf_status dyf_build(const char* task, int k, const dyf_build_options* o, dyf_network** out);
DYF_API dyf_status dyf_load(const char* path, dyf_network** out);
DYF_API dyf_status dyf_save(const dyf_network* n, const char* path);
DYF_API void dyf_free(dyf_network* n);

/* Metadata, channel map, block roles and constants as JSON. */
DYF_API dyf_status dyf_info(const dyf_network* n, char** json_out);
DYF_API dyf_status dyf_task(const dyf_network* n, const char** task_out, int* k_out);

/* Token ids: open t = t-1, close t = k+t-1, BOS = 2k, EOS = 2k+1.
   Tokens are fed as given; no-BOS networks expect no BOS. */
DYF_API dyf_status dyf_recognize(const dyf_network* n, const int* tokens, size_t len, int* accept_out, double* margin_out);
/* Writes the 2k+2 probabilities after the last token. */
DYF_API dyf_status dyf_next_distribution(const dyf_network* n, const int* tokens, size_t len, double* out, size_t out_len);

/* to: ln-ffn, qk-rmsln, qk-ln */
DYF_API dyf_status dyf_convert(const dyf_network* n, const char* to, dyf_network** out);

typedef struct {
    const char* lang;     /* dyck or shuffle */
    int k;
    double q, r;
    const char* pi_path;  /* NULL for uniform */
    int n_max;
    double ood_factor;
    int count;
    uint64_t seed;
    int test_split;       /* nonzero: sequences may run to floor(ood_factor * n_max) */
} dyf_data_options;

DYF_API void dyf_data_options_init(dyf_data_options* o);
DYF_API dyf_status dyf_generate_dataset(const dyf_data_options* o, const char* out_path);

typedef struct {
    const char* metric;   /* tv, acc-closed or recognition */
    int n_max;            /* 0 takes the network's value */
    double ood_factor;
    uint64_t seed;        /* negatives of the recognition metric */
    double q, r;          /* process for tv when the weights carry none; q < 0 means unset */
    const char* pi_path;
} dyf_eval_options;

DYF_API void dyf_eval_options_init(dyf_eval_options* o);
/* Metrics JSON; written to out_path when it is not NULL. */
DYF_API dyf_status dyf_eval(const dyf_network* n, const char* data_path, const dyf_eval_options* o, const char* out_path,
                            char** json_out);

/* suite: lang, recov, channels, recognition, generation, pseudo-bos, conversions, all */
DYF_API dyf_status dyf_verify(const char* suite, int k, int n_max, uint64_t seed, char** json_out, int* all_pass_out);

#ifdef __cplusplus
}
#endif

#endif
