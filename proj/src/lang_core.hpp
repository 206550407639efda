#pragma once
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tensor_ops.hpp"

namespace dyf {

enum class Lang { Dyck, Shuffle };
enum class Kind { Open, Close, Bos, Eos };

using Seq = std::vector<int>;

// Token ids: open_1..open_k, close_1..close_k, BOS, EOS.
struct Alphabet {
    int k = 1;

    explicit Alphabet(int k_);
    int size() const { return 2 * k + 2; }
    int open(int t) const;
    int close(int t) const;
    int bos() const { return 2 * k; }
    int eos() const { return 2 * k + 1; }
    bool valid(int id) const { return id >= 0 && id < size(); }
    Kind kind(int id) const;
    int type(int id) const;  // 1..k for brackets, 0 otherwise
    std::string name(int id) const;
    int parse(const std::string& s) const;  // throws std::invalid_argument
    Seq parse_seq(const std::string& space_separated) const;
    std::string format(const Seq& s) const;
};

struct GenParams {
    Lang lang = Lang::Dyck;
    double q = 0.5, r = 0.9;
    Vec pi, pibar;  // pibar used only for Shuffle

    static GenParams dyck(int k, double q, double r, Vec pi = {});
    static GenParams shuffle(int k, double q, double r, Vec pi = {}, Vec pibar = {});
    void validate(int k) const;  // throws std::invalid_argument
    double pi_min() const;
};

int depth(const Alphabet& A, const Seq& s);
int per_type_depth(const Alphabet& A, const Seq& s, int t);

// Prefix tests accept a trailing EOS (then they coincide with membership).
bool is_dyck_prefix(const Alphabet& A, const Seq& s);
bool is_dyck_member(const Alphabet& A, const Seq& s);
bool is_shuffle_prefix(const Alphabet& A, const Seq& s);
bool is_shuffle_member(const Alphabet& A, const Seq& s);
bool is_prefix(Lang L, const Alphabet& A, const Seq& s);
bool is_member(Lang L, const Alphabet& A, const Seq& s);

// Throws std::invalid_argument on a non-prefix.
std::vector<int> valid_close_types(Lang L, const Alphabet& A, const Seq& s);

// Exact conditional distributions over the K tokens; throw on non-prefix input
// or on a prefix that already ended with EOS.
Vec dyck_next_distribution(const Alphabet& A, const Seq& prefix, const GenParams& p);
Vec shuffle_next_distribution(const Alphabet& A, const Seq& prefix, const GenParams& p);
Vec next_distribution(const Alphabet& A, const Seq& prefix, const GenParams& p);

struct Sample {
    Seq tokens;
    bool truncated = false;
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform();  // [0, 1)
    std::size_t categorical(const Vec& p);
    std::size_t below(std::size_t n);
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// Ancestral sampling from BOS; stops at EOS or when max_tokens tokens exist.
Sample sample_sequence(const Alphabet& A, const GenParams& p, Rng& rng, std::size_t max_tokens);

// log probability of the complete string (must start with BOS and end with its only EOS);
// -inf exactly when some factor is 0.
double process_log_probability(const Alphabet& A, const Seq& s, const GenParams& p);
// eps_n = (1-r) * min{r, 1-q, q*pi_min}^n, the published bound for n body tokens.
// It is only valid when r*pi_min >= min{r, 1-q, q*pi_min}; the safe variant uses r*pi_min.
double member_probability_bound(const GenParams& p, int n);
double member_probability_bound_safe(const GenParams& p, int n);

}  // namespace dyf
