#pragma once
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lang_core.hpp"
#include "transformer.hpp"

namespace dyf {

enum class Task { DyckRec, DyckGen, ShuffleRec, ShuffleGen, DyckRecNoBos, DyckGenNoBos };

std::string task_name(Task t);
Task parse_task(const std::string& s);  // throws std::invalid_argument
bool is_generator(Task t);
bool uses_bos(Task t);
Lang task_lang(Task t);

// Free constants of the constructions. Zero means "derive" for the selection constants.
struct ConstructionParams {
    double a = 0.0;
    double C1_4 = 0.0, C2_4 = 0.0;      // recognizer depth-selection layer
    double C1_5 = 0.0;                  // recognizer prefix-check layer
    double gen_C1 = 0.0, gen_C2 = 0.0;  // generator selection layer
    double C_shift = 0.0;               // no-BOS shift layer
    double eps_3 = 0.0;                 // generator indicator gap; 0 -> min(sin theta(1), 1e-2) / 2
    double C0_gen = 12.0;
    double eps_q = 1.0;                 // decision band of q_i
    double C_F = 64.0;                  // framing attention
    double C3_shuffle = 32.0;
    double eps_recov = 1.0 / 32.0;
    double shuffle_tv = 1e-3;           // shuffle generator TV target
    double target_weight = 0.8;
    double gen_log_tail = -40.0;        // log off-target mass for generator and shift layers
    int n_max = 256;
    bool softmax_selection = false;     // selection layers in softmax mode (recognizer uses the recovering FFN)
};

// Throws std::invalid_argument; expects resolved (nonzero) constants.
void validate_params(const ConstructionParams& p, int k);

struct BuiltNetwork {
    Task task = Task::DyckRec;
    int k = 1;
    Model model;
    Head head;
    ConstructionParams params;
    std::optional<GenParams> gen;
    std::vector<std::string> channels;       // name of each residual dimension
    std::map<std::string, double> constants;  // derived constants, for metadata and tests
    std::vector<std::string> roles;           // one per block
};

int type_bits(int k);                       // L = max(2, ceil(log2 k))
Vec type_code(int k, int t);                // +-1 code of type t, length L
double theta(double d, double a);           // atan(d / e^a)
std::size_t channel(const BuiltNetwork& n, const std::string& name);  // throws std::out_of_range

// Staircase with plateaus 0, 1, 2; eps in (0, 1/20].
double recov(double y, double eps);

// Worst-case log of (off-target mass / target mass) for a depth-selection layer,
// over every query position < n_max and every admissible target.
// generator = true drops the open bonus and lets the query be its own target.
// Both stop early, returning a value above stop_above, once that is certain.
double depth_selection_worst_log_ratio(int n_max, double a, double C1, double C2, bool generator,
                                       double stop_above = HUGE_VAL);
double shift_worst_log_ratio(int n_max, double a, double C, double stop_above = HUGE_VAL);
double min_positive_q(int k, bool recovered);

ConstructionParams select_constants(int k, int n_max, double target_weight = 0.8);
// Fill zero constants from select_constants and defaults; validates.
ConstructionParams resolve_params(int k, ConstructionParams p);

BuiltNetwork build_dyck_recognizer(int k, const ConstructionParams& p);
BuiltNetwork build_dyck_generator(int k, const GenParams& g, const ConstructionParams& p);
BuiltNetwork build_shuffle_recognizer(int k, const ConstructionParams& p);
BuiltNetwork build_shuffle_generator(int k, const GenParams& g, const ConstructionParams& p);
BuiltNetwork build_dyck_recognizer_nobos(int k, const ConstructionParams& p);
BuiltNetwork build_dyck_generator_nobos(int k, const GenParams& g, const ConstructionParams& p);
BuiltNetwork build(Task t, int k, const std::optional<GenParams>& g, const ConstructionParams& p);

// Pseudo starting signal: uniform attention then a norm-threshold FFN.
struct PseudoBosSpec {
    std::vector<std::pair<std::size_t, double>> subspace;  // (channel, weight); weighted rows have constant norm R
    std::vector<std::size_t> mean;                         // one scratch channel per subspace entry
    std::size_t one = 0, out = 0;
    double R = 1.0;
    int n_max = 256;
    double eps = 0.0;  // 0 -> largest power of two below the separation bound
};
Block build_pseudo_bos_block(std::size_t d_model, const PseudoBosSpec& s);
double pseudo_bos_eps(double R, int n_max);

// Shuffle generator masking constant for a TV target.
double shuffle_gen_constant(const GenParams& g, double tv_target);

// Input sequence as the network sees it (no-BOS tasks drop the leading BOS).
Seq network_input(Task t, const Alphabet& A, const Seq& framed);

}  // namespace dyf
