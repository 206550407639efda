#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "verify.hpp"

using namespace dyf;

namespace {

struct Criterion {
    std::string name;
    double budget_seconds;  // 0 = no runtime requirement
    std::vector<CheckResult> (*run)();
};

double total_seconds(const std::vector<CheckResult>& rs) {
    double t = 0.0;
    for (const auto& r : rs) t += r.seconds;
    return t;
}

const double kGenBound8 = 2.0 * 9.0 * std::exp(-12.0);

std::vector<CheckResult> recognition() {
    return {check_recognition_exhaustive(Task::DyckRec, 1, 8, 32), check_recognition_exhaustive(Task::DyckRec, 2, 8, 32),
            check_recognition_random(Task::DyckRec, 4, 10000, 200, 256, 101),
            check_recognition_random(Task::DyckRec, 8, 10000, 200, 256, 102)};
}

std::vector<CheckResult> margin() {
    return {check_member_margin(1, 8, 0, 32, 0), check_member_margin(2, 8, 0, 32, 0), check_member_margin(4, 4, 500, 200, 103),
            check_member_margin(8, 4, 500, 200, 104)};
}

std::vector<CheckResult> generation() { return {check_generation_tv(Task::DyckGen, 8, 1000, 256, kGenBound8, 105)}; }

std::vector<CheckResult> shuffle_recognition() {
    return {check_lang_oracles(2, 8), check_recognition_exhaustive(Task::ShuffleRec, 2, 8, 32)};
}

std::vector<CheckResult> shuffle_generation() { return {check_shuffle_generation_tv(2, 500, 1e-3, 106)}; }

std::vector<CheckResult> pseudo_bos() { return {check_pseudo_bos(2, 1000, 200, 107), check_pseudo_bos(8, 1000, 200, 108)}; }

std::vector<CheckResult> no_bos() {
    return {check_recognition_exhaustive(Task::DyckRecNoBos, 1, 8, 32),
            check_recognition_exhaustive(Task::DyckRecNoBos, 2, 8, 32),
            check_recognition_random(Task::DyckRecNoBos, 4, 10000, 200, 256, 109),
            check_recognition_random(Task::DyckRecNoBos, 8, 10000, 200, 256, 110),
            check_generation_tv(Task::DyckGenNoBos, 8, 1000, 256, kGenBound8, 111),
            check_collision_rate(2, 100000, 112),
            check_collision_rate(4, 100000, 113),
            check_collision_rate(8, 100000, 114)};
}

std::vector<CheckResult> conversions() {
    return {check_conversions_random(200, 115), check_conversions_end_to_end(2, 6), check_conversions_end_to_end(4, 3)};
}

std::vector<CheckResult> recovering() { return {check_recov(), check_channels(2, 256, 300, 116), check_channels(8, 256, 300, 117)}; }

std::vector<CheckResult> dichotomy() { return {check_prop2(2, 6)}; }

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"recognition exactness", 120.0, recognition},
        {"member margin", 0.0, margin},
        {"generation TV bound", 300.0, generation},
        {"shuffle recognition", 0.0, shuffle_recognition},
        {"shuffle generation", 0.0, shuffle_generation},
        {"pseudo-BOS", 0.0, pseudo_bos},
        {"no-BOS variants", 120.0, no_bos},
        {"conversions", 0.0, conversions},
        {"recovering function and channels", 0.0, recovering},
        {"membership dichotomy", 0.0, dichotomy},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto rs = c.run();
        const double secs = total_seconds(rs);
        bool ok = !rs.empty();
        for (const auto& r : rs) ok = ok && r.pass;
        const bool in_time = c.budget_seconds == 0.0 || secs < c.budget_seconds;
        const bool pass = ok && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s %s (%.1fs", pass ? "PASS" : "FAIL", c.name.c_str(), secs);
        if (c.budget_seconds > 0.0) std::printf(", budget %.0fs", c.budget_seconds);
        std::printf(")\n");
        for (const auto& r : rs)
            std::printf("    [%s] %s: %s [%.1fs]\n", r.pass ? "ok" : "failed", r.name.c_str(), r.detail.c_str(), r.seconds);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
