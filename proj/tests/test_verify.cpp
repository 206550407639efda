#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "verify.hpp"

using namespace dyf;

namespace {

void require_all(const std::vector<CheckResult>& rs) {
    for (const auto& r : rs) {
        INFO(r.name << ": " << r.detail);
        CHECK(r.pass);
    }
}

}  // namespace

TEST_CASE("every suite passes at k = 2") {
    for (const auto& s : suite_names()) {
        if (s == "all") continue;
        INFO(s);
        auto rs = run_suite(s, 2, 64, 7);
        CHECK_FALSE(rs.empty());
        require_all(rs);
    }
}

TEST_CASE("suite arguments") {
    CHECK_THROWS_AS(run_suite("nope", 2, 64, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_suite("recov", 0, 64, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_suite("recov", 2, 8, 1), std::invalid_argument);
}

TEST_CASE("a failing check reports instead of throwing") {
    auto r = check_generation_tv(Task::DyckGen, 2, 5, 40, 1e-30, 3);
    CHECK_FALSE(r.pass);
    CHECK(r.detail.find("max TV") != std::string::npos);
    auto bad = check_recognition_exhaustive(Task::DyckRec, 0, 2, 32);
    CHECK_FALSE(bad.pass);
    CHECK(bad.detail.find("exception") == 0);
}
