#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "property_checks.hpp"

TEST_CASE("property suite") {
    for (const auto& result : plam_checks::run_property_suite()) {
        INFO(result.name << ": " << result.detail);
        CHECK(result.pass);
    }
}
