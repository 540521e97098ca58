// SPDX-License-Identifier: Apache-2.0
#include <set>

#include "doctest.h"
#include "support/gradcheck.hpp"

namespace {

void check_reports(const std::vector<gradcheck::GroupReport>& reports) {
    for (const auto& r : reports) {
        CAPTURE(r.group);
        CAPTURE(r.worst);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_error < 1e-3);
    }
}

}  // namespace

TEST_CASE("render gradients of every learnable group match central differences") {
    const auto reports = gradcheck::check_render_gradients();
    std::set<std::string> groups;
    for (const auto& r : reports) groups.insert(r.group);
    for (const char* g : {"position", "rotation", "log_scale", "opacity", "albedo", "roughness", "f0", "light_offset",
                          "light_intensity", "light_atten", "spot", "mlp_weight", "mlp_bias", "hash_table"})
        CHECK_MESSAGE(groups.count(g) == 1, g);
    check_reports(reports);
}

TEST_CASE("render gradients without input noise or hash grid") {
    gradcheck::Options o;
    o.seed = 21;
    o.with_noise = false;
    o.with_hash = false;
    check_reports(gradcheck::check_render_gradients(o));
}

TEST_CASE("loss gradients match central differences") { check_reports(gradcheck::check_loss_gradients()); }
