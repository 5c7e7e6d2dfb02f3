#pragma once

#include <string>
#include <vector>

#include "hazebridge/common.hpp"

namespace hazebridge {

// Runtime property suites behind the `oracle-check` CLI verb: bridge
// marginals against the closed-form law, Sinkhorn against exhaustive
// enumeration, and finite-difference checks of every loss term.
struct SelfCheckReport {
    struct Item {
        std::string name;
        bool pass = false;
        std::string detail;
    };
    std::vector<Item> items;

    bool all_pass() const {
        for (const auto& i : items)
            if (!i.pass) return false;
        return true;
    }
};

SelfCheckReport run_oracle_checks(uint64_t seed);

}  // namespace hazebridge
