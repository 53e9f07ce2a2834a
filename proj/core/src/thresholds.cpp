#include "vstab/thresholds.hpp"

#include "vstab/errors.hpp"

#include <array>

namespace vstab {

namespace {

struct Entry {
    const char* key;
    Real Thresholds::* member;
};

constexpr std::array<Entry, 11> kEntries = {{
    {"eps_v", &Thresholds::eps_v},
    {"eps_sing", &Thresholds::eps_sing},
    {"eps_gap", &Thresholds::eps_gap},
    {"eps_g", &Thresholds::eps_g},
    {"eps_psi", &Thresholds::eps_psi},
    {"eps_xi", &Thresholds::eps_xi},
    {"eps_near", &Thresholds::eps_near},
    {"eps_alg", &Thresholds::eps_alg},
    {"eps_eig_rel", &Thresholds::eps_eig_rel},
    {"eps_complex", &Thresholds::eps_complex},
    {"lambda_tie", &Thresholds::lambda_tie},
}};

}  // namespace

void Thresholds::set(const std::string& key, Real value) {
    for (const auto& e : kEntries) {
        if (key == e.key) {
            this->*(e.member) = value;
            return;
        }
    }
    throw ParseError("unknown threshold key '" + key + "'");
}

std::map<std::string, Real> Thresholds::to_map() const {
    std::map<std::string, Real> out;
    for (const auto& e : kEntries) out[e.key] = this->*(e.member);
    return out;
}

}  // namespace vstab
