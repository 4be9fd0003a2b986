#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "debate_forge/tree_io.hpp"

#ifndef DEBATE_FORGE_FIXTURE_DIR
#error "DEBATE_FORGE_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace testing_support {

inline std::string fixture_path(const std::string& name) {
    return std::string(DEBATE_FORGE_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Thesis R; A=Pro(R); B=Con(A); C=Pro(A); D=Pro(B); E=Con(D).
inline debate_forge::DebateTree f1() {
    return debate_forge::load_tree(read_file(fixture_path("f1.json")),
                                   debate_forge::TreeFormat::CanonicalJson);
}

inline debate_forge::DebateTree kialo_fixture(const std::string& stem) {
    return debate_forge::load_tree(read_file(fixture_path(stem + ".kialo.txt")),
                                   debate_forge::TreeFormat::KialoExport, stem);
}

// F1 plus the two larger Kialo exports.
inline std::vector<debate_forge::DebateTree> fixture_trees() {
    return {f1(), kialo_fixture("religion"), kialo_fixture("remote_work")};
}

}  // namespace testing_support
