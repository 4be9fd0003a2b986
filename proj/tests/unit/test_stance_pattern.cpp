#include <catch_amalgamated.hpp>

#include "debate_forge/stance_pattern.hpp"
#include "support/oracles.hpp"

using namespace debate_forge;
constexpr auto P = Stance::Pro;
constexpr auto C = Stance::Con;

namespace {
bool accepts(const StancePattern& p, std::vector<Stance> seq) { return pattern_matches(p, seq); }
}  // namespace

TEST_CASE("contradicting response pattern", "[pattern]") {
    const auto p = compile_stance_pattern("[Con][Pro]*");
    CHECK(accepts(p, {C}));
    CHECK(accepts(p, {C, P}));
    CHECK(accepts(p, {C, P, P}));
    CHECK_FALSE(accepts(p, {P}));
    CHECK_FALSE(accepts(p, {P, C}));
    CHECK_FALSE(accepts(p, {}));
}

TEST_CASE("plus requires at least one symbol", "[pattern]") {
    const auto p = compile_stance_pattern("[Pro]+");
    CHECK_FALSE(accepts(p, {}));
    CHECK(accepts(p, {P}));
    CHECK(accepts(p, {P, P, P}));
    CHECK_FALSE(accepts(p, {P, C}));
}

TEST_CASE("multi-turn prompt accepts alternating exchanges", "[pattern]") {
    const auto p = compile_stance_pattern("[Pro|Con][Pro]*([Con][Pro]*)*");
    CHECK(accepts(p, {P, C, P, C}));
    const oracle::RegexPattern reference("[Pro|Con][Pro]*([Con][Pro]*)*");
    for (unsigned bits = 0; bits < 16; ++bits) {
        const auto seq = oracle::sequence_from_bits(bits, 4);
        CHECK(pattern_matches(p, seq) == reference(seq));
        // X Pro* (Con Pro*)* covers every non-empty sequence.
        CHECK(pattern_matches(p, seq));
    }
    CHECK_FALSE(accepts(p, {}));
}

TEST_CASE("compiled patterns agree with std::regex on every short sequence", "[pattern]") {
    const std::vector<std::string> sources{
        "[Pro|Con][Pro]*", "[Pro]+",        "[Con][Pro]*",  "[Pro|Con][Pro]*([Con][Pro]*)*",
        "([Pro][Con])+",   "([Pro]*)*[Con]", "[Con]+[Pro]+[Con]", "(([Pro]+)[Con])*[Pro]",
    };
    for (const auto& src : sources) {
        const auto p = compile_stance_pattern(src);
        const oracle::RegexPattern reference(src);
        for (std::size_t len = 0; len <= 8; ++len) {
            for (unsigned bits = 0; bits < (1u << len); ++bits) {
                const auto seq = oracle::sequence_from_bits(bits, len);
                INFO(src << " on " << oracle::letters(seq));
                CHECK(pattern_matches(p, seq) == reference(seq));
            }
        }
    }
}

TEST_CASE("syntax errors carry a position", "[pattern]") {
    const auto position_of = [](const std::string& src) -> std::size_t {
        try {
            compile_stance_pattern(src);
        } catch (const PatternSyntaxError& e) {
            return e.position();
        }
        FAIL("no syntax error for " << src);
        return 0;
    };
    CHECK(position_of("") == 0);
    CHECK(position_of("[Pro]x") == 5);
    CHECK(position_of("[Maybe]") == 0);
    CHECK(position_of("*[Pro]") == 0);
    CHECK(position_of("([Pro]") == 0);
    CHECK(position_of("[Pro])") == 5);
    CHECK(position_of("()") == 1);
}

TEST_CASE("stepping the DFA reaches a dead state", "[pattern]") {
    const auto p = compile_stance_pattern("[Con][Pro]*");
    int st = p.step(p.start(), P);
    CHECK(st == kDeadState);
    CHECK(p.step(st, C) == kDeadState);
    CHECK_FALSE(p.accepting(st));
    CHECK(p.source() == "[Con][Pro]*");
}
