#include <doctest.h>

#include <fstream>
#include <sstream>

#include "arise_forge/selector.hpp"
#include "support/fuzz.hpp"

using namespace arise_forge;

namespace {

ProgramModel load_listing1() {
    std::ifstream in(std::string(ARISE_FORGE_DATA_DIR) + "/listing1.dis", std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_disassembly(os.str());
}

CandidatePattern teal_pattern(const ProgramModel& m) {
    GenConfig cfg{9, LivenessMode::paper, 2, false};
    for (auto& c : generate(m, cfg))
        if (c.name == "xori_or_sltu") return c;
    FAIL("xori_or_sltu not generated");
    return {};
}

}  // namespace

TEST_CASE("sel_count follows 2^(opcode_bits-7) * 4") {
    SelConfig cfg;
    cfg.opcode_bits = 9;
    CHECK(cfg.sel_count() == 16);
    cfg.opcode_bits = 8;
    CHECK(cfg.sel_count() == 8);
    cfg.opcode_bits = 7;
    CHECK(cfg.sel_count() == 4);
    cfg.opcode_bits = 6;
    CHECK_THROWS_AS(cfg.sel_count(), ConfigError);
}

TEST_CASE("the teal slice matches its pattern in paper mode and binds slots") {
    ProgramModel m = load_listing1();
    CandidatePattern teal = teal_pattern(m);
    const BasicBlock& block = m.functions[0].blocks[0];

    auto site = match_at(block, 2, teal, {LivenessMode::paper, false});
    REQUIRE(site.has_value());
    CHECK(site->length == 3);
    REQUIRE(site->slot_regs.size() == 4);
    CHECK(site->slot_regs[0] == *parse_reg("s3"));    // rd
    CHECK(site->slot_regs[1] == *parse_reg("a5"));    // rs1
    CHECK(site->slot_regs[2] == *parse_reg("a0"));    // rs2
    CHECK(site->slot_regs[3] == *parse_reg("zero"));  // rs3
    REQUIRE(site->imm_values.size() == 1);
    CHECK(site->imm_values[0] == 1);

    // a0 is read by the trailing addi, so strict mode refuses the site
    CHECK_FALSE(match_at(block, 2, teal, {LivenessMode::strict, false}).has_value());
}

TEST_CASE("immediates must fit the field width") {
    ProgramModel m = load_listing1();
    CandidatePattern teal = teal_pattern(m);
    ProgramModel wide = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t01f7c593\txori\ta1,a5,0x1f\n"
        "   10004:\t8d4d\tc.or\ta0,a1\n"
        "   10006:\t00a039b3\tsltu\ts3,zero,a0\n");
    const BasicBlock& block = wide.functions[0].blocks[0];
    // 0x1f needs five bits; the field holds three
    REQUIRE(teal.imm_fields[0].width == 3);
    CHECK_FALSE(match_at(block, 0, teal, {LivenessMode::paper, false}).has_value());
}

TEST_CASE("compressed and uncompressed forms match the same pattern") {
    // same dataflow as the teal group, with the c.or spelled as a plain or
    ProgramModel m = load_listing1();
    CandidatePattern teal = teal_pattern(m);
    ProgramModel plain = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t0017c593\txori\ta1,a5,0x1\n"
        "   10004:\t00b56533\tor\ta0,a0,a1\n"
        "   10008:\t00a039b3\tsltu\ts3,zero,a0\n");
    auto site = match_at(plain.functions[0].blocks[0], 0, teal, {LivenessMode::paper, false});
    REQUIRE(site.has_value());
    CHECK(site->slot_regs[2] == *parse_reg("a0"));
}

TEST_CASE("improvement on the demo block") {
    ProgramModel m = load_listing1();
    CandidatePattern teal = teal_pattern(m);
    const BasicBlock& block = m.functions[0].blocks[0];
    MatchContext paper{LivenessMode::paper, false};

    // slice bytes 4+2+4 = 10 vs a 4-byte replacement
    CHECK(improvement(block, teal, MetricKind::static_size, nullptr, paper) == 6);

    TraceProfile t = parse_trace("10008,100\n", m);
    CHECK(improvement(block, teal, MetricKind::dynamic_count, &t, paper) == 200);  // 100 * (3-1)
    CHECK(improvement(block, teal, MetricKind::dynamic_size, &t, paper) == 600);   // 100 * (10-4)

    // strict mode finds no site here
    CHECK(improvement(block, teal, MetricKind::static_size, nullptr,
                      {LivenessMode::strict, false}) == 0);
}

TEST_CASE("a pattern that matches nowhere scores zero") {
    ProgramModel m = load_listing1();
    CandidatePattern teal = teal_pattern(m);
    ProgramModel other = parse_disassembly("00010000 <f>:\n   10000:\t00b502b3\tadd\tt0,a0,a1\n");
    CHECK(improvement(other.functions[0].blocks[0], teal, MetricKind::static_size, nullptr,
                      {LivenessMode::paper, false}) == 0);
}

TEST_CASE("dynamic metrics without a trace are a configuration error") {
    ProgramModel m = load_listing1();
    CandidatePattern teal = teal_pattern(m);
    CHECK_THROWS_AS(improvement(m.functions[0].blocks[0], teal, MetricKind::dynamic_count, nullptr,
                                {LivenessMode::paper, false}),
                    ConfigError);
}

TEST_CASE("distinct slots may bind the same register at a site") {
    // pattern lifted from distinct sources
    ProgramModel origin = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   10004:\t00c2c333\txor\tt1,t0,a2\n");
    GenConfig cfg{9, LivenessMode::strict, 2, false};
    auto cands = generate(origin, cfg);
    REQUIRE(cands.size() == 1);
    const CandidatePattern& pat = cands[0];

    ProgramModel site = parse_disassembly(
        "00010000 <g>:\n"
        "   10000:\t00a502b3\tadd\tt0,a0,a0\n"
        "   10004:\t00a2c333\txor\tt1,t0,a0\n");
    auto m = match_at(site.functions[0].blocks[0], 0, pat, {LivenessMode::strict, false});
    REQUIRE(m.has_value());
    CHECK(m->slot_regs[1] == *parse_reg("a0"));
    CHECK(m->slot_regs[2] == *parse_reg("a0"));
    CHECK(m->slot_regs[3] == *parse_reg("a0"));
}

TEST_CASE("a slot generalized from equal registers will not split") {
    // both reads of op0 bound one slot at the origin
    ProgramModel origin = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t00a502b3\tadd\tt0,a0,a0\n"
        "   10004:\t00c2c333\txor\tt1,t0,a2\n");
    GenConfig cfg{9, LivenessMode::strict, 2, false};
    auto cands = generate(origin, cfg);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].input_slots == 2);  // a0 once, a2 once

    ProgramModel site = parse_disassembly(
        "00010000 <g>:\n"
        "   10000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   10004:\t00c2c333\txor\tt1,t0,a2\n");
    CHECK_FALSE(
        match_at(site.functions[0].blocks[0], 0, cands[0], {LivenessMode::strict, false}).has_value());
}

TEST_CASE("register versions are tracked through redefinition") {
    ProgramModel origin = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   10004:\t00c2c333\txor\tt1,t0,a2\n");
    GenConfig cfg{9, LivenessMode::strict, 2, false};
    CandidatePattern pat = generate(origin, cfg).at(0);

    // the site reuses a0 as the intermediate: op1 must read the new version
    ProgramModel site_ok = parse_disassembly(
        "00010000 <g>:\n"
        "   10000:\t00b50533\tadd\ta0,a0,a1\n"
        "   10004:\t00c54333\txor\tt1,a0,a2\n");
    CHECK(match_at(site_ok.functions[0].blocks[0], 0, pat, {LivenessMode::strict, false}).has_value());

    // here op1 reads a register the slice never defined where the pattern
    // expects the intermediate
    ProgramModel site_bad = parse_disassembly(
        "00010000 <g>:\n"
        "   10000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   10004:\t00c5c333\txor\tt1,a1,a2\n");
    CHECK_FALSE(
        match_at(site_bad.functions[0].blocks[0], 0, pat, {LivenessMode::strict, false}).has_value());
}

TEST_CASE("a zero destination mid-slice cannot stand in for an intermediate") {
    ProgramModel origin = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   10004:\t00c2c333\txor\tt1,t0,a2\n");
    GenConfig cfg{9, LivenessMode::strict, 2, false};
    CandidatePattern pat = generate(origin, cfg).at(0);

    // the add writes zero, so the xor's zero read is the constant, not t0
    ProgramModel site = parse_disassembly(
        "00010000 <g>:\n"
        "   10000:\t00b50033\tadd\tzero,a0,a1\n"
        "   10004:\t00c04333\txor\tt1,zero,a2\n");
    CHECK_FALSE(
        match_at(site.functions[0].blocks[0], 0, pat, {LivenessMode::strict, false}).has_value());
}

TEST_CASE("greedy scanning never overlaps matches") {
    ProgramModel m = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t00b545b3\txor\ta1,a0,a1\n"
        "   10004:\t00b545b3\txor\ta1,a0,a1\n"
        "   10008:\t00b545b3\txor\ta1,a0,a1\n");
    GenConfig cfg{9, LivenessMode::strict, 2, false};
    auto cands = generate(m, cfg);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].name == "xor_xor");
    // three instructions hold one non-overlapping two-op match, not two
    CHECK(improvement(m.functions[0].blocks[0], cands[0], MetricKind::static_size, nullptr,
                      {LivenessMode::strict, false}) == 4);
}

TEST_CASE("matching stops at block boundaries") {
    ProgramModel m = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t0017c593\txori\ta1,a5,0x1\n"
        "   10004:\t00b50463\tbeq\ta0,a1,0x10010\n"
        "   10008:\t8d4d\tc.or\ta0,a1\n"
        "   1000a:\t00a039b3\tsltu\ts3,zero,a0\n");
    ProgramModel demo = load_listing1();
    CandidatePattern teal = teal_pattern(demo);
    int64_t total = 0;
    for (const auto& f : m.functions)
        for (const auto& b : f.blocks)
            total += improvement(b, teal, MetricKind::static_size, nullptr,
                                 {LivenessMode::paper, false});
    CHECK(total == 0);
}

TEST_CASE("select drops non-improving candidates and ranks the rest") {
    ProgramModel m = parse_disassembly(
        "00010000 <f1>:\n"
        "   10000:\t0017c593\txori\ta1,a5,0x1\n"
        "   10004:\t8d4d\tc.or\ta0,a1\n"
        "   10006:\t00a039b3\tsltu\ts3,zero,a0\n"
        "00020000 <f2>:\n"
        "   20000:\t8d6d\tc.and\ta0,a1\n"
        "   20002:\t8d51\tc.or\ta0,a2\n");
    GenConfig gcfg{9, LivenessMode::strict, 2, false};
    auto cands = generate(m, gcfg);
    REQUIRE(cands.size() == 2);  // xori_or_sltu and the all-compressed and_or

    SelConfig scfg;
    scfg.metric = MetricKind::static_size;
    auto picked = select(cands, m, nullptr, scfg, {LivenessMode::strict, false});
    REQUIRE(picked.size() == 1);  // and_or replaces 4 bytes with 4: improvement 0, dropped
    CHECK(picked[0].pattern.name == "xori_or_sltu");
    CHECK(picked[0].improvement == 6);
}

TEST_CASE("rank_and_truncate drops non-positive scores and caps the list") {
    CandidatePattern a, b, c;
    a.name = "a";
    b.name = "b";
    c.name = "c";
    auto ranked = rank_and_truncate({{a, 6}, {b, 0}, {c, -2}}, 16);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].pattern.name == "a");

    std::vector<ScoredPattern> five{{a, 3}, {b, 9}, {c, 9}, {a, 1}, {b, 2}};
    auto top = rank_and_truncate(five, 4);
    REQUIRE(top.size() == 4);
    CHECK(top[0].pattern.name == "b");  // ties keep candidate order
    CHECK(top[1].pattern.name == "c");
    CHECK(top[2].improvement == 3);
    CHECK(top[3].improvement == 2);
}

TEST_CASE("selection output is capped by sel_count and sorted") {
    for (uint64_t seed = 30; seed < 45; ++seed) {
        test_support::FuzzProgram fp = test_support::make_fuzz_program(seed, 80, 200);
        ProgramModel m = parse_disassembly(fp.disassembly);
        TraceProfile t = parse_trace(fp.trace, m);
        auto cands = generate(m, GenConfig{8, LivenessMode::strict, 2, false});
        SelConfig cfg;
        cfg.opcode_bits = 8;
        cfg.metric = MetricKind::dynamic_size;
        auto picked = select(cands, m, &t, cfg, {LivenessMode::strict, false});
        CHECK(picked.size() <= 8);
        for (size_t i = 0; i + 1 < picked.size(); ++i)
            CHECK(picked[i].improvement >= picked[i + 1].improvement);
        for (const auto& s : picked) CHECK(s.improvement > 0);
    }
}
