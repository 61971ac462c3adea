#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "arise_forge/emitter.hpp"
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

std::vector<ScoredPattern> demo_selection() {
    ProgramModel m = load_listing1();
    GenConfig cfg{9, LivenessMode::paper, 2, false};
    auto cands = generate(m, cfg);
    SelConfig scfg;
    return select(cands, m, nullptr, scfg, {LivenessMode::paper, false});
}

}  // namespace

TEST_CASE("opcode assignment walks custom majors then minor indices") {
    CandidatePattern p;
    p.input_slots = 2;

    std::vector<ScoredPattern> sixteen(16, {p, 1});
    auto layouts = assign_opcodes(sixteen, 9);
    REQUIRE(layouts.size() == 16);
    std::set<std::pair<uint32_t, int>> points;
    for (const auto& l : layouts) points.insert({l.major(), l.minor_index()});
    CHECK(points.size() == 16);
    CHECK(layouts[0].major() == 0b0001011);
    CHECK(layouts[0].minor_index() == 0);
    CHECK(layouts[4].major() == 0b0001011);  // fifth pattern: custom-0, minor 1
    CHECK(layouts[4].minor_index() == 1);
    CHECK(layouts[5].major() == 0b0101011);

    std::vector<ScoredPattern> one(1, {p, 1});
    CHECK(assign_opcodes(one, 9)[0].major() == 0b0001011);

    std::vector<ScoredPattern> too_many(17, {p, 1});
    CHECK_THROWS_AS(assign_opcodes(too_many, 9), std::logic_error);
}

TEST_CASE("seven opcode bits leave no minor field") {
    CandidatePattern p;
    p.input_slots = 1;
    auto layouts = assign_opcodes({{p, 1}, {p, 1}, {p, 1}, {p, 1}}, 7);
    REQUIRE(layouts.size() == 4);
    for (const auto& l : layouts) {
        CHECK(l.minor_index() == 0);
        CHECK(l.total_bits() == 32);
    }
    CHECK(layouts[3].major() == 0b1111011);
    std::vector<ScoredPattern> five(5, {p, 1});
    CHECK_THROWS_AS(assign_opcodes(five, 7), std::logic_error);
}

TEST_CASE("the demo emits the documented encoding and behavior") {
    auto selected = demo_selection();
    REQUIRE(selected.size() == 2);
    REQUIRE(selected[0].pattern.name == "xori_or_sltu");
    auto layouts = assign_opcodes(selected, 9);
    auto entries = make_emit_entries(selected, layouts);
    CHECK(entries[0].coredsl_name == "XORI_OR_SLTU");
    CHECK(entries[1].coredsl_name == "ADD_ADD");

    CHECK(encoding_string(layouts[0], 1) ==
          "imm[2:0] :: rs3[4:0] :: rs2[4:0] :: rs1[4:0] :: rd[4:0] :: 0b00 :: 0b0001011");
    CHECK(encoding_string(layouts[1], 0) ==
          "0b000 :: rs3[4:0] :: rs2[4:0] :: rs1[4:0] :: rd[4:0] :: 0b00 :: 0b0101011");

    std::string text = emit_coredsl(entries, "GeneratedISE");
    CHECK(text.find("InstructionSet GeneratedISE extends RV32I {") == 0);
    CHECK(text.find("XORI_OR_SLTU {") != std::string::npos);
    CHECK(text.find("encoding: imm[2:0] :: rs3[4:0] :: rs2[4:0] :: rs1[4:0] :: rd[4:0] :: 0b00 :: "
                    "0b0001011;") != std::string::npos);
    CHECK(text.find("unsigned<32> tmp_0 = (X[rs1] ^ (unsigned<32>)((signed<3>)imm));") !=
          std::string::npos);
    CHECK(text.find("unsigned<32> tmp_1 = (X[rs2] | tmp_0);") != std::string::npos);
    CHECK(text.find("if (rd != 0) {") != std::string::npos);
    CHECK(text.find("X[rd] = ((X[rs3] < tmp_1) ? 1 : 0);") != std::string::npos);
    CHECK(text.find("assembly: \"{name(rd)}, {name(rs1)}, {name(rs2)}, {name(rs3)}, {imm}\";") !=
          std::string::npos);

    // emission is a pure function of its inputs
    CHECK(emit_coredsl(entries, "GeneratedISE") == text);
}

TEST_CASE("an empty selection emits an empty instructions block") {
    std::string text = emit_coredsl({}, "EmptySet");
    CHECK(text ==
          "InstructionSet EmptySet extends RV32I {\n"
          "    instructions {\n"
          "    }\n"
          "}\n");
}

TEST_CASE("name collisions get numeric suffixes") {
    // the two functions hold add_xor twins whose xor operands are swapped
    ProgramModel m = parse_disassembly(
        "00010000 <f1>:\n"
        "   10000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   10004:\t00c2c333\txor\tt1,t0,a2\n"
        "00020000 <f2>:\n"
        "   20000:\t00b502b3\tadd\tt0,a0,a1\n"
        "   20004:\t00564333\txor\tt1,a2,t0\n");
    auto cands = generate(m, GenConfig{9, LivenessMode::strict, 2, false});
    // two structurally different add_xor patterns exist
    std::vector<ScoredPattern> same;
    for (const auto& c : cands)
        if (c.name == "add_xor") same.push_back({c, 1});
    REQUIRE(same.size() == 2);
    auto entries = make_emit_entries(same, assign_opcodes(same, 9));
    CHECK(entries[0].coredsl_name == "ADD_XOR");
    CHECK(entries[1].coredsl_name == "ADD_XOR_2");
}

TEST_CASE("emitted encodings round-trip and cover distinct opcode points") {
    for (uint64_t seed = 400; seed < 420; ++seed) {
        test_support::FuzzProgram fp = test_support::make_fuzz_program(seed, 60, 200);
        ProgramModel m = parse_disassembly(fp.disassembly);
        TraceProfile t = parse_trace(fp.trace, m);
        auto cands = generate(m, GenConfig{9, LivenessMode::strict, 2, false});
        SelConfig cfg;
        cfg.metric = MetricKind::dynamic_count;
        auto picked = select(cands, m, &t, cfg, {LivenessMode::strict, false});
        auto layouts = assign_opcodes(picked, 9);
        std::set<std::pair<uint32_t, int>> points;
        for (size_t i = 0; i < layouts.size(); ++i) {
            CHECK(layouts[i].total_bits() == 32);
            std::string enc = encoding_string(layouts[i], picked[i].pattern.imm_fields.size());
            auto back = parse_encoding(enc, 9, picked[i].pattern.imm_fields.size());
            REQUIRE(back.has_value());
            CHECK(*back == layouts[i]);
            points.insert({layouts[i].major(), layouts[i].minor_index()});
        }
        CHECK(points.size() == layouts.size());
    }
}

TEST_CASE("multiply/divide constituents render their full guard expressions") {
    ProgramModel m = parse_disassembly(
        "00010000 <f>:\n"
        "   10000:\t02b502b3\tmul\tt0,a0,a1\n"
        "   10004:\t02c2d333\tdivu\tt1,t0,a2\n");
    auto cands = generate(m, GenConfig{9, LivenessMode::strict, 2, true});
    REQUIRE(cands.size() == 1);
    std::vector<ScoredPattern> sel{{cands[0], 1}};
    auto entries = make_emit_entries(sel, assign_opcodes(sel, 9));
    std::string text = emit_coredsl(entries, "MSet");
    CHECK(text.find("MUL_DIVU") != std::string::npos);
    CHECK(text.find("unsigned<32> tmp_0 = (X[rs1] * X[rs2]);") != std::string::npos);
    CHECK(text.find("X[rd] = ((X[rs3] == 0) ? 0xffffffff : (tmp_0 / X[rs3]));") !=
          std::string::npos);
}

TEST_CASE("percentages render with two decimals") {
    ReportDocument doc;
    doc.mode = "evaluate";
    doc.asm_name = "x.dis";
    doc.totals.static_baseline = 1000;
    doc.totals.static_rewritten = 985;  // 15 bytes saved
    std::string text = emit_report(doc);
    CHECK(text.find("\"static_bytes_saved\": 15,") != std::string::npos);
    CHECK(text.find("\"static_pct\": 1.50") != std::string::npos);
    CHECK(text.find("\"dynamic_size_pct\": null") != std::string::npos);
    CHECK(text.find("\"dynamic_count_pct\": null") != std::string::npos);
    CHECK(text.find("\"dynamic_bytes\": null") != std::string::npos);
    CHECK(emit_report(doc) == text);
}

TEST_CASE("reports are valid JSON with the demo run's values") {
    auto selected = demo_selection();
    auto layouts = assign_opcodes(selected, 9);
    auto entries = make_emit_entries(selected, layouts);
    ProgramModel m = load_listing1();
    MatchContext ctx{LivenessMode::paper, false};
    RewrittenProgram rw = rewrite(m, selected, ctx);

    ReportDocument doc;
    doc.mode = "generate";
    doc.asm_name = "listing1.dis";
    doc.target = MetricKind::static_size;
    doc.liveness = LivenessMode::paper;
    doc.sel_count = 16;
    doc.totals = recount(m, rw, nullptr);
    for (size_t i = 0; i < selected.size(); ++i) {
        ReportCandidate rc;
        rc.rank = static_cast<int>(i);
        rc.name = selected[i].pattern.name;
        rc.coredsl_name = entries[i].coredsl_name;
        rc.pattern = &selected[i].pattern;
        rc.signature = pattern_signature(selected[i].pattern);
        rc.encoding = encoding_string(layouts[i], selected[i].pattern.imm_fields.size());
        rc.improvement_static = selected[i].improvement;
        for (const auto& rep : rw.log)
            if (rep.rank == static_cast<int>(i))
                rc.matches.push_back({m.functions[0].name, rep.site.block, rep.site.start,
                                      rep.site.length, rep.site.exec_count});
        doc.candidates.push_back(std::move(rc));
    }
    std::string text = emit_report(doc);

    CHECK(text.find("\"name\": \"xori_or_sltu\"") != std::string::npos);
    CHECK(text.find("\"match_count\": 1") != std::string::npos);
    CHECK(text.find("\"static_size\": 6") != std::string::npos);
    CHECK(text.find("\"signature\": \"rd, rs1, rs2, rs3, imm[2:0]\"") != std::string::npos);
    CHECK(text.find("\"improvement_scan_bound\": \"index + size(pattern) <= size(instructions)\"") !=
          std::string::npos);

    // parses as JSON and carries the totals the oracle recounted
    auto j = nlohmann::json::parse(text);
    CHECK(j["totals"]["static_bytes_saved"].get<int64_t>() == 10);  // 6 + 4
    CHECK(j["selected"].size() == 2);
    CHECK(j["selected"][0]["ops"].size() == 3);
}
