#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "arise_forge/common.hpp"
#include "arise_forge/isa_model.hpp"

namespace arise_forge {

// ---------------------------------------------------------------------------
// Program model: functions -> basic blocks -> addressed instructions
// ---------------------------------------------------------------------------

struct Operand {
    enum class Kind : uint8_t { reg, imm, other } kind = Kind::other;
    Reg reg{};
    int64_t imm = 0;     // signed 64-bit holder of a 32-bit value
    std::string text;    // verbatim token for Kind::other

    static Operand make_reg(Reg r) { return {Kind::reg, r, 0, {}}; }
    static Operand make_imm(int64_t v) { return {Kind::imm, {}, v, {}}; }
    static Operand make_other(std::string t) { return {Kind::other, {}, 0, std::move(t)}; }

    bool operator==(const Operand& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case Kind::reg: return reg == o.reg;
            case Kind::imm: return imm == o.imm;
            case Kind::other: return text == o.text;
        }
        return false;
    }
};

struct StaticInstr {
    uint32_t address = 0;
    int byte_size = 4;  // 2 or 4, from the encoding-hex width
    std::string mnemonic;
    std::vector<Operand> operands;
    std::string encoding_hex;  // 4 or 8 lowercase hex digits, kept verbatim
    std::string raw_text;      // original line; provenance only
    const OpSpec* spec = nullptr;  // nullptr: unknown mnemonic, kept non-fusable

    // raw_text and the derived spec pointer are excluded from equality
    bool operator==(const StaticInstr& o) const {
        return address == o.address && byte_size == o.byte_size && mnemonic == o.mnemonic &&
               operands == o.operands && encoding_hex == o.encoding_hex;
    }
};

struct BasicBlock {
    std::string symbol;       // owning function
    int index = 0;            // block index within the function
    std::vector<StaticInstr> instrs;

    std::string label() const { return symbol + "." + std::to_string(index); }
    uint32_t first_addr() const { return instrs.front().address; }

    bool operator==(const BasicBlock& o) const {
        return symbol == o.symbol && index == o.index && instrs == o.instrs;
    }
};

struct ProgramModel {
    struct Function {
        std::string name;
        uint32_t entry = 0;
        std::vector<BasicBlock> blocks;
        bool operator==(const Function& o) const {
            return name == o.name && entry == o.entry && blocks == o.blocks;
        }
    };
    struct InstrLoc {
        int func = 0, block = 0, index = 0;
    };

    std::vector<Function> functions;
    std::map<uint32_t, InstrLoc> addr_index;
    int unknown_mnemonic_count = 0;                // warning counter
    std::vector<std::string> unknown_mnemonics;    // distinct, sorted

    const StaticInstr* find(uint32_t addr) const {
        auto it = addr_index.find(addr);
        if (it == addr_index.end()) return nullptr;
        const auto& l = it->second;
        return &functions[l.func].blocks[l.block].instrs[l.index];
    }

    size_t instr_count() const { return addr_index.size(); }

    uint64_t total_static_bytes() const {
        uint64_t b = 0;
        for (const auto& f : functions)
            for (const auto& bb : f.blocks)
                for (const auto& i : bb.instrs) b += static_cast<uint64_t>(i.byte_size);
        return b;
    }

    bool operator==(const ProgramModel& o) const { return functions == o.functions; }
};

// Per-address execution counts; the one-to-many static->dynamic relation.
struct TraceProfile {
    std::map<uint32_t, uint64_t> counts;  // only addresses present in the program
    uint64_t total_executed = 0;          // includes unmatched entries
    uint64_t unmatched = 0;               // trace entries with no static instruction

    uint64_t count_at(uint32_t addr) const {
        auto it = counts.find(addr);
        return it == counts.end() ? 0 : it->second;
    }
};

// ---------------------------------------------------------------------------
// Normalized view of an ALU instruction: destination, register reads in
// operand order, optional immediate. Src-dest operands contribute one read.
// ---------------------------------------------------------------------------

struct NormOp {
    const OpSpec* spec = nullptr;   // the instruction's own spec
    const OpSpec* base = nullptr;   // base (uncompressed) form; semantics + caps
    Reg dest{};
    std::vector<Reg> reads;
    bool has_imm = false;
    int64_t imm = 0;
};

inline std::optional<NormOp> normalize(const StaticInstr& in) {
    if (!in.spec || in.spec->signature.empty()) return std::nullopt;
    const OpSpec* base = lookup_op(in.spec->base_mnemonic);
    if (!base) return std::nullopt;
    NormOp n;
    n.spec = in.spec;
    n.base = base;
    if (in.operands.size() != in.spec->signature.size()) return std::nullopt;
    for (size_t i = 0; i < in.operands.size(); ++i) {
        switch (in.spec->signature[i]) {
            case OperandKind::dest_reg:
                n.dest = in.operands[i].reg;
                break;
            case OperandKind::src_dest_reg:
                n.dest = in.operands[i].reg;
                n.reads.push_back(in.operands[i].reg);
                break;
            case OperandKind::src_reg:
                n.reads.push_back(in.operands[i].reg);
                break;
            case OperandKind::immediate:
                n.has_imm = true;
                n.imm = in.operands[i].imm;
                break;
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Register liveness within a block. Instructions without role information
// (unknown mnemonics, branches, memory ops) are handled conservatively: any
// mention of the register counts as a read and nothing counts as a kill.
// ---------------------------------------------------------------------------

namespace detail {

inline bool token_mentions_reg(std::string_view text, Reg r) {
    auto is_word = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    };
    for (std::string_view name : {abi_name(r), r.index == 8 ? std::string_view("fp") : std::string_view()}) {
        if (name.empty()) continue;
        size_t from = 0;
        while (true) {
            size_t at = text.find(name, from);
            if (at == std::string_view::npos) break;
            bool left_ok = at == 0 || !is_word(text[at - 1]);
            size_t end = at + name.size();
            bool right_ok = end == text.size() || !is_word(text[end]);
            if (left_ok && right_ok) return true;
            from = at + 1;
        }
    }
    return false;
}

}  // namespace detail

// True when `in` may read register `r`.
inline bool may_read_reg(const StaticInstr& in, Reg r) {
    if (in.spec && !in.spec->signature.empty()) {
        for (size_t i = 0; i < in.spec->signature.size() && i < in.operands.size(); ++i) {
            auto k = in.spec->signature[i];
            if ((k == OperandKind::src_reg || k == OperandKind::src_dest_reg) &&
                in.operands[i].kind == Operand::Kind::reg && in.operands[i].reg == r)
                return true;
        }
        return false;
    }
    for (const auto& op : in.operands) {
        if (op.kind == Operand::Kind::reg && op.reg == r) return true;
        if (op.kind == Operand::Kind::other && detail::token_mentions_reg(op.text, r)) return true;
    }
    return false;
}

// True when `in` certainly overwrites `r` without reading it first.
inline bool kills_reg(const StaticInstr& in, Reg r) {
    if (!in.spec || in.spec->signature.empty()) return false;
    for (size_t i = 0; i < in.spec->signature.size() && i < in.operands.size(); ++i)
        if (in.spec->signature[i] == OperandKind::dest_reg &&
            in.operands[i].kind == Operand::Kind::reg && in.operands[i].reg == r)
            return true;
    return false;
}

// Whether `r` is read after position `idx` within the block before being
// redefined. Reaching the end of the block without a read counts as dead.
inline bool live_after(const BasicBlock& block, size_t idx, Reg r) {
    for (size_t j = idx + 1; j < block.instrs.size(); ++j) {
        const auto& in = block.instrs[j];
        if (may_read_reg(in, r)) return true;
        if (kills_reg(in, r)) return false;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Disassembly parsing
// ---------------------------------------------------------------------------

namespace detail {

struct RawLine {
    int line_no;
    StaticInstr instr;
};

struct RawFunction {
    std::string name;
    uint32_t entry = 0;
    bool synthesized = false;
    std::vector<RawLine> lines;
};

inline bool is_symbol_line(std::string_view s, uint32_t& addr, std::string& name) {
    size_t h = 0;
    while (h < s.size() && is_hex_digit(s[h])) ++h;
    if (h == 0 || h > 8) return false;
    if (h + 2 >= s.size() || s[h] != ' ' || s[h + 1] != '<') return false;
    if (s.back() != ':' || s[s.size() - 2] != '>') return false;
    auto v = parse_hex_u64(s.substr(0, h));
    if (!v) return false;
    addr = static_cast<uint32_t>(*v);
    name = std::string(s.substr(h + 2, s.size() - h - 4));
    return !name.empty();
}

// `<hex> <name>` or `0x<hex>`: the statically visible target of a taken branch
inline std::optional<uint32_t> branch_target(const Operand& op) {
    if (op.kind == Operand::Kind::imm && op.imm >= 0 && op.imm <= 0xFFFFFFFFll)
        return static_cast<uint32_t>(op.imm);
    if (op.kind == Operand::Kind::other) {
        std::string_view s = op.text;
        size_t sp = s.find(' ');
        if (sp != std::string_view::npos && sp > 0 && sp + 1 < s.size() && s[sp + 1] == '<' &&
            s.back() == '>' && all_hex(s.substr(0, sp)) && sp <= 8)
            return static_cast<uint32_t>(*parse_hex_u64(s.substr(0, sp)));
    }
    return std::nullopt;
}

}  // namespace detail

// Splits one function's instruction sequence at control flow and at the given
// branch-target addresses. Idempotent: re-splitting the concatenation of the
// result yields the same blocks.
inline std::vector<BasicBlock> split_blocks(const std::string& symbol,
                                            std::vector<StaticInstr> instrs,
                                            const std::set<uint32_t>& targets) {
    std::vector<BasicBlock> blocks;
    BasicBlock cur;
    cur.symbol = symbol;
    auto flush = [&] {
        if (!cur.instrs.empty()) {
            cur.index = static_cast<int>(blocks.size());
            blocks.push_back(std::move(cur));
            cur = BasicBlock{};
            cur.symbol = symbol;
        }
    };
    for (auto& in : instrs) {
        if (targets.count(in.address)) flush();
        bool terminator = in.spec && is_control_flow(in.spec->cls);
        cur.instrs.push_back(std::move(in));
        if (terminator) flush();
    }
    flush();
    return blocks;
}

// Parses objdump-style disassembly. Symbol lines open a function; instruction
// lines are `addr: <4-or-8 hex digits> mnemonic [operands]`. Section headers
// and file-format banners are skipped. Malformed lines raise ParseError with
// their line number; unknown mnemonics are kept non-fusable and counted.
inline ProgramModel parse_disassembly(std::string_view text) {
    std::vector<detail::RawFunction> funcs;
    std::set<uint32_t> seen_addrs;
    std::set<std::string> unknown;
    int unknown_count = 0;

    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string_view t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("Disassembly of section ", 0) == 0) continue;
        if (t.find("file format") != std::string_view::npos && t.find(':') != std::string_view::npos &&
            t.find(':') < t.find("file format"))
            continue;

        uint32_t sym_addr = 0;
        std::string sym_name;
        if (detail::is_symbol_line(t, sym_addr, sym_name)) {
            detail::RawFunction f;
            f.name = std::move(sym_name);
            f.entry = sym_addr;
            funcs.push_back(std::move(f));
            continue;
        }

        // instruction line: addr ':' ws hex ws mnemonic [ws operands]
        size_t h = 0;
        while (h < t.size() && is_hex_digit(t[h])) ++h;
        if (h == 0 || h >= t.size() || t[h] != ':')
            throw ParseError(line_no, "unrecognized line: " + std::string(t));
        if (h > 8) throw ParseError(line_no, "address exceeds 32 bits");
        uint32_t addr = static_cast<uint32_t>(*parse_hex_u64(t.substr(0, h)));

        std::string_view rest = trim(t.substr(h + 1));
        size_t sp = rest.find_first_of(" \t");
        std::string_view enc = sp == std::string_view::npos ? rest : rest.substr(0, sp);
        if (!(all_hex(enc) && (enc.size() == 4 || enc.size() == 8)))
            throw ParseError(line_no, "encoding field must be 4 or 8 hex digits");
        int byte_size = enc.size() == 4 ? 2 : 4;

        rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));
        if (rest.empty()) throw ParseError(line_no, "missing mnemonic");
        sp = rest.find_first_of(" \t");
        std::string_view mnemonic = sp == std::string_view::npos ? rest : rest.substr(0, sp);
        std::string_view operand_text =
            sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));

        StaticInstr instr;
        instr.address = addr;
        instr.byte_size = byte_size;
        instr.mnemonic = std::string(mnemonic);
        instr.encoding_hex = std::string(enc);
        instr.raw_text = std::string(line);

        while (!operand_text.empty()) {
            size_t comma = operand_text.find(',');
            std::string_view tok = trim(comma == std::string_view::npos ? operand_text
                                                                        : operand_text.substr(0, comma));
            operand_text = comma == std::string_view::npos ? std::string_view{}
                                                           : trim(operand_text.substr(comma + 1));
            if (tok.empty()) throw ParseError(line_no, "empty operand");
            if (auto r = parse_reg(tok)) {
                instr.operands.push_back(Operand::make_reg(*r));
            } else if (auto v = parse_imm_token(tok)) {
                instr.operands.push_back(Operand::make_imm(*v));
            } else {
                instr.operands.push_back(Operand::make_other(std::string(tok)));
            }
        }

        instr.spec = lookup_op(instr.mnemonic);
        if (instr.spec) {
            if (instr.spec->byte_size != 0 && instr.spec->byte_size != byte_size)
                throw ParseError(line_no, std::string(mnemonic) + ": encoding width does not match instruction size");
            if (!instr.spec->signature.empty()) {
                const auto& sig = instr.spec->signature;
                if (instr.operands.size() != sig.size())
                    throw ParseError(line_no, std::string(mnemonic) + ": expected " +
                                                  std::to_string(sig.size()) + " operands");
                for (size_t i = 0; i < sig.size(); ++i) {
                    bool want_reg = sig[i] != OperandKind::immediate;
                    if (want_reg && instr.operands[i].kind != Operand::Kind::reg)
                        throw ParseError(line_no, std::string(mnemonic) + ": operand " +
                                                      std::to_string(i + 1) + " must be a register");
                    if (!want_reg && instr.operands[i].kind != Operand::Kind::imm)
                        throw ParseError(line_no, std::string(mnemonic) + ": operand " +
                                                      std::to_string(i + 1) + " must be an immediate");
                    if (want_reg && instr.spec->prime_regs) {
                        uint8_t x = instr.operands[i].reg.index;
                        if (x < 8 || x > 15)
                            throw ParseError(line_no, std::string(mnemonic) +
                                                          ": register outside the compressed x8-x15 range");
                    }
                }
            }
        } else {
            ++unknown_count;
            unknown.insert(instr.mnemonic);
        }

        if (seen_addrs.count(addr)) throw ParseError(line_no, "duplicate instruction address");
        seen_addrs.insert(addr);

        if (funcs.empty()) {
            detail::RawFunction f;
            char buf[16];
            snprintf(buf, sizeof buf, "f_%x", addr);
            f.name = buf;
            f.entry = addr;
            f.synthesized = true;
            funcs.push_back(std::move(f));
        }
        auto& fn = funcs.back();
        if (!fn.lines.empty() && addr <= fn.lines.back().instr.address)
            throw ParseError(line_no, "instruction addresses must strictly increase");
        fn.lines.push_back({line_no, std::move(instr)});
    }

    // statically visible branch/jump targets split blocks everywhere
    std::set<uint32_t> targets;
    for (const auto& f : funcs)
        for (const auto& l : f.lines) {
            const auto& in = l.instr;
            if (in.spec && (in.spec->cls == OpClass::branch || in.spec->cls == OpClass::jump) &&
                !in.operands.empty())
                if (auto tgt = detail::branch_target(in.operands.back())) targets.insert(*tgt);
        }

    ProgramModel model;
    model.unknown_mnemonic_count = unknown_count;
    model.unknown_mnemonics.assign(unknown.begin(), unknown.end());
    for (auto& f : funcs) {
        ProgramModel::Function out;
        out.name = std::move(f.name);
        out.entry = f.lines.empty() ? f.entry : f.lines.front().instr.address;
        std::vector<StaticInstr> instrs;
        instrs.reserve(f.lines.size());
        for (auto& l : f.lines) instrs.push_back(std::move(l.instr));
        out.blocks = split_blocks(out.name, std::move(instrs), targets);
        model.functions.push_back(std::move(out));
    }
    for (int fi = 0; fi < static_cast<int>(model.functions.size()); ++fi)
        for (int bi = 0; bi < static_cast<int>(model.functions[fi].blocks.size()); ++bi) {
            const auto& bb = model.functions[fi].blocks[bi];
            for (int ii = 0; ii < static_cast<int>(bb.instrs.size()); ++ii)
                model.addr_index[bb.instrs[ii].address] = {fi, bi, ii};
        }
    return model;
}

inline std::string serialize_operand(const Operand& op) {
    switch (op.kind) {
        case Operand::Kind::reg: return std::string(abi_name(op.reg));
        case Operand::Kind::imm: return std::to_string(op.imm);
        case Operand::Kind::other: return op.text;
    }
    return {};
}

// Canonical text form; parse_disassembly(serialize_disassembly(m)) == m.
inline std::string serialize_disassembly(const ProgramModel& model) {
    std::ostringstream os;
    bool first = true;
    for (const auto& f : model.functions) {
        if (!first) os << "\n";
        first = false;
        char head[32];
        snprintf(head, sizeof head, "%08x <", f.entry);
        os << head << f.name << ">:\n";
        for (const auto& bb : f.blocks)
            for (const auto& in : bb.instrs) {
                char buf[24];
                snprintf(buf, sizeof buf, "%8x:", in.address);
                os << buf << "\t" << in.encoding_hex << "\t" << in.mnemonic;
                for (size_t i = 0; i < in.operands.size(); ++i)
                    os << (i == 0 ? "\t" : ",") << serialize_operand(in.operands[i]);
                os << "\n";
            }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Trace parsing. Grammar A: one lowercase-hex program counter per line.
// Grammar B: `<hex-pc>,<decimal-count>` per line. Auto-detected by the comma
// on the first non-empty line.
// ---------------------------------------------------------------------------

inline TraceProfile parse_trace(std::string_view text, const ProgramModel& program) {
    TraceProfile prof;
    bool detected = false, aggregated = false;

    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string_view t = trim(line);
        if (t.empty()) continue;
        if (!detected) {
            aggregated = t.find(',') != std::string_view::npos;
            detected = true;
        }

        uint32_t addr = 0;
        uint64_t n = 1;
        if (aggregated) {
            size_t comma = t.find(',');
            if (comma == std::string_view::npos) throw ParseError(line_no, "expected <pc>,<count>");
            std::string_view pc = trim(t.substr(0, comma));
            std::string_view cnt = trim(t.substr(comma + 1));
            auto a = parse_hex_u64(pc);
            if (!a || *a > 0xFFFFFFFFull) throw ParseError(line_no, "bad program counter: " + std::string(pc));
            addr = static_cast<uint32_t>(*a);
            auto [p, ec] = std::from_chars(cnt.data(), cnt.data() + cnt.size(), n, 10);
            if (ec == std::errc::result_out_of_range) throw ParseError(line_no, "count overflow");
            if (ec != std::errc() || p != cnt.data() + cnt.size())
                throw ParseError(line_no, "bad count: " + std::string(cnt));
        } else {
            auto a = parse_hex_u64(t);
            if (!a || *a > 0xFFFFFFFFull) throw ParseError(line_no, "bad program counter: " + std::string(t));
            addr = static_cast<uint32_t>(*a);
        }

        if (__builtin_add_overflow(prof.total_executed, n, &prof.total_executed))
            throw ParseError(line_no, "count overflow");
        if (program.find(addr)) {
            uint64_t& c = prof.counts[addr];
            if (__builtin_add_overflow(c, n, &c)) throw ParseError(line_no, "count overflow");
        } else {
            if (__builtin_add_overflow(prof.unmatched, n, &prof.unmatched))
                throw ParseError(line_no, "count overflow");
        }
    }
    return prof;
}

}  // namespace arise_forge
