#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "arise_forge/common.hpp"

namespace arise_forge {

// ---------------------------------------------------------------------------
// Executable semantics. Expressions evaluate over 32-bit two's-complement
// values with wrapping arithmetic; shift amounts use the low 5 bits of the
// right operand; the set-less-than kinds yield 0 or 1.
// ---------------------------------------------------------------------------

enum class SemKind : uint8_t {
    read_slot,   // register value bound to a slot index
    imm_slot,    // immediate value bound to a slot index
    constant,
    add, sub, and_, or_, xor_,
    shl, shr_logical, shr_arith,
    slt_signed, slt_unsigned,
    // multiply/divide kinds back the optional M-extension vocabulary
    mul, mulh_ss, mulh_uu, mulh_su,
    div_signed, div_unsigned, rem_signed, rem_unsigned,
};

struct SemExpr {
    SemKind kind = SemKind::constant;
    int slot = -1;          // read_slot / imm_slot
    uint32_t value = 0;     // constant
    std::vector<SemExpr> kids;

    static SemExpr read(int s) { return {SemKind::read_slot, s, 0, {}}; }
    static SemExpr imm(int s) { return {SemKind::imm_slot, s, 0, {}}; }
    static SemExpr constant(uint32_t v) { return {SemKind::constant, -1, v, {}}; }
    static SemExpr node(SemKind k, SemExpr a, SemExpr b) {
        SemExpr e{k, -1, 0, {}};
        e.kids.push_back(std::move(a));
        e.kids.push_back(std::move(b));
        return e;
    }

    bool operator==(const SemExpr& o) const {
        return kind == o.kind && slot == o.slot && value == o.value && kids == o.kids;
    }
};

inline uint32_t apply_alu(SemKind k, uint32_t a, uint32_t b) {
    switch (k) {
        case SemKind::add: return a + b;
        case SemKind::sub: return a - b;
        case SemKind::and_: return a & b;
        case SemKind::or_: return a | b;
        case SemKind::xor_: return a ^ b;
        case SemKind::shl: return a << (b & 31);
        case SemKind::shr_logical: return a >> (b & 31);
        case SemKind::shr_arith: return static_cast<uint32_t>(static_cast<int32_t>(a) >> (b & 31));
        case SemKind::slt_signed: return static_cast<int32_t>(a) < static_cast<int32_t>(b) ? 1u : 0u;
        case SemKind::slt_unsigned: return a < b ? 1u : 0u;
        case SemKind::mul: return a * b;
        case SemKind::mulh_ss:
            return static_cast<uint32_t>(
                (static_cast<int64_t>(static_cast<int32_t>(a)) * static_cast<int64_t>(static_cast<int32_t>(b))) >> 32);
        case SemKind::mulh_uu:
            return static_cast<uint32_t>((static_cast<uint64_t>(a) * static_cast<uint64_t>(b)) >> 32);
        case SemKind::mulh_su:
            return static_cast<uint32_t>(
                (static_cast<int64_t>(static_cast<int32_t>(a)) * static_cast<int64_t>(b)) >> 32);
        case SemKind::div_signed:
            if (b == 0) return 0xFFFFFFFFu;
            if (a == 0x80000000u && b == 0xFFFFFFFFu) return 0x80000000u;
            return static_cast<uint32_t>(static_cast<int32_t>(a) / static_cast<int32_t>(b));
        case SemKind::div_unsigned: return b == 0 ? 0xFFFFFFFFu : a / b;
        case SemKind::rem_signed:
            if (b == 0) return a;
            if (a == 0x80000000u && b == 0xFFFFFFFFu) return 0;
            return static_cast<uint32_t>(static_cast<int32_t>(a) % static_cast<int32_t>(b));
        case SemKind::rem_unsigned: return b == 0 ? a : a % b;
        default: throw std::logic_error("apply_alu: not a binary ALU kind");
    }
}

// Env is callable as env(SemKind::read_slot|imm_slot, index) -> uint32_t and
// must throw on unbound slots.
template <class Env>
uint32_t eval_expr(const SemExpr& e, Env&& env) {
    switch (e.kind) {
        case SemKind::read_slot:
        case SemKind::imm_slot:
            return env(e.kind, e.slot);
        case SemKind::constant:
            return e.value;
        default:
            return apply_alu(e.kind, eval_expr(e.kids[0], env), eval_expr(e.kids[1], env));
    }
}

// Evaluates an operation's semantic template. Keys of `slot_values` are
// operand positions within the instruction's signature. Missing bindings are
// a contract violation.
inline uint32_t eval_sem(const SemExpr& templ, const std::map<int, uint32_t>& slot_values) {
    return eval_expr(templ, [&](SemKind, int slot) -> uint32_t {
        auto it = slot_values.find(slot);
        if (it == slot_values.end())
            throw std::logic_error("eval_sem: unbound slot " + std::to_string(slot));
        return it->second;
    });
}

// ---------------------------------------------------------------------------
// Instruction vocabulary
// ---------------------------------------------------------------------------

enum class OperandKind : uint8_t { dest_reg, src_reg, src_dest_reg, immediate };

enum class OpClass : uint8_t { alu, load, store, branch, jump, system, other };

inline bool is_control_flow(OpClass c) {
    return c == OpClass::branch || c == OpClass::jump || c == OpClass::system;
}

struct OpSpec {
    std::string_view mnemonic;
    std::string_view base_mnemonic;  // compressed prefix stripped ("c.or" -> "or")
    int byte_size;                   // 2 or 4; 0 when the printed alias can be either
    OpClass cls;
    bool fusable;
    bool m_ext;                        // fusable only when the M extension is enabled
    std::vector<OperandKind> signature;  // empty: operands not role-checked
    SemExpr semantic;                    // over operand positions; meaningful if has_semantic
    bool has_semantic;
    bool imm_signed;
    int imm_max_width;     // architectural field cap (12 I-type, 5 shamt, 20 lui)
    bool prime_regs;       // RVC three-bit register fields: x8..x15 only
};

namespace detail {

inline SemExpr rrr(SemKind k) { return SemExpr::node(k, SemExpr::read(1), SemExpr::read(2)); }
inline SemExpr rri(SemKind k) { return SemExpr::node(k, SemExpr::read(1), SemExpr::imm(2)); }
inline SemExpr crr(SemKind k) { return SemExpr::node(k, SemExpr::read(0), SemExpr::read(1)); }
inline SemExpr cri(SemKind k) { return SemExpr::node(k, SemExpr::read(0), SemExpr::imm(1)); }

inline std::map<std::string_view, OpSpec> build_op_table() {
    using K = OperandKind;
    std::map<std::string_view, OpSpec> t;
    auto add = [&](OpSpec s) { t.emplace(s.mnemonic, std::move(s)); };
    const std::vector<K> drr{K::dest_reg, K::src_reg, K::src_reg};
    const std::vector<K> dri{K::dest_reg, K::src_reg, K::immediate};
    const std::vector<K> sdr{K::src_dest_reg, K::src_reg};
    const std::vector<K> sdi{K::src_dest_reg, K::immediate};
    const std::vector<K> di{K::dest_reg, K::immediate};
    const std::vector<K> dr{K::dest_reg, K::src_reg};

    // RV32I arithmetic/logical, register-register
    struct RR { std::string_view m; SemKind k; };
    for (auto [m, k] : {RR{"add", SemKind::add}, RR{"sub", SemKind::sub}, RR{"and", SemKind::and_},
                        RR{"or", SemKind::or_}, RR{"xor", SemKind::xor_}, RR{"slt", SemKind::slt_signed},
                        RR{"sltu", SemKind::slt_unsigned}, RR{"sll", SemKind::shl},
                        RR{"srl", SemKind::shr_logical}, RR{"sra", SemKind::shr_arith}})
        add({m, m, 4, OpClass::alu, true, false, drr, rrr(k), true, false, 0, false});

    // RV32I register-immediate; imm is a signed 12-bit I-type field
    for (auto [m, k] : {RR{"addi", SemKind::add}, RR{"andi", SemKind::and_}, RR{"ori", SemKind::or_},
                        RR{"xori", SemKind::xor_}, RR{"slti", SemKind::slt_signed},
                        RR{"sltiu", SemKind::slt_unsigned}})
        add({m, m, 4, OpClass::alu, true, false, dri, rri(k), true, true, 12, false});

    // shifts take a 5-bit unsigned amount
    for (auto [m, k] : {RR{"slli", SemKind::shl}, RR{"srli", SemKind::shr_logical}, RR{"srai", SemKind::shr_arith}})
        add({m, m, 4, OpClass::alu, true, false, dri, rri(k), true, false, 5, false});

    add({"lui", "lui", 4, OpClass::alu, true, false, di,
         SemExpr::node(SemKind::shl, SemExpr::imm(1), SemExpr::constant(12)), true, false, 20, false});

    // M extension (fusable only behind the config switch)
    for (auto [m, k] : {RR{"mul", SemKind::mul}, RR{"mulh", SemKind::mulh_ss}, RR{"mulhu", SemKind::mulh_uu},
                        RR{"mulhsu", SemKind::mulh_su}, RR{"div", SemKind::div_signed},
                        RR{"divu", SemKind::div_unsigned}, RR{"rem", SemKind::rem_signed},
                        RR{"remu", SemKind::rem_unsigned}})
        add({m, m, 4, OpClass::alu, true, true, drr, rrr(k), true, false, 0, false});

    // RVC arithmetic/logical
    add({"c.add", "add", 2, OpClass::alu, true, false, sdr, crr(SemKind::add), true, false, 0, false});
    add({"c.sub", "sub", 2, OpClass::alu, true, false, sdr, crr(SemKind::sub), true, false, 0, true});
    add({"c.and", "and", 2, OpClass::alu, true, false, sdr, crr(SemKind::and_), true, false, 0, true});
    add({"c.or", "or", 2, OpClass::alu, true, false, sdr, crr(SemKind::or_), true, false, 0, true});
    add({"c.xor", "xor", 2, OpClass::alu, true, false, sdr, crr(SemKind::xor_), true, false, 0, true});
    add({"c.addi", "addi", 2, OpClass::alu, true, false, sdi, cri(SemKind::add), true, true, 12, false});
    add({"c.andi", "andi", 2, OpClass::alu, true, false, sdi, cri(SemKind::and_), true, true, 12, true});
    add({"c.slli", "slli", 2, OpClass::alu, true, false, sdi, cri(SemKind::shl), true, false, 5, false});
    add({"c.srli", "srli", 2, OpClass::alu, true, false, sdi, cri(SemKind::shr_logical), true, false, 5, true});
    add({"c.srai", "srai", 2, OpClass::alu, true, false, sdi, cri(SemKind::shr_arith), true, false, 5, true});
    add({"c.mv", "mv", 2, OpClass::alu, true, false, dr, SemExpr::read(1), true, false, 0, false});
    add({"c.li", "li", 2, OpClass::alu, true, false, di, SemExpr::imm(1), true, true, 12, false});
    add({"c.lui", "lui", 2, OpClass::alu, true, false, di,
         SemExpr::node(SemKind::shl, SemExpr::imm(1), SemExpr::constant(12)), true, true, 20, false});

    // 32-bit alias pseudos: kept for parsing, never fused. byte_size 0 because
    // objdump prints the same alias for compressed and uncompressed encodings.
    add({"mv", "mv", 0, OpClass::alu, false, false, dr, SemExpr::read(1), true, false, 0, false});
    add({"li", "li", 0, OpClass::alu, false, false, di, SemExpr::imm(1), true, true, 12, false});
    add({"not", "not", 0, OpClass::alu, false, false, dr, {}, false, false, 0, false});
    add({"neg", "neg", 0, OpClass::alu, false, false, dr, {}, false, false, 0, false});
    add({"seqz", "seqz", 0, OpClass::alu, false, false, dr, {}, false, false, 0, false});
    add({"snez", "snez", 0, OpClass::alu, false, false, dr, {}, false, false, 0, false});
    add({"nop", "nop", 0, OpClass::alu, false, false, {}, {}, false, false, 0, false});

    // PC-relative: arithmetic but excluded from fusion, a fused copy would
    // observe a different PC
    add({"auipc", "auipc", 4, OpClass::other, false, false, {}, {}, false, false, 0, false});

    // loads/stores: plain barriers for candidate growth
    for (std::string_view m : {"lb", "lh", "lw", "lbu", "lhu"})
        add({m, m, 4, OpClass::load, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"sb", "sh", "sw"})
        add({m, m, 4, OpClass::store, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"c.lw", "c.lwsp", "c.flw", "c.flwsp"})
        add({m, m, 2, OpClass::load, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"c.sw", "c.swsp", "c.fsw", "c.fswsp"})
        add({m, m, 2, OpClass::store, false, false, {}, {}, false, false, 0, false});

    // control flow terminates basic blocks and candidates
    for (std::string_view m : {"beq", "bne", "blt", "bge", "bltu", "bgeu", "beqz", "bnez", "blez",
                               "bgez", "bltz", "bgtz", "bgt", "ble", "bgtu", "bleu"})
        add({m, m, 4, OpClass::branch, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"c.beqz", "c.bnez"})
        add({m, m, 2, OpClass::branch, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"jal", "jalr", "call", "tail"})
        add({m, m, 4, OpClass::jump, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"j", "jr", "ret"})
        add({m, m, 0, OpClass::jump, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"c.j", "c.jal", "c.jr", "c.jalr"})
        add({m, m, 2, OpClass::jump, false, false, {}, {}, false, false, 0, false});
    add({"ecall", "ecall", 4, OpClass::system, false, false, {}, {}, false, false, 0, false});
    add({"ebreak", "ebreak", 4, OpClass::system, false, false, {}, {}, false, false, 0, false});
    add({"c.ebreak", "ebreak", 2, OpClass::system, false, false, {}, {}, false, false, 0, false});
    for (std::string_view m : {"mret", "sret", "wfi"})
        add({m, m, 4, OpClass::system, false, false, {}, {}, false, false, 0, false});
    // fence orders memory; it does not transfer control
    add({"fence", "fence", 4, OpClass::other, false, false, {}, {}, false, false, 0, false});
    add({"fence.i", "fence.i", 4, OpClass::other, false, false, {}, {}, false, false, 0, false});

    return t;
}

}  // namespace detail

inline const std::map<std::string_view, OpSpec>& op_table() {
    static const std::map<std::string_view, OpSpec> table = detail::build_op_table();
    return table;
}

// Known mnemonic lookup; nullptr means unknown/unsupported and the caller
// decides whether that is fatal.
inline const OpSpec* lookup_op(std::string_view mnemonic) {
    const auto& t = op_table();
    auto it = t.find(mnemonic);
    return it == t.end() ? nullptr : &it->second;
}

// Minimal field width holding `v`: two's-complement width for signed fields,
// plain bit length (>= 1) for unsigned ones.
inline int minimal_imm_width(int64_t v, bool is_signed) {
    if (is_signed) {
        int w = 1;
        while (w < 64) {
            int64_t lo = -(int64_t(1) << (w - 1));
            int64_t hi = (int64_t(1) << (w - 1)) - 1;
            if (v >= lo && v <= hi) return w;
            ++w;
        }
        return 64;
    }
    if (v < 0) return 64;  // never fits an unsigned field
    int w = 1;
    while (w < 64 && (static_cast<uint64_t>(v) >> w) != 0) ++w;
    return w;
}

inline bool imm_fits(int64_t v, int width, bool is_signed) {
    if (width <= 0) return false;
    if (width >= 64) return true;
    if (is_signed)
        return v >= -(int64_t(1) << (width - 1)) && v <= (int64_t(1) << (width - 1)) - 1;
    return v >= 0 && static_cast<uint64_t>(v) <= (uint64_t(1) << width) - 1;
}

namespace detail {

inline SemExpr remap_operands_to_reads(const SemExpr& e, const std::vector<int>& read_index_of_operand) {
    SemExpr out = e;
    out.kids.clear();
    if (e.kind == SemKind::read_slot) {
        out.slot = read_index_of_operand.at(static_cast<size_t>(e.slot));
    } else if (e.kind == SemKind::imm_slot) {
        out.slot = 0;
    }
    for (const auto& k : e.kids) out.kids.push_back(remap_operands_to_reads(k, read_index_of_operand));
    return out;
}

}  // namespace detail

// The operation's template rewritten over its register reads in operand
// order: read_slot(i) is the i-th register read, imm_slot(0) the immediate.
// Compressed forms and their base forms agree in this space ("c.or" and "or"
// both become or(read 0, read 1)).
inline SemExpr normalized_semantics(const OpSpec& op) {
    if (!op.has_semantic) throw std::logic_error("normalized_semantics: op has no template");
    std::vector<int> read_idx(op.signature.size(), -1);
    int n = 0;
    for (size_t i = 0; i < op.signature.size(); ++i)
        if (op.signature[i] == OperandKind::src_reg || op.signature[i] == OperandKind::src_dest_reg)
            read_idx[i] = n++;
    return detail::remap_operands_to_reads(op.semantic, read_idx);
}

}  // namespace arise_forge
