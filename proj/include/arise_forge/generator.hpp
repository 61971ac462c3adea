#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "arise_forge/frontend.hpp"
#include "arise_forge/isa_model.hpp"

namespace arise_forge {

enum class LivenessMode : uint8_t { strict, paper };

inline const char* to_string(LivenessMode m) { return m == LivenessMode::strict ? "strict" : "paper"; }

struct GenConfig {
    int opcode_bits = 9;  // >= 7
    LivenessMode liveness = LivenessMode::strict;
    int min_ops = 2;
    bool include_m_ext = false;
};

// Bit ledger of one candidate encoding. The output register slot is included
// in used_reg_slots.
struct BitBudget {
    int opcode_bits = 0;
    int used_reg_slots = 0;
    int used_imm_bits = 0;
    int padding_bits = 0;
    static constexpr int capacity = 32;
    int total() const { return opcode_bits + 5 * used_reg_slots + used_imm_bits + padding_bits; }
    bool operator==(const BitBudget& o) const {
        return opcode_bits == o.opcode_bits && used_reg_slots == o.used_reg_slots &&
               used_imm_bits == o.used_imm_bits && padding_bits == o.padding_bits;
    }
};

// A pattern operand: an encoded input slot, the result of an earlier
// constituent, or an encoded immediate field.
struct Binding {
    enum class Kind : uint8_t { slot, temp, imm } kind = Kind::slot;
    int index = 0;  // slot: 0-based input slot; temp: constituent position; imm: field index
    bool operator==(const Binding& o) const { return kind == o.kind && index == o.index; }
};

struct PatternOp {
    std::string base;            // base mnemonic ("c.or" constituents store "or")
    const OpSpec* base_spec = nullptr;
    std::vector<Binding> reads;  // register reads in operand order
    std::optional<int> imm_field;

    bool operator==(const PatternOp& o) const {
        return base == o.base && reads == o.reads && imm_field == o.imm_field;
    }
};

struct ImmFieldSpec {
    int width = 0;
    bool is_signed = false;
    int arch_cap = 0;
    bool operator==(const ImmFieldSpec& o) const {
        return width == o.width && is_signed == o.is_signed && arch_cap == o.arch_cap;
    }
};

// A fused MISO instruction: ordered constituents over generalized register
// slots and immediate fields, plus the concrete site it was lifted from.
struct CandidatePattern {
    std::string name;              // "_"-joined base mnemonics
    std::vector<PatternOp> ops;
    int output_temp = 0;           // constituent producing the single output
    int input_slots = 0;           // rs1..rsN
    std::vector<ImmFieldSpec> imm_fields;
    std::vector<int> intermediates;  // constituent positions except the output
    BitBudget budget;
    SemExpr fused;  // read_slot(i): input slot i; imm_slot(f): field f

    // origin bindings drive the interpretation-based equivalence check;
    // they are not part of the pattern's identity
    std::vector<Reg> origin_slot_regs;     // [rd, rs1, ...]
    std::vector<Reg> origin_dest_regs;     // per constituent
    std::vector<int64_t> origin_imm_values;  // per field

    int reg_slot_count() const { return input_slots + 1; }
    int total_imm_bits() const {
        int s = 0;
        for (const auto& f : imm_fields) s += f.width;
        return s;
    }

    bool operator==(const CandidatePattern& o) const {
        return name == o.name && ops == o.ops && output_temp == o.output_temp &&
               input_slots == o.input_slots && imm_fields == o.imm_fields &&
               intermediates == o.intermediates && budget == o.budget && fused == o.fused &&
               origin_slot_regs == o.origin_slot_regs && origin_dest_regs == o.origin_dest_regs &&
               origin_imm_values == o.origin_imm_values;
    }

    // Identity modulo immediate-field widths; the full identity appends them.
    std::string structure_key() const {
        std::string k;
        for (const auto& op : ops) {
            k += op.base;
            k += '(';
            for (size_t i = 0; i < op.reads.size(); ++i) {
                if (i) k += ',';
                const auto& b = op.reads[i];
                k += b.kind == Binding::Kind::slot ? 's' : 't';
                k += std::to_string(b.index);
            }
            if (op.imm_field) {
                if (!op.reads.empty()) k += ',';
                k += 'i';
                k += std::to_string(*op.imm_field);
            }
            k += ");";
        }
        k += "out=t" + std::to_string(output_temp);
        k += "|imm=";
        for (const auto& f : imm_fields) k += f.is_signed ? 's' : 'u';
        return k;
    }

    std::string width_key() const {
        std::string k;
        for (const auto& f : imm_fields) {
            k += std::to_string(f.width);
            k += ',';
        }
        return k;
    }
};

namespace detail {

// Growth bookkeeping for one candidate under construction.
struct Growth {
    std::vector<NormOp> ops;
    std::map<Reg, int> defs;    // register -> last constituent writing it
    std::vector<Reg> inputs;    // external inputs in first-read order
    int imm_min_bits = 0;

    bool is_input(Reg r) const { return std::find(inputs.begin(), inputs.end(), r) != inputs.end(); }
};

// Grows a candidate from `start` through contiguous instructions. An
// instruction joins iff it is fusable, has a data-flow connection to the
// candidate (or opens it), and the 32-bit budget still holds with its new
// slots and immediate. Growth stops at control flow, non-fusable ops, budget
// exhaustion, or right after an instruction overwrites an external input.
inline Growth grow(const BasicBlock& block, size_t start, const GenConfig& cfg) {
    Growth g;
    for (size_t i = start; i < block.instrs.size(); ++i) {
        const StaticInstr& in = block.instrs[i];
        if (!in.spec || !in.spec->fusable) break;
        if (in.spec->m_ext && !cfg.include_m_ext) break;
        auto n = normalize(in);
        if (!n) break;
        if (n->dest == kZeroReg) break;  // architectural no-op, never fused

        bool connected = g.ops.empty();
        for (Reg r : n->reads)
            if (g.defs.count(r)) {
                connected = true;
                break;
            }
        if (!connected) break;

        int new_inputs = 0;
        {
            std::vector<Reg> fresh;
            for (Reg r : n->reads)
                if (!g.defs.count(r) && !g.is_input(r) &&
                    std::find(fresh.begin(), fresh.end(), r) == fresh.end())
                    fresh.push_back(r);
            new_inputs = static_cast<int>(fresh.size());
        }
        int new_imm = 0;
        if (n->has_imm) {
            new_imm = minimal_imm_width(n->imm, n->base->imm_signed);
            if (n->base->imm_max_width > 0 && new_imm > n->base->imm_max_width) break;
        }
        int slots = static_cast<int>(g.inputs.size()) + new_inputs + 1;  // + output
        if (cfg.opcode_bits + 5 * slots + g.imm_min_bits + new_imm > BitBudget::capacity) break;

        // checked before this op's own reads join: a same-instruction
        // read-modify destination does not trigger the overwrite rule
        bool overwrites_input = g.is_input(n->dest);

        for (Reg r : n->reads)
            if (!g.defs.count(r) && !g.is_input(r)) g.inputs.push_back(r);
        g.imm_min_bits += new_imm;
        g.defs[n->dest] = static_cast<int>(g.ops.size());
        g.ops.push_back(std::move(*n));

        if (overwrites_input) break;
    }
    return g;
}

// Longest prefix (>= min_ops) whose only possibly-live written register is
// the prefix's final destination. Returns 0 when none qualifies.
inline size_t strict_extent(const BasicBlock& block, size_t start, const std::vector<NormOp>& ops,
                            int min_ops) {
    for (size_t len = ops.size(); len >= static_cast<size_t>(min_ops); --len) {
        Reg final_dest = ops[len - 1].dest;
        bool ok = true;
        for (size_t k = 0; k + 1 < len && ok; ++k) {
            Reg d = ops[k].dest;
            if (d == final_dest) continue;
            bool redefined_later_in_prefix = false;
            for (size_t j = k + 1; j < len; ++j)
                if (ops[j].dest == d) {
                    redefined_later_in_prefix = true;
                    break;
                }
            if (redefined_later_in_prefix) continue;  // only the last version escapes
            if (live_after(block, start + len - 1, d)) ok = false;
        }
        if (ok) return len;
    }
    return 0;
}

}  // namespace detail

// Generalizes a grown run of concrete instructions into a CandidatePattern:
// concrete registers map to slots in first-read order (the zero register is
// an ordinary input), each immediate starts at the minimal width holding its
// value, and leftover budget bits widen the fields in order of appearance up
// to their architectural caps; whatever remains becomes constant-zero
// padding.
inline CandidatePattern generalize(const std::vector<NormOp>& run, size_t len, int output_temp,
                                   const GenConfig& cfg) {
    CandidatePattern pat;
    pat.output_temp = output_temp;

    std::map<Reg, int> defs;
    std::vector<Reg> input_regs;
    auto input_slot = [&](Reg r) {
        for (size_t i = 0; i < input_regs.size(); ++i)
            if (input_regs[i] == r) return static_cast<int>(i);
        input_regs.push_back(r);
        return static_cast<int>(input_regs.size() - 1);
    };

    for (size_t k = 0; k < len; ++k) {
        const NormOp& n = run[k];
        PatternOp op;
        op.base = std::string(n.base->mnemonic);
        op.base_spec = n.base;
        for (Reg r : n.reads) {
            auto it = defs.find(r);
            if (it != defs.end())
                op.reads.push_back({Binding::Kind::temp, it->second});
            else
                op.reads.push_back({Binding::Kind::slot, input_slot(r)});
        }
        if (n.has_imm) {
            ImmFieldSpec f;
            f.is_signed = n.base->imm_signed;
            f.arch_cap = n.base->imm_max_width;
            f.width = minimal_imm_width(n.imm, f.is_signed);
            op.imm_field = static_cast<int>(pat.imm_fields.size());
            pat.imm_fields.push_back(f);
            pat.origin_imm_values.push_back(n.imm);
        }
        defs[n.dest] = static_cast<int>(k);
        if (!pat.name.empty()) pat.name += '_';
        pat.name += n.base->mnemonic;
        pat.origin_dest_regs.push_back(n.dest);
        pat.ops.push_back(std::move(op));
    }

    pat.input_slots = static_cast<int>(input_regs.size());
    for (int k = 0; k < static_cast<int>(len); ++k)
        if (k != output_temp) pat.intermediates.push_back(k);

    // widen immediates into the leftover budget, first field first
    int used = cfg.opcode_bits + 5 * pat.reg_slot_count();
    for (const auto& f : pat.imm_fields) used += f.width;
    int leftover = BitBudget::capacity - used;
    for (auto& f : pat.imm_fields) {
        int room = f.arch_cap - f.width;
        int grow_by = std::min(room, leftover);
        f.width += grow_by;
        leftover -= grow_by;
    }

    pat.budget.opcode_bits = cfg.opcode_bits;
    pat.budget.used_reg_slots = pat.reg_slot_count();
    pat.budget.used_imm_bits = pat.total_imm_bits();
    pat.budget.padding_bits = leftover;

    // substitute constituent templates into one expression for the output
    std::vector<SemExpr> temp_exprs;
    for (size_t k = 0; k < len; ++k) {
        const PatternOp& op = pat.ops[k];
        struct Subst {
            const PatternOp& op;
            const std::vector<SemExpr>& temps;
            SemExpr apply(const SemExpr& e) const {
                if (e.kind == SemKind::read_slot) {
                    const Binding& b = op.reads[static_cast<size_t>(e.slot)];
                    if (b.kind == Binding::Kind::slot) return SemExpr::read(b.index);
                    return temps[static_cast<size_t>(b.index)];
                }
                if (e.kind == SemKind::imm_slot) return SemExpr::imm(*op.imm_field);
                SemExpr out = e;
                out.kids.clear();
                for (const auto& k2 : e.kids) out.kids.push_back(apply(k2));
                return out;
            }
        } subst{op, temp_exprs};
        temp_exprs.push_back(subst.apply(normalized_semantics(*op.base_spec)));
    }
    pat.fused = temp_exprs[static_cast<size_t>(output_temp)];

    pat.origin_slot_regs.push_back(run[static_cast<size_t>(output_temp)].dest);
    for (Reg r : input_regs) pat.origin_slot_regs.push_back(r);
    return pat;
}

// Removes duplicates, removes candidates whose immediate fields are
// dominated by an otherwise identical candidate, and orders the result by
// (descending op count, name, descending total immediate width) with a
// canonical-key tiebreak.
inline std::vector<CandidatePattern> postprocess(std::vector<CandidatePattern> cands) {
    std::vector<CandidatePattern> out;
    std::set<std::string> seen;
    for (auto& c : cands) {
        std::string full = c.structure_key() + "|" + c.width_key();
        if (seen.insert(full).second) out.push_back(std::move(c));
    }

    // replaceable removal: an equal candidate with fewer immediate bits in
    // every field loses to the wider one
    std::vector<bool> drop(out.size(), false);
    for (size_t i = 0; i < out.size(); ++i)
        for (size_t j = 0; j < out.size(); ++j) {
            if (i == j || drop[i]) continue;
            if (out[i].structure_key() != out[j].structure_key()) continue;
            bool j_wider_somewhere = false, j_ge_everywhere = true;
            for (size_t f = 0; f < out[i].imm_fields.size(); ++f) {
                if (out[j].imm_fields[f].width > out[i].imm_fields[f].width) j_wider_somewhere = true;
                if (out[j].imm_fields[f].width < out[i].imm_fields[f].width) j_ge_everywhere = false;
            }
            if (j_ge_everywhere && j_wider_somewhere) drop[i] = true;
        }
    std::vector<CandidatePattern> kept;
    for (size_t i = 0; i < out.size(); ++i)
        if (!drop[i]) kept.push_back(std::move(out[i]));

    std::sort(kept.begin(), kept.end(), [](const CandidatePattern& a, const CandidatePattern& b) {
        if (a.ops.size() != b.ops.size()) return a.ops.size() > b.ops.size();
        if (a.name != b.name) return a.name < b.name;
        if (a.total_imm_bits() != b.total_imm_bits()) return a.total_imm_bits() > b.total_imm_bits();
        auto ka = a.structure_key(), kb = b.structure_key();
        if (ka != kb) return ka < kb;
        return a.width_key() < b.width_key();
    });
    return kept;
}

// Raw candidate generation in deterministic program order. Within each block
// the start index advances past every emitted candidate and slides forward
// by one otherwise, so the first viable combination at each position wins.
inline std::vector<CandidatePattern> generate_candidates(const ProgramModel& program,
                                                         const GenConfig& cfg) {
    if (cfg.opcode_bits < 7) throw ConfigError("opcode_bits must be at least 7");
    if (cfg.min_ops < 2) throw ConfigError("min_ops must be at least 2");
    std::vector<CandidatePattern> cands;
    for (const auto& f : program.functions)
        for (const auto& block : f.blocks) {
            size_t start = 0;
            while (start < block.instrs.size()) {
                detail::Growth g = detail::grow(block, start, cfg);
                size_t len = g.ops.size();
                if (cfg.liveness == LivenessMode::strict && len >= static_cast<size_t>(cfg.min_ops))
                    len = detail::strict_extent(block, start, g.ops, cfg.min_ops);
                if (len >= static_cast<size_t>(cfg.min_ops)) {
                    cands.push_back(generalize(g.ops, len, static_cast<int>(len) - 1, cfg));
                    start += len;
                } else {
                    start += 1;
                }
            }
        }
    return cands;
}

inline std::vector<CandidatePattern> generate(const ProgramModel& program, const GenConfig& cfg) {
    return postprocess(generate_candidates(program, cfg));
}

}  // namespace arise_forge
