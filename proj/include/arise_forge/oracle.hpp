#pragma once

#include <array>
#include <optional>
#include <vector>

#include "arise_forge/frontend.hpp"
#include "arise_forge/generator.hpp"
#include "arise_forge/selector.hpp"

namespace arise_forge {

// 32 x 32-bit register file; writes to register zero are discarded.
struct MachineState {
    std::array<uint32_t, 32> regs{};
    uint32_t get(Reg r) const { return r.index == 0 ? 0 : regs[r.index]; }
    void set(Reg r, uint32_t v) {
        if (r.index != 0) regs[r.index] = v;
    }
};

struct Replacement {
    int rank = 0;  // index into the ranked pattern list
    MatchSite site;
};

// The program with matched slices collapsed into synthetic 4-byte
// instructions. Non-replaced instructions are untouched; replacements never
// overlap. Represented as a per-instruction claim map over the original
// model plus the replacement log.
struct RewrittenProgram {
    const ProgramModel* original = nullptr;
    std::vector<std::vector<std::vector<int>>> claims;  // [func][block][instr] -> rank or -1
    std::vector<Replacement> log;                       // rank-major, then program order

    bool claimed(int f, int b, int i) const { return claims[f][b][i] >= 0; }
};

// Applies the ranked patterns: per block, each pattern in rank order scans
// left to right and claims any still-unclaimed matching slice.
inline RewrittenProgram rewrite(const ProgramModel& program,
                                const std::vector<ScoredPattern>& ranked, const MatchContext& ctx,
                                const TraceProfile* trace = nullptr) {
    RewrittenProgram rw;
    rw.original = &program;
    rw.claims.resize(program.functions.size());
    for (size_t f = 0; f < program.functions.size(); ++f) {
        rw.claims[f].resize(program.functions[f].blocks.size());
        for (size_t b = 0; b < program.functions[f].blocks.size(); ++b)
            rw.claims[f][b].assign(program.functions[f].blocks[b].instrs.size(), -1);
    }
    for (size_t rank = 0; rank < ranked.size(); ++rank) {
        const CandidatePattern& pat = ranked[rank].pattern;
        const size_t n = pat.ops.size();
        for (size_t f = 0; f < program.functions.size(); ++f)
            for (size_t b = 0; b < program.functions[f].blocks.size(); ++b) {
                const BasicBlock& block = program.functions[f].blocks[b];
                auto& claim = rw.claims[f][b];
                size_t i = 0;
                while (i + n <= block.instrs.size()) {
                    bool free = true;
                    for (size_t k = 0; k < n && free; ++k) free = claim[i + k] < 0;
                    if (free) {
                        if (auto site = match_at(block, i, pat, ctx)) {
                            site->func = static_cast<int>(f);
                            site->block = static_cast<int>(b);
                            site->exec_count = trace ? trace->count_at(block.instrs[i].address) : 1;
                            for (size_t k = 0; k < n; ++k) claim[i + k] = static_cast<int>(rank);
                            rw.log.push_back({static_cast<int>(rank), std::move(*site)});
                            i += n;
                            continue;
                        }
                    }
                    ++i;
                }
            }
    }
    return rw;
}

struct Recount {
    uint64_t static_baseline = 0;
    uint64_t static_rewritten = 0;
    std::optional<uint64_t> dynamic_size_baseline, dynamic_size_rewritten;
    std::optional<uint64_t> dynamic_count_baseline, dynamic_count_rewritten;

    int64_t static_saved() const {
        return static_cast<int64_t>(static_baseline) - static_cast<int64_t>(static_rewritten);
    }
    std::optional<int64_t> dynamic_size_saved() const {
        if (!dynamic_size_baseline) return std::nullopt;
        return static_cast<int64_t>(*dynamic_size_baseline) - static_cast<int64_t>(*dynamic_size_rewritten);
    }
    std::optional<int64_t> dynamic_count_saved() const {
        if (!dynamic_count_baseline) return std::nullopt;
        return static_cast<int64_t>(*dynamic_count_baseline) -
               static_cast<int64_t>(*dynamic_count_rewritten);
    }
};

// Recounts all metrics from scratch over the rewritten program. Dynamic
// figures need a trace and are reported absent without one; a synthetic
// instruction inherits the execution count of its slice's first address.
inline Recount recount(const ProgramModel& original, const RewrittenProgram& rw,
                       const TraceProfile* trace) {
    Recount rc;
    if (trace) {
        rc.dynamic_size_baseline = 0;
        rc.dynamic_size_rewritten = 0;
        rc.dynamic_count_baseline = 0;
        rc.dynamic_count_rewritten = 0;
    }
    for (size_t f = 0; f < original.functions.size(); ++f)
        for (size_t b = 0; b < original.functions[f].blocks.size(); ++b) {
            const auto& block = original.functions[f].blocks[b];
            const auto& claim = rw.claims[f][b];
            for (size_t i = 0; i < block.instrs.size(); ++i) {
                const auto& in = block.instrs[i];
                uint64_t bytes = static_cast<uint64_t>(in.byte_size);
                rc.static_baseline += bytes;
                if (claim[i] < 0) rc.static_rewritten += bytes;
                if (trace) {
                    uint64_t c = trace->count_at(in.address);
                    *rc.dynamic_size_baseline += c * bytes;
                    *rc.dynamic_count_baseline += c;
                    if (claim[i] < 0) {
                        *rc.dynamic_size_rewritten += c * bytes;
                        *rc.dynamic_count_rewritten += c;
                    }
                }
            }
        }
    for (const auto& rep : rw.log) {
        rc.static_rewritten += 4;
        if (trace) {
            *rc.dynamic_size_rewritten += rep.site.exec_count * 4;
            *rc.dynamic_count_rewritten += rep.site.exec_count;
        }
    }
    return rc;
}

// Metric delta of applying exactly one pattern; the independent cross-check
// for the selector's improvement figure.
inline int64_t pattern_metric_delta(const ProgramModel& program, const CandidatePattern& pattern,
                                    MetricKind metric, const TraceProfile* trace,
                                    const MatchContext& ctx) {
    if (metric != MetricKind::static_size && !trace)
        throw ConfigError("dynamic metrics require a trace");
    std::vector<ScoredPattern> one{{pattern, 0}};
    RewrittenProgram rw = rewrite(program, one, ctx, trace);
    Recount rc = recount(program, rw, trace);
    switch (metric) {
        case MetricKind::static_size: return rc.static_saved();
        case MetricKind::dynamic_size: return *rc.dynamic_size_saved();
        case MetricKind::dynamic_count: return *rc.dynamic_count_saved();
    }
    return 0;
}

struct EquivCounterexample {
    uint64_t trial = 0;
    MachineState state;
    std::vector<int64_t> imm_values;
    uint32_t expected = 0;
    uint32_t got = 0;
};

struct EquivResult {
    bool pass = true;
    std::optional<EquivCounterexample> counterexample;
};

inline int64_t random_imm_in_field(SplitMix64& rng, const ImmFieldSpec& f) {
    uint64_t span = uint64_t(1) << f.width;
    uint64_t raw = rng.below(span);
    if (f.is_signed && f.width < 64 && (raw >> (f.width - 1)) & 1)
        return static_cast<int64_t>(raw) - static_cast<int64_t>(span);
    return static_cast<int64_t>(raw);
}

// Interprets the constituents sequentially over the pattern's origin
// registers on pseudo-random machine states and compares the output register
// against the fused expression evaluated on the initial state. Deterministic
// under `seed`; reports the lowest failing trial.
inline EquivResult check_equivalence(const CandidatePattern& pattern, uint64_t trials, uint64_t seed) {
    if (pattern.origin_slot_regs.empty() || pattern.origin_dest_regs.size() != pattern.ops.size())
        throw std::logic_error("check_equivalence: pattern carries no origin bindings");
    SplitMix64 rng(seed);
    for (uint64_t t = 0; t < trials; ++t) {
        MachineState init;
        for (int r = 1; r < 32; ++r) init.regs[r] = rng.next_u32();
        std::vector<int64_t> imms(pattern.imm_fields.size());
        for (size_t f = 0; f < imms.size(); ++f) imms[f] = random_imm_in_field(rng, pattern.imm_fields[f]);

        uint32_t expected = eval_expr(pattern.fused, [&](SemKind k, int slot) -> uint32_t {
            if (k == SemKind::read_slot)
                return init.get(pattern.origin_slot_regs[static_cast<size_t>(slot) + 1]);
            return static_cast<uint32_t>(imms[static_cast<size_t>(slot)]);
        });

        MachineState m = init;
        for (size_t k = 0; k < pattern.ops.size(); ++k) {
            const PatternOp& op = pattern.ops[k];
            std::vector<uint32_t> read_vals;
            for (const Binding& b : op.reads) {
                Reg r = b.kind == Binding::Kind::slot
                            ? pattern.origin_slot_regs[static_cast<size_t>(b.index) + 1]
                            : pattern.origin_dest_regs[static_cast<size_t>(b.index)];
                read_vals.push_back(m.get(r));
            }
            uint32_t result = eval_expr(normalized_semantics(*op.base_spec),
                                        [&](SemKind kind, int slot) -> uint32_t {
                                            if (kind == SemKind::read_slot)
                                                return read_vals[static_cast<size_t>(slot)];
                                            return static_cast<uint32_t>(
                                                imms[static_cast<size_t>(*op.imm_field)]);
                                        });
            m.set(pattern.origin_dest_regs[k], result);
        }
        uint32_t got = m.get(pattern.origin_dest_regs[static_cast<size_t>(pattern.output_temp)]);

        if (expected != got)
            return {false, EquivCounterexample{t, init, std::move(imms), expected, got}};
    }
    return {true, std::nullopt};
}

}  // namespace arise_forge
