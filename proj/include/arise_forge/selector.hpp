#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "arise_forge/frontend.hpp"
#include "arise_forge/generator.hpp"

namespace arise_forge {

enum class MetricKind : uint8_t { static_size, dynamic_size, dynamic_count };

inline const char* to_string(MetricKind m) {
    switch (m) {
        case MetricKind::static_size: return "static-size";
        case MetricKind::dynamic_size: return "dynamic-size";
        case MetricKind::dynamic_count: return "dynamic-count";
    }
    return "?";
}

inline std::optional<MetricKind> parse_metric(std::string_view s) {
    if (s == "static-size") return MetricKind::static_size;
    if (s == "dynamic-size") return MetricKind::dynamic_size;
    if (s == "dynamic-count") return MetricKind::dynamic_count;
    return std::nullopt;
}

struct SelConfig {
    int opcode_bits = 9;
    static constexpr int custom_bits = 7;   // width of a RISC-V major opcode
    static constexpr int custom_count = 4;  // custom-0..custom-3
    MetricKind metric = MetricKind::static_size;

    int sel_count() const {
        if (opcode_bits < custom_bits) throw ConfigError("opcode_bits must be at least 7");
        return (1 << (opcode_bits - custom_bits)) * custom_count;
    }
};

struct MatchContext {
    LivenessMode mode = LivenessMode::strict;
    bool include_m_ext = false;
};

struct MatchSite {
    int func = -1;
    int block = -1;
    int start = 0;
    int length = 0;
    std::vector<Reg> slot_regs;       // aligned with [rd, rs1, ...]
    std::vector<int64_t> imm_values;  // per immediate field
    uint64_t exec_count = 1;
};

// Tries to instantiate `pattern` on the slice starting at `start`. Base
// mnemonics must agree positionally, the slice's register dataflow must
// reproduce the pattern's slot/intermediate structure (slots bind one
// register each; different slots may bind the same register), and immediates
// must fit their fields. In strict mode every written register other than
// the output must be dead after the slice within the block.
inline std::optional<MatchSite> match_at(const BasicBlock& block, size_t start,
                                         const CandidatePattern& pattern, const MatchContext& ctx) {
    const size_t n = pattern.ops.size();
    if (start + n > block.instrs.size()) return std::nullopt;

    std::vector<std::optional<Reg>> slot_regs(static_cast<size_t>(pattern.reg_slot_count()));
    std::vector<int64_t> imm_values(pattern.imm_fields.size(), 0);
    std::map<Reg, int> slice_defs;  // register -> last slice position writing it
    std::vector<Reg> dests;

    for (size_t k = 0; k < n; ++k) {
        const StaticInstr& in = block.instrs[start + k];
        if (!in.spec || !in.spec->fusable) return std::nullopt;
        if (in.spec->m_ext && !ctx.include_m_ext) return std::nullopt;
        auto norm = normalize(in);
        if (!norm) return std::nullopt;
        const PatternOp& pop = pattern.ops[k];
        if (norm->base->mnemonic != pop.base) return std::nullopt;
        if (norm->reads.size() != pop.reads.size()) return std::nullopt;
        if (norm->has_imm != pop.imm_field.has_value()) return std::nullopt;

        for (size_t p = 0; p < pop.reads.size(); ++p) {
            Reg r = norm->reads[p];
            auto def = slice_defs.find(r);
            const Binding& b = pop.reads[p];
            if (b.kind == Binding::Kind::slot) {
                if (def != slice_defs.end()) return std::nullopt;  // wants the external value
                auto& bound = slot_regs[static_cast<size_t>(b.index) + 1];
                if (bound && *bound != r) return std::nullopt;
                bound = r;
            } else {  // temp
                if (def == slice_defs.end() || def->second != b.index) return std::nullopt;
            }
        }
        if (norm->has_imm) {
            const ImmFieldSpec& f = pattern.imm_fields[static_cast<size_t>(*pop.imm_field)];
            if (!imm_fits(norm->imm, f.width, f.is_signed)) return std::nullopt;
            imm_values[static_cast<size_t>(*pop.imm_field)] = norm->imm;
        }
        if (norm->dest != kZeroReg) slice_defs[norm->dest] = static_cast<int>(k);
        dests.push_back(norm->dest);
    }

    Reg out_reg = dests[static_cast<size_t>(pattern.output_temp)];
    if (ctx.mode == LivenessMode::strict) {
        for (const auto& [r, last] : slice_defs) {
            if (r == out_reg && last == pattern.output_temp) continue;
            if (live_after(block, start + n - 1, r)) return std::nullopt;
        }
    }

    MatchSite site;
    site.start = static_cast<int>(start);
    site.length = static_cast<int>(n);
    site.slot_regs.resize(slot_regs.size());
    site.slot_regs[0] = out_reg;
    for (size_t i = 1; i < slot_regs.size(); ++i) site.slot_regs[i] = slot_regs[i].value_or(kZeroReg);
    site.imm_values = std::move(imm_values);
    return site;
}

namespace detail {

inline int64_t metric_of_slice(const BasicBlock& block, size_t start, size_t len, MetricKind m) {
    if (m == MetricKind::dynamic_count) return static_cast<int64_t>(len);
    int64_t bytes = 0;
    for (size_t i = 0; i < len; ++i) bytes += block.instrs[start + i].byte_size;
    return bytes;
}

inline int64_t metric_of_pattern(MetricKind m) {
    return m == MetricKind::dynamic_count ? 1 : 4;  // one fresh 32-bit instruction
}

}  // namespace detail

// Greedy non-overlapping left-to-right scan of one basic block: each match
// advances by the pattern length and contributes
// exec_weight * (Metric(slice) - Metric(pattern)). Dynamic metrics weight by
// the trace count of the slice's first address.
inline int64_t improvement(const BasicBlock& block, const CandidatePattern& pattern, MetricKind metric,
                           const TraceProfile* trace, const MatchContext& ctx) {
    if (metric != MetricKind::static_size && !trace)
        throw ConfigError("dynamic metrics require a trace");
    const size_t n = pattern.ops.size();
    int64_t improve = 0;
    size_t idx = 0;
    while (idx + n <= block.instrs.size()) {
        if (match_at(block, idx, pattern, ctx)) {
            uint64_t w = 1;
            if (metric != MetricKind::static_size) w = trace->count_at(block.instrs[idx].address);
            improve += static_cast<int64_t>(w) *
                       (detail::metric_of_slice(block, idx, n, metric) - detail::metric_of_pattern(metric));
            idx += n;
        } else {
            ++idx;
        }
    }
    return improve;
}

struct ScoredPattern {
    CandidatePattern pattern;
    int64_t improvement = 0;
};

// Drops candidates that improve nothing, ranks the rest by descending
// improvement (candidate order breaks ties), and keeps at most sel_count.
inline std::vector<ScoredPattern> rank_and_truncate(std::vector<ScoredPattern> scored, int sel_count) {
    std::erase_if(scored, [](const ScoredPattern& s) { return s.improvement <= 0; });
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredPattern& a, const ScoredPattern& b) {
        return a.improvement > b.improvement;
    });
    if (static_cast<int>(scored.size()) > sel_count) scored.resize(static_cast<size_t>(sel_count));
    return scored;
}

inline std::vector<ScoredPattern> select(const std::vector<CandidatePattern>& cands,
                                         const ProgramModel& program, const TraceProfile* trace,
                                         const SelConfig& cfg, const MatchContext& ctx) {
    std::vector<ScoredPattern> scored;
    scored.reserve(cands.size());
    for (const auto& c : cands) {
        int64_t total = 0;
        for (const auto& f : program.functions)
            for (const auto& b : f.blocks) total += improvement(b, c, cfg.metric, trace, ctx);
        scored.push_back({c, total});
    }
    return rank_and_truncate(std::move(scored), cfg.sel_count());
}

}  // namespace arise_forge
