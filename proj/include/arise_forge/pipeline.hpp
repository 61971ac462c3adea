#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arise_forge/emitter.hpp"
#include "arise_forge/frontend.hpp"
#include "arise_forge/generator.hpp"
#include "arise_forge/oracle.hpp"
#include "arise_forge/selector.hpp"

namespace arise_forge {

enum class RunStatus : int {
    ok = 0,
    parse_error = 1,
    config_error = 2,
    internal_error = 3,  // oracle disagreement or broken invariant
};

struct RunConfig {
    std::string asm_path;
    std::string trace_path;      // empty: no trace
    std::string selection_path;  // evaluate only
    MetricKind target = MetricKind::static_size;
    int opcode_bits = 9;
    LivenessMode liveness = LivenessMode::strict;
    std::string out_coredsl;  // empty: derive from the asm file name
    std::string out_report;
    uint64_t seed = 1;
    bool m_ext = false;
    std::string set_name = "GeneratedISE";
    int log_level = 1;  // 0 quiet, 1 normal, 2 debug (ARISE_FORGE_LOG)
};

namespace detail {

inline std::string basename_of(const std::string& path) {
    size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

inline std::string stem_of(const std::string& path) {
    std::string base = basename_of(path);
    size_t dot = base.find_last_of('.');
    return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(0, "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
    if (!out) throw ConfigError("write failed: " + path);
}

struct LoadedProgram {
    ProgramModel model;
    std::optional<TraceProfile> trace;
};

inline LoadedProgram load_inputs(const RunConfig& cfg) {
    LoadedProgram lp;
    lp.model = parse_disassembly(read_file(cfg.asm_path));
    if (!cfg.trace_path.empty()) lp.trace = parse_trace(read_file(cfg.trace_path), lp.model);
    return lp;
}

inline void validate(const RunConfig& cfg, bool evaluating) {
    if (cfg.opcode_bits < 7) throw ConfigError("--opcode-bits must be at least 7");
    // 22 opcode bits + rd + one input slot already fill the word
    if (cfg.opcode_bits > 22) throw ConfigError("--opcode-bits above 22 cannot encode any pattern");
    if (cfg.asm_path.empty()) throw ConfigError("--asm is required");
    if (!evaluating && cfg.target != MetricKind::static_size && cfg.trace_path.empty())
        throw ConfigError("dynamic targets require --trace");
    if (evaluating && cfg.selection_path.empty()) throw ConfigError("--selection is required");
}

inline std::vector<ReportMatch> matches_of_rank(const RewrittenProgram& rw, const ProgramModel& model,
                                                int rank) {
    std::vector<ReportMatch> out;
    for (const auto& rep : rw.log)
        if (rep.rank == rank)
            out.push_back({model.functions[static_cast<size_t>(rep.site.func)].name, rep.site.block,
                           rep.site.start, rep.site.length, rep.site.exec_count});
    return out;
}

// Per-candidate improvement under every computable metric, for the report.
inline void fill_improvements(ReportCandidate& rc, const CandidatePattern& pat,
                              const ProgramModel& model, const TraceProfile* trace,
                              const MatchContext& ctx) {
    auto total = [&](MetricKind m) {
        int64_t t = 0;
        for (const auto& f : model.functions)
            for (const auto& b : f.blocks) t += improvement(b, pat, m, trace, ctx);
        return t;
    };
    rc.improvement_static = total(MetricKind::static_size);
    if (trace) {
        rc.improvement_dynamic_size = total(MetricKind::dynamic_size);
        rc.improvement_dynamic_count = total(MetricKind::dynamic_count);
    }
}

}  // namespace detail

// Runs parse -> generate -> select -> oracle verify -> emit. Produces the
// instruction-set file and the report; prints one line per selected
// instruction.
inline RunStatus run_generate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        detail::validate(cfg, false);
        auto lp = detail::load_inputs(cfg);
        const TraceProfile* trace = lp.trace ? &*lp.trace : nullptr;
        if (cfg.log_level >= 2) err << "parsed " << lp.model.instr_count() << " instructions\n";
        if (cfg.log_level >= 1 && lp.model.unknown_mnemonic_count > 0)
            err << "warning: " << lp.model.unknown_mnemonic_count
                << " instructions with unknown mnemonics were kept non-fusable\n";
        if (cfg.log_level >= 1 && trace && trace->unmatched > 0)
            err << "warning: " << trace->unmatched << " trace entries matched no instruction\n";

        GenConfig gen_cfg{cfg.opcode_bits, cfg.liveness, 2, cfg.m_ext};
        std::vector<CandidatePattern> cands = generate(lp.model, gen_cfg);
        if (cfg.log_level >= 2) err << "generated " << cands.size() << " candidates\n";

        SelConfig sel_cfg;
        sel_cfg.opcode_bits = cfg.opcode_bits;
        sel_cfg.metric = cfg.target;
        MatchContext ctx{cfg.liveness, cfg.m_ext};
        std::vector<ScoredPattern> selected = select(cands, lp.model, trace, sel_cfg, ctx);

        // oracle verification: the selector's score must equal the
        // rewrite-and-recount delta of the pattern applied alone, and the
        // fused semantics must match sequential interpretation
        for (const auto& s : selected) {
            int64_t delta = pattern_metric_delta(lp.model, s.pattern, cfg.target, trace, ctx);
            if (delta != s.improvement) {
                err << "internal error: selector improvement " << s.improvement << " != oracle delta "
                    << delta << " for " << s.pattern.name << "\n";
                return RunStatus::internal_error;
            }
            EquivResult eq = check_equivalence(s.pattern, 256, cfg.seed);
            if (!eq.pass) {
                err << "internal error: fused semantics of " << s.pattern.name
                    << " diverge from sequential interpretation (trial "
                    << eq.counterexample->trial << ")\n";
                return RunStatus::internal_error;
            }
        }

        std::vector<EncodingLayout> layouts = assign_opcodes(selected, cfg.opcode_bits);
        std::vector<EmitEntry> entries = make_emit_entries(selected, layouts);
        RewrittenProgram rw = rewrite(lp.model, selected, ctx, trace);

        ReportDocument doc;
        doc.mode = "generate";
        doc.asm_name = detail::basename_of(cfg.asm_path);
        if (trace) doc.trace_name = detail::basename_of(cfg.trace_path);
        doc.target = cfg.target;
        doc.opcode_bits = cfg.opcode_bits;
        doc.liveness = cfg.liveness;
        doc.m_ext = cfg.m_ext;
        doc.seed = cfg.seed;
        doc.sel_count = sel_cfg.sel_count();
        doc.unknown_mnemonics = lp.model.unknown_mnemonic_count;
        doc.unmatched_trace = trace ? trace->unmatched : 0;
        doc.totals = recount(lp.model, rw, trace);
        for (size_t i = 0; i < selected.size(); ++i) {
            ReportCandidate rc;
            rc.rank = static_cast<int>(i);
            rc.name = selected[i].pattern.name;
            rc.coredsl_name = entries[i].coredsl_name;
            rc.pattern = &selected[i].pattern;
            rc.signature = pattern_signature(selected[i].pattern);
            rc.encoding = encoding_string(layouts[i], selected[i].pattern.imm_fields.size());
            detail::fill_improvements(rc, selected[i].pattern, lp.model, trace, ctx);
            rc.matches = detail::matches_of_rank(rw, lp.model, static_cast<int>(i));
            doc.candidates.push_back(std::move(rc));
        }

        std::string coredsl_path = cfg.out_coredsl.empty()
                                       ? detail::stem_of(cfg.asm_path) + ".core_desc"
                                       : cfg.out_coredsl;
        std::string report_path = cfg.out_report.empty()
                                      ? detail::stem_of(cfg.asm_path) + ".report.json"
                                      : cfg.out_report;
        detail::write_file(coredsl_path, emit_coredsl(entries, cfg.set_name));
        detail::write_file(report_path, emit_report(doc));

        for (size_t i = 0; i < doc.candidates.size(); ++i) {
            const auto& rc = doc.candidates[i];
            out << "[" << i << "] " << rc.coredsl_name << "  ops=" << selected[i].pattern.ops.size()
                << "  improvement(" << to_string(cfg.target) << ")=" << selected[i].improvement
                << "  matches=" << rc.matches.size() << "\n";
        }
        if (cfg.log_level >= 1)
            out << "selected " << selected.size() << " of " << cands.size() << " candidates -> "
                << coredsl_path << ", " << report_path << "\n";
        return RunStatus::ok;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return RunStatus::parse_error;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return RunStatus::config_error;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return RunStatus::internal_error;
    }
}

// ---------------------------------------------------------------------------
// Selection reload: a prior generate run's report is the machine-readable
// pattern list.
// ---------------------------------------------------------------------------

struct LoadedSelection {
    std::vector<ScoredPattern> patterns;  // in file (rank) order
    std::vector<std::string> names, coredsl_names, encodings;
    int opcode_bits = 9;
    bool m_ext = false;
    int sel_count = 0;
};

inline LoadedSelection load_selection(const std::string& text) {
    using nlohmann::json;
    LoadedSelection sel;
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("selection: invalid JSON: ") + e.what());
    }
    try {
        sel.opcode_bits = j.at("config").at("opcode_bits").get<int>();
        sel.m_ext = j.at("config").at("m_ext").get<bool>();
        sel.sel_count = j.at("config").at("sel_count").get<int>();
        for (const auto& c : j.at("selected")) {
            CandidatePattern pat;
            pat.name = c.at("name").get<std::string>();
            size_t slot_count = c.at("reg_slots").size();
            pat.input_slots = static_cast<int>(slot_count) - 1;
            for (const auto& f : c.at("imm_fields")) {
                ImmFieldSpec spec;
                spec.width = f.at("width").get<int>();
                spec.is_signed = f.at("signed").get<bool>();
                pat.imm_fields.push_back(spec);
            }
            std::string out_tok = c.at("output").get<std::string>();
            pat.output_temp = std::stoi(out_tok.substr(1));
            size_t op_index = 0;
            for (const auto& o : c.at("ops")) {
                PatternOp op;
                op.base = o.at("op").get<std::string>();
                op.base_spec = lookup_op(op.base);
                if (!op.base_spec || !op.base_spec->has_semantic)
                    throw ConfigError("selection: unknown constituent op " + op.base);
                for (const auto& a : o.at("args")) {
                    std::string tok = a.get<std::string>();
                    if (tok.rfind("rs", 0) == 0)
                        op.reads.push_back({Binding::Kind::slot, std::stoi(tok.substr(2)) - 1});
                    else if (tok[0] == 't')
                        op.reads.push_back({Binding::Kind::temp, std::stoi(tok.substr(1))});
                    else if (tok.rfind("imm", 0) == 0)
                        op.imm_field = tok == "imm" ? 0 : std::stoi(tok.substr(3));
                    else
                        throw ConfigError("selection: bad arg token " + tok);
                }
                if (static_cast<int>(op_index) != pat.output_temp)
                    pat.intermediates.push_back(static_cast<int>(op_index));
                ++op_index;
                pat.ops.push_back(std::move(op));
            }
            if (pat.ops.empty() || pat.output_temp < 0 ||
                pat.output_temp >= static_cast<int>(pat.ops.size()))
                throw ConfigError("selection: bad output reference in " + pat.name);

            // rebuild the fused expression from the constituent templates
            std::vector<SemExpr> temps;
            for (const auto& op : pat.ops) {
                struct Subst {
                    const PatternOp& op;
                    const std::vector<SemExpr>& temps;
                    SemExpr apply(const SemExpr& e) const {
                        if (e.kind == SemKind::read_slot) {
                            const Binding& b = op.reads.at(static_cast<size_t>(e.slot));
                            if (b.kind == Binding::Kind::slot) return SemExpr::read(b.index);
                            return temps.at(static_cast<size_t>(b.index));
                        }
                        if (e.kind == SemKind::imm_slot) return SemExpr::imm(*op.imm_field);
                        SemExpr out = e;
                        out.kids.clear();
                        for (const auto& k : e.kids) out.kids.push_back(apply(k));
                        return out;
                    }
                } subst{op, temps};
                temps.push_back(subst.apply(normalized_semantics(*op.base_spec)));
            }
            pat.fused = temps[static_cast<size_t>(pat.output_temp)];

            pat.budget.opcode_bits = sel.opcode_bits;
            pat.budget.used_reg_slots = pat.reg_slot_count();
            pat.budget.used_imm_bits = pat.total_imm_bits();
            pat.budget.padding_bits = BitBudget::capacity - pat.budget.opcode_bits -
                                      5 * pat.budget.used_reg_slots - pat.budget.used_imm_bits;
            if (pat.budget.padding_bits < 0 || pat.budget.total() != BitBudget::capacity)
                throw ConfigError("selection: pattern " + pat.name + " does not fit 32 bits");

            sel.names.push_back(pat.name);
            sel.coredsl_names.push_back(c.at("coredsl_name").get<std::string>());
            sel.encodings.push_back(c.at("encoding").get<std::string>());
            sel.patterns.push_back({std::move(pat), 0});
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("selection: missing or malformed field: ") + e.what());
    }
    return sel;
}

// Rewrites the program with a previously selected pattern list, recounts all
// metrics from scratch, and writes an evaluation report.
inline RunStatus run_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        detail::validate(cfg, true);
        auto lp = detail::load_inputs(cfg);
        const TraceProfile* trace = lp.trace ? &*lp.trace : nullptr;
        LoadedSelection sel = load_selection(detail::read_file(cfg.selection_path));
        MatchContext ctx{cfg.liveness, sel.m_ext};

        RewrittenProgram rw = rewrite(lp.model, sel.patterns, ctx, trace);
        Recount rc = recount(lp.model, rw, trace);

        ReportDocument doc;
        doc.mode = "evaluate";
        doc.asm_name = detail::basename_of(cfg.asm_path);
        if (trace) doc.trace_name = detail::basename_of(cfg.trace_path);
        doc.selection_name = detail::basename_of(cfg.selection_path);
        doc.target = cfg.target;
        doc.opcode_bits = sel.opcode_bits;
        doc.liveness = cfg.liveness;
        doc.m_ext = sel.m_ext;
        doc.seed = cfg.seed;
        doc.sel_count = sel.sel_count;
        doc.unknown_mnemonics = lp.model.unknown_mnemonic_count;
        doc.unmatched_trace = trace ? trace->unmatched : 0;
        doc.totals = rc;
        for (size_t i = 0; i < sel.patterns.size(); ++i) {
            ReportCandidate cand;
            cand.rank = static_cast<int>(i);
            cand.name = sel.names[i];
            cand.coredsl_name = sel.coredsl_names[i];
            cand.pattern = &sel.patterns[i].pattern;
            cand.signature = pattern_signature(sel.patterns[i].pattern);
            cand.encoding = sel.encodings[i];
            detail::fill_improvements(cand, sel.patterns[i].pattern, lp.model, trace, ctx);
            cand.matches = detail::matches_of_rank(rw, lp.model, static_cast<int>(i));
            doc.candidates.push_back(std::move(cand));
        }

        std::string report_path = cfg.out_report.empty()
                                      ? detail::stem_of(cfg.asm_path) + ".eval.report.json"
                                      : cfg.out_report;
        detail::write_file(report_path, emit_report(doc));

        out << "static_size: " << detail::pct(rc.static_saved(), rc.static_baseline) << "% ("
            << rc.static_saved() << " of " << rc.static_baseline << " bytes)\n";
        if (auto s = rc.dynamic_size_saved())
            out << "dynamic_size: " << detail::pct(*s, *rc.dynamic_size_baseline) << "% (" << *s
                << " of " << *rc.dynamic_size_baseline << " bytes)\n";
        else
            out << "dynamic_size: n/a (no trace)\n";
        if (auto s = rc.dynamic_count_saved())
            out << "dynamic_count: " << detail::pct(*s, *rc.dynamic_count_baseline) << "% (" << *s
                << " of " << *rc.dynamic_count_baseline << " instructions)\n";
        else
            out << "dynamic_count: n/a (no trace)\n";
        return RunStatus::ok;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return RunStatus::parse_error;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return RunStatus::config_error;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return RunStatus::internal_error;
    }
}

}  // namespace arise_forge
