#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arise_forge/generator.hpp"
#include "arise_forge/oracle.hpp"
#include "arise_forge/selector.hpp"

namespace arise_forge {

// The four reserved RISC-V custom major opcodes (custom-0..custom-3).
inline constexpr uint32_t kCustomMajors[4] = {0b0001011, 0b0101011, 0b1011011, 0b1111011};

inline std::string imm_field_name(size_t index, size_t total) {
    return total == 1 ? "imm" : "imm" + std::to_string(index);
}

// One encoding field, least-significant-first within the 32-bit word.
struct EncodingField {
    enum class Kind : uint8_t { major, minor, rd, input, imm, pad } kind;
    int index = 0;       // input slot / imm field
    int width = 0;
    uint32_t value = 0;  // major, minor and pad carry constant bits

    bool operator==(const EncodingField& o) const {
        return kind == o.kind && index == o.index && width == o.width && value == o.value;
    }
};

// Bit layout of one custom instruction, from bit 0 upward: major opcode,
// minor opcode index, rd, input slots in order, immediate fields in order,
// constant-zero padding to bit 31. Deliberately simpler than the standard
// R-type placement; the description format accepts arbitrary encodings.
struct EncodingLayout {
    int opcode_bits = 0;
    std::vector<EncodingField> fields;

    uint32_t major() const { return fields.front().value; }
    int minor_index() const {
        return fields.size() > 1 && fields[1].kind == EncodingField::Kind::minor
                   ? static_cast<int>(fields[1].value)
                   : 0;
    }
    int total_bits() const {
        int n = 0;
        for (const auto& f : fields) n += f.width;
        return n;
    }
    bool operator==(const EncodingLayout& o) const {
        return opcode_bits == o.opcode_bits && fields == o.fields;
    }
};

inline EncodingLayout make_layout(const CandidatePattern& pat, int rank, int opcode_bits) {
    EncodingLayout lay;
    lay.opcode_bits = opcode_bits;
    lay.fields.push_back({EncodingField::Kind::major, 0, 7, kCustomMajors[rank % 4]});
    int minor_width = opcode_bits - 7;
    if (minor_width > 0)
        lay.fields.push_back({EncodingField::Kind::minor, 0, minor_width,
                              static_cast<uint32_t>(rank / 4)});
    lay.fields.push_back({EncodingField::Kind::rd, 0, 5, 0});
    for (int i = 0; i < pat.input_slots; ++i) lay.fields.push_back({EncodingField::Kind::input, i, 5, 0});
    for (size_t f = 0; f < pat.imm_fields.size(); ++f)
        lay.fields.push_back({EncodingField::Kind::imm, static_cast<int>(f), pat.imm_fields[f].width, 0});
    int pad = 32 - lay.total_bits();
    if (pad > 0) lay.fields.push_back({EncodingField::Kind::pad, 0, pad, 0});
    if (lay.total_bits() != 32) throw std::logic_error("encoding layout does not fill 32 bits");
    return lay;
}

// Rank i takes major custom-(i mod 4) with minor index i div 4.
inline std::vector<EncodingLayout> assign_opcodes(const std::vector<ScoredPattern>& selected,
                                                  int opcode_bits) {
    const int minor_width = opcode_bits - 7;
    const int capacity = (1 << minor_width) * 4;
    if (static_cast<int>(selected.size()) > capacity)
        throw std::logic_error("more selected patterns than opcode points");
    std::vector<EncodingLayout> out;
    out.reserve(selected.size());
    for (size_t i = 0; i < selected.size(); ++i)
        out.push_back(make_layout(selected[i].pattern, static_cast<int>(i), opcode_bits));
    return out;
}

namespace detail {

inline std::string binary_literal(uint32_t value, int width) {
    std::string s = "0b";
    for (int b = width - 1; b >= 0; --b) s += ((value >> b) & 1) ? '1' : '0';
    return s;
}

}  // namespace detail

// Most-significant-first `::`-joined field list, e.g.
// `imm[2:0] :: rs3[4:0] :: rs2[4:0] :: rs1[4:0] :: rd[4:0] :: 0b00 :: 0b0001011`.
inline std::string encoding_string(const EncodingLayout& lay, size_t imm_field_total) {
    std::string s;
    for (auto it = lay.fields.rbegin(); it != lay.fields.rend(); ++it) {
        if (!s.empty()) s += " :: ";
        switch (it->kind) {
            case EncodingField::Kind::major:
            case EncodingField::Kind::minor:
            case EncodingField::Kind::pad:
                s += detail::binary_literal(it->value, it->width);
                break;
            case EncodingField::Kind::rd:
                s += "rd[4:0]";
                break;
            case EncodingField::Kind::input:
                s += "rs" + std::to_string(it->index + 1) + "[" + std::to_string(it->width - 1) + ":0]";
                break;
            case EncodingField::Kind::imm:
                s += imm_field_name(static_cast<size_t>(it->index), imm_field_total) + "[" +
                     std::to_string(it->width - 1) + ":0]";
                break;
        }
    }
    return s;
}

// Parses an encoding string back into a layout; the round-trip check for
// emitted encodings. Constant runs at the low end are reinterpreted as major
// and minor opcode fields using `opcode_bits`.
inline std::optional<EncodingLayout> parse_encoding(std::string_view text, int opcode_bits,
                                                    size_t imm_field_total) {
    std::vector<EncodingField> msb_first;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t sep = text.find("::", pos);
        std::string_view tok = trim(text.substr(pos, sep == std::string_view::npos ? text.size() - pos
                                                                                   : sep - pos));
        pos = sep == std::string_view::npos ? text.size() + 1 : sep + 2;
        if (tok.empty()) return std::nullopt;
        EncodingField f{};
        if (tok.rfind("0b", 0) == 0) {
            f.kind = EncodingField::Kind::pad;
            f.width = 0;
            for (char c : tok.substr(2)) {
                if (c != '0' && c != '1') return std::nullopt;
                f.value = (f.value << 1) | static_cast<uint32_t>(c - '0');
                ++f.width;
            }
            if (f.width == 0) return std::nullopt;
        } else {
            size_t br = tok.find('[');
            if (br == std::string_view::npos || tok.back() != ']') return std::nullopt;
            std::string_view name = tok.substr(0, br);
            std::string_view range = tok.substr(br + 1, tok.size() - br - 2);
            size_t colon = range.find(':');
            if (colon == std::string_view::npos) return std::nullopt;
            int hi = 0, lo = 0;
            try {
                hi = std::stoi(std::string(range.substr(0, colon)));
                lo = std::stoi(std::string(range.substr(colon + 1)));
            } catch (...) {
                return std::nullopt;
            }
            if (lo != 0 || hi < 0) return std::nullopt;
            f.width = hi + 1;
            if (name == "rd") {
                f.kind = EncodingField::Kind::rd;
            } else if (name.rfind("rs", 0) == 0) {
                f.kind = EncodingField::Kind::input;
                try {
                    f.index = std::stoi(std::string(name.substr(2))) - 1;
                } catch (...) {
                    return std::nullopt;
                }
            } else if (name.rfind("imm", 0) == 0) {
                f.kind = EncodingField::Kind::imm;
                if (name == "imm") {
                    if (imm_field_total != 1) return std::nullopt;
                    f.index = 0;
                } else {
                    try {
                        f.index = std::stoi(std::string(name.substr(3)));
                    } catch (...) {
                        return std::nullopt;
                    }
                }
            } else {
                return std::nullopt;
            }
        }
        msb_first.push_back(f);
    }

    EncodingLayout lay;
    lay.opcode_bits = opcode_bits;
    lay.fields.assign(msb_first.rbegin(), msb_first.rend());
    if (lay.fields.empty() || lay.fields[0].kind != EncodingField::Kind::pad ||
        lay.fields[0].width != 7)
        return std::nullopt;
    lay.fields[0].kind = EncodingField::Kind::major;
    if (opcode_bits > 7) {
        if (lay.fields.size() < 2 || lay.fields[1].kind != EncodingField::Kind::pad ||
            lay.fields[1].width != opcode_bits - 7)
            return std::nullopt;
        lay.fields[1].kind = EncodingField::Kind::minor;
    }
    if (lay.total_bits() != 32) return std::nullopt;
    return lay;
}

// ---------------------------------------------------------------------------
// CoreDSL emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string coredsl_imm_ref(const CandidatePattern& pat, int field) {
    const ImmFieldSpec& f = pat.imm_fields[static_cast<size_t>(field)];
    std::string name = imm_field_name(static_cast<size_t>(field), pat.imm_fields.size());
    if (f.is_signed)
        return "(unsigned<32>)((signed<" + std::to_string(f.width) + ">)" + name + ")";
    return name;
}

// Renders one constituent's semantics over slot reads, temporaries and
// immediate fields as a CoreDSL expression.
inline std::string coredsl_expr(const SemExpr& e, const PatternOp& op, const CandidatePattern& pat) {
    auto operand = [&](const SemExpr& sub) { return coredsl_expr(sub, op, pat); };
    switch (e.kind) {
        case SemKind::read_slot: {
            const Binding& b = op.reads[static_cast<size_t>(e.slot)];
            if (b.kind == Binding::Kind::slot) return "X[rs" + std::to_string(b.index + 1) + "]";
            return "tmp_" + std::to_string(b.index);
        }
        case SemKind::imm_slot:
            return coredsl_imm_ref(pat, *op.imm_field);
        case SemKind::constant:
            return std::to_string(e.value);
        default:
            break;
    }
    const std::string a = operand(e.kids[0]);
    const std::string b = operand(e.kids[1]);
    // register shift amounts take the low five bits; immediate shift fields
    // are at most five bits wide already
    bool shift_needs_mask = e.kids[1].kind == SemKind::read_slot;
    const std::string sh = shift_needs_mask ? "(" + b + " & 0x1f)" : b;
    switch (e.kind) {
        case SemKind::add: return "(" + a + " + " + b + ")";
        case SemKind::sub: return "(" + a + " - " + b + ")";
        case SemKind::and_: return "(" + a + " & " + b + ")";
        case SemKind::or_: return "(" + a + " | " + b + ")";
        case SemKind::xor_: return "(" + a + " ^ " + b + ")";
        case SemKind::shl: return "(" + a + " << " + sh + ")";
        case SemKind::shr_logical: return "(" + a + " >> " + sh + ")";
        case SemKind::shr_arith:
            return "(unsigned<32>)(((signed<32>)" + a + ") >> " + sh + ")";
        case SemKind::slt_signed:
            return "((((signed<32>)" + a + ") < ((signed<32>)" + b + ")) ? 1 : 0)";
        case SemKind::slt_unsigned:
            return "((" + a + " < " + b + ") ? 1 : 0)";
        case SemKind::mul: return "(" + a + " * " + b + ")";
        case SemKind::mulh_ss:
            return "(unsigned<32>)((((signed<64>)(signed<32>)" + a + ") * ((signed<64>)(signed<32>)" +
                   b + ")) >> 32)";
        case SemKind::mulh_uu:
            return "(unsigned<32>)((((unsigned<64>)" + a + ") * ((unsigned<64>)" + b + ")) >> 32)";
        case SemKind::mulh_su:
            return "(unsigned<32>)((((signed<64>)(signed<32>)" + a + ") * ((signed<64>)(unsigned<64>)" +
                   b + ")) >> 32)";
        case SemKind::div_signed:
            return "((" + b + " == 0) ? 0xffffffff : ((((signed<32>)" + a +
                   " == -2147483648) && ((signed<32>)" + b + " == -1)) ? " + a +
                   " : (unsigned<32>)(((signed<32>)" + a + ") / ((signed<32>)" + b + "))))";
        case SemKind::div_unsigned:
            return "((" + b + " == 0) ? 0xffffffff : (" + a + " / " + b + "))";
        case SemKind::rem_signed:
            return "((" + b + " == 0) ? " + a + " : ((((signed<32>)" + a +
                   " == -2147483648) && ((signed<32>)" + b + " == -1)) ? 0 : (unsigned<32>)(((signed<32>)" +
                   a + ") % ((signed<32>)" + b + "))))";
        case SemKind::rem_unsigned:
            return "((" + b + " == 0) ? " + a + " : (" + a + " % " + b + "))";
        default:
            throw std::logic_error("coredsl_expr: unhandled kind");
    }
}

}  // namespace detail

// Upper-cased instruction name with dots stripped; callers disambiguate
// collisions with a numeric suffix.
inline std::string coredsl_base_name(const std::string& pattern_name) {
    std::string s;
    for (char c : pattern_name) {
        if (c == '.') continue;
        s += (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
    }
    return s;
}

struct EmitEntry {
    std::string coredsl_name;
    const CandidatePattern* pattern;
    EncodingLayout layout;
};

inline std::vector<EmitEntry> make_emit_entries(const std::vector<ScoredPattern>& selected,
                                                const std::vector<EncodingLayout>& layouts) {
    std::vector<EmitEntry> entries;
    std::map<std::string, int> used;
    for (size_t i = 0; i < selected.size(); ++i) {
        std::string base = coredsl_base_name(selected[i].pattern.name);
        int n = ++used[base];
        entries.push_back({n == 1 ? base : base + "_" + std::to_string(n), &selected[i].pattern,
                           layouts[i]});
    }
    return entries;
}

inline std::string pattern_signature(const CandidatePattern& pat) {
    std::string s = "rd";
    for (int i = 0; i < pat.input_slots; ++i) s += ", rs" + std::to_string(i + 1);
    for (size_t f = 0; f < pat.imm_fields.size(); ++f)
        s += ", " + imm_field_name(f, pat.imm_fields.size()) + "[" +
             std::to_string(pat.imm_fields[f].width - 1) + ":0]";
    return s;
}

// One `InstructionSet <name> extends RV32I` block holding every selected
// instruction. Byte-deterministic for identical inputs.
inline std::string emit_coredsl(const std::vector<EmitEntry>& entries, const std::string& set_name) {
    std::ostringstream os;
    os << "InstructionSet " << set_name << " extends RV32I {\n";
    os << "    instructions {\n";
    for (const auto& e : entries) {
        const CandidatePattern& pat = *e.pattern;
        os << "        " << e.coredsl_name << " {\n";
        os << "            encoding: " << encoding_string(e.layout, pat.imm_fields.size()) << ";\n";
        os << "            assembly: \"";
        os << "{name(rd)}";
        for (int i = 0; i < pat.input_slots; ++i) os << ", {name(rs" << (i + 1) << ")}";
        for (size_t f = 0; f < pat.imm_fields.size(); ++f)
            os << ", {" << imm_field_name(f, pat.imm_fields.size()) << "}";
        os << "\";\n";
        os << "            behavior: {\n";
        for (size_t k = 0; k < pat.ops.size(); ++k) {
            if (static_cast<int>(k) == pat.output_temp) continue;
            os << "                unsigned<32> tmp_" << k << " = "
               << detail::coredsl_expr(normalized_semantics(*pat.ops[k].base_spec), pat.ops[k], pat)
               << ";\n";
        }
        const PatternOp& out_op = pat.ops[static_cast<size_t>(pat.output_temp)];
        os << "                if (rd != 0) {\n";
        os << "                    X[rd] = "
           << detail::coredsl_expr(normalized_semantics(*out_op.base_spec), out_op, pat) << ";\n";
        os << "                }\n";
        os << "            }\n";
        os << "        }\n";
    }
    os << "    }\n";
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Improvement report (JSON). Written by hand so percentages are always
// rendered with exactly two decimals and keys keep a fixed order.
// ---------------------------------------------------------------------------

struct ReportMatch {
    std::string function;
    int block = 0, start = 0, length = 0;
    uint64_t exec_count = 1;
};

struct ReportCandidate {
    std::string name, coredsl_name, signature, encoding;
    int rank = 0;
    const CandidatePattern* pattern = nullptr;
    int64_t improvement_static = 0;
    std::optional<int64_t> improvement_dynamic_size, improvement_dynamic_count;
    std::vector<ReportMatch> matches;
};

struct ReportDocument {
    std::string mode;  // "generate" | "evaluate"
    std::string asm_name;
    std::optional<std::string> trace_name;
    std::optional<std::string> selection_name;
    MetricKind target = MetricKind::static_size;
    int opcode_bits = 9;
    LivenessMode liveness = LivenessMode::strict;
    bool m_ext = false;
    uint64_t seed = 0;
    int sel_count = 0;
    int unknown_mnemonics = 0;
    uint64_t unmatched_trace = 0;
    Recount totals;  // recomputed by the oracle, never copied from the selector
    std::vector<ReportCandidate> candidates;
};

namespace detail {

inline std::string json_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

inline std::string pct(int64_t saved, uint64_t baseline) {
    double p = baseline == 0 ? 0.0 : 100.0 * static_cast<double>(saved) / static_cast<double>(baseline);
    char buf[32];
    snprintf(buf, sizeof buf, "%.2f", p);
    return buf;
}

inline std::string opt_str(const std::optional<std::string>& s) {
    return s ? "\"" + json_escape(*s) + "\"" : "null";
}

template <class T>
std::string opt_num(const std::optional<T>& v) {
    return v ? std::to_string(*v) : "null";
}

}  // namespace detail

inline std::string emit_report(const ReportDocument& doc) {
    using detail::json_escape;
    std::ostringstream os;
    os << "{\n";
    os << "  \"tool\": \"arise-forge\",\n";
    os << "  \"mode\": \"" << doc.mode << "\",\n";
    os << "  \"config\": {\n";
    os << "    \"asm\": \"" << json_escape(doc.asm_name) << "\",\n";
    os << "    \"trace\": " << detail::opt_str(doc.trace_name) << ",\n";
    os << "    \"selection\": " << detail::opt_str(doc.selection_name) << ",\n";
    os << "    \"target\": \"" << to_string(doc.target) << "\",\n";
    os << "    \"opcode_bits\": " << doc.opcode_bits << ",\n";
    os << "    \"liveness\": \"" << to_string(doc.liveness) << "\",\n";
    os << "    \"m_ext\": " << (doc.m_ext ? "true" : "false") << ",\n";
    os << "    \"seed\": " << doc.seed << ",\n";
    os << "    \"sel_count\": " << doc.sel_count << ",\n";
    os << "    \"improvement_scan_bound\": \"index + size(pattern) <= size(instructions)\"\n";
    os << "  },\n";
    os << "  \"warnings\": {\n";
    os << "    \"unknown_mnemonics\": " << doc.unknown_mnemonics << ",\n";
    os << "    \"unmatched_trace_entries\": " << doc.unmatched_trace << "\n";
    os << "  },\n";
    os << "  \"baseline\": {\n";
    os << "    \"static_bytes\": " << doc.totals.static_baseline << ",\n";
    os << "    \"dynamic_bytes\": " << detail::opt_num(doc.totals.dynamic_size_baseline) << ",\n";
    os << "    \"dynamic_count\": " << detail::opt_num(doc.totals.dynamic_count_baseline) << "\n";
    os << "  },\n";
    os << "  \"selected\": [";
    for (size_t i = 0; i < doc.candidates.size(); ++i) {
        const ReportCandidate& rc = doc.candidates[i];
        const CandidatePattern& pat = *rc.pattern;
        os << (i == 0 ? "\n" : ",\n");
        os << "    {\n";
        os << "      \"rank\": " << rc.rank << ",\n";
        os << "      \"name\": \"" << json_escape(rc.name) << "\",\n";
        os << "      \"coredsl_name\": \"" << json_escape(rc.coredsl_name) << "\",\n";
        os << "      \"ops\": [";
        for (size_t k = 0; k < pat.ops.size(); ++k) {
            const PatternOp& op = pat.ops[k];
            os << (k == 0 ? "\n" : ",\n");
            os << "        {\"op\": \"" << op.base << "\", \"dest\": \"t" << k << "\", \"args\": [";
            bool first = true;
            for (const Binding& b : op.reads) {
                if (!first) os << ", ";
                first = false;
                if (b.kind == Binding::Kind::slot)
                    os << "\"rs" << (b.index + 1) << "\"";
                else
                    os << "\"t" << b.index << "\"";
            }
            if (op.imm_field) {
                if (!first) os << ", ";
                os << "\"" << imm_field_name(static_cast<size_t>(*op.imm_field), pat.imm_fields.size())
                   << "\"";
            }
            os << "]}";
        }
        os << "\n      ],\n";
        os << "      \"output\": \"t" << pat.output_temp << "\",\n";
        os << "      \"reg_slots\": [\"rd\"";
        for (int s = 0; s < pat.input_slots; ++s) os << ", \"rs" << (s + 1) << "\"";
        os << "],\n";
        os << "      \"imm_fields\": [";
        for (size_t f = 0; f < pat.imm_fields.size(); ++f) {
            os << (f == 0 ? "" : ", ");
            os << "{\"name\": \"" << imm_field_name(f, pat.imm_fields.size()) << "\", \"width\": "
               << pat.imm_fields[f].width << ", \"signed\": "
               << (pat.imm_fields[f].is_signed ? "true" : "false") << "}";
        }
        os << "],\n";
        os << "      \"signature\": \"" << json_escape(rc.signature) << "\",\n";
        os << "      \"encoding\": \"" << json_escape(rc.encoding) << "\",\n";
        os << "      \"improvement\": {\"static_size\": " << rc.improvement_static
           << ", \"dynamic_size\": " << detail::opt_num(rc.improvement_dynamic_size)
           << ", \"dynamic_count\": " << detail::opt_num(rc.improvement_dynamic_count) << "},\n";
        os << "      \"match_count\": " << rc.matches.size() << ",\n";
        os << "      \"matches\": [";
        for (size_t m = 0; m < rc.matches.size(); ++m) {
            const ReportMatch& rm = rc.matches[m];
            os << (m == 0 ? "\n" : ",\n");
            os << "        {\"function\": \"" << json_escape(rm.function) << "\", \"block\": "
               << rm.block << ", \"start\": " << rm.start << ", \"length\": " << rm.length
               << ", \"exec_count\": " << rm.exec_count << "}";
        }
        os << (rc.matches.empty() ? "]\n" : "\n      ]\n");
        os << "    }";
    }
    os << (doc.candidates.empty() ? "],\n" : "\n  ],\n");
    os << "  \"totals\": {\n";
    os << "    \"static_bytes_saved\": " << doc.totals.static_saved() << ",\n";
    os << "    \"static_pct\": " << detail::pct(doc.totals.static_saved(), doc.totals.static_baseline)
       << ",\n";
    auto dsz = doc.totals.dynamic_size_saved();
    auto dct = doc.totals.dynamic_count_saved();
    os << "    \"dynamic_bytes_saved\": " << detail::opt_num(dsz) << ",\n";
    os << "    \"dynamic_size_pct\": "
       << (dsz ? detail::pct(*dsz, *doc.totals.dynamic_size_baseline) : "null") << ",\n";
    os << "    \"dynamic_count_saved\": " << detail::opt_num(dct) << ",\n";
    os << "    \"dynamic_count_pct\": "
       << (dct ? detail::pct(*dct, *doc.totals.dynamic_count_baseline) : "null") << "\n";
    os << "  }\n";
    os << "}\n";
    return os.str();
}

}  // namespace arise_forge
