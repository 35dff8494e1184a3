#include "sage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sage/dsl/lexer.hpp"
#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"
#include "sage/pipeline.hpp"
#include "sage/representation.hpp"
#include "sage/verifier1.hpp"

namespace sage::eval {

using dsl::AbmProgram;
using dsl::Expr;
using dsl::Statement;

namespace {

// ---- lexical components ----------------------------------------------

std::vector<std::string> token_stream(const AbmProgram& p) {
    auto lexed = dsl::tokenize(dsl::print_program(p));
    std::vector<std::string> out;
    for (const auto& t : lexed.tokens) {
        if (t.kind == dsl::TokenKind::EndOfFile) break;
        out.push_back(t.text.empty() ? "?" : t.text);
    }
    return out;
}

std::vector<bool> keyword_mask(const AbmProgram& p) {
    auto lexed = dsl::tokenize(dsl::print_program(p));
    std::vector<bool> out;
    for (const auto& t : lexed.tokens) {
        if (t.kind == dsl::TokenKind::EndOfFile) break;
        out.push_back(t.kind == dsl::TokenKind::Keyword);
    }
    return out;
}

std::string join_ngram(const std::vector<std::string>& tokens, std::size_t start,
                       std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += '\x1f';
        out += tokens[start + i];
    }
    return out;
}

double bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
            const std::vector<bool>* cand_kw, const std::vector<bool>* ref_kw) {
    double log_sum = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::string, double> ref_counts;
        if (ref.size() >= n)
            for (std::size_t i = 0; i + n <= ref.size(); ++i) {
                std::string g = join_ngram(ref, i, n);
                double w = 1.0;
                if (ref_kw)
                    for (std::size_t k = i; k < i + n; ++k)
                        if ((*ref_kw)[k]) {
                            w = 2.0;
                            break;
                        }
                ref_counts[g] += w;
            }
        double matched = 0, totals = 0;
        if (cand.size() >= n)
            for (std::size_t i = 0; i + n <= cand.size(); ++i) {
                std::string g = join_ngram(cand, i, n);
                double w = 1.0;
                if (cand_kw)
                    for (std::size_t k = i; k < i + n; ++k)
                        if ((*cand_kw)[k]) {
                            w = 2.0;
                            break;
                        }
                totals += w;
                auto it = ref_counts.find(g);
                if (it != ref_counts.end() && it->second > 0) {
                    double take = std::min(w, it->second);
                    matched += take;
                    it->second -= take;
                }
            }
        if (totals == 0 || matched == 0) return 0.0;
        log_sum += 0.25 * std::log(matched / totals);
    }
    double bp = 1.0;
    if (cand.size() < ref.size())
        bp = std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
    return bp * std::exp(log_sum);
}

// ---- tree component ----------------------------------------------------

struct STree {
    std::string label;
    std::vector<STree> children;

    int depth() const {
        int d = 0;
        for (const auto& c : children) d = std::max(d, c.depth());
        return d + 1;
    }
    void serialize(std::string& out) const {
        out += '(';
        out += label;
        for (const auto& c : children) c.serialize(out);
        out += ')';
    }
};

STree leaf(std::string label) { return STree{std::move(label), {}}; }

STree expr_tree(const Expr& e) {
    return std::visit(
        [&](const auto& node) -> STree {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, dsl::BoolLit>) {
                return leaf(node.value ? "true" : "false");
            } else if constexpr (std::is_same_v<T, dsl::IntLit>) {
                return leaf("int:" + std::to_string(node.value));
            } else if constexpr (std::is_same_v<T, dsl::RealLit>) {
                return leaf("real:" + dsl::format_real(node.value));
            } else if constexpr (std::is_same_v<T, dsl::StringLit>) {
                return leaf("str");
            } else if constexpr (std::is_same_v<T, dsl::PosLit>) {
                return leaf("pos:" + std::to_string(node.value.x) + "," +
                            std::to_string(node.value.y));
            } else if constexpr (std::is_same_v<T, dsl::Ref>) {
                switch (node.scope) {
                    case dsl::RefScope::SelfState: return leaf("self-ref(id)");
                    case dsl::RefScope::OtherState: return leaf("other-ref(id)");
                    default: return leaf("param-ref(id)");
                }
            } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                return STree{std::string("binop:") + dsl::to_string(node.op),
                             {expr_tree(*node.lhs), expr_tree(*node.rhs)}};
            } else if constexpr (std::is_same_v<T, dsl::Not>) {
                return STree{"not", {expr_tree(*node.operand)}};
            } else if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                return STree{"bernoulli", {expr_tree(*node.probability)}};
            } else if constexpr (std::is_same_v<T, dsl::Uniform>) {
                return STree{"uniform", {expr_tree(*node.low), expr_tree(*node.high)}};
            } else if constexpr (std::is_same_v<T, dsl::RandInt>) {
                return STree{"randint", {expr_tree(*node.low), expr_tree(*node.high)}};
            } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                return STree{"count_neighbors",
                             {expr_tree(*node.radius), expr_tree(*node.predicate)}};
            } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                return STree{"count_all", {leaf("id"), expr_tree(*node.predicate)}};
            } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                return STree{"sum_all", {leaf("id"), expr_tree(*node.value)}};
            } else {
                return leaf("distance");
            }
        },
        e.node);
}

STree stmt_tree(const Statement& s) {
    return std::visit(
        [&](const auto& node) -> STree {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, dsl::Assign>) {
                const char* scope =
                    node.target_scope == dsl::RefScope::SelfState ? "assign-self" : "assign-other";
                return STree{scope, {leaf("id"), expr_tree(node.value)}};
            } else if constexpr (std::is_same_v<T, dsl::If>) {
                STree then_block{"block", {}};
                for (const auto& c : node.then_body) then_block.children.push_back(stmt_tree(c));
                STree else_block{"block", {}};
                for (const auto& c : node.else_body) else_block.children.push_back(stmt_tree(c));
                return STree{"if", {expr_tree(node.condition), then_block, else_block}};
            } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                STree block{"block", {}};
                for (const auto& c : node.body) block.children.push_back(stmt_tree(c));
                return STree{"for_neighbor", {expr_tree(node.radius), block}};
            } else if constexpr (std::is_same_v<T, dsl::RecordEvent>) {
                return STree{"record_event", {leaf("id")}};
            } else {
                return leaf("todo");
            }
        },
        s.node);
}

STree program_tree(const AbmProgram& p) {
    STree root{"program", {}};
    STree params{"params", {}};
    for (const auto& [name, v] : p.parameters) {
        (void)name;
        params.children.push_back(
            STree{"param", {leaf("id"), leaf(v.integer ? "int:" + std::to_string(static_cast<std::int64_t>(v.value))
                                                       : "real:" + dsl::format_real(v.value))}});
    }
    root.children.push_back(std::move(params));

    for (const auto& obj : p.objects) {
        STree cls{"object", {leaf("id")}};
        for (const auto& s : obj.state_decls)
            cls.children.push_back(STree{std::string("state:") + rep::to_string(s.type),
                                         {leaf("id"), expr_tree(s.init)}});
        for (const auto& a : obj.activities) {
            STree act{"activity", {leaf("id")}};
            for (const auto& stmt : a.body) act.children.push_back(stmt_tree(stmt));
            cls.children.push_back(std::move(act));
        }
        root.children.push_back(std::move(cls));
    }

    STree sched{"schedule", {}};
    for (const auto& step : p.schedule) {
        STree s{std::string("step:") + rep::to_string(step.kind), {leaf("id"), leaf("id")}};
        if (step.condition) s.children.push_back(expr_tree(*step.condition));
        sched.children.push_back(std::move(s));
    }
    root.children.push_back(std::move(sched));

    STree init{"init", {}};
    for (const auto& c : p.init.counts)
        init.children.push_back(STree{"count", {leaf("id"), expr_tree(c.count)}});
    for (const auto& ov : p.init.overrides)
        init.children.push_back(STree{"set", {leaf("id"), leaf("id"), expr_tree(ov.value)}});
    root.children.push_back(std::move(init));

    STree recs{"recorders", {}};
    for (const auto& r : p.recorders)
        recs.children.push_back(STree{"record", {leaf("id"), expr_tree(r.expr)}});
    root.children.push_back(std::move(recs));
    return root;
}

void collect_subtrees(const STree& t, std::map<std::string, int>& out) {
    if (t.depth() >= 2) {
        std::string s;
        t.serialize(s);
        out[s] += 1;
    }
    for (const auto& c : t.children) collect_subtrees(c, out);
}

double ast_match(const AbmProgram& cand, const AbmProgram& ref) {
    std::map<std::string, int> cand_trees, ref_trees;
    collect_subtrees(program_tree(cand), cand_trees);
    collect_subtrees(program_tree(ref), ref_trees);
    long total = 0, matched = 0;
    for (const auto& [shape, count] : ref_trees) {
        total += count;
        auto it = cand_trees.find(shape);
        if (it != cand_trees.end()) matched += std::min(count, it->second);
    }
    if (total == 0) return 1.0;
    return static_cast<double>(matched) / static_cast<double>(total);
}

// ---- dataflow component -------------------------------------------------

struct IndexedState {
    int object = -1;
    int state = -1;
    auto operator<=>(const IndexedState&) const = default;
};

struct Indexer {
    const AbmProgram& program;

    int object_index(const std::string& name) const {
        for (std::size_t i = 0; i < program.objects.size(); ++i)
            if (program.objects[i].name == name) return static_cast<int>(i);
        return -1;
    }
    IndexedState state_key(int obj_index, const std::string& state) const {
        if (obj_index < 0) return {};
        const auto& decls = program.objects[static_cast<std::size_t>(obj_index)].state_decls;
        for (std::size_t i = 0; i < decls.size(); ++i)
            if (decls[i].name == state) return {obj_index, static_cast<int>(i)};
        return {obj_index, -1};
    }
};

void collect_index_reads(const Expr& e, const Indexer& ix, int self_obj, int other_obj,
                         std::set<IndexedState>& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, dsl::Ref>) {
                if (node.scope == dsl::RefScope::SelfState)
                    out.insert(ix.state_key(self_obj, node.name));
                else if (node.scope == dsl::RefScope::OtherState)
                    out.insert(ix.state_key(other_obj, node.name));
            } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                collect_index_reads(*node.lhs, ix, self_obj, other_obj, out);
                collect_index_reads(*node.rhs, ix, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Not>) {
                collect_index_reads(*node.operand, ix, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                collect_index_reads(*node.probability, ix, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Uniform>) {
                collect_index_reads(*node.low, ix, self_obj, other_obj, out);
                collect_index_reads(*node.high, ix, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::RandInt>) {
                collect_index_reads(*node.low, ix, self_obj, other_obj, out);
                collect_index_reads(*node.high, ix, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                collect_index_reads(*node.radius, ix, self_obj, other_obj, out);
                collect_index_reads(*node.predicate, ix, self_obj, self_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                collect_index_reads(*node.predicate, ix, self_obj,
                                    ix.object_index(node.object_name), out);
            } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                collect_index_reads(*node.value, ix, self_obj,
                                    ix.object_index(node.object_name), out);
            }
        },
        e.node);
}

using Edge = std::pair<IndexedState, IndexedState>;  // write -> read

void collect_edges_in_body(const std::vector<Statement>& body, const Indexer& ix, int self_obj,
                           std::set<Edge>& out) {
    for (const auto& stmt : body)
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::Assign>) {
                    IndexedState target = ix.state_key(self_obj, node.state_name);
                    std::set<IndexedState> reads;
                    collect_index_reads(node.value, ix, self_obj, self_obj, reads);
                    for (const auto& r : reads) out.insert({target, r});
                } else if constexpr (std::is_same_v<T, dsl::If>) {
                    collect_edges_in_body(node.then_body, ix, self_obj, out);
                    collect_edges_in_body(node.else_body, ix, self_obj, out);
                } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                    collect_edges_in_body(node.body, ix, self_obj, out);
                }
            },
            stmt.node);
}

std::set<Edge> dataflow_edges(const AbmProgram& p) {
    Indexer ix{p};
    std::set<Edge> out;
    for (std::size_t oi = 0; oi < p.objects.size(); ++oi)
        for (const auto& act : p.objects[oi].activities)
            collect_edges_in_body(act.body, ix, static_cast<int>(oi), out);
    return out;
}

double dataflow_match(const AbmProgram& cand, const AbmProgram& ref) {
    auto ce = dataflow_edges(cand);
    auto re = dataflow_edges(ref);
    if (re.empty()) return 1.0;
    long matched = 0;
    for (const auto& e : re)
        if (ce.count(e)) ++matched;
    return static_cast<double>(matched) / static_cast<double>(re.size());
}

}  // namespace

CodeBleuScore codebleu(const AbmProgram& candidate, const AbmProgram& reference,
                       const CodeBleuWeights& weights) {
    double parts[] = {weights.ngram, weights.weighted_ngram, weights.ast, weights.dataflow};
    double sum = 0;
    for (double w : parts) {
        if (w < 0) throw InvalidWeights("similarity weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw InvalidWeights("similarity weights must sum to 1, got " + dsl::format_real(sum));

    CodeBleuScore score;
    score.weights = weights;
    auto cand_tokens = token_stream(candidate);
    auto ref_tokens = token_stream(reference);
    auto cand_kw = keyword_mask(candidate);
    auto ref_kw = keyword_mask(reference);
    score.ngram = bleu(cand_tokens, ref_tokens, nullptr, nullptr);
    score.weighted_ngram = bleu(cand_tokens, ref_tokens, &cand_kw, &ref_kw);
    score.ast_match = ast_match(candidate, reference);
    score.dataflow_match = dataflow_match(candidate, reference);
    score.total = weights.ngram * score.ngram + weights.weighted_ngram * score.weighted_ngram +
                  weights.ast * score.ast_match + weights.dataflow * score.dataflow_match;
    return score;
}

CorpusReport rate_corpus(const std::filesystem::path& corpus_dir, const BackendFactory& backend,
                         const EvalConfig& config) {
    namespace fs = std::filesystem;
    std::vector<fs::path> samples;
    for (const auto& entry : fs::directory_iterator(corpus_dir))
        if (entry.is_directory()) samples.push_back(entry.path());
    std::sort(samples.begin(), samples.end());

    auto evaluate_sample = [&](const fs::path& dir) {
        SampleReport sample;
        sample.name = dir.filename().string();

        std::ifstream scenario_in(dir / "scenario.json");
        std::ostringstream scenario_text;
        scenario_text << scenario_in.rdbuf();
        auto scenario = rep::parse_conceptual(scenario_text.str());

        std::ifstream ref_in(dir / "reference.abm");
        std::ostringstream ref_text;
        ref_text << ref_in.rdbuf();
        auto ref_parsed = dsl::parse_program(ref_text.str());
        if (!ref_parsed.clean())
            throw Error("reference program in " + dir.string() + " does not parse cleanly");

        auto be = backend(dir / "fixtures");
        std::unique_ptr<gen::RunLog> log;
        if (!config.run_root.empty())
            log = std::make_unique<gen::RunLog>(config.run_root / sample.name);

        auto outcome = pipeline::run_modeling(scenario, *be, config.budget, log.get());
        auto final_defects = verifier1::check_program(outcome.final_source, &scenario);
        sample.success = outcome.success;
        sample.executable = is_executable(final_defects);
        sample.elaborate = is_elaborate(final_defects);
        sample.attempts = outcome.iterations_used + 1;
        if (outcome.program)
            sample.score = codebleu(*outcome.program, *ref_parsed.program, config.weights);
        return sample;
    };

    // samples are independent; run them concurrently, collect in name order
    std::vector<std::future<SampleReport>> futures;
    futures.reserve(samples.size());
    for (const auto& dir : samples)
        futures.push_back(std::async(std::launch::async, evaluate_sample, dir));

    CorpusReport report;
    double bleu_sum = 0;
    for (auto& future : futures) {
        SampleReport sample = future.get();
        int bin;
        if (!sample.success || sample.attempts >= 10) bin = 3;
        else if (sample.attempts <= 3) bin = 0;
        else if (sample.attempts <= 6) bin = 1;
        else bin = 2;
        report.iteration_histogram[static_cast<std::size_t>(bin)] += 1;

        bleu_sum += sample.score.total;
        report.samples.push_back(std::move(sample));
    }

    if (!report.samples.empty()) {
        double n = static_cast<double>(report.samples.size());
        int exe = 0, ela = 0;
        for (const auto& s : report.samples) {
            exe += s.executable ? 1 : 0;
            ela += s.elaborate ? 1 : 0;
        }
        report.executable_rate = 100.0 * exe / n;
        report.elaborate_rate = 100.0 * ela / n;
        report.mean_codebleu = bleu_sum / n;
    }
    return report;
}

std::string report_to_json(const CorpusReport& report) {
    nlohmann::ordered_json j;
    j["samples"] = nlohmann::ordered_json::array();
    for (const auto& s : report.samples) {
        nlohmann::ordered_json js;
        js["name"] = s.name;
        js["success"] = s.success;
        js["executable"] = s.executable;
        js["elaborate"] = s.elaborate;
        js["attempts"] = s.attempts;
        js["codebleu"] = {{"ngram", s.score.ngram},
                          {"weighted_ngram", s.score.weighted_ngram},
                          {"ast_match", s.score.ast_match},
                          {"dataflow_match", s.score.dataflow_match},
                          {"total", s.score.total}};
        j["samples"].push_back(std::move(js));
    }
    j["aggregates"] = {
        {"samples", report.samples.size()},
        {"executable_rate", report.executable_rate},
        {"elaborate_rate", report.elaborate_rate},
        {"mean_codebleu", report.mean_codebleu},
        {"iteration_histogram",
         {{"le3", report.iteration_histogram[0]},
          {"4_6", report.iteration_histogram[1]},
          {"7_9", report.iteration_histogram[2]},
          {"ge10", report.iteration_histogram[3]}}},
    };
    return j.dump(2) + "\n";
}

std::string report_to_table(const CorpusReport& report) {
    char line[160];
    std::string out;
    out += "sample                exe  ela  attempts  codebleu\n";
    for (const auto& s : report.samples) {
        std::snprintf(line, sizeof(line), "%-20s  %-3s  %-3s  %8d  %8.4f\n", s.name.c_str(),
                      s.executable ? "yes" : "no", s.elaborate ? "yes" : "no", s.attempts,
                      s.score.total);
        out += line;
    }
    std::snprintf(line, sizeof(line),
                  "executable %.2f%%  elaborate %.2f%%  mean codebleu %.4f\n",
                  report.executable_rate, report.elaborate_rate, report.mean_codebleu);
    out += line;
    std::snprintf(line, sizeof(line), "attempts histogram: <=3: %d  4-6: %d  7-9: %d  >=10: %d\n",
                  report.iteration_histogram[0], report.iteration_histogram[1],
                  report.iteration_histogram[2], report.iteration_histogram[3]);
    out += line;
    return out;
}

namespace {

void collect_state_refs(const Expr& e, const std::string& self_obj, const std::string& other_obj,
                        std::set<std::string>& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, dsl::Ref>) {
                if (node.scope == dsl::RefScope::SelfState)
                    out.insert(self_obj + "." + node.name);
                else if (node.scope == dsl::RefScope::OtherState)
                    out.insert(other_obj + "." + node.name);
            } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                collect_state_refs(*node.lhs, self_obj, other_obj, out);
                collect_state_refs(*node.rhs, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Not>) {
                collect_state_refs(*node.operand, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                collect_state_refs(*node.probability, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Uniform>) {
                collect_state_refs(*node.low, self_obj, other_obj, out);
                collect_state_refs(*node.high, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::RandInt>) {
                collect_state_refs(*node.low, self_obj, other_obj, out);
                collect_state_refs(*node.high, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                collect_state_refs(*node.radius, self_obj, other_obj, out);
                collect_state_refs(*node.predicate, self_obj, self_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                collect_state_refs(*node.predicate, self_obj, node.object_name, out);
            } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                collect_state_refs(*node.value, self_obj, node.object_name, out);
            }
        },
        e.node);
}

void collect_body_state_refs(const std::vector<Statement>& body, const std::string& obj,
                             std::set<std::string>& out) {
    for (const auto& stmt : body)
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::Assign>) {
                    out.insert(obj + "." + node.state_name);
                    collect_state_refs(node.value, obj, obj, out);
                } else if constexpr (std::is_same_v<T, dsl::If>) {
                    collect_state_refs(node.condition, obj, obj, out);
                    collect_body_state_refs(node.then_body, obj, out);
                    collect_body_state_refs(node.else_body, obj, out);
                } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                    collect_state_refs(node.radius, obj, obj, out);
                    collect_body_state_refs(node.body, obj, out);
                }
            },
            stmt.node);
}

}  // namespace

SubstantivenessReport assess_substantiveness(const std::vector<dsl::PatchDirective>& patch,
                                             const AbmProgram& program,
                                             const sim::SimulationTrace& trace) {
    SubstantivenessReport report;
    bool any_structural = false;
    bool any_directive = !patch.empty();

    for (const auto& directive : patch) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::AddState>) {
                    report.added_states.push_back(node.object_name + "." + node.decl.name);
                    any_structural = true;
                } else if constexpr (std::is_same_v<T, dsl::RemoveState>) {
                    report.removed_states.push_back(node.object_name + "." + node.state_name);
                    any_structural = true;
                } else if constexpr (std::is_same_v<T, dsl::SetActivity>) {
                    report.added_activities.push_back(node.object_name + "." +
                                                      node.activity_name);
                    any_structural = true;
                } else if constexpr (std::is_same_v<T, dsl::RemoveActivity>) {
                    report.removed_activities.push_back(node.object_name + "." +
                                                        node.activity_name);
                    any_structural = true;
                }
                // schedule and parameter changes alone are not structural
            },
            directive);
    }
    report.parameter_only = any_directive && !any_structural &&
                            std::all_of(patch.begin(), patch.end(), [](const auto& d) {
                                return std::holds_alternative<dsl::SetParam>(d);
                            });

    // invocation evidence: metric slices plus activity execution counts
    std::set<std::string> slice_states, slice_activities;
    for (const auto& r : program.recorders) {
        auto slice = verifier1::backward_slice(program, r.metric_name);
        for (const auto& [obj, state] : slice.states) slice_states.insert(obj + "." + state);
        for (const auto& [obj, act] : slice.activities())
            slice_activities.insert(obj + "." + act);
    }
    std::set<std::string> executed_refs;  // states touched by activities that ran
    for (const auto& [key, runs] : trace.activity_runs) {
        if (runs <= 0) continue;
        auto dot = key.find('.');
        const auto* cls = program.find_object(key.substr(0, dot));
        if (!cls) continue;
        const auto* act = cls->find_activity(key.substr(dot + 1));
        if (!act) continue;
        collect_body_state_refs(act->body, cls->name, executed_refs);
    }

    bool all_reachable = true;
    for (const auto& key : report.added_activities) {
        bool scheduled_and_ran =
            trace.activity_runs.count(key) && trace.activity_runs.at(key) > 0;
        bool reachable = scheduled_and_ran || slice_activities.count(key) > 0;
        report.reachability[key] = reachable;
        if (!reachable) all_reachable = false;
    }
    for (const auto& key : report.added_states) {
        bool reachable = slice_states.count(key) > 0 || executed_refs.count(key) > 0;
        report.reachability[key] = reachable;
        if (!reachable) all_reachable = false;
    }

    report.verdict = any_structural && all_reachable;
    return report;
}

std::string substantiveness_to_json(const SubstantivenessReport& report) {
    nlohmann::ordered_json j;
    j["verdict"] = report.verdict;
    j["parameter_only"] = report.parameter_only;
    j["added_states"] = report.added_states;
    j["removed_states"] = report.removed_states;
    j["added_activities"] = report.added_activities;
    j["removed_activities"] = report.removed_activities;
    j["reachability"] = nlohmann::ordered_json::object();
    for (const auto& [key, ok] : report.reachability) j["reachability"][key] = ok;
    return j.dump(2) + "\n";
}

}  // namespace sage::eval
