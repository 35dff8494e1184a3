#include "sage/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"
#include "sage/verifier1.hpp"

namespace sage::pipeline {

using dsl::AbmProgram;

gen::Payload generate_payload(gen::Backend& backend, const gen::PromptText& prompt,
                              gen::RunLog* log) {
    auto once = [&]() {
        gen::GeneratorResponse resp = gen::generate(backend, prompt, log);
        return gen::parse_response(prompt.kind, resp.raw);
    };
    try {
        return once();
    } catch (const gen::PayloadParseError&) {
        try {
            return once();
        } catch (const gen::PayloadParseError& second) {
            throw gen::BackendRefusal(std::string("response not parseable after retry: ") +
                                      second.what());
        }
    }
}

namespace {

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& where) {
    throw GeneratorError(where + ": " + e.what());
}

}  // namespace

ModelingOutcome run_modeling(const rep::ConceptualRepresentation& scenario,
                             gen::Backend& backend, int budget, gen::RunLog* log) {
    ModelingOutcome outcome;

    std::string source;
    try {
        gen::PromptText prompt = gen::render_prompt(
            gen::PromptKind::GenAbm, {{"scenario", rep::render_conceptual(scenario)}});
        source = std::get<std::string>(generate_payload(backend, prompt, log));
    } catch (const Error& e) {
        rethrow_with_context(e, "modeling: initial generation");
    }

    std::vector<Defect> defects = verifier1::check_program(source, &scenario);
    outcome.defect_history.push_back(defects);

    std::string best_source = source;
    std::size_t best_count = defects.size();

    int rounds = 0;
    while (!defects.empty() && rounds < budget) {
        try {
            gen::PromptText prompt = verifier1::build_rectification_prompt(source, defects);
            source = std::get<std::string>(generate_payload(backend, prompt, log));
        } catch (const Error& e) {
            rethrow_with_context(e, "modeling: repair round " + std::to_string(rounds + 1));
        }
        defects = verifier1::check_program(source, &scenario);
        outcome.defect_history.push_back(defects);
        ++rounds;
        if (defects.size() < best_count) {
            best_count = defects.size();
            best_source = source;
        }
    }

    outcome.iterations_used = rounds;
    outcome.success = defects.empty();
    outcome.final_source = outcome.success ? source : best_source;
    auto parsed = dsl::parse_program(outcome.final_source);
    if (parsed.program) outcome.program = std::move(parsed.program);
    return outcome;
}

namespace {

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string summarize_trace(const sim::SimulationTrace& trace) {
    std::string out;
    for (const auto& [name, series] : trace.series) {
        const auto& v = series.values;
        if (v.empty()) {
            out += name + ": (empty)\n";
            continue;
        }
        double mn = v[0], mx = v[0], sum = 0;
        for (double x : v) {
            mn = std::min(mn, x);
            mx = std::max(mx, x);
            sum += x;
        }
        out += name + ": first=" + format_g(v.front()) + " last=" + format_g(v.back()) +
               " min=" + format_g(mn) + " max=" + format_g(mx) +
               " mean=" + format_g(sum / static_cast<double>(v.size())) + "\n";
    }
    return out;
}

std::string summarize_slices(const AbmProgram& program,
                             const std::vector<criteria::CriterionPredicate>& predicates) {
    std::set<std::string> metrics;
    for (const auto& cp : predicates) {
        if (program.find_recorder(cp.criterion.variable_name))
            metrics.insert(cp.criterion.variable_name);
        for (const auto& m : criteria::referenced_metrics(cp.expr))
            if (program.find_recorder(m)) metrics.insert(m);
    }
    std::string out;
    for (const auto& metric : metrics) {
        auto slice = verifier1::backward_slice(program, metric);
        out += "metric " + metric + ":\n";
        for (const auto& [obj, act] : slice.activities())
            out += "  activity " + obj + "." + act + "\n";
        for (const auto& [obj, state] : slice.states)
            out += "  state " + obj + "." + state + "\n";
        for (const auto& param : slice.parameters) out += "  param " + param + "\n";
    }
    return out.empty() ? "(none)\n" : out;
}

int satisfied_count(const criteria::Verdict& v) {
    int n = 0;
    for (const auto& r : v.per_criterion)
        if (r.satisfied) ++n;
    return n;
}

}  // namespace

SolvingOutcome run_solving(const rep::ObjectiveRepresentation& objective,
                           const AbmProgram& start, gen::Backend& backend,
                           const SolvingOptions& options,
                           const rep::ConceptualRepresentation* scenario, gen::RunLog* log) {
    {
        auto defects = verifier1::check_program(start, scenario);
        if (!defects.empty())
            throw Error("run_solving requires a defect-free program, found " +
                        std::to_string(defects.size()) + " defect(s)");
    }

    SolvingOutcome outcome;
    outcome.baseline = sim::simulate(start, options.seed, options.steps);
    std::map<std::int64_t, sim::SimulationTrace> extra_baselines;
    for (auto s : options.extra_seeds)
        extra_baselines.emplace(s, sim::simulate(start, s, options.steps));

    outcome.predicates = criteria::compile_criteria(objective, start, backend, log);

    auto full_verdict = [&](const AbmProgram& candidate,
                            const sim::SimulationTrace& primary) {
        criteria::Verdict v = criteria::evaluate(outcome.predicates, primary, outcome.baseline);
        for (const auto& [s, base] : extra_baselines) {
            auto t = sim::simulate(candidate, s, options.steps);
            auto extra = criteria::evaluate(outcome.predicates, t, base);
            if (!extra.satisfying_flag) v.satisfying_flag = false;
        }
        return v;
    };

    outcome.baseline_verdict = full_verdict(start, outcome.baseline);
    criteria::Verdict verdict = outcome.baseline_verdict;

    AbmProgram current = start;
    std::string current_source = dsl::print_program(current);
    sim::SimulationTrace latest_trace = outcome.baseline;

    // best-so-far: most satisfied criteria, earliest on ties
    AbmProgram best_program = start;
    std::string best_source = current_source;
    int best_score = satisfied_count(outcome.baseline_verdict);

    int rounds = 0;
    while (!verdict.satisfying_flag && rounds < options.budget) {
        SolvingRound round;
        const std::string where = "solving round " + std::to_string(rounds + 1);

        gen::CoTResponse cot;
        try {
            gen::PromptText cot_prompt = gen::render_prompt(
                gen::PromptKind::CoT, {{"objective", rep::render_objective(objective)},
                                       {"summary", summarize_trace(latest_trace)},
                                       {"slices", summarize_slices(current, outcome.predicates)},
                                       {"program", current_source}});
            cot = std::get<gen::CoTResponse>(generate_payload(backend, cot_prompt, log));
        } catch (const Error& e) {
            rethrow_with_context(e, where + " (analysis)");
        }
        round.solutions = cot.solutions;

        gen::ModifyPayload modify;
        try {
            gen::PromptText modify_prompt = gen::render_prompt(
                gen::PromptKind::Modify, {{"program", current_source},
                                          {"solutions", dsl::print_solutions(cot.solutions)}});
            modify =
                std::get<gen::ModifyPayload>(generate_payload(backend, modify_prompt, log));
        } catch (const Error& e) {
            rethrow_with_context(e, where + " (modification)");
        }

        AbmProgram patched;
        try {
            patched = dsl::apply_patch(current, modify.directives);
        } catch (const dsl::PatchApplyError& e) {
            rethrow_with_context(e, where + " (patch application)");
        }
        round.patch = modify.directives;

        // the full program in the reply is convenience output; the patch is
        // the contract
        if (modify.full_program) {
            auto reparsed = dsl::parse_program(*modify.full_program);
            round.cross_check_ok =
                reparsed.program.has_value() && *reparsed.program == patched;
        }

        std::string src = dsl::print_program(patched);
        auto defects = verifier1::check_program(src, scenario);
        int inner = 0;
        while (!defects.empty()) {
            if (inner >= options.inner_budget)
                throw InnerRepairExhausted(where + ": still " +
                                           std::to_string(defects.size()) +
                                           " defect(s) after " + std::to_string(inner) +
                                           " nested repair rounds");
            gen::PromptText prompt = verifier1::build_rectification_prompt(src, defects);
            try {
                src = std::get<std::string>(generate_payload(backend, prompt, log));
            } catch (const Error& e) {
                rethrow_with_context(e, where + " (nested repair)");
            }
            defects = verifier1::check_program(src, scenario);
            ++inner;
        }

        auto parsed = dsl::parse_program(src);
        current = *parsed.program;
        current_source = dsl::print_program(current);
        round.program_source = current_source;

        latest_trace = sim::simulate(current, options.seed, options.steps);
        verdict = full_verdict(current, latest_trace);
        round.verdict = verdict;
        outcome.rounds.push_back(std::move(round));
        ++rounds;

        if (satisfied_count(verdict) > best_score) {
            best_score = satisfied_count(verdict);
            best_program = current;
            best_source = current_source;
        }
    }

    outcome.iterations_used = rounds;
    outcome.success = verdict.satisfying_flag;
    if (outcome.success) {
        outcome.program = current;
        outcome.final_source = current_source;
        if (!outcome.rounds.empty())
            outcome.accepted_solutions = outcome.rounds.back().solutions;
    } else {
        outcome.program = best_program;
        outcome.final_source = best_source;
    }
    return outcome;
}

std::string modeling_outcome_to_json(const ModelingOutcome& outcome) {
    nlohmann::ordered_json j;
    j["success"] = outcome.success;
    j["iterations_used"] = outcome.iterations_used;
    j["defect_history"] = nlohmann::ordered_json::array();
    for (const auto& defects : outcome.defect_history) {
        nlohmann::ordered_json round = nlohmann::ordered_json::array();
        for (const auto& d : defects) {
            nlohmann::ordered_json jd;
            jd["kind"] = d.kind == DefectKind::CompilationError ? "compilation_error"
                                                                : "lacking_detail";
            jd["reason"] = d.reason;
            round.push_back(std::move(jd));
        }
        j["defect_history"].push_back(std::move(round));
    }
    return j.dump(2) + "\n";
}

std::string solving_outcome_to_json(const SolvingOutcome& outcome) {
    nlohmann::ordered_json j;
    j["success"] = outcome.success;
    j["iterations_used"] = outcome.iterations_used;
    auto verdict_json = [](const criteria::Verdict& v) {
        return nlohmann::ordered_json::parse(criteria::verdict_to_json(v));
    };
    j["verdicts"] = nlohmann::ordered_json::array();
    j["verdicts"].push_back(verdict_json(outcome.baseline_verdict));
    for (const auto& round : outcome.rounds)
        j["verdicts"].push_back(verdict_json(round.verdict));
    j["accepted_solutions"] = nlohmann::ordered_json::array();
    for (const auto& s : outcome.accepted_solutions)
        j["accepted_solutions"].push_back(s.title);
    return j.dump(2) + "\n";
}

}  // namespace sage::pipeline
