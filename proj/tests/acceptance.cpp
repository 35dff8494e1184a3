// Acceptance suite: every release criterion with one pass/fail line.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sage/criteria.hpp"
#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"
#include "sage/eval.hpp"
#include "sage/pipeline.hpp"
#include "sage/simulator.hpp"
#include "sage/verifier1.hpp"
#include "support/ast_gen.hpp"
#include "support/fixtures.hpp"
#include "support/mutation.hpp"
#include "support/rename.hpp"
#include "support/tmpdir.hpp"

using namespace sage;

namespace {

int failures = 0;

void criterion(const std::string& name, const std::function<void()>& body) {
    try {
        body();
        std::printf("PASS  %s\n", name.c_str());
    } catch (const std::exception& e) {
        std::printf("FAIL  %s\n      %s\n", name.c_str(), e.what());
        ++failures;
    }
    std::fflush(stdout);
}

#define ENSURE(cond, msg)                                  \
    do {                                                   \
        if (!(cond)) throw std::runtime_error(std::string("line ") + std::to_string(__LINE__) + ": " + (msg)); \
    } while (0)

dsl::AbmProgram parse_clean(const std::string& source, const std::string& what) {
    auto parsed = dsl::parse_program(source);
    ENSURE(parsed.clean(), what + " must parse cleanly");
    return *parsed.program;
}

std::vector<std::pair<std::string, std::string>> fixture_programs() {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("epidemic.abm", testsupport::fixture("epidemic.abm"));
    out.emplace_back("golden4.abm", testsupport::fixture("golden4.abm"));
    for (const char* s : {"s01_epidemic", "s02_predator_prey", "s03_traffic", "s04_opinion",
                          "s05_market", "s06_forest"})
        out.emplace_back(s, testsupport::read_file(std::string(SAGE_CORPUS_DIR) + "/" + s +
                                                   "/reference.abm"));
    return out;
}

struct Shell {
    int exit_code = -1;
    std::string out;
};

Shell run_cli(const std::string& args) {
    std::string cmd = std::string(SAGE_BIN) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    Shell r;
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// ---- criterion 3 helpers: programmatic defect injection -------------------

dsl::Assign* first_assign(std::vector<dsl::Statement>& body) {
    for (auto& stmt : body) {
        if (auto* a = std::get_if<dsl::Assign>(&stmt.node)) return a;
        if (auto* i = std::get_if<dsl::If>(&stmt.node)) {
            if (auto* found = first_assign(i->then_body)) return found;
            if (auto* found = first_assign(i->else_body)) return found;
        }
        if (auto* f = std::get_if<dsl::ForNeighbor>(&stmt.node)) {
            if (auto* found = first_assign(f->body)) return found;
        }
    }
    return nullptr;
}

dsl::Assign* first_assign(dsl::AbmProgram& p) {
    for (auto& obj : p.objects)
        for (auto& act : obj.activities)
            if (auto* a = first_assign(act.body)) return a;
    return nullptr;
}

bool rename_first_param_ref(dsl::Expr& e) {
    bool done = false;
    auto visit_expr = [&](auto&& self, dsl::Expr& node) -> void {
        if (done) return;
        std::visit(
            [&](auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, dsl::Ref>) {
                    if (n.scope == dsl::RefScope::Param) {
                        n.name += "zz";
                        done = true;
                    }
                } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                    self(self, *n.lhs);
                    self(self, *n.rhs);
                } else if constexpr (std::is_same_v<T, dsl::Not>) {
                    self(self, *n.operand);
                } else if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                    self(self, *n.probability);
                } else if constexpr (std::is_same_v<T, dsl::Uniform>) {
                    self(self, *n.low);
                    self(self, *n.high);
                } else if constexpr (std::is_same_v<T, dsl::RandInt>) {
                    self(self, *n.low);
                    self(self, *n.high);
                } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                    self(self, *n.radius);
                    self(self, *n.predicate);
                } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                    self(self, *n.predicate);
                } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                    self(self, *n.value);
                }
            },
            node.node);
    };
    visit_expr(visit_expr, e);
    return done;
}

bool rename_first_param_in_body(std::vector<dsl::Statement>& body) {
    for (auto& stmt : body) {
        bool done = false;
        std::visit(
            [&](auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, dsl::Assign>) {
                    done = rename_first_param_ref(n.value);
                } else if constexpr (std::is_same_v<T, dsl::If>) {
                    done = rename_first_param_ref(n.condition) ||
                           rename_first_param_in_body(n.then_body) ||
                           rename_first_param_in_body(n.else_body);
                } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                    done = rename_first_param_ref(n.radius) ||
                           rename_first_param_in_body(n.body);
                }
            },
            stmt.node);
        if (done) return true;
    }
    return false;
}

bool rename_first_param_in_bodies(dsl::AbmProgram& p) {
    for (auto& obj : p.objects)
        for (auto& act : obj.activities)
            if (rename_first_param_in_body(act.body)) return true;
    return false;
}

bool set_first_bernoulli_string(dsl::Expr& e) {
    bool done = false;
    auto visit_expr = [&](auto&& self, dsl::Expr& node) -> void {
        if (done) return;
        std::visit(
            [&](auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                    *n.probability = dsl::Expr(dsl::StringLit{"x"});
                    done = true;
                } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                    self(self, *n.lhs);
                    self(self, *n.rhs);
                } else if constexpr (std::is_same_v<T, dsl::Not>) {
                    self(self, *n.operand);
                } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                    self(self, *n.radius);
                    self(self, *n.predicate);
                } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                    self(self, *n.predicate);
                } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                    self(self, *n.value);
                }
            },
            node.node);
    };
    visit_expr(visit_expr, e);
    return done;
}

bool set_first_bernoulli_string(dsl::AbmProgram& p) {
    for (auto& obj : p.objects) {
        for (auto& s : obj.state_decls)
            if (set_first_bernoulli_string(s.init)) return true;
        for (auto& act : obj.activities) {
            std::function<bool(std::vector<dsl::Statement>&)> walk =
                [&](std::vector<dsl::Statement>& body) -> bool {
                for (auto& stmt : body) {
                    bool done = false;
                    std::visit(
                        [&](auto& n) {
                            using T = std::decay_t<decltype(n)>;
                            if constexpr (std::is_same_v<T, dsl::Assign>) {
                                done = set_first_bernoulli_string(n.value);
                            } else if constexpr (std::is_same_v<T, dsl::If>) {
                                done = set_first_bernoulli_string(n.condition) ||
                                       walk(n.then_body) || walk(n.else_body);
                            } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                                done = walk(n.body);
                            }
                        },
                        stmt.node);
                    if (done) return true;
                }
                return false;
            };
            if (walk(act.body)) return true;
        }
    }
    return false;
}

struct Mutation {
    std::string label;
    std::string source;  // mutated program text
    const rep::ConceptualRepresentation* scenario = nullptr;
    DefectKind expected_kind = DefectKind::CompilationError;
    std::string marker;  // substring of the expected defect reason
};

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;

    // 1. determinism over randomized programs, under ten seconds
    criterion("1 determinism: 20 random programs, byte-identical repeat traces", [] {
        auto t0 = clock::now();
        int accepted = 0;
        for (std::uint64_t seed = 1; accepted < 20; ++seed) {
            ENSURE(seed < 200, "could not find 20 fault-free programs");
            testgen::Rng rng(seed);
            auto p = testgen::random_program(rng);
            sim::SimulationTrace a, b;
            try {
                a = sim::simulate(p, 77, 6);
                b = sim::simulate(p, 77, 6);
            } catch (const sim::RuntimeFault&) {
                continue;  // e.g. generated division by zero; not this criterion
            }
            ENSURE(sim::trace_to_string(a) == sim::trace_to_string(b),
                   "repeat run diverged for seed " + std::to_string(seed));
            ++accepted;
        }
        double secs = std::chrono::duration<double>(clock::now() - t0).count();
        ENSURE(secs < 10.0, "took " + std::to_string(secs) + "s, budget is 10s");
    });

    // 2. the hand-executed golden trace
    criterion("2 golden hand trace: 4-agent infection run, seed 18", [] {
        auto p = parse_clean(testsupport::fixture("golden4.abm"), "golden4");
        auto trace = sim::simulate(p, 18, 3);
        const auto& series = trace.series.at("infected_count").values;
        ENSURE(series.size() == 3, "series length");
        // derived once by hand from the documented draw rules: 3, 4, 4
        ENSURE(series[0] == 3.0 && series[1] == 4.0 && series[2] == 4.0,
               "series mismatch: " + dsl::format_real(series[0]) + "," +
                   dsl::format_real(series[1]) + "," + dsl::format_real(series[2]));
    });

    // 3. mutation harness: 25 + 25 injected defects, full recall, no false alarms
    criterion("3 verifier completeness: 50 injected defects, 0 false positives", [] {
        auto epidemic_scenario = rep::parse_conceptual(testsupport::fixture("scenario.json"));
        std::map<std::string, rep::ConceptualRepresentation> corpus_scenarios;
        for (const char* s : {"s01_epidemic", "s02_predator_prey", "s03_traffic",
                              "s04_opinion", "s05_market", "s06_forest"})
            corpus_scenarios.emplace(
                s, rep::parse_conceptual(testsupport::read_file(
                       std::string(SAGE_CORPUS_DIR) + "/" + s + "/scenario.json")));

        auto fixtures = fixture_programs();
        auto scenario_of = [&](const std::string& name) -> const rep::ConceptualRepresentation* {
            if (name == "epidemic.abm") return &epidemic_scenario;
            auto it = corpus_scenarios.find(name);
            return it == corpus_scenarios.end() ? nullptr : &it->second;
        };

        // no false positives on the pristine fixtures
        for (const auto& [name, source] : fixtures) {
            auto defects = verifier1::check_program(source, scenario_of(name));
            ENSURE(defects.empty(), "false positive on unmutated " + name);
        }

        std::vector<Mutation> mutations;
        auto add_ast = [&](const std::string& name, const std::string& label,
                           DefectKind kind, const std::string& marker,
                           const std::function<bool(dsl::AbmProgram&)>& mutate) {
            for (const auto& [n, source] : fixtures) {
                if (n != name) continue;
                auto p = parse_clean(source, n);
                ENSURE(mutate(p), n + ": mutation " + label + " found no site");
                mutations.push_back(
                    {n + "/" + label, dsl::print_program(p), scenario_of(n), kind, marker});
                return;
            }
            ENSURE(false, "unknown fixture " + name);
        };
        auto add_text = [&](const std::string& name, const std::string& label,
                            DefectKind kind, const std::string& marker,
                            const std::function<std::string(std::string)>& mutate) {
            for (const auto& [n, source] : fixtures) {
                if (n != name) continue;
                mutations.push_back({n + "/" + label, mutate(source), scenario_of(n), kind,
                                     marker});
                return;
            }
            ENSURE(false, "unknown fixture " + name);
        };

        auto unknown_state = [](dsl::AbmProgram& p) {
            auto* a = first_assign(p);
            if (!a) return false;
            a->state_name += "zz";
            return true;
        };
        auto unknown_param = [](dsl::AbmProgram& p) { return rename_first_param_in_bodies(p); };
        auto sched_activity = [](dsl::AbmProgram& p) {
            if (p.schedule.empty()) return false;
            p.schedule[0].activity_name += "zz";
            return true;
        };
        auto sched_object = [](dsl::AbmProgram& p) {
            if (p.schedule.empty()) return false;
            p.schedule[0].object_name += "zz";
            return true;
        };
        auto bernoulli_string = [](dsl::AbmProgram& p) { return set_first_bernoulli_string(p); };
        auto assign_pos = [](dsl::AbmProgram& p) {
            auto* a = first_assign(p);
            if (!a) return false;
            a->value = dsl::Expr(dsl::PosLit{{1, 1}});
            return true;
        };
        auto recorder_unknown = [](dsl::AbmProgram& p) {
            if (p.recorders.empty()) return false;
            p.recorders[0].expr = dsl::Expr(dsl::Ref{dsl::RefScope::Param, "zzmissing"});
            return true;
        };
        auto duplicate_state = [](dsl::AbmProgram& p) {
            p.objects[0].state_decls.push_back(p.objects[0].state_decls[0]);
            return true;
        };
        auto count_unknown = [](dsl::AbmProgram& p) {
            if (p.init.counts.empty()) return false;
            p.init.counts[0].object_name += "zz";
            return true;
        };
        auto condition_int = [](dsl::AbmProgram& p) {
            for (auto& step : p.schedule)
                if (step.condition) {
                    step.condition = dsl::Expr(dsl::IntLit{1});
                    return true;
                }
            return false;
        };
        auto drop_brace = [](std::string s) {
            s.erase(s.find_last_of('}'), 1);
            return s;
        };
        auto illegal_char = [](std::string s) { return s + "\n$\n"; };
        auto eq_for_assign = [](std::string s) {
            auto at = s.find(":=");
            s.replace(at, 2, "=");
            return s;
        };

        const DefectKind comp = DefectKind::CompilationError;
        // 25 compilation-class injections
        add_ast("epidemic.abm", "unknown-state", comp, "unknown state", unknown_state);
        add_ast("epidemic.abm", "unknown-param", comp, "unknown parameter", unknown_param);
        add_ast("epidemic.abm", "sched-activity", comp, "unknown activity", sched_activity);
        add_ast("epidemic.abm", "bernoulli-string", comp, "type mismatch", bernoulli_string);
        add_ast("epidemic.abm", "condition-int", comp, "must be bool", condition_int);
        add_text("epidemic.abm", "drop-brace", comp, "expected", drop_brace);
        add_text("epidemic.abm", "illegal-char", comp, "illegal character", illegal_char);
        add_text("epidemic.abm", "eq-for-assign", comp, "expected", eq_for_assign);
        add_ast("golden4.abm", "unknown-state", comp, "unknown state", unknown_state);
        add_ast("golden4.abm", "bernoulli-string", comp, "type mismatch", bernoulli_string);
        add_ast("golden4.abm", "assign-pos", comp, "type mismatch", assign_pos);
        add_ast("s01_epidemic", "unknown-state", comp, "unknown state", unknown_state);
        add_ast("s01_epidemic", "sched-object", comp, "unknown object", sched_object);
        add_ast("s01_epidemic", "condition-int", comp, "must be bool", condition_int);
        add_ast("s02_predator_prey", "unknown-param", comp, "unknown parameter", unknown_param);
        add_ast("s02_predator_prey", "recorder-unknown", comp, "unknown parameter",
                recorder_unknown);
        add_ast("s02_predator_prey", "duplicate-state", comp, "duplicate state",
                duplicate_state);
        add_ast("s03_traffic", "unknown-state", comp, "unknown state", unknown_state);
        add_ast("s03_traffic", "count-unknown", comp, "unknown object", count_unknown);
        add_text("s03_traffic", "drop-brace", comp, "expected", drop_brace);
        add_ast("s04_opinion", "unknown-param", comp, "unknown parameter", unknown_param);
        add_ast("s04_opinion", "assign-pos", comp, "type mismatch", assign_pos);
        add_text("s04_opinion", "illegal-char", comp, "illegal character", illegal_char);
        add_ast("s05_market", "unknown-state", comp, "unknown state", unknown_state);
        add_ast("s05_market", "duplicate-state", comp, "duplicate state", duplicate_state);

        // 25 lacking-details injections: every fixture activity as todo (20),
        // emptied bodies (4), one scenario-declared activity removed (1)
        const DefectKind lack = DefectKind::LackingDetail;
        int todo_count = 0;
        for (const auto& [name, source] : fixtures) {
            if (name == "s06_forest") continue;
            auto base = parse_clean(source, name);
            for (const auto& obj : base.objects)
                for (const auto& act : obj.activities) {
                    auto p = base;
                    p.find_object(obj.name)->find_activity(act.name)->body = {
                        dsl::Statement(dsl::Todo{})};
                    mutations.push_back({name + "/todo-" + act.name, dsl::print_program(p),
                                         scenario_of(name), lack, "placeholder"});
                    ++todo_count;
                }
        }
        ENSURE(todo_count == 20, "expected 20 placeholder injections, got " +
                                     std::to_string(todo_count));
        {
            auto base = parse_clean(fixtures[7].second, "s06_forest");
            ENSURE(fixtures[7].first == "s06_forest", "fixture order");
            for (const auto& act : base.objects[0].activities) {
                auto p = base;
                p.objects[0].find_activity(act.name)->body.clear();
                mutations.push_back({"s06_forest/empty-" + act.name, dsl::print_program(p),
                                     scenario_of("s06_forest"), lack, "empty"});
            }
        }
        {
            auto p = parse_clean(fixtures[0].second, "epidemic.abm");
            auto& acts = p.find_object("person")->activities;
            std::erase_if(acts, [](const dsl::Activity& a) { return a.name == "lose_immunity"; });
            std::erase_if(p.schedule, [](const dsl::ScheduleStep& s) {
                return s.activity_name == "lose_immunity";
            });
            mutations.push_back({"epidemic.abm/missing-activity", dsl::print_program(p),
                                 &epidemic_scenario, lack, "missing"});
        }

        int comp_count = 0, lack_count = 0;
        for (const auto& m : mutations)
            (m.expected_kind == comp ? comp_count : lack_count)++;
        ENSURE(comp_count == 25, "compilation injections: " + std::to_string(comp_count));
        ENSURE(lack_count == 25, "lacking injections: " + std::to_string(lack_count));

        for (const auto& m : mutations) {
            auto defects = verifier1::check_program(m.source, m.scenario);
            ENSURE(!defects.empty(), m.label + ": defect missed");
            bool matched = false;
            for (const auto& d : defects) {
                ENSURE(d.kind == m.expected_kind,
                       m.label + ": unexpected defect class \"" + d.reason + "\"");
                if (d.reason.find(m.marker) != std::string::npos) matched = true;
            }
            ENSURE(matched, m.label + ": no defect mentions \"" + m.marker + "\"");
        }
    });

    // 4. repair-loop convergence over the bundled corpus
    criterion("4 repair convergence: every corpus sample within 6 rounds, all within 10", [] {
        for (const char* s : {"s01_epidemic", "s02_predator_prey", "s03_traffic",
                              "s04_opinion", "s05_market", "s06_forest"}) {
            auto scenario = rep::parse_conceptual(testsupport::read_file(
                std::string(SAGE_CORPUS_DIR) + "/" + s + "/scenario.json"));
            gen::MockBackend backend(std::string(SAGE_CORPUS_DIR) + "/" + s + "/fixtures");
            auto outcome = pipeline::run_modeling(scenario, backend, 10);
            ENSURE(outcome.success, std::string(s) + " did not converge within budget 10");
            ENSURE(outcome.iterations_used <= 6,
                   std::string(s) + " needed " + std::to_string(outcome.iterations_used) +
                       " repair rounds");
        }
    });

    // 5. the worked solving example: quarantine + vaccination
    criterion("5 solving reproduction: spread rate below 0.1, distance unchanged, <5s", [] {
        auto t0 = clock::now();
        auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
        auto program = parse_clean(testsupport::fixture("epidemic.abm"), "epidemic");
        auto scenario = rep::parse_conceptual(testsupport::fixture("scenario.json"));
        gen::MockBackend backend(testsupport::fixture_path("solving"));
        pipeline::SolvingOptions options;
        options.budget = 5;
        options.seed = 1;
        options.steps = 80;
        auto outcome = pipeline::run_solving(objective, program, backend, options, &scenario);
        ENSURE(outcome.success, "objective unsatisfied");
        ENSURE(outcome.accepted_solutions.size() == 2 &&
                   outcome.accepted_solutions[0].title == "enforce quarantine" &&
                   outcome.accepted_solutions[1].title == "promote vaccination",
               "unexpected solution titles");
        const auto& verdict = outcome.rounds.back().verdict;
        ENSURE(verdict.per_criterion[0].observed[0].second < 0.1,
               "final spread rate not below 0.1");
        ENSURE(verdict.per_criterion[1].satisfied, "spread distance changed");
        double secs = std::chrono::duration<double>(clock::now() - t0).count();
        ENSURE(secs < 5.0, "took " + std::to_string(secs) + "s, budget is 5s");
    });

    // 6. slices equal exhaustive statement-deletion on small programs
    criterion("6 slicing oracle: >=100 random programs, 0 mismatches", [] {
        int cases = 0;
        for (std::uint64_t seed = 1; cases < 110; ++seed) {
            ENSURE(seed < 2000, "generator starved");
            testgen::Rng rng(seed);
            auto p = testgen::straight_line_program(rng, 6);
            auto slice = verifier1::backward_slice(p, "m");
            auto base = sim::simulate(p, 1, 8).series.at("m").values;

            std::set<std::tuple<std::string, std::string, std::string>> oracle;
            std::vector<testgen::StatementKey> outside;
            for (const auto& act : p.objects[0].activities) {
                std::vector<std::string> paths;
                testgen::enumerate_paths(act.body, "", paths);
                for (const auto& path : paths) {
                    auto variant = testgen::delete_statement(p, "w", act.name, path);
                    auto series = sim::simulate(variant, 1, 8).series.at("m").values;
                    if (series != base)
                        oracle.insert({"w", act.name, path});
                    else
                        outside.push_back({"w", act.name, path});
                }
            }
            ENSURE(slice.statements == oracle,
                   "statement mismatch at seed " + std::to_string(seed));

            // states and parameters: reads of the influencing statements plus
            // the recorder, recomputed by a plain walk
            std::set<std::pair<std::string, std::string>> want_states;
            std::set<std::string> want_params;
            auto walk_expr = [&](auto&& self, const dsl::Expr& e) -> void {
                std::visit(
                    [&](const auto& n) {
                        using T = std::decay_t<decltype(n)>;
                        if constexpr (std::is_same_v<T, dsl::Ref>) {
                            if (n.scope == dsl::RefScope::Param)
                                want_params.insert(n.name);
                            else
                                want_states.insert({"w", n.name});
                        } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                            self(self, *n.lhs);
                            self(self, *n.rhs);
                        } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                            self(self, *n.value);
                        } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                            self(self, *n.predicate);
                        }
                    },
                    e.node);
            };
            walk_expr(walk_expr, p.recorders[0].expr);
            bool grew = true;
            while (grew) {
                grew = false;
                for (const auto& act : p.objects[0].activities)
                    for (std::size_t i = 0; i < act.body.size(); ++i) {
                        const auto& a = std::get<dsl::Assign>(act.body[i].node);
                        if (!want_states.count({"w", a.state_name})) continue;
                        if (!oracle.count({"w", act.name, std::to_string(i)})) continue;
                        auto before = want_states.size() + want_params.size();
                        walk_expr(walk_expr, a.value);
                        if (want_states.size() + want_params.size() > before) grew = true;
                    }
            }
            ENSURE(slice.states == want_states, "state set mismatch at seed " +
                                                    std::to_string(seed));
            ENSURE(slice.parameters == want_params,
                   "parameter set mismatch at seed " + std::to_string(seed));

            // stripping everything outside the slice leaves the series intact
            auto stripped = testgen::delete_statements(p, outside);
            ENSURE(sim::simulate(stripped, 1, 8).series.at("m").values == base,
                   "stripped program diverged at seed " + std::to_string(seed));
            ++cases;
        }
    });

    // 7. similarity identities
    criterion("7 codebleu: self-score 1, rename-invariant components, hand-checked values", [] {
        for (const auto& [name, source] : fixture_programs()) {
            auto p = parse_clean(source, name);
            auto self_score = eval::codebleu(p, p);
            ENSURE(std::abs(self_score.total - 1.0) <= 1e-12,
                   name + ": self-score " + dsl::format_real(self_score.total));

            auto renamed = testgen::rename_everything(p);
            auto r = eval::codebleu(renamed, p);
            ENSURE(r.ast_match == 1.0, name + ": tree match changed by renaming");
            ENSURE(r.dataflow_match == 1.0, name + ": dataflow changed by renaming");
        }

        auto reference = parse_clean(
            "object w {\n  state a: int = 1\n  activity f {\n    self.a := self.a + 1\n  }\n}\n",
            "tiny reference");
        auto candidate = parse_clean(
            "object w {\n  state a: int = 2\n  activity f {\n    self.a := self.a + 1\n  }\n}\n",
            "tiny candidate");
        auto score = eval::codebleu(candidate, reference);
        double ngram =
            std::pow((22.0 / 23.0) * (20.0 / 22.0) * (18.0 / 21.0) * (16.0 / 20.0), 0.25);
        double weighted =
            std::pow((28.0 / 29.0) * (30.0 / 33.0) * (31.0 / 37.0) * (29.0 / 37.0), 0.25);
        ENSURE(std::abs(score.ngram - ngram) <= 1e-9, "ngram component off");
        ENSURE(std::abs(score.weighted_ngram - weighted) <= 1e-9, "weighted component off");
        ENSURE(std::abs(score.ast_match - 0.5) <= 1e-9, "tree component off");
        ENSURE(score.dataflow_match == 1.0, "dataflow component off");
        ENSURE(std::abs(score.total - (0.1 * ngram + 0.1 * weighted + 0.4 * 0.5 + 0.4)) <= 1e-9,
               "weighted total off");
    });

    // 8. aggregate evaluation against direct recomputation
    criterion("8 criteria oracle: 1000 random series, exact int / 1e-12 real", [] {
        testgen::Rng rng(31337);
        for (int trial = 0; trial < 1000; ++trial) {
            bool integral = rng.chance(0.5);
            std::size_t n = 1 + rng.bounded(50);
            std::vector<double> values;
            for (std::size_t i = 0; i < n; ++i)
                values.push_back(integral ? static_cast<double>(
                                                static_cast<std::int64_t>(rng.bounded(4001)) -
                                                2000)
                                          : (rng.real01() - 0.5) * 1e4);
            sim::SimulationTrace trace;
            trace.series["m"].type = integral ? dsl::ValueType::Int : dsl::ValueType::Real;
            trace.series["m"].values = values;

            double want_final = values.back();
            double want_max = values[0], want_min = values[0], sum = 0;
            for (double v : values) {
                want_max = std::max(want_max, v);
                want_min = std::min(want_min, v);
                sum += v;
            }
            double want_mean = sum / static_cast<double>(n);
            std::size_t k = 1 + rng.bounded(n);
            double ksum = 0;
            for (std::size_t i = n - k; i < n; ++i) ksum += values[i];
            double want_kmean = ksum / static_cast<double>(k);

            auto observe = [&](const std::string& text) {
                criteria::CriterionPredicate cp;
                cp.criterion = {"m", "1", "req"};
                cp.expr = criteria::parse_predicate(text);
                auto verdict = criteria::evaluate({cp}, trace, trace);
                return verdict.per_criterion[0].observed[0].second;
            };
            auto close = [&](double got, double want, bool exact) {
                return exact ? got == want
                             : std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want));
            };
            ENSURE(close(observe("final(m) == 0"), want_final, integral), "final mismatch");
            ENSURE(close(observe("max(m) == 0"), want_max, integral), "max mismatch");
            ENSURE(close(observe("min(m) == 0"), want_min, integral), "min mismatch");
            ENSURE(close(observe("mean(m) == 0"), want_mean, false), "mean mismatch");
            ENSURE(close(observe("last_k_mean(m, " + std::to_string(k) + ") == 0"), want_kmean,
                         false),
                   "last_k_mean mismatch");
        }
    });

    // 9. end-to-end golden corpus report through the CLI
    criterion("9 golden corpus report: eval --backend mock reproduces pinned bytes", [] {
        testsupport::TmpDir dir("acceptance-eval");
        auto report = (dir.path() / "report.json").string();
        auto r = run_cli("eval --corpus " SAGE_CORPUS_DIR " --backend mock --report " + report);
        ENSURE(r.exit_code == 0, "eval exited " + std::to_string(r.exit_code));
        ENSURE(testsupport::read_file(report) ==
                   testsupport::read_file(std::string(SAGE_GOLDEN_DIR) + "/eval_report.json"),
               "report bytes differ from the pinned golden file");
    });

    // 10. documented failure paths and exit codes
    criterion("10 failure paths: budget, fixture miss, predicate, runtime fault", [] {
        testsupport::TmpDir dir("acceptance-fail");

        // budget exhaustion: library flag and exit code 1
        {
            auto scenario = rep::parse_conceptual(testsupport::fixture("scenario.json"));
            gen::MockBackend backend(testsupport::fixture_path("modeling_stuck"));
            auto outcome = pipeline::run_modeling(scenario, backend, 1);
            ENSURE(!outcome.success, "stuck modeling run claimed success");
            auto r = run_cli("model --scenario " + testsupport::fixture_path("scenario.json") +
                             " --backend mock --fixtures " +
                             testsupport::fixture_path("modeling_stuck") +
                             " --budget 1 --run-dir " + (dir.path() / "r1").string());
            ENSURE(r.exit_code == 1, "budget exhaustion should exit 1");
        }
        // fixture miss
        {
            gen::MockBackend backend(dir.path() / "no-fixtures");
            auto prompt = gen::render_prompt(gen::PromptKind::GenAbm, {{"scenario", "{}"}});
            bool threw = false;
            try {
                backend.generate_text(prompt);
            } catch (const gen::FixtureMiss&) {
                threw = true;
            }
            ENSURE(threw, "missing fixture did not raise FixtureMiss");
            auto r = run_cli("model --scenario " + testsupport::fixture_path("scenario.json") +
                             " --backend mock --fixtures " +
                             (dir.path() / "no-fixtures").string() + " --run-dir " +
                             (dir.path() / "r2").string());
            ENSURE(r.exit_code == 1, "fixture miss should exit 1");
        }
        // predicate parse failure after the retry
        {
            testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                                    "nonsense\n");
            testsupport::write_file((dir.path() / "gen_verification.1.txt").string(),
                                    "nonsense\n");
            auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
            auto program = parse_clean(testsupport::fixture("epidemic.abm"), "epidemic");
            gen::MockBackend backend(dir.path());
            bool threw = false;
            try {
                criteria::compile_criteria(objective, program, backend);
            } catch (const gen::BackendRefusal&) {
                threw = true;  // no pred block at all: refused after retry
            } catch (const criteria::PredicateParseError&) {
                threw = true;
            }
            ENSURE(threw, "unparseable predicate did not error");
            auto r = run_cli("verify-solution --objective " +
                             testsupport::fixture_path("objective.json") + " --model " +
                             testsupport::fixture_path("epidemic.abm") + " --baseline " +
                             testsupport::fixture_path("epidemic.abm") +
                             " --seed 1 --steps 5 --backend mock --fixtures " +
                             dir.path().string());
            ENSURE(r.exit_code == 1, "predicate failure should exit 1");
        }
        // runtime fault
        {
            auto p = parse_clean(testsupport::fixture("div0.abm"), "div0");
            bool threw = false;
            try {
                sim::simulate(p, 1, 2);
            } catch (const sim::RuntimeFault& e) {
                threw = e.reason == "division by zero";
            }
            ENSURE(threw, "division by zero did not fault");
            auto r = run_cli("simulate " + testsupport::fixture_path("div0.abm") +
                             " --seed 1 --steps 2");
            ENSURE(r.exit_code == 1, "runtime fault should exit 1");
        }
    });

    if (failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion/criteria FAILED\n", failures);
    return 1;
}
