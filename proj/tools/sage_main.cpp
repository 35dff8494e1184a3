// Command-line front end: modeling/solving pipelines, the verifiers, the
// simulator, slicing and the corpus evaluation harness.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sage/config.hpp"
#include "sage/criteria.hpp"
#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"
#include "sage/eval.hpp"
#include "sage/generator.hpp"
#include "sage/pipeline.hpp"
#include "sage/representation.hpp"
#include "sage/simulator.hpp"
#include "sage/verifier1.hpp"

namespace fs = std::filesystem;
using namespace sage;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

dsl::AbmProgram load_program(const std::string& path) {
    auto parsed = dsl::parse_program(read_file(path));
    if (!parsed.clean()) {
        std::ostringstream msg;
        msg << path << " has " << parsed.defects.size() << " defect(s):\n";
        for (const auto& d : parsed.defects)
            msg << "  line " << d.line << ": " << d.reason << "\n";
        throw Error(msg.str());
    }
    return *parsed.program;
}

struct BackendBundle {
    std::unique_ptr<gen::Backend> backend;
    std::unique_ptr<gen::RunLog> log;
};

std::string fresh_run_id(const std::string& verb) {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(now).count();
    return verb + "-" + std::to_string(micros);
}

BackendBundle make_backend(const cli::RunConfig& config, const std::string& verb,
                           const std::string& run_dir) {
    BackendBundle bundle;
    if (config.backend == "remote") {
        gen::RemoteConfig rc;
        rc.endpoint = config.endpoint;
        rc.model = config.model;
        rc.timeout_s = config.timeout_s;
        rc.max_retries = config.max_retries;
        rc.max_inflight = config.max_inflight;
        bundle.backend = std::make_unique<gen::RemoteBackend>(rc);
    } else {
        bundle.backend = std::make_unique<gen::MockBackend>(config.fixtures_dir);
    }
    fs::path dir = run_dir.empty() ? fs::path(config.run_root) / fresh_run_id(verb)
                                   : fs::path(run_dir);
    bundle.log = std::make_unique<gen::RunLog>(dir);
    return bundle;
}

// 0 = done, 1 = pipeline failure, 2 = usage/config error
int dispatch(int argc, char** argv) {
    CLI::App app{"two-stage agent-based model generation and solving"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "config file (key = value sections)");

    cli::RunConfig defaults;
    std::string opt_backend, opt_fixtures, opt_endpoint, opt_model_name;
    app.add_option("--backend", opt_backend, "generator backend: mock or remote");
    app.add_option("--fixtures", opt_fixtures, "mock backend fixtures directory");
    app.add_option("--endpoint", opt_endpoint, "remote backend endpoint URL");
    app.add_option("--model-name", opt_model_name, "remote backend model name");

    // model
    auto* cmd_model = app.add_subcommand("model", "generate a program from a scenario");
    std::string model_scenario, model_out, model_run_dir, model_summary;
    int model_budget = -1;
    cmd_model->add_option("--scenario", model_scenario, "scenario JSON")->required();
    cmd_model->add_option("--out", model_out, "output program path");
    cmd_model->add_option("--budget", model_budget, "max repair rounds");
    cmd_model->add_option("--run-dir", model_run_dir, "artifact directory");
    cmd_model->add_option("--summary", model_summary, "outcome summary path (JSON)");

    // solve
    auto* cmd_solve = app.add_subcommand("solve", "generate solutions for an objective");
    std::string solve_objective, solve_model, solve_scenario, solve_out, solve_run_dir,
        solve_summary;
    int solve_budget = -1, solve_inner = -1, solve_multi = 0;
    std::int64_t solve_seed = std::numeric_limits<std::int64_t>::min(), solve_steps = -1;
    cmd_solve->add_option("--objective", solve_objective, "objective JSON")->required();
    cmd_solve->add_option("--model", solve_model, "defect-free program")->required();
    cmd_solve->add_option("--scenario", solve_scenario, "scenario JSON (for repair prompts)");
    cmd_solve->add_option("--seed", solve_seed, "simulation seed");
    cmd_solve->add_option("--steps", solve_steps, "simulation steps");
    cmd_solve->add_option("--budget", solve_budget, "max solution rounds");
    cmd_solve->add_option("--inner-budget", solve_inner, "nested repair rounds");
    cmd_solve->add_option("--multi-seed", solve_multi,
                          "confirm the verdict on N extra consecutive seeds");
    cmd_solve->add_option("--out", solve_out, "output program path");
    cmd_solve->add_option("--run-dir", solve_run_dir, "artifact directory");
    cmd_solve->add_option("--summary", solve_summary, "outcome summary path (JSON)");

    // simulate
    auto* cmd_sim = app.add_subcommand("simulate", "run a program deterministically");
    std::string sim_model, sim_trace_out;
    std::int64_t sim_seed = std::numeric_limits<std::int64_t>::min(), sim_steps = -1;
    cmd_sim->add_option("model", sim_model, "program path")->required();
    cmd_sim->add_option("--seed", sim_seed, "simulation seed");
    cmd_sim->add_option("--steps", sim_steps, "simulation steps");
    cmd_sim->add_option("--trace-out", sim_trace_out, "trace output path (default stdout)");

    // verify
    auto* cmd_verify = app.add_subcommand("verify", "static verification of a program");
    std::string verify_model, verify_scenario;
    cmd_verify->add_option("model", verify_model, "program path")->required();
    cmd_verify->add_option("--scenario", verify_scenario, "scenario JSON");

    // verify-solution
    auto* cmd_vs = app.add_subcommand("verify-solution",
                                      "judge a candidate against objective criteria");
    std::string vs_objective, vs_model, vs_baseline, vs_baseline_trace;
    std::int64_t vs_seed = std::numeric_limits<std::int64_t>::min(), vs_steps = -1;
    cmd_vs->add_option("--objective", vs_objective, "objective JSON")->required();
    cmd_vs->add_option("--model", vs_model, "candidate program")->required();
    cmd_vs->add_option("--baseline", vs_baseline, "baseline program (pre-solution)");
    cmd_vs->add_option("--baseline-trace", vs_baseline_trace, "baseline trace JSON");
    cmd_vs->add_option("--seed", vs_seed, "simulation seed");
    cmd_vs->add_option("--steps", vs_steps, "simulation steps");

    // slice
    auto* cmd_slice = app.add_subcommand("slice", "backward slice of a recorded metric");
    std::string slice_model, slice_metric;
    cmd_slice->add_option("model", slice_model, "program path")->required();
    cmd_slice->add_option("--metric", slice_metric, "metric name")->required();

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "evaluate the modeling stage over a corpus");
    std::string eval_corpus, eval_report, eval_weights, eval_run_root;
    int eval_budget = -1;
    bool eval_table = false;
    cmd_eval->add_option("--corpus", eval_corpus, "corpus directory")->required();
    cmd_eval->add_option("--report", eval_report, "report output path (JSON)");
    cmd_eval->add_option("--weights", eval_weights, "codebleu weights a,b,c,d");
    cmd_eval->add_option("--budget", eval_budget, "max repair rounds per sample");
    cmd_eval->add_option("--run-root", eval_run_root, "artifact root for per-sample runs");
    cmd_eval->add_flag("--table", eval_table, "print the text table instead of JSON");

    // global flags may appear after the subcommand
    for (auto* sub : app.get_subcommands(static_cast<bool (*)(const CLI::App*)>(nullptr)))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help is code 0, any usage error maps to 2
    }

    // precedence: defaults < config file < environment < flags
    cli::RunConfig config = defaults;
    if (!config_path.empty()) config = cli::load_config_file(config_path, config);
    else if (fs::exists("sage.toml")) config = cli::load_config_file("sage.toml", config);
    cli::apply_env(config);
    if (!opt_backend.empty()) {
        if (opt_backend != "mock" && opt_backend != "remote")
            throw ConfigError("--backend must be \"mock\" or \"remote\"", "backend");
        config.backend = opt_backend;
    }
    if (!opt_fixtures.empty()) config.fixtures_dir = opt_fixtures;
    if (!opt_endpoint.empty()) config.endpoint = opt_endpoint;
    if (!opt_model_name.empty()) config.model = opt_model_name;

    if (cmd_model->parsed()) {
        if (model_budget >= 0) config.modeling_budget = model_budget;
        auto scenario = rep::parse_conceptual(read_file(model_scenario));
        auto bundle = make_backend(config, "model", model_run_dir);
        auto outcome =
            pipeline::run_modeling(scenario, *bundle.backend, config.modeling_budget,
                                   bundle.log.get());
        std::string summary = pipeline::modeling_outcome_to_json(outcome);
        if (!model_out.empty()) write_output(model_out, outcome.final_source);
        write_output(model_summary.empty() ? "-" : model_summary, summary);
        std::cerr << "run artifacts: " << bundle.log->dir().string() << "\n";
        return outcome.success ? 0 : 1;
    }

    if (cmd_solve->parsed()) {
        if (solve_budget >= 0) config.solving_budget = solve_budget;
        if (solve_inner >= 0) config.inner_budget = solve_inner;
        if (solve_seed != std::numeric_limits<std::int64_t>::min()) config.seed = solve_seed;
        if (solve_steps >= 0) config.steps = solve_steps;

        auto objective = rep::parse_objective(read_file(solve_objective));
        auto program = load_program(solve_model);
        std::optional<rep::ConceptualRepresentation> scenario;
        if (!solve_scenario.empty())
            scenario = rep::parse_conceptual(read_file(solve_scenario));

        pipeline::SolvingOptions options;
        options.budget = config.solving_budget;
        options.inner_budget = config.inner_budget;
        options.seed = config.seed;
        options.steps = config.steps;
        for (int i = 1; i <= solve_multi; ++i) options.extra_seeds.push_back(config.seed + i);

        auto bundle = make_backend(config, "solve", solve_run_dir);
        auto outcome = pipeline::run_solving(objective, program, *bundle.backend, options,
                                             scenario ? &*scenario : nullptr, bundle.log.get());
        if (!solve_out.empty()) write_output(solve_out, outcome.final_source);
        write_output(solve_summary.empty() ? "-" : solve_summary,
                     pipeline::solving_outcome_to_json(outcome));
        std::cerr << "run artifacts: " << bundle.log->dir().string() << "\n";
        return outcome.success ? 0 : 1;
    }

    if (cmd_sim->parsed()) {
        auto program = load_program(sim_model);
        std::int64_t seed =
            sim_seed != std::numeric_limits<std::int64_t>::min() ? sim_seed : config.seed;
        std::int64_t steps = sim_steps >= 0 ? sim_steps : config.steps;
        auto trace = sim::simulate(program, seed, steps);
        write_output(sim_trace_out, sim::trace_to_string(trace));
        return 0;
    }

    if (cmd_verify->parsed()) {
        std::optional<rep::ConceptualRepresentation> scenario;
        if (!verify_scenario.empty())
            scenario = rep::parse_conceptual(read_file(verify_scenario));
        auto defects =
            verifier1::check_program(read_file(verify_model), scenario ? &*scenario : nullptr);
        std::cout << verifier1::defects_to_json(defects) << "\n";
        return defects.empty() ? 0 : 1;
    }

    if (cmd_vs->parsed()) {
        auto objective = rep::parse_objective(read_file(vs_objective));
        auto candidate = load_program(vs_model);
        std::int64_t seed =
            vs_seed != std::numeric_limits<std::int64_t>::min() ? vs_seed : config.seed;
        std::int64_t steps = vs_steps >= 0 ? vs_steps : config.steps;

        sim::SimulationTrace baseline;
        if (!vs_baseline_trace.empty()) {
            baseline = sim::trace_from_string(read_file(vs_baseline_trace));
        } else if (!vs_baseline.empty()) {
            baseline = sim::simulate(load_program(vs_baseline), seed, steps);
        } else {
            throw ConfigError("verify-solution needs --baseline or --baseline-trace",
                              "baseline");
        }

        auto bundle = make_backend(config, "verify-solution", "");
        auto predicates =
            criteria::compile_criteria(objective, candidate, *bundle.backend, bundle.log.get());
        auto trace = sim::simulate(candidate, seed, steps);
        auto verdict = criteria::evaluate(predicates, trace, baseline);
        std::cout << criteria::verdict_to_json(verdict);
        return verdict.satisfying_flag ? 0 : 1;
    }

    if (cmd_slice->parsed()) {
        auto program = load_program(slice_model);
        auto slice = verifier1::backward_slice(program, slice_metric);
        nlohmann::ordered_json j;
        j["metric"] = slice.metric;
        j["statements"] = nlohmann::ordered_json::array();
        for (const auto& [obj, act, path] : slice.statements)
            j["statements"].push_back({{"object", obj}, {"activity", act}, {"path", path}});
        j["states"] = nlohmann::ordered_json::array();
        for (const auto& [obj, state] : slice.states) j["states"].push_back(obj + "." + state);
        j["parameters"] = nlohmann::ordered_json::array();
        for (const auto& p : slice.parameters) j["parameters"].push_back(p);
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (cmd_eval->parsed()) {
        if (eval_budget >= 0) config.modeling_budget = eval_budget;
        if (!eval_weights.empty()) {
            std::stringstream ss(eval_weights);
            std::vector<double> w;
            std::string item;
            while (std::getline(ss, item, ',')) w.push_back(std::stod(item));
            if (w.size() != 4)
                throw ConfigError("--weights needs four comma-separated values", "weights");
            config.weights = {w[0], w[1], w[2], w[3]};
        }
        eval::EvalConfig ec;
        ec.budget = config.modeling_budget;
        ec.weights = config.weights;
        if (!eval_run_root.empty()) ec.run_root = eval_run_root;

        eval::BackendFactory factory;
        if (config.backend == "remote") {
            factory = [&](const fs::path&) -> std::unique_ptr<gen::Backend> {
                gen::RemoteConfig rc;
                rc.endpoint = config.endpoint;
                rc.model = config.model;
                rc.timeout_s = config.timeout_s;
                rc.max_retries = config.max_retries;
                return std::make_unique<gen::RemoteBackend>(rc);
            };
        } else {
            factory = [](const fs::path& fixtures) -> std::unique_ptr<gen::Backend> {
                return std::make_unique<gen::MockBackend>(fixtures);
            };
        }

        auto report = eval::rate_corpus(eval_corpus, factory, ec);
        std::string json = eval::report_to_json(report);
        if (!eval_report.empty()) write_output(eval_report, json);
        if (eval_table) std::cout << eval::report_to_table(report);
        else if (eval_report.empty()) std::cout << json;
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const SyntaxError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
