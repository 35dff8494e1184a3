#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sage/dsl/ast.hpp"
#include "sage/error.hpp"

namespace sage::sim {

class RuntimeFault : public Error {
public:
    RuntimeFault(std::int64_t step_, std::string object_, std::string activity_,
                 std::string reason_)
        : Error("runtime fault at step " + std::to_string(step_) + " in " + object_ +
                (activity_.empty() ? "" : "." + activity_) + ": " + reason_),
          step(step_),
          object(std::move(object_)),
          activity(std::move(activity_)),
          reason(std::move(reason_)) {}

    std::int64_t step = 0;  // -1 during world setup
    std::string object;
    std::string activity;
    std::string reason;
};

// splitmix64; the one generator used for every draw of a run, consumed in
// schedule order. Bounded draws are next() % n, reals are 53-bit.
struct Rng {
    std::uint64_t state = 0;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double real01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    std::uint64_t bounded(std::uint64_t n) { return next() % n; }
};

// In-place Fisher-Yates: i from n-1 down to 1, j = bounded(i+1), swap.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[rng.bounded(i)]);
}

using Value = std::variant<bool, std::int64_t, double, dsl::PosValue>;

struct InstanceSnapshot {
    int id = 0;
    std::int64_t x = 0, y = 0;
    std::vector<std::pair<std::string, Value>> states;  // declaration order
};

struct MetricSeries {
    dsl::ValueType type = dsl::ValueType::Real;
    std::vector<double> values;  // int/bool metrics hold exact integral values
};

struct SimulationTrace {
    std::int64_t seed = 0;
    std::int64_t steps = 0;
    std::map<std::string, MetricSeries> series;
    std::map<std::string, std::vector<std::int64_t>> events;  // per-step counts
    std::map<std::string, std::vector<InstanceSnapshot>> final_state;
    std::map<std::string, std::int64_t> activity_runs;  // "object.activity" -> executions
};

// Deterministic execution: a pure function of (program, seed, steps).
// Surfaces division by zero, probabilities outside [0, 1] and empty random
// ranges as RuntimeFault instead of propagating garbage.
SimulationTrace simulate(const dsl::AbmProgram& program, std::int64_t seed, std::int64_t steps);

// Pure accessor over the recorded series.
std::map<std::string, std::vector<double>> snapshot_metrics(const SimulationTrace& trace);

std::string trace_to_string(const SimulationTrace& trace);
SimulationTrace trace_from_string(const std::string& text);

}  // namespace sage::sim
