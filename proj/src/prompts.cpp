#include <algorithm>
#include <cstdint>
#include <cstdio>

#include "sage/generator.hpp"

namespace sage::gen {

const char* to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::GenAbm: return "gen_abm";
        case PromptKind::RectifyDefects: return "rectify";
        case PromptKind::GenVerification: return "gen_verification";
        case PromptKind::CoT: return "cot";
        case PromptKind::Modify: return "modify";
    }
    return "?";
}

namespace {

constexpr const char* kDslSummary = R"(Programs are built from five declaration forms:
  param NAME = number
  object NAME { state NAME: bool|int|real|position = expr ... activity NAME { statements } ... }
  schedule { do|random_do OBJ.ACT | conditional_do|random_conditional_do OBJ.ACT when expr ... }
  init { grid W H | seed N | layout OBJ rowmajor | count OBJ = N | set OBJ.STATE = expr ... }
  record METRIC = expr
Statements: self.STATE := expr / other.STATE := expr (inside for_neighbor),
  if expr { ... } else { ... }, for_neighbor(radius) { ... }, record_event NAME, todo.
Expressions: literals, self.STATE, other.STATE, parameter names, + - * /,
  comparisons, and/or/not, bernoulli(p), uniform(a, b), randint(a, b),
  count_neighbors(radius, predicate), count_all(OBJ, predicate),
  sum_all(OBJ, expr) (recorders only), distance(self, other), pos(x, y).
A body consisting of the single statement `todo` is a placeholder.)";

constexpr const char* kPatchSummary = R"(Patch directives:
  add_state OBJ.NAME: type = expr
  remove_state OBJ.NAME
  set_activity OBJ.NAME { statements }   (adds the activity or replaces its body)
  remove_activity OBJ.NAME
  add_schedule do|random_do OBJ.ACT
  add_schedule conditional_do|random_conditional_do OBJ.ACT when expr
  remove_schedule KIND OBJ.ACT
  set_param NAME = number)";

struct Template {
    std::vector<std::string> slots;
    std::string text;
};

const Template& template_for(PromptKind kind) {
    static const Template gen_abm{
        {"scenario"},
        std::string(R"(You are building an executable agent-based model in a small modeling language.

## Language reference
)") + kDslSummary +
            R"(

## Output format
Reply with exactly one fenced block labeled abm containing the full program:
```abm
...program...
```

## Example
Scenario:
```json
{"objects": [{"name": "rabbit",
  "states": [{"name": "energy", "description": "stored energy", "type": "int"}],
  "activities": [{"name": "graze", "description": "gain energy from the field"}]}],
 "scheduling": [{"kind": "Do", "object": "rabbit", "activity": "graze"}],
 "parameters": {"rabbits": 10, "gain": 2}}
```
Answer:
```abm
param gain = 2
param rabbits = 10

object rabbit {
  state energy: int = 5

  activity graze {
    self.energy := self.energy + gain
  }
}

schedule {
  do rabbit.graze
}

init {
  grid 8 8
  count rabbit = rabbits
}

record total_energy = sum_all(rabbit, other.energy)
```

## Task
Scenario:
```json
{{scenario}}
```
Write the complete program for this scenario. Give every declared activity a
concrete body, declare instance counts in an init block, and record the
metrics needed to observe the scenario. Reply with one ```abm block.
)"};

    static const Template rectify{
        {"program", "defects"},
        std::string(R"(The program below was found defective. Repair every reported defect and
reply with the full corrected program in one ```abm block.

Compilation errors are reported as [error_line, error_code, error_reasons].
Lacking details name an object.activity pair whose body is a placeholder,
empty, missing or has no effect, together with its intended behavior.

## Language reference
)") + kDslSummary +
            R"(

## Example
Program:
```abm
object sheep {
  state fed: bool = false

  activity graze {
    todo
  }
}

schedule {
  do sheep.graze
}

init {
  count sheep = 4
}

record fed_count = count_all(sheep, other.fed)
```
Defects:
- lacking detail sheep.graze: activity body is a placeholder (description: "eat nearby grass until fed")
Corrected program:
```abm
object sheep {
  state fed: bool = false

  activity graze {
    self.fed := true
  }
}

schedule {
  do sheep.graze
}

init {
  count sheep = 4
}

record fed_count = count_all(sheep, other.fed)
```

## Task
Program:
```abm
{{program}}
```
Defects:
{{defects}}
Reply with the full corrected program in one ```abm block.
)"};

    static const Template gen_verification{
        {"problem", "variable_name", "variable_example", "requirement", "metrics"},
        R"(Convert one judgment criterion into a predicate of the verification language.

## Verification language
Pred := Agg CMP number | Pred and Pred | Pred or Pred | not Pred | (Pred)
      | unchanged(metric) | unchanged(metric, tolerance)
Agg  := final(metric) | max(metric) | min(metric) | mean(metric) | last_k_mean(metric, k)
CMP  := < <= == != >= >
`unchanged` holds when the metric series matches the baseline run of the
unmodified model within the tolerance.

## Output format
Reply with exactly one fenced block labeled pred:
```pred
...predicate...
```

## Example
Problem: reduce queue congestion at the clinic
Criterion: variable_name=mean_wait, variable_example=3.5,
requirement="The mean waiting time drops below 2 minutes"
Answer:
```pred
final(mean_wait) < 2.0
```

## Task
Problem: {{problem}}
Criterion: variable_name={{variable_name}}, variable_example={{variable_example}},
requirement="{{requirement}}"
Available metrics: {{metrics}}
Reply with one ```pred block.
)"};

    static const Template cot{
        {"objective", "summary", "slices", "program"},
        std::string(R"(The simulation results of the program below do not satisfy the objective.
Work through three steps:

1. relations extraction - list the operations (activities, states,
   parameters) in the program that influence the evaluated variables. The
   dependency slices below are static grounding for this step.
2. cause analysis - explain why the criteria are unsatisfied.
3. solution proposal - propose solutions as patch directives.

## Patch directive reference
)") + kPatchSummary +
            R"(

## Output format
Reply with three fenced blocks, in order:
```relations
activity OBJ.NAME
state OBJ.NAME
param NAME
```
```reasons
...free text...
```
```solutions
solution "title" {
  ...patch directives...
}
```

## Example
Objective: keep every rabbit fed (final(hungry_count) == 0, observed 6).
Relevant slice: activity rabbit.graze, state rabbit.energy, param gain.
Answer:
```relations
activity rabbit.graze
state rabbit.energy
param gain
```
```reasons
Rabbits lose energy faster than grazing restores it, so hungry_count stays
above zero; nothing in the model lets a starving rabbit recover.
```
```solutions
solution "emergency feeding" {
  add_state rabbit.fed_by_keeper: bool = false
  set_activity rabbit.emergency_feed {
    if self.energy < 2 {
      self.energy := self.energy + 4
      self.fed_by_keeper := true
    }
  }
  add_schedule do rabbit.emergency_feed
}
```

## Task
Objective:
```json
{{objective}}
```
Simulation summary:
{{summary}}
Dependency slices:
{{slices}}
Program:
```abm
{{program}}
```
)"};

    static const Template modify{
        {"program", "solutions"},
        std::string(R"(Integrate the proposed solutions into the program below.

## Patch directive reference
)") + kPatchSummary +
            R"(

## Output format
Reply with two fenced blocks: first a ```patch block holding exactly the
directives to apply, then a ```abm block holding the full patched program.

## Example
Program:
```abm
object rabbit {
  state energy: int = 5

  activity graze {
    self.energy := self.energy + 1
  }
}

schedule {
  do rabbit.graze
}

init {
  count rabbit = 4
}

record total_energy = sum_all(rabbit, other.energy)
```
Solutions:
solution "richer pasture" {
  set_param gain = 3
  set_activity rabbit.graze {
    self.energy := self.energy + gain
  }
}
Answer:
```patch
set_param gain = 3
set_activity rabbit.graze {
  self.energy := self.energy + gain
}
```
```abm
param gain = 3

object rabbit {
  state energy: int = 5

  activity graze {
    self.energy := self.energy + gain
  }
}

schedule {
  do rabbit.graze
}

init {
  count rabbit = 4
}

record total_energy = sum_all(rabbit, other.energy)
```

## Task
Program:
```abm
{{program}}
```
Solutions:
{{solutions}}
Reply with one ```patch block followed by one ```abm block.
)"};

    switch (kind) {
        case PromptKind::GenAbm: return gen_abm;
        case PromptKind::RectifyDefects: return rectify;
        case PromptKind::GenVerification: return gen_verification;
        case PromptKind::CoT: return cot;
        case PromptKind::Modify: return modify;
    }
    return gen_abm;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

const std::vector<std::string>& prompt_slots(PromptKind kind) {
    return template_for(kind).slots;
}

std::string PromptText::digest() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    h = fnv1a(h, to_string(kind));
    for (const auto& [key, value] : slots) {
        h = fnv1a(h, "\x1f" + key + "\x1e");
        h = fnv1a(h, value);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PromptText render_prompt(PromptKind kind, const std::map<std::string, std::string>& slots) {
    const Template& tmpl = template_for(kind);
    for (const auto& name : tmpl.slots)
        if (!slots.count(name))
            throw MissingSlot("missing slot \"" + name + "\" for " + to_string(kind) +
                              " prompt");
    for (const auto& [name, value] : slots) {
        (void)value;
        if (std::find(tmpl.slots.begin(), tmpl.slots.end(), name) == tmpl.slots.end())
            throw MissingSlot("unexpected slot \"" + name + "\" for " + to_string(kind) +
                              " prompt");
    }

    PromptText out;
    out.kind = kind;
    out.slots = slots;
    out.text = tmpl.text;
    for (const auto& [name, value] : slots) {
        std::string needle = "{{" + name + "}}";
        std::size_t pos = 0;
        while ((pos = out.text.find(needle, pos)) != std::string::npos) {
            out.text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return out;
}

namespace {

struct Fence {
    std::string label;
    std::string content;
    std::size_t offset = 0;  // byte offset of the content
};

std::vector<Fence> extract_fences(const std::string& raw) {
    std::vector<Fence> out;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t open = raw.find("```", pos);
        if (open == std::string::npos) break;
        std::size_t label_end = raw.find('\n', open + 3);
        if (label_end == std::string::npos) break;
        std::string label = raw.substr(open + 3, label_end - open - 3);
        while (!label.empty() && (label.back() == '\r' || label.back() == ' '))
            label.pop_back();
        std::size_t close = raw.find("\n```", label_end);
        if (close == std::string::npos) break;
        Fence f;
        f.label = label;
        f.content = raw.substr(label_end + 1, close - label_end);
        f.offset = label_end + 1;
        out.push_back(std::move(f));
        pos = close + 4;
    }
    return out;
}

const Fence* last_fence(const std::vector<Fence>& fences, const std::string& label) {
    const Fence* found = nullptr;
    for (const auto& f : fences)
        if (f.label == label) found = &f;
    return found;
}

std::vector<CoTRelation> parse_relations(const Fence& fence) {
    std::vector<CoTRelation> out;
    std::size_t line_start = 0;
    const std::string& text = fence.content;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string line = text.substr(line_start, line_end - line_start);
        std::size_t offset = fence.offset + line_start;
        line_start = line_end + 1;

        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        std::size_t first = line.find_first_not_of(' ');
        if (first == std::string::npos) continue;
        line = line.substr(first);

        auto space = line.find(' ');
        if (space == std::string::npos)
            throw PayloadParseError("malformed relation line \"" + line + "\"", offset);
        std::string head = line.substr(0, space);
        std::string rest = line.substr(space + 1);

        CoTRelation rel;
        if (head == "activity") rel.kind = CoTRelation::Kind::Activity;
        else if (head == "state") rel.kind = CoTRelation::Kind::State;
        else if (head == "param") rel.kind = CoTRelation::Kind::Param;
        else throw PayloadParseError("unknown relation kind \"" + head + "\"", offset);

        if (rel.kind == CoTRelation::Kind::Param) {
            rel.name = rest;
        } else {
            auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw PayloadParseError("relation \"" + rest + "\" must be OBJ.NAME", offset);
            rel.object_name = rest.substr(0, dot);
            rel.name = rest.substr(dot + 1);
        }
        if (rel.name.empty())
            throw PayloadParseError("empty relation name", offset);
        out.push_back(std::move(rel));
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Payload parse_response(PromptKind kind, const std::string& raw) {
    std::vector<Fence> fences = extract_fences(raw);
    switch (kind) {
        case PromptKind::GenAbm:
        case PromptKind::RectifyDefects: {
            const Fence* f = last_fence(fences, "abm");
            if (!f) throw PayloadParseError("no ```abm block in response", 0);
            return f->content;
        }
        case PromptKind::GenVerification: {
            const Fence* f = last_fence(fences, "pred");
            if (!f) throw PayloadParseError("no ```pred block in response", 0);
            return trim(f->content);
        }
        case PromptKind::CoT: {
            const Fence* rel = last_fence(fences, "relations");
            const Fence* reasons = last_fence(fences, "reasons");
            const Fence* solutions = last_fence(fences, "solutions");
            if (!rel) throw PayloadParseError("no ```relations block in response", 0);
            if (!reasons) throw PayloadParseError("no ```reasons block in response", 0);
            if (!solutions) throw PayloadParseError("no ```solutions block in response", 0);
            CoTResponse out;
            out.relations = parse_relations(*rel);
            out.reasons = trim(reasons->content);
            try {
                out.solutions = dsl::parse_solutions(solutions->content);
            } catch (const dsl::PatchParseError& e) {
                throw PayloadParseError(std::string("bad solutions block: ") + e.what(),
                                        solutions->offset);
            }
            if (out.solutions.empty())
                throw PayloadParseError("solutions block proposes nothing", solutions->offset);
            return out;
        }
        case PromptKind::Modify: {
            const Fence* patch = last_fence(fences, "patch");
            if (!patch) throw PayloadParseError("no ```patch block in response", 0);
            ModifyPayload out;
            try {
                out.directives = dsl::parse_patch(patch->content);
            } catch (const dsl::PatchParseError& e) {
                throw PayloadParseError(std::string("bad patch block: ") + e.what(),
                                        patch->offset);
            }
            if (out.directives.empty())
                throw PayloadParseError("patch block is empty", patch->offset);
            if (const Fence* f = last_fence(fences, "abm")) out.full_program = f->content;
            return out;
        }
    }
    throw PayloadParseError("unknown prompt kind", 0);
}

}  // namespace sage::gen
