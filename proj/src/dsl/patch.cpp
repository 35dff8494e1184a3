#include "sage/dsl/patch.hpp"

#include <algorithm>

#include "sage/dsl/printer.hpp"

namespace sage::dsl {

namespace {

std::string schedule_kind_word(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Do: return "do";
        case ScheduleKind::RandomDo: return "random_do";
        case ScheduleKind::ConditionalDo: return "conditional_do";
        case ScheduleKind::RandomConditionalDo: return "random_conditional_do";
    }
    return "do";
}

void print_directive(const PatchDirective& d, int indent, std::string& out) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, AddState>) {
                out += pad + "add_state " + node.object_name + "." + node.decl.name + ": " +
                       rep::to_string(node.decl.type) + " = " + print_expr(node.decl.init) +
                       "\n";
            } else if constexpr (std::is_same_v<T, RemoveState>) {
                out += pad + "remove_state " + node.object_name + "." + node.state_name + "\n";
            } else if constexpr (std::is_same_v<T, SetActivity>) {
                out += pad + "set_activity " + node.object_name + "." + node.activity_name +
                       " {\n";
                out += print_statements(node.body, indent + 1);
                out += pad + "}\n";
            } else if constexpr (std::is_same_v<T, RemoveActivity>) {
                out += pad + "remove_activity " + node.object_name + "." + node.activity_name +
                       "\n";
            } else if constexpr (std::is_same_v<T, AddScheduleStep>) {
                out += pad + "add_schedule " + schedule_kind_word(node.step.kind) + " " +
                       node.step.object_name + "." + node.step.activity_name;
                if (node.step.condition) out += " when " + print_expr(*node.step.condition);
                out += "\n";
            } else if constexpr (std::is_same_v<T, RemoveScheduleStep>) {
                out += pad + "remove_schedule " + schedule_kind_word(node.kind) + " " +
                       node.object_name + "." + node.activity_name + "\n";
            } else {
                static_assert(std::is_same_v<T, SetParam>);
                out += pad + "set_param " + node.name + " = ";
                if (node.value.integer)
                    out += std::to_string(static_cast<std::int64_t>(node.value.value));
                else
                    out += format_real(node.value.value);
                out += "\n";
            }
        },
        d);
}

}  // namespace

std::string print_patch(const std::vector<PatchDirective>& directives) {
    std::string out;
    for (const auto& d : directives) print_directive(d, 0, out);
    return out;
}

std::string print_solutions(const std::vector<Solution>& solutions) {
    std::string out;
    for (const auto& s : solutions) {
        out += "solution \"" + s.title + "\" {\n";
        for (const auto& d : s.directives) print_directive(d, 1, out);
        out += "}\n";
    }
    return out;
}

AbmProgram apply_patch(const AbmProgram& program, const std::vector<PatchDirective>& patch) {
    AbmProgram out = program;
    for (const auto& directive : patch) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AddState>) {
                    ObjectClass* cls = out.find_object(node.object_name);
                    if (!cls)
                        throw PatchApplyError("add_state: unknown object \"" +
                                              node.object_name + "\"");
                    if (cls->find_state(node.decl.name))
                        throw PatchApplyError("add_state: state \"" + node.object_name + "." +
                                              node.decl.name + "\" already exists");
                    cls->state_decls.push_back(node.decl);
                } else if constexpr (std::is_same_v<T, RemoveState>) {
                    ObjectClass* cls = out.find_object(node.object_name);
                    if (!cls || !cls->find_state(node.state_name))
                        throw PatchApplyError("remove_state: unknown state \"" +
                                              node.object_name + "." + node.state_name + "\"");
                    std::erase_if(cls->state_decls,
                                  [&](const StateDecl& s) { return s.name == node.state_name; });
                } else if constexpr (std::is_same_v<T, SetActivity>) {
                    ObjectClass* cls = out.find_object(node.object_name);
                    if (!cls)
                        throw PatchApplyError("set_activity: unknown object \"" +
                                              node.object_name + "\"");
                    if (Activity* existing = cls->find_activity(node.activity_name)) {
                        existing->body = node.body;
                    } else {
                        Activity a;
                        a.name = node.activity_name;
                        a.body = node.body;
                        cls->activities.push_back(std::move(a));
                    }
                } else if constexpr (std::is_same_v<T, RemoveActivity>) {
                    ObjectClass* cls = out.find_object(node.object_name);
                    if (!cls || !cls->find_activity(node.activity_name))
                        throw PatchApplyError("remove_activity: unknown activity \"" +
                                              node.object_name + "." + node.activity_name +
                                              "\"");
                    std::erase_if(cls->activities, [&](const Activity& a) {
                        return a.name == node.activity_name;
                    });
                } else if constexpr (std::is_same_v<T, AddScheduleStep>) {
                    out.schedule.push_back(node.step);
                } else if constexpr (std::is_same_v<T, RemoveScheduleStep>) {
                    auto matches = [&](const ScheduleStep& s) {
                        return s.kind == node.kind && s.object_name == node.object_name &&
                               s.activity_name == node.activity_name;
                    };
                    if (std::none_of(out.schedule.begin(), out.schedule.end(), matches))
                        throw PatchApplyError("remove_schedule: no matching step for " +
                                              node.object_name + "." + node.activity_name);
                    std::erase_if(out.schedule, matches);
                } else {
                    static_assert(std::is_same_v<T, SetParam>);
                    out.parameters[node.name] = node.value;
                }
            },
            directive);
    }
    return out;
}

}  // namespace sage::dsl
