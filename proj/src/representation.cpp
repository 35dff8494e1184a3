#include "sage/representation.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sage::rep {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(StateType t) {
    switch (t) {
        case StateType::Bool: return "bool";
        case StateType::Int: return "int";
        case StateType::Real: return "real";
        case StateType::Position: return "position";
    }
    return "?";
}

std::optional<StateType> state_type_from_string(const std::string& s) {
    if (s == "bool") return StateType::Bool;
    if (s == "int") return StateType::Int;
    if (s == "real") return StateType::Real;
    if (s == "position") return StateType::Position;
    return std::nullopt;
}

const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Do: return "Do";
        case ScheduleKind::RandomDo: return "Random_Do";
        case ScheduleKind::ConditionalDo: return "Conditional_Do";
        case ScheduleKind::RandomConditionalDo: return "Random_Conditional_Do";
    }
    return "?";
}

std::optional<ScheduleKind> schedule_kind_from_string(const std::string& s) {
    if (s == "Do") return ScheduleKind::Do;
    if (s == "Random_Do") return ScheduleKind::RandomDo;
    if (s == "Conditional_Do") return ScheduleKind::ConditionalDo;
    if (s == "Random_Conditional_Do") return ScheduleKind::RandomConditionalDo;
    return std::nullopt;
}

bool is_conditional(ScheduleKind k) {
    return k == ScheduleKind::ConditionalDo || k == ScheduleKind::RandomConditionalDo;
}

bool is_random(ScheduleKind k) {
    return k == ScheduleKind::RandomDo || k == ScheduleKind::RandomConditionalDo;
}

const ObjectSpec* ConceptualRepresentation::find_object(const std::string& name) const {
    for (const auto& o : objects)
        if (o.name == name) return &o;
    return nullptr;
}

namespace {

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

int line_of_offset(const std::string& text, std::size_t offset) {
    int line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

// Best-effort line lookup for schema errors: first occurrence of the quoted
// token in the document, 0 when absent or ambiguous enough not to matter.
int guess_line(const std::string& document, const std::string& token) {
    auto pos = document.find('"' + token + '"');
    if (pos == std::string::npos) return 0;
    return line_of_offset(document, pos);
}

ordered_json parse_json(const std::string& document) {
    try {
        return ordered_json::parse(document);
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.what(), line_of_offset(document, e.byte > 0 ? e.byte - 1 : 0));
    }
}

void require_object(const ordered_json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError("expected a JSON object at " + path, path);
}

void reject_unknown_keys(const ordered_json& j, std::initializer_list<const char*> known,
                         const std::string& path, const std::string& document) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = std::any_of(known.begin(), known.end(),
                              [&](const char* k) { return it.key() == k; });
        if (!ok)
            throw SchemaError("unknown field \"" + it.key() + "\" at " + path, path,
                              guess_line(document, it.key()));
    }
}

std::string get_string(const ordered_json& j, const char* key, const std::string& path) {
    if (!j.contains(key))
        throw SchemaError(std::string("missing field \"") + key + "\" at " + path, path);
    if (!j[key].is_string())
        throw SchemaError(std::string("field \"") + key + "\" at " + path + " must be a string",
                          path + "." + key);
    return j[key].get<std::string>();
}

std::string get_identifier(const ordered_json& j, const char* key, const std::string& path,
                           const std::string& document) {
    std::string s = get_string(j, key, path);
    if (!is_identifier(s))
        throw SchemaError("\"" + s + "\" at " + path + "." + key + " is not a legal identifier",
                          path + "." + key, guess_line(document, s));
    return s;
}

}  // namespace

ConceptualRepresentation parse_conceptual(const std::string& document) {
    ordered_json j = parse_json(document);
    require_object(j, "$");
    reject_unknown_keys(j, {"objects", "scheduling", "parameters"}, "$", document);
    if (!j.contains("objects") || !j["objects"].is_array())
        throw SchemaError("missing or non-array \"objects\"", "objects");

    ConceptualRepresentation rep;
    std::set<std::string> object_names;

    std::size_t oi = 0;
    for (const auto& jo : j["objects"]) {
        std::string path = "objects[" + std::to_string(oi) + "]";
        require_object(jo, path);
        reject_unknown_keys(jo, {"name", "states", "activities"}, path, document);

        ObjectSpec obj;
        obj.name = get_identifier(jo, "name", path, document);
        if (!object_names.insert(obj.name).second)
            throw SchemaError("duplicate object name \"" + obj.name + "\"", path,
                              guess_line(document, obj.name));

        if (!jo.contains("states") || !jo["states"].is_array() || jo["states"].empty())
            throw SchemaError("object \"" + obj.name + "\" needs at least one state",
                              path + ".states", guess_line(document, obj.name));

        std::set<std::string> state_names;
        std::size_t si = 0;
        for (const auto& js : jo["states"]) {
            std::string spath = path + ".states[" + std::to_string(si) + "]";
            require_object(js, spath);
            reject_unknown_keys(js, {"name", "description", "type"}, spath, document);
            StateSpec st;
            st.name = get_identifier(js, "name", spath, document);
            st.description = get_string(js, "description", spath);
            if (st.description.empty())
                throw SchemaError("empty description for state \"" + st.name + "\"", spath,
                                  guess_line(document, st.name));
            std::string type_text = get_string(js, "type", spath);
            auto t = state_type_from_string(type_text);
            if (!t)
                throw SchemaError("unknown state type \"" + type_text + "\" at " + spath,
                                  spath + ".type", guess_line(document, type_text));
            st.declared_type = *t;
            if (!state_names.insert(st.name).second)
                throw SchemaError("duplicate state \"" + st.name + "\" in object \"" + obj.name +
                                      "\"",
                                  spath, guess_line(document, st.name));
            obj.states.push_back(std::move(st));
            ++si;
        }

        std::set<std::string> activity_names;
        if (jo.contains("activities")) {
            if (!jo["activities"].is_array())
                throw SchemaError("\"activities\" must be an array at " + path,
                                  path + ".activities");
            std::size_t ai = 0;
            for (const auto& ja : jo["activities"]) {
                std::string apath = path + ".activities[" + std::to_string(ai) + "]";
                require_object(ja, apath);
                reject_unknown_keys(ja, {"name", "description"}, apath, document);
                ActivitySpec act;
                act.name = get_identifier(ja, "name", apath, document);
                act.description = get_string(ja, "description", apath);
                if (act.description.empty())
                    throw SchemaError("empty description for activity \"" + act.name + "\"", apath,
                                      guess_line(document, act.name));
                if (!activity_names.insert(act.name).second)
                    throw SchemaError("duplicate activity \"" + act.name + "\" in object \"" +
                                          obj.name + "\"",
                                      apath, guess_line(document, act.name));
                obj.activities.push_back(std::move(act));
                ++ai;
            }
        }
        rep.objects.push_back(std::move(obj));
        ++oi;
    }
    if (rep.objects.empty()) throw SchemaError("\"objects\" must not be empty", "objects");

    if (j.contains("scheduling")) {
        if (!j["scheduling"].is_array())
            throw SchemaError("\"scheduling\" must be an array", "scheduling");
        std::size_t di = 0;
        for (const auto& jd : j["scheduling"]) {
            std::string dpath = "scheduling[" + std::to_string(di) + "]";
            require_object(jd, dpath);
            reject_unknown_keys(jd, {"kind", "object", "activity", "condition"}, dpath, document);
            ScheduleDirective dir;
            std::string kind_text = get_string(jd, "kind", dpath);
            auto k = schedule_kind_from_string(kind_text);
            if (!k)
                throw SchemaError("unknown schedule kind \"" + kind_text + "\"", dpath + ".kind",
                                  guess_line(document, kind_text));
            dir.kind = *k;
            dir.object_name = get_identifier(jd, "object", dpath, document);
            dir.activity_name = get_identifier(jd, "activity", dpath, document);

            const ObjectSpec* obj = rep.find_object(dir.object_name);
            if (!obj)
                throw SchemaError("schedule entry references undeclared object \"" +
                                      dir.object_name + "\"",
                                  dpath, guess_line(document, dir.object_name));
            bool has_activity = std::any_of(
                obj->activities.begin(), obj->activities.end(),
                [&](const ActivitySpec& a) { return a.name == dir.activity_name; });
            if (!has_activity)
                throw SchemaError("schedule entry references undeclared activity \"" +
                                      dir.object_name + "." + dir.activity_name + "\"",
                                  dpath, guess_line(document, dir.activity_name));

            if (jd.contains("condition")) {
                if (!jd["condition"].is_string())
                    throw SchemaError("\"condition\" must be a string at " + dpath,
                                      dpath + ".condition");
                dir.condition = jd["condition"].get<std::string>();
            }
            if (is_conditional(dir.kind)) {
                if (!dir.condition || dir.condition->empty())
                    throw SchemaError("conditional schedule entry needs a non-empty condition",
                                      dpath, guess_line(document, kind_text));
            } else if (dir.condition) {
                throw SchemaError("unconditional schedule entry must not carry a condition",
                                  dpath, guess_line(document, kind_text));
            }
            rep.scheduling.push_back(std::move(dir));
            ++di;
        }
    }

    if (j.contains("parameters")) {
        if (!j["parameters"].is_object())
            throw SchemaError("\"parameters\" must be an object", "parameters");
        for (auto it = j["parameters"].begin(); it != j["parameters"].end(); ++it) {
            std::string ppath = "parameters." + it.key();
            if (!is_identifier(it.key()))
                throw SchemaError("parameter name \"" + it.key() + "\" is not a legal identifier",
                                  ppath, guess_line(document, it.key()));
            if (!it.value().is_number())
                throw SchemaError("parameter \"" + it.key() + "\" must be a number", ppath,
                                  guess_line(document, it.key()));
            rep.parameters[it.key()] = it.value().get<double>();
        }
    }
    return rep;
}

ObjectiveRepresentation parse_objective(const std::string& document) {
    ordered_json j = parse_json(document);
    require_object(j, "$");
    reject_unknown_keys(j, {"problem", "criteria"}, "$", document);

    ObjectiveRepresentation obj;
    obj.problem = get_string(j, "problem", "$");
    if (obj.problem.empty()) throw SchemaError("\"problem\" must not be empty", "problem");

    if (!j.contains("criteria") || !j["criteria"].is_array() || j["criteria"].empty())
        throw SchemaError("\"criteria\" must be a non-empty array", "criteria");

    std::size_t ci = 0;
    for (const auto& jc : j["criteria"]) {
        std::string cpath = "criteria[" + std::to_string(ci) + "]";
        require_object(jc, cpath);
        reject_unknown_keys(jc, {"variable_name", "variable_example", "requirement"}, cpath,
                            document);
        Criterion c;
        c.variable_name = get_identifier(jc, "variable_name", cpath, document);
        if (!jc.contains("variable_example"))
            throw SchemaError("missing field \"variable_example\" at " + cpath, cpath);
        c.variable_example = jc["variable_example"].dump();
        c.requirement = get_string(jc, "requirement", cpath);
        if (c.requirement.empty())
            throw SchemaError("empty requirement at " + cpath, cpath + ".requirement");
        obj.criteria.push_back(std::move(c));
        ++ci;
    }
    return obj;
}

namespace {

ordered_json conceptual_to_json(const ConceptualRepresentation& r) {
    ordered_json j;
    j["objects"] = ordered_json::array();
    for (const auto& o : r.objects) {
        ordered_json jo;
        jo["name"] = o.name;
        jo["states"] = ordered_json::array();
        for (const auto& s : o.states)
            jo["states"].push_back({{"name", s.name},
                                    {"description", s.description},
                                    {"type", to_string(s.declared_type)}});
        jo["activities"] = ordered_json::array();
        for (const auto& a : o.activities)
            jo["activities"].push_back({{"name", a.name}, {"description", a.description}});
        j["objects"].push_back(std::move(jo));
    }
    j["scheduling"] = ordered_json::array();
    for (const auto& d : r.scheduling) {
        ordered_json jd;
        jd["kind"] = to_string(d.kind);
        jd["object"] = d.object_name;
        jd["activity"] = d.activity_name;
        if (d.condition) jd["condition"] = *d.condition;
        j["scheduling"].push_back(std::move(jd));
    }
    j["parameters"] = ordered_json::object();
    for (const auto& [name, value] : r.parameters) j["parameters"][name] = value;
    return j;
}

}  // namespace

std::string render_conceptual(const ConceptualRepresentation& r) {
    return conceptual_to_json(r).dump(2) + "\n";
}

std::string render_objective(const ObjectiveRepresentation& o) {
    ordered_json j;
    j["problem"] = o.problem;
    j["criteria"] = ordered_json::array();
    for (const auto& c : o.criteria) {
        ordered_json jc;
        jc["variable_name"] = c.variable_name;
        jc["variable_example"] = ordered_json::parse(c.variable_example);
        jc["requirement"] = c.requirement;
        j["criteria"].push_back(std::move(jc));
    }
    return j.dump(2) + "\n";
}

}  // namespace sage::rep
