#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sage {

enum class DefectKind {
    CompilationError,  // lexical, syntactic or type error
    LackingDetail,     // placeholder / missing / effect-free activity body
};

// One verifier-level1 finding. CompilationError carries (line, excerpt);
// LackingDetail carries (object, activity) plus the activity description
// from the conceptual representation when one is known.
struct Defect {
    DefectKind kind = DefectKind::CompilationError;

    int line = 0;         // 1-based, CompilationError only
    std::string excerpt;  // offending source fragment, CompilationError only

    std::string object_name;    // LackingDetail only
    std::string activity_name;  // LackingDetail only

    std::string reason;
    std::optional<std::string> activity_description;

    bool operator==(const Defect&) const = default;

    static Defect compilation(int line, std::string excerpt, std::string reason) {
        Defect d;
        d.kind = DefectKind::CompilationError;
        d.line = line;
        d.excerpt = std::move(excerpt);
        d.reason = std::move(reason);
        return d;
    }

    static Defect lacking(std::string object, std::string activity, std::string reason,
                          std::optional<std::string> description = std::nullopt) {
        Defect d;
        d.kind = DefectKind::LackingDetail;
        d.object_name = std::move(object);
        d.activity_name = std::move(activity);
        d.reason = std::move(reason);
        d.activity_description = std::move(description);
        return d;
    }
};

inline bool is_executable(const std::vector<Defect>& defects) {
    for (const auto& d : defects)
        if (d.kind == DefectKind::CompilationError) return false;
    return true;
}

inline bool is_elaborate(const std::vector<Defect>& defects) {
    for (const auto& d : defects)
        if (d.kind == DefectKind::LackingDetail) return false;
    return true;
}

}  // namespace sage
