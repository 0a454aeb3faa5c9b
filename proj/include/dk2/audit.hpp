#pragma once

#include <string>

namespace dk2 {

struct AuditReport {
    bool ok = true;
    std::string issues;

    void fail(const std::string& msg) {
        ok = false;
        if (!issues.empty()) issues += "; ";
        issues += msg;
    }
    void merge(const AuditReport& other) {
        if (!other.ok) fail(other.issues);
    }
    explicit operator bool() const { return ok; }
};

}  // namespace dk2
