#include "fdlab/report_io.hpp"

#include <cstdio>
#include <sstream>

#include "fdlab/errors.hpp"
#include "fdlab/numfmt.hpp"

namespace fdlab {

nlohmann::ordered_json report_to_json(const TheoremReport& report) {
    nlohmann::ordered_json j;
    j["result_id"] = result_id_name(report.result_id);
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& [key, value] : report.quantities) q[key] = value;
    j["quantities"] = std::move(q);
    j["pass"] = report.pass;
    j["notes"] = report.notes;
    return j;
}

TheoremReport report_from_json(const nlohmann::json& j) {
    TheoremReport report;
    try {
        report.result_id = result_id_from_name(j.at("result_id").get<std::string>());
        for (const auto& [key, value] : j.at("quantities").items())
            report.quantities[key] = value.get<double>();
        report.pass = j.at("pass").get<bool>();
        report.notes = j.value("notes", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed report JSON: ") + e.what());
    }
    bool expected = recompute_pass(report.result_id, report.quantities);
    if (expected != report.pass)
        throw ConfigError(std::string("report verdict for ") + result_id_name(report.result_id) +
                          " disagrees with its quantities");
    return report;
}

std::string summary_table(const std::vector<TheoremReport>& reports) {
    std::ostringstream out;
    for (const auto& report : reports) {
        char line[128];
        std::snprintf(line, sizeof line, "%-22s %s", result_id_name(report.result_id),
                      report.pass ? "PASS" : "FAIL");
        out << line;
        if (!report.notes.empty()) out << "  (" << report.notes << ")";
        out << '\n';
    }
    return out.str();
}

}  // namespace fdlab
