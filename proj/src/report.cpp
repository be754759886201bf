#include "shctl/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace shctl {

namespace {
constexpr const char* kBegin = "BEGIN REPORT JSON";
constexpr const char* kEnd = "END REPORT JSON";
}  // namespace

std::string format_number(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(6) << value;
    return os.str();
}

Json number_json(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return nullptr;
    return value;
}

void Report::add(const std::string& key, double value) { add(key, format_number(value)); }

std::string render(const Report& report) {
    std::ostringstream os;
    os << report.title << '\n';
    std::size_t width = 0;
    for (const auto& [k, v] : report.fields) width = std::max(width, k.size());
    for (const auto& [k, v] : report.fields) os << "  " << std::left << std::setw(static_cast<int>(width) + 1) << (k + ":") << ' ' << v << '\n';
    os << kBegin << '\n' << report.data.dump(2) << '\n' << kEnd << '\n';
    return os.str();
}

Json parse_report_json(const std::string& text) {
    const auto begin = text.find(kBegin);
    const auto end = text.find(kEnd);
    if (begin == std::string::npos || end == std::string::npos || end < begin)
        throw InvalidInput("text contains no report block");
    const auto start = begin + std::string(kBegin).size();
    return Json::parse(text.substr(start, end - start));
}

Json certificate_json(const CheckResult& result, const std::string& spec_text) {
    return Json{{"spec", spec_text}, {"value", number_json(result.value_at_initial)}, {"satisfied", result.satisfied}};
}

void describe_synthesis(Report& report, const SynthesisResult& result, const Mdp& model,
                        const std::vector<std::string>& spec_texts) {
    report.add("status", to_string(result.status));
    report.add("method", result.trace.method);
    auto& d = report.data;
    d["status"] = to_string(result.status);
    d["method"] = result.trace.method;
    d["iterations"] = result.trace.iterations;
    d["notes"] = result.trace.notes;
    if (result.blended.num_states() == 0) {
        for (const auto& note : result.trace.notes) report.add("note", note);
        return;
    }
    report.add("objective", result.objective);
    Json certs = Json::array();
    for (std::size_t i = 0; i < result.certificates.size(); ++i) {
        const auto& c = result.certificates[i];
        const std::string text = i < spec_texts.size() ? spec_texts[i] : "spec " + std::to_string(i);
        report.add(text, format_number(c.value_at_initial) + (c.satisfied ? " (satisfied)" : " (NOT SATISFIED)"));
        certs.push_back(certificate_json(c, text));
    }
    for (const auto& note : result.trace.notes) report.add("note", note);
    d["objective"] = result.objective;
    d["certificates"] = certs;
    d["blending"] = to_json(result.blending);
    d["autonomous"] = to_json(result.autonomous, model);
    d["blended"] = to_json(result.blended, model);
    d["perturbation"] = to_json(result.perturbation, model);
}

}  // namespace shctl
