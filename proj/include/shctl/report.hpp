#pragma once

#include "shctl/model_io.hpp"
#include "shctl/synthesis.hpp"

#include <string>
#include <utility>
#include <vector>

namespace shctl {

/// Text lines for people followed by a JSON block between
/// `BEGIN REPORT JSON` and `END REPORT JSON` for tools. Contains no timings,
/// so identical inputs render identical bytes.
struct Report {
    std::string title;
    std::vector<std::pair<std::string, std::string>> fields;
    Json data = Json::object();

    void add(const std::string& key, const std::string& value) { fields.emplace_back(key, value); }
    void add(const std::string& key, double value);
};

std::string render(const Report& report);
/// Extracts the JSON block from rendered report text.
Json parse_report_json(const std::string& text);

std::string format_number(double value);
Json number_json(double value);  // infinities become the strings "inf" / "-inf"

Json certificate_json(const CheckResult& result, const std::string& spec_text);

/// Adds status, objective, certificates and the strategies to `report`.
void describe_synthesis(Report& report, const SynthesisResult& result, const Mdp& model,
                        const std::vector<std::string>& spec_texts);

}  // namespace shctl
