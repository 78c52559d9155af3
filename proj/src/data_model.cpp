#include "nearfar/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace nearfar {

std::string to_string(CrimeType t) {
    return t == CrimeType::Felony ? "felony" : "misdemeanor";
}

CrimeType crime_type_from_string(const std::string& s) {
    if (s == "felony") return CrimeType::Felony;
    if (s == "misdemeanor") return CrimeType::Misdemeanor;
    throw std::invalid_argument("unknown crime_type: '" + s + "'");
}

namespace {

const std::vector<std::string> kColumns = {
    "case_id", "judge_id", "region", "top_charge", "crime_type", "charge_class",
    "gender", "age", "race_white", "race_black", "non_hispanic",
    "prior_counts_2014", "weekly_income", "any_income", "has_employer",
    "has_phone", "has_address", "bail_set", "guilty", "disposed_at_arraignment",
    "excluded_reason"};

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

int parse_binary(const std::string& s, const char* col) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw std::invalid_argument(std::string(col) + " must be 0 or 1, got '" + s + "'");
}

double parse_nonneg_real(const std::string& s, const char* col) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(std::string(col) + ": trailing junk in '" + s + "'");
    if (v < 0) throw std::invalid_argument(std::string(col) + " must be non-negative, got '" + s + "'");
    return v;
}

int parse_nonneg_int(const std::string& s, const char* col) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument(std::string(col) + ": not an integer: '" + s + "'");
    if (v < 0) throw std::invalid_argument(std::string(col) + " must be non-negative");
    return v;
}

}  // namespace

std::vector<CaseRecord> parse_cases(std::istream& in, const SchemaOptions& opts) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: no header row");
    auto header = split_line(line, opts.delimiter);

    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;
    for (const auto& col : kColumns) {
        if (!col_index.count(col))
            throw SchemaError("missing required column: " + col);
    }

    std::vector<CaseRecord> records;
    std::vector<std::string> row_errors;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto fields = split_line(line, opts.delimiter);
        if (fields.size() != header.size()) {
            row_errors.push_back("row " + std::to_string(row) + ": expected " +
                                 std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
            continue;
        }
        auto f = [&](const char* col) -> const std::string& {
            return fields[col_index.at(col)];
        };
        try {
            CaseRecord r;
            r.case_id = f("case_id");
            r.judge_id = f("judge_id");
            r.region = f("region");
            r.top_charge = f("top_charge");
            r.crime_type = crime_type_from_string(f("crime_type"));
            r.charge_class = f("charge_class");
            r.gender = f("gender");
            r.age = parse_nonneg_real(f("age"), "age");
            r.race_white = parse_binary(f("race_white"), "race_white");
            r.race_black = parse_binary(f("race_black"), "race_black");
            r.non_hispanic = parse_binary(f("non_hispanic"), "non_hispanic");
            r.prior_counts_2014 = parse_nonneg_int(f("prior_counts_2014"), "prior_counts_2014");
            r.weekly_income = parse_nonneg_real(f("weekly_income"), "weekly_income");
            r.any_income = parse_binary(f("any_income"), "any_income");
            r.has_employer = parse_binary(f("has_employer"), "has_employer");
            r.has_phone = parse_binary(f("has_phone"), "has_phone");
            r.has_address = parse_binary(f("has_address"), "has_address");
            r.bail_set = parse_binary(f("bail_set"), "bail_set");
            if (!f("guilty").empty()) r.guilty = parse_binary(f("guilty"), "guilty");
            r.disposed_at_arraignment =
                parse_binary(f("disposed_at_arraignment"), "disposed_at_arraignment");
            r.excluded_reason = f("excluded_reason");
            if ((r.any_income == 1) != (r.weekly_income > 0))
                throw std::invalid_argument("any_income inconsistent with weekly_income");
            records.push_back(std::move(r));
        } catch (const std::exception& e) {
            row_errors.push_back("row " + std::to_string(row) + ": " + e.what());
        }
    }
    if (!row_errors.empty()) {
        std::ostringstream what;
        what << row_errors.size() << " malformed row(s):";
        for (const auto& m : row_errors) what << "\n  " << m;
        throw RowErrors(what.str(), std::move(row_errors));
    }
    return records;
}

std::vector<CaseRecord> load_cases(const std::string& path, const SchemaOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    return parse_cases(in, opts);
}

void write_cases(std::ostream& out, const std::vector<CaseRecord>& records,
                 const SchemaOptions& opts) {
    const char d = opts.delimiter;
    for (std::size_t i = 0; i < kColumns.size(); ++i)
        out << (i ? std::string(1, d) : "") << kColumns[i];
    out << '\n';
    out.precision(17);
    for (const auto& r : records) {
        out << r.case_id << d << r.judge_id << d << r.region << d << r.top_charge
            << d << to_string(r.crime_type) << d << r.charge_class << d << r.gender
            << d << r.age << d << r.race_white << d << r.race_black << d
            << r.non_hispanic << d << r.prior_counts_2014 << d << r.weekly_income
            << d << r.any_income << d << r.has_employer << d << r.has_phone << d
            << r.has_address << d << r.bail_set << d
            << (r.guilty ? std::to_string(*r.guilty) : std::string()) << d
            << r.disposed_at_arraignment << d << r.excluded_reason << '\n';
    }
}

void write_cases(const std::string& path, const std::vector<CaseRecord>& records,
                 const SchemaOptions& opts) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    write_cases(out, records, opts);
}

AnalysisSet apply_filters(const std::vector<CaseRecord>& records) {
    AnalysisSet out;
    for (const auto& r : records) {
        if (!r.excluded_reason.empty() && r.excluded_reason != "none") {
            ++out.provenance.excluded_reason;
        } else if (r.disposed_at_arraignment == 1) {
            ++out.provenance.disposed_at_arraignment;
        } else if (!r.guilty.has_value()) {
            ++out.provenance.unresolved_outcome;
        } else {
            out.records.push_back(r);
        }
    }
    out.empty_warning = out.records.empty();
    return out;
}

}  // namespace nearfar
