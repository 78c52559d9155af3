#ifndef NEARFAR_DATA_MODEL_HPP
#define NEARFAR_DATA_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nearfar {

enum class CrimeType { Felony, Misdemeanor };

std::string to_string(CrimeType t);
CrimeType crime_type_from_string(const std::string& s);

// One defendant-case. `guilty` is absent while the case is unresolved.
struct CaseRecord {
    std::string case_id;
    std::string judge_id;
    std::string region;
    std::string top_charge;
    CrimeType crime_type = CrimeType::Misdemeanor;
    std::string charge_class;   // descriptive only, not a matching covariate
    std::string gender;
    double age = 0.0;
    int race_white = 0;
    int race_black = 0;
    int non_hispanic = 0;
    int prior_counts_2014 = 0;
    double weekly_income = 0.0;
    int any_income = 0;
    int has_employer = 0;
    int has_phone = 0;
    int has_address = 0;
    int bail_set = 0;                   // treatment
    std::optional<int> guilty;          // outcome; nullopt = unresolved
    int disposed_at_arraignment = 0;
    std::string excluded_reason;        // empty = none

    bool operator==(const CaseRecord&) const = default;
};

// Records surviving all inclusion filters, plus drop counts per filter.
struct AnalysisSet {
    std::vector<CaseRecord> records;
    struct Provenance {
        std::size_t excluded_reason = 0;
        std::size_t disposed_at_arraignment = 0;
        std::size_t unresolved_outcome = 0;
        std::size_t total() const {
            return excluded_reason + disposed_at_arraignment + unresolved_outcome;
        }
    } provenance;
    bool empty_warning = false;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Aggregates per-row parse failures; thrown only after the full scan.
class RowErrors : public std::runtime_error {
public:
    RowErrors(std::string what, std::vector<std::string> rows)
        : std::runtime_error(std::move(what)), row_messages(std::move(rows)) {}
    std::vector<std::string> row_messages;
};

struct SchemaOptions {
    char delimiter = ',';
};

std::vector<CaseRecord> load_cases(const std::string& path,
                                   const SchemaOptions& opts = {});
std::vector<CaseRecord> parse_cases(std::istream& in, const SchemaOptions& opts = {});

void write_cases(const std::string& path, const std::vector<CaseRecord>& records,
                 const SchemaOptions& opts = {});
void write_cases(std::ostream& out, const std::vector<CaseRecord>& records,
                 const SchemaOptions& opts = {});

AnalysisSet apply_filters(const std::vector<CaseRecord>& records);

}  // namespace nearfar

#endif
