#include <doctest.h>

#include <sstream>

#include "nearfar/data_model.hpp"

using namespace nearfar;

namespace {

const char* kHeader =
    "case_id,judge_id,region,top_charge,crime_type,charge_class,gender,age,"
    "race_white,race_black,non_hispanic,prior_counts_2014,weekly_income,"
    "any_income,has_employer,has_phone,has_address,bail_set,guilty,"
    "disposed_at_arraignment,excluded_reason";

std::string row(const std::string& case_id, const std::string& guilty = "0",
                const std::string& disposed = "0", const std::string& reason = "") {
    return case_id + ",J1,A,Assault 3,misdemeanor,B,male,30,1,0,1,0,0,0,0,1,1,0," +
           guilty + "," + disposed + "," + reason;
}

CaseRecord make_case(const std::string& id) {
    CaseRecord r;
    r.case_id = id;
    r.judge_id = "J1";
    r.region = "A";
    r.top_charge = "Assault 3";
    r.gender = "male";
    r.age = 30;
    r.guilty = 0;
    r.has_address = 1;
    return r;
}

}  // namespace

TEST_CASE("well-formed file ingests one record per row") {
    std::istringstream in(std::string(kHeader) + "\n" + row("c1") + "\n" + row("c2") +
                          "\n" + row("c3") + "\n");
    auto records = parse_cases(in);
    REQUIRE(records.size() == 3);
    CHECK(records[0].case_id == "c1");
    CHECK(records[2].case_id == "c3");
}

TEST_CASE("blank guilty column means absent outcome") {
    std::istringstream in(std::string(kHeader) + "\n" + row("c1") + "\n" +
                          row("c2", "") + "\n");
    auto records = parse_cases(in);
    REQUIRE(records.size() == 2);
    CHECK(records[0].guilty.has_value());
    CHECK_FALSE(records[1].guilty.has_value());
}

TEST_CASE("missing required column is a schema error naming it") {
    std::string header(kHeader);
    auto pos = header.find("judge_id,");
    header.erase(pos, 9);
    std::istringstream in(header + "\n");
    CHECK_THROWS_WITH_AS(parse_cases(in), doctest::Contains("judge_id"), SchemaError);
}

TEST_CASE("all malformed rows are reported after a full scan") {
    std::istringstream in(std::string(kHeader) + "\n" + row("c1") + "\n" +
                          "c2,J1,A,Assault 3,misdemeanor,B,male,-5,1,0,1,0,0,0,0,1,1,0,0,0,\n" +
                          "c3,J1,A,Assault 3,misdemeanor,B,male,30,2,0,1,0,0,0,0,1,1,0,0,0,\n");
    try {
        parse_cases(in);
        FAIL("expected RowErrors");
    } catch (const RowErrors& e) {
        REQUIRE(e.row_messages.size() == 2);
        CHECK(e.row_messages[0].find("row 3") != std::string::npos);
        CHECK(e.row_messages[1].find("row 4") != std::string::npos);
    }
}

TEST_CASE("filters drop by reason and count provenance") {
    std::vector<CaseRecord> input;
    input.push_back(make_case("clean"));
    auto disposed = make_case("disposed");
    disposed.disposed_at_arraignment = 1;
    input.push_back(disposed);
    auto unresolved = make_case("open");
    unresolved.guilty.reset();
    input.push_back(unresolved);
    auto extradited = make_case("gone");
    extradited.excluded_reason = "extradited";
    input.push_back(extradited);

    auto set = apply_filters(input);
    REQUIRE(set.records.size() == 1);
    CHECK(set.records[0].case_id == "clean");
    CHECK(set.provenance.disposed_at_arraignment == 1);
    CHECK(set.provenance.unresolved_outcome == 1);
    CHECK(set.provenance.excluded_reason == 1);
    CHECK(set.provenance.total() == input.size() - set.records.size());
}

TEST_CASE("empty output is a warning, not a failure") {
    auto disposed = make_case("d");
    disposed.disposed_at_arraignment = 1;
    auto set = apply_filters({disposed});
    CHECK(set.records.empty());
    CHECK(set.empty_warning);
}

TEST_CASE("filtering is idempotent") {
    std::vector<CaseRecord> input;
    for (int i = 0; i < 5; ++i) input.push_back(make_case("c" + std::to_string(i)));
    auto open = make_case("open");
    open.guilty.reset();
    input.push_back(open);
    auto once = apply_filters(input);
    auto twice = apply_filters(once.records);
    CHECK(once.records == twice.records);
    CHECK(twice.provenance.total() == 0);
}

TEST_CASE("write then read round-trips records and preserves order") {
    std::vector<CaseRecord> input;
    for (int i = 0; i < 4; ++i) {
        auto r = make_case("c" + std::to_string(i));
        r.age = 20.5 + i;
        r.weekly_income = i == 2 ? 123.25 : 0.0;
        r.any_income = i == 2 ? 1 : 0;
        if (i == 3) r.guilty.reset();
        input.push_back(r);
    }
    std::ostringstream out;
    write_cases(out, input);
    std::istringstream in(out.str());
    auto reread = parse_cases(in);
    CHECK(reread == input);
}
