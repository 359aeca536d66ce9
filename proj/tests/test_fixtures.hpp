#pragma once

#include <string>
#include <vector>

#include "sadga/graph.hpp"

namespace testing_fixtures {

using sadga::graph::ColumnDef;
using sadga::graph::ColumnType;
using sadga::graph::SchemaDef;
using sadga::graph::TableDef;

inline ColumnDef column(std::size_t table, const std::string& name, ColumnType type,
                        std::vector<std::string> values = {}) {
    return {table, name, sadga::graph::split_schema_name(name), type, std::move(values)};
}

inline ColumnDef wildcard() { return {std::nullopt, "*", {"*"}, ColumnType::Text, {}}; }

// Student / Has_Pet / Pets, the running example of the case study.
inline SchemaDef pets_schema() {
    SchemaDef s;
    s.db_id = "pets_1";
    s.tables = {{"Student", {"student"}}, {"Has_Pet", {"has", "pet"}}, {"Pets", {"pets"}}};
    s.columns = {wildcard(),
                 column(0, "stu_id", ColumnType::Number),
                 column(0, "first_name", ColumnType::Text, {"linda", "tracy"}),
                 column(0, "last_name", ColumnType::Text, {"smith", "kim"}),
                 column(0, "age", ColumnType::Number),
                 column(1, "stu_id", ColumnType::Number),
                 column(1, "pet_id", ColumnType::Number),
                 column(2, "pet_id", ColumnType::Number),
                 column(2, "pet_type", ColumnType::Text, {"cat", "dog", "parrot"}),
                 column(2, "pet_age", ColumnType::Number)};
    s.primary_keys = {1, 7};
    s.foreign_keys = {{5, 1}, {6, 7}};
    return s;
}

// Student and Professor both own an "age" column.
inline SchemaDef student_professor_schema() {
    SchemaDef s;
    s.db_id = "college";
    s.tables = {{"Student", {"student"}}, {"Professor", {"professor"}}};
    s.columns = {wildcard(),
                 column(0, "student_id", ColumnType::Number),
                 column(0, "name", ColumnType::Text, {"bob", "alice"}),
                 column(0, "age", ColumnType::Number),
                 column(0, "professor_id", ColumnType::Number),
                 column(1, "professor_id", ColumnType::Number),
                 column(1, "name", ColumnType::Text),
                 column(1, "age", ColumnType::Number)};
    s.primary_keys = {1, 5};
    s.foreign_keys = {{4, 5}};
    return s;
}

inline std::vector<std::size_t> columns_named(const SchemaDef& s, const std::string& name) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        if (s.columns[c].original_name == name) out.push_back(c);
    }
    return out;
}

}  // namespace testing_fixtures
