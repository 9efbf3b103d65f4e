#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kindsleep/types.hpp"

namespace kindsleep {

// Formats a double with 15 significant digits so CSV values round-trip.
std::string format_double(double v);

// A sequence of named numeric records sharing one schema.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(const std::vector<double>& row);
    std::size_t col_index(const std::string& name) const;
};

void save_table(const Table& table, const std::filesystem::path& path);
Table load_table(const std::filesystem::path& path);

// Study bundle directory layout: signal.csv, events.json, clinical.json, meta.json.
SleepStudy load_study_bundle(const std::filesystem::path& dir);
void save_study_bundle(const SleepStudy& study, const std::filesystem::path& dir);

}  // namespace kindsleep
