#include "kindsleep/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kindsleep {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

void Table::add_row(const std::vector<double>& row) {
    if (row.size() != columns.size())
        throw ValidationError("table row width " + std::to_string(row.size()) +
                              " does not match schema width " + std::to_string(columns.size()));
    rows.push_back(row);
}

std::size_t Table::col_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw ValidationError("table has no column '" + name + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

double require_number(const json& j, const std::string& field, const fs::path& path) {
    if (!j.contains(field))
        throw ValidationError("missing required field '" + field + "' in " + path.string());
    if (!j[field].is_number())
        throw ValidationError("field '" + field + "' in " + path.string() + " is not numeric");
    double v = j[field].get<double>();
    if (!std::isfinite(v))
        throw ValidationError("field '" + field + "' in " + path.string() + " is not finite");
    return v;
}

bool require_bool(const json& j, const std::string& field, const fs::path& path) {
    if (!j.contains(field))
        throw ValidationError("missing required field '" + field + "' in " + path.string());
    if (j[field].is_boolean()) return j[field].get<bool>();
    if (j[field].is_number_integer()) return j[field].get<int>() != 0;
    throw ValidationError("field '" + field + "' in " + path.string() + " is not boolean");
}

std::string require_string(const json& j, const std::string& field, const fs::path& path) {
    if (!j.contains(field))
        throw ValidationError("missing required field '" + field + "' in " + path.string());
    if (!j[field].is_string())
        throw ValidationError("field '" + field + "' in " + path.string() + " is not a string");
    return j[field].get<std::string>();
}

}  // namespace

void save_table(const Table& table, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out << ',';
        out << table.columns[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Table load_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing file: " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty table file: " + path.string());
    for (auto& name : split_csv_line(line)) t.columns.push_back(name);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != t.columns.size())
            throw ValidationError("row width mismatch at " + path.string() + ":" +
                                  std::to_string(lineno));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            try {
                row.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw ValidationError("non-numeric cell at " + path.string() + ":" +
                                      std::to_string(lineno));
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

SleepStudy load_study_bundle(const fs::path& dir) {
    SleepStudy study;

    // signal.csv: t_s,spo2 with empty cell = missing
    {
        fs::path path = dir / "signal.csv";
        std::ifstream in(path);
        if (!in) throw ValidationError("missing file: " + path.string());
        std::string line;
        if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"t_s", "spo2"})
            throw ValidationError("bad signal header in " + path.string() + " (want t_s,spo2)");
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto cells = split_csv_line(line);
            if (cells.size() != 2)
                throw ValidationError("bad signal row at " + path.string() + ":" +
                                      std::to_string(lineno));
            double value = 0;
            bool valid = false;
            if (!cells[1].empty()) {
                try {
                    value = std::stod(cells[1]);
                    valid = value >= kSpo2ValidMin && value <= kSpo2ValidMax;
                } catch (const std::exception&) {
                    valid = false;
                }
            }
            study.signal.samples.push_back(value);
            study.signal.validity.push_back(valid ? 1 : 0);
        }
    }

    // events.json
    {
        fs::path path = dir / "events.json";
        json j = load_json_file(path);
        if (!j.is_array()) throw ValidationError("events.json must be an array: " + path.string());
        for (const auto& e : j) {
            RespiratoryEvent ev;
            ev.kind = event_kind_from_string(require_string(e, "kind", path));
            ev.start_s = require_number(e, "start_s", path);
            ev.duration_s = require_number(e, "duration_s", path);
            ev.flow_reduction_pct = require_number(e, "flow_reduction_pct", path);
            ev.desat_pct = require_number(e, "desat_pct", path);
            ev.arousal = require_bool(e, "arousal", path);
            if (ev.start_s < 0 || ev.duration_s <= 0 ||
                ev.start_s + ev.duration_s > static_cast<double>(study.signal.size()) ||
                ev.flow_reduction_pct < 0 || ev.flow_reduction_pct > 100 || ev.desat_pct < 0)
                throw ValidationError("event out of bounds in " + path.string());
            study.events.push_back(ev);
        }
    }

    // clinical.json: every field required
    {
        fs::path path = dir / "clinical.json";
        json j = load_json_file(path);
        ClinicalFeatures& c = study.clinical;
        c.age = require_number(j, "age", path);
        c.bmi = require_number(j, "bmi", path);
        if (c.bmi <= 0) throw ValidationError("bmi must be positive in " + path.string());
        c.sbp = require_number(j, "sbp", path);
        c.dbp = require_number(j, "dbp", path);
        c.weight_kg = require_number(j, "weight_kg", path);
        c.height_cm = require_number(j, "height_cm", path);
        c.smoker = require_bool(j, "smoker", path);
        c.hypertension = require_bool(j, "hypertension", path);
        c.ethnicity = ethnicity_from_string(require_string(j, "ethnicity", path));
        c.race = race_from_string(require_string(j, "race", path));
        c.gender = gender_from_string(require_string(j, "gender", path));
    }

    // meta.json
    {
        fs::path path = dir / "meta.json";
        json j = load_json_file(path);
        study.id = require_string(j, "id", path);
        study.total_sleep_time_h = require_number(j, "total_sleep_time_h", path);
        study.reference_ahi = require_number(j, "reference_ahi", path);
        if (study.total_sleep_time_h <= 0)
            throw ValidationError("total_sleep_time_h must be positive in " + path.string());
        if (study.reference_ahi < 0)
            throw ValidationError("reference_ahi must be non-negative in " + path.string());
        if (study.total_sleep_time_h * 3600.0 >
            static_cast<double>(study.signal.size()) + 1e-9)
            throw ValidationError("total_sleep_time_h exceeds recording duration in " +
                                  path.string());
    }

    return study;
}

void save_study_bundle(const SleepStudy& study, const fs::path& dir) {
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "signal.csv");
        if (!out) throw std::runtime_error("cannot write " + (dir / "signal.csv").string());
        out << "t_s,spo2\n";
        for (std::size_t i = 0; i < study.signal.size(); ++i) {
            out << i << ',';
            if (study.signal.validity[i]) out << format_double(study.signal.samples[i]);
            out << '\n';
        }
    }

    {
        json arr = json::array();
        for (const auto& e : study.events) {
            arr.push_back({{"kind", to_string(e.kind)},
                           {"start_s", e.start_s},
                           {"duration_s", e.duration_s},
                           {"flow_reduction_pct", e.flow_reduction_pct},
                           {"desat_pct", e.desat_pct},
                           {"arousal", e.arousal}});
        }
        std::ofstream out(dir / "events.json");
        out << arr.dump(1) << '\n';
    }

    {
        const ClinicalFeatures& c = study.clinical;
        json j = {{"age", c.age},
                  {"bmi", c.bmi},
                  {"sbp", c.sbp},
                  {"dbp", c.dbp},
                  {"weight_kg", c.weight_kg},
                  {"height_cm", c.height_cm},
                  {"smoker", c.smoker},
                  {"hypertension", c.hypertension},
                  {"ethnicity", to_string(c.ethnicity)},
                  {"race", to_string(c.race)},
                  {"gender", to_string(c.gender)}};
        std::ofstream out(dir / "clinical.json");
        out << j.dump(1) << '\n';
    }

    {
        json j = {{"id", study.id},
                  {"total_sleep_time_h", study.total_sleep_time_h},
                  {"reference_ahi", study.reference_ahi}};
        std::ofstream out(dir / "meta.json");
        out << j.dump(1) << '\n';
    }
}

}  // namespace kindsleep
