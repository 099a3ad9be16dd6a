#include "ceg/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ceg/errors.hpp"

namespace ceg {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open dataset file: " + path);
    }
    Dataset ds;
    bool mark_dim_set = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("parse error at line " + std::to_string(lineno) + ": " +
                                  e.what());
        }
        if (!obj.contains("T") || !obj.contains("events")) {
            throw ValidationError("parse error at line " + std::to_string(lineno) +
                                  ": missing \"T\" or \"events\"");
        }
        EventSequence seq;
        seq.horizon = obj["T"].get<double>();
        for (const auto& row : obj["events"]) {
            if (!row.is_array() || row.empty()) {
                throw ValidationError("parse error at line " + std::to_string(lineno) +
                                      ": event must be a non-empty array");
            }
            Event e;
            e.time = row[0].get<double>();
            for (std::size_t j = 1; j < row.size(); ++j) e.mark.push_back(row[j].get<double>());
            seq.events.push_back(std::move(e));
        }
        if (!mark_dim_set && !seq.events.empty()) {
            ds.mark_dim = static_cast<int>(seq.events.front().mark.size());
            mark_dim_set = true;
        }
        if (obj.contains("mark_bounds")) {
            MarkBounds mb;
            for (const auto& pair : obj["mark_bounds"]) {
                mb.lo.push_back(pair[0].get<double>());
                mb.hi.push_back(pair[1].get<double>());
            }
            ds.mark_bounds = std::move(mb);
        }
        auto violations = validate_sequence(seq, mark_dim_set
                                                     ? ds.mark_dim
                                                     : static_cast<int>(seq.events.empty()
                                                                            ? 0
                                                                            : seq.events[0].mark.size()));
        if (!violations.empty()) {
            throw ValidationError("sequence at line " + std::to_string(lineno) + ": " +
                                  violations.front());
        }
        ds.sequences.push_back(std::move(seq));
    }
    validate_dataset(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot open output file: " + path);
    }
    bool first_line = true;
    for (const auto& seq : ds.sequences) {
        std::ostringstream line;
        line << "{\"T\":" << format_double(seq.horizon);
        if (first_line && ds.mark_bounds) {
            line << ",\"mark_bounds\":[";
            for (int d = 0; d < ds.mark_dim; ++d) {
                if (d > 0) line << ',';
                line << '[' << format_double(ds.mark_bounds->lo[d]) << ','
                     << format_double(ds.mark_bounds->hi[d]) << ']';
            }
            line << ']';
        }
        line << ",\"events\":[";
        for (std::size_t i = 0; i < seq.events.size(); ++i) {
            if (i > 0) line << ',';
            line << '[' << format_double(seq.events[i].time);
            for (double m : seq.events[i].mark) line << ',' << format_double(m);
            line << ']';
        }
        line << "]}";
        out << line.str() << '\n';
        first_line = false;
    }
}

} // namespace ceg
