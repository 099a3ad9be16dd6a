#include "ceg/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ceg/dataset_io.hpp"
#include "ceg/errors.hpp"

namespace ceg {

namespace {

void write_params(std::ostream& out, const ParamStore& params) {
    out << "[";
    for (std::size_t k = 0; k < params.values.size(); ++k) {
        if (k > 0) out << ",";
        const auto& arr = params.values[k];
        out << "\n  {\"name\":\"" << params.names[k] << "\",\"rows\":" << arr.rows
            << ",\"cols\":" << arr.cols << ",\"values\":[";
        for (std::size_t i = 0; i < arr.data.size(); ++i) {
            if (i > 0) out << ',';
            out << format_double(arr.data[i]);
        }
        out << "]}";
    }
    out << "\n]";
}

ParamStore read_params(const nlohmann::json& arr) {
    ParamStore params;
    for (const auto& entry : arr) {
        auto& dst = params.add(entry["name"].get<std::string>(),
                               entry["rows"].get<std::size_t>(),
                               entry["cols"].get<std::size_t>());
        const auto& vals = entry["values"];
        if (vals.size() != dst.data.size()) {
            throw ValidationError("model file: parameter " +
                                  entry["name"].get<std::string>() + " has wrong value count");
        }
        for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] = vals[i].get<double>();
    }
    return params;
}

} // namespace

void save_model(const CegModel& model, const std::optional<CvaeNets>& cvae,
                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open model output file: " + path);
    out << "{\n\"format\":\"ceg-model\",\"version\":1,\n";
    out << "\"arch\":{\"noise_dim\":" << model.noise_dim << ",\"hidden_dim\":" << model.hidden_dim
        << ",\"mark_dim\":" << model.mark_dim << ",\"gen_hidden\":" << model.gen_hidden
        << ",\"dt_floor\":" << format_double(model.dt_floor) << ",\"sample_z_from_prior\":"
        << (model.sample_z_from_prior ? "true" : "false") << "},\n";
    out << "\"standardize\":{\"gap_scale\":" << format_double(model.standardize.gap_scale)
        << ",\"mark_mean\":[";
    for (int d = 0; d < model.mark_dim; ++d) {
        if (d > 0) out << ',';
        out << format_double(model.standardize.mark_mean[d]);
    }
    out << "],\"mark_std\":[";
    for (int d = 0; d < model.mark_dim; ++d) {
        if (d > 0) out << ',';
        out << format_double(model.standardize.mark_std[d]);
    }
    out << "]},\n";
    if (model.mark_bounds) {
        out << "\"mark_bounds\":[";
        for (int d = 0; d < model.mark_dim; ++d) {
            if (d > 0) out << ',';
            out << '[' << format_double(model.mark_bounds->lo[d]) << ','
                << format_double(model.mark_bounds->hi[d]) << ']';
        }
        out << "],\n";
    }
    out << "\"params\":";
    write_params(out, model.params);
    if (cvae) {
        out << ",\n\"cvae\":{\"noise_dim\":" << cvae->noise_dim << ",\"hidden\":" << cvae->hidden
            << ",\"params\":";
        write_params(out, cvae->params);
        out << "}";
    }
    out << "\n}\n";
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("model file parse error: " + std::string(e.what()));
    }
    if (!doc.contains("format") || doc["format"] != "ceg-model") {
        throw ValidationError("model file: not a ceg-model document");
    }
    LoadedModel loaded;
    CegModel& model = loaded.model;
    const auto& arch = doc["arch"];
    model.noise_dim = arch["noise_dim"].get<int>();
    model.hidden_dim = arch["hidden_dim"].get<int>();
    model.mark_dim = arch["mark_dim"].get<int>();
    model.gen_hidden = arch["gen_hidden"].get<int>();
    model.dt_floor = arch["dt_floor"].get<double>();
    model.sample_z_from_prior = arch["sample_z_from_prior"].get<bool>();
    const auto& st = doc["standardize"];
    model.standardize.gap_scale = st["gap_scale"].get<double>();
    model.standardize.mark_mean = st["mark_mean"].get<std::vector<double>>();
    model.standardize.mark_std = st["mark_std"].get<std::vector<double>>();
    if (doc.contains("mark_bounds")) {
        MarkBounds mb;
        for (const auto& pair : doc["mark_bounds"]) {
            mb.lo.push_back(pair[0].get<double>());
            mb.hi.push_back(pair[1].get<double>());
        }
        model.mark_bounds = std::move(mb);
    }
    model.params = read_params(doc["params"]);
    if (doc.contains("cvae") && !doc["cvae"].is_null()) {
        CvaeNets nets;
        nets.noise_dim = doc["cvae"]["noise_dim"].get<int>();
        nets.hidden = doc["cvae"]["hidden"].get<int>();
        nets.params = read_params(doc["cvae"]["params"]);
        loaded.cvae = std::move(nets);
    }
    return loaded;
}

} // namespace ceg
