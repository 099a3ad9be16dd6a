// Command-line front end: simulate | train | evaluate | generate | predict.
// Exit codes: 0 success, 2 usage, 3 data validation / I-O, 4 numeric failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ceg/classical.hpp"
#include "ceg/dataset_io.hpp"
#include "ceg/errors.hpp"
#include "ceg/evaluate.hpp"
#include "ceg/generation.hpp"
#include "ceg/model_io.hpp"
#include "ceg/parallel.hpp"
#include "ceg/train.hpp"

namespace {

using nlohmann::json;

// JSON config files: a flat object of flag names, or nested per subcommand
// ({"train": {"epochs": 50}}). Flags given on the command line override
// file values (CLI11 only applies config entries to unset options).
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override {
        return "{}\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json doc;
        try {
            input >> doc;
        } catch (const json::exception& e) {
            throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) throw CLI::FileError("config root must be a JSON object");
        std::vector<CLI::ConfigItem> items;
        emit_object(doc, {}, items);
        return items;
    }

private:
    static void emit_object(const json& obj, const std::vector<std::string>& parents,
                            std::vector<CLI::ConfigItem>& items) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto nested = parents;
                nested.push_back(key);
                emit_object(value, nested, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar_to_string(v));
            } else {
                item.inputs.push_back(scalar_to_string(value));
            }
            items.push_back(std::move(item));
        }
    }

    static std::string scalar_to_string(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }
};

struct ClassicalFlags {
    std::string name = "self-exciting";
    double mu = 0.1;
    double beta = 0.1;
    double alpha = 1.0;
    double c = 0.2;
    double sigma_x = 0.1;
    double sigma_y = 0.1;
    double a_x = 0.0;
    double a_y = 0.0;
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    double rate = 1.0;
};

void add_classical_flags(CLI::App* cmd, ClassicalFlags& f, const std::string& flag,
                         const std::string& what) {
    cmd->add_option(flag, f.name, what)
        ->check(CLI::IsMember({"self-exciting", "self-correcting", "etas", "poisson"}))
        ->required();
    cmd->add_option("--mu", f.mu, "baseline rate (self-exciting, self-correcting, etas)");
    cmd->add_option("--beta", f.beta, "decay rate (self-exciting, etas)");
    cmd->add_option("--alpha", f.alpha, "inhibition per event (self-correcting)");
    cmd->add_option("--C", f.c, "offspring kernel weight (etas)");
    cmd->add_option("--sigma-x", f.sigma_x, "spatial diffusion std, x (etas)");
    cmd->add_option("--sigma-y", f.sigma_y, "spatial diffusion std, y (etas)");
    cmd->add_option("--a-x", f.a_x, "spatial drift, x (etas)");
    cmd->add_option("--a-y", f.a_y, "spatial drift, y (etas)");
    cmd->add_option("--x0", f.x0, "domain box (etas)");
    cmd->add_option("--y0", f.y0, "domain box (etas)");
    cmd->add_option("--x1", f.x1, "domain box (etas)");
    cmd->add_option("--y1", f.y1, "domain box (etas)");
    cmd->add_option("--rate", f.rate, "constant intensity (poisson)");
}

ceg::classical::ClassicalModel build_classical(const ClassicalFlags& f) {
    if (f.name == "self-exciting") return ceg::classical::SelfExciting{f.mu, f.beta};
    if (f.name == "self-correcting") return ceg::classical::SelfCorrecting{f.mu, f.alpha};
    if (f.name == "etas") {
        ceg::classical::Etas etas{f.mu,  f.c,   f.beta, f.sigma_x,
                                  f.sigma_y, f.a_x, f.a_y,  {f.x0, f.y0, f.x1, f.y1}};
        return etas;
    }
    return ceg::classical::ConstantRate{f.rate};
}

json classical_to_json(const ClassicalFlags& f) {
    json j{{"model", f.name}};
    if (f.name == "self-exciting") {
        j["mu"] = f.mu;
        j["beta"] = f.beta;
    } else if (f.name == "self-correcting") {
        j["mu"] = f.mu;
        j["alpha"] = f.alpha;
    } else if (f.name == "etas") {
        j["mu"] = f.mu;
        j["C"] = f.c;
        j["beta"] = f.beta;
        j["sigma_x"] = f.sigma_x;
        j["sigma_y"] = f.sigma_y;
        j["a_x"] = f.a_x;
        j["a_y"] = f.a_y;
        j["domain"] = {f.x0, f.y0, f.x1, f.y1};
    } else {
        j["rate"] = f.rate;
    }
    return j;
}

// Every command leaves its fully resolved settings next to the main output.
void write_resolved_config(const std::string& out_path, const json& resolved) {
    const std::string path = out_path + ".config.json";
    std::ofstream out(path);
    if (!out) throw ceg::ValidationError("cannot open config sidecar: " + path);
    out << resolved.dump(2) << "\n";
}

int cmd_simulate(const ClassicalFlags& flags, double horizon, int n_seqs, std::uint64_t seed,
                 std::size_t max_events, int threads, const std::string& out_path) {
    const auto model = build_classical(flags);
    ceg::classical::validate_params(model);
    if (n_seqs < 1) throw ceg::ValidationError("--n-seqs must be >= 1");

    ceg::Dataset ds;
    ds.mark_dim = ceg::classical::model_mark_dim(model);
    if (flags.name == "etas") {
        ds.mark_bounds = ceg::MarkBounds{{flags.x0, flags.y0}, {flags.x1, flags.y1}};
    }
    ds.sequences.resize(n_seqs);

    const ceg::Rng root(seed);
    ceg::classical::ThinningOptions options;
    options.max_events = max_events;
    ceg::parallel_for(n_seqs, ceg::resolve_threads(threads), [&](std::size_t s) {
        ds.sequences[s] = ceg::classical::thinning_simulate(model, horizon, root.split(s),
                                                            options);
    });
    ceg::validate_dataset(ds);
    ceg::save_dataset(ds, out_path);

    json resolved = classical_to_json(flags);
    resolved["command"] = "simulate";
    resolved["T"] = horizon;
    resolved["n_seqs"] = n_seqs;
    resolved["seed"] = seed;
    resolved["max_events"] = max_events;
    resolved["out"] = out_path;
    write_resolved_config(out_path, resolved);
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& method_name, int epochs,
              double lr, int batch_size, int sample_count, int knn_k, std::uint64_t seed,
              int noise_dim, int hidden_dim, double train_frac, double sigma_obs,
              double clip_norm, const std::string& out_path, std::string log_path) {
    ceg::Dataset data = ceg::load_dataset(data_path);
    ceg::validate_dataset(data);
    auto [train_split, heldout] = ceg::split_dataset(data, train_frac, seed);

    ceg::CegModel model = ceg::init_ceg_model(noise_dim, hidden_dim, data.mark_dim, seed);
    model.mark_bounds = data.mark_bounds;

    ceg::train::TrainConfig cfg;
    cfg.method = method_name == "cvae" ? ceg::train::Method::kCvae : ceg::train::Method::kKde;
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.batch_size = batch_size;
    cfg.sample_count = sample_count;
    cfg.knn_k = knn_k;
    cfg.seed = seed;
    cfg.sigma_obs = sigma_obs;
    cfg.clip_norm = clip_norm;

    ceg::train::TrainResult result;
    std::optional<ceg::CvaeNets> cvae;
    if (cfg.method == ceg::train::Method::kCvae) {
        cvae = ceg::init_cvae_nets(noise_dim, hidden_dim, data.mark_dim, seed + 1);
        result = ceg::train::train_variational(model, *cvae, train_split, heldout, cfg);
    } else {
        result = ceg::train::train_nonparametric(model, train_split, heldout, cfg);
    }

    ceg::save_model(model, cvae, out_path);
    if (log_path.empty()) log_path = out_path + ".log.csv";
    ceg::train::write_training_log(log_path, result.log);

    json resolved{{"command", "train"},     {"data", data_path},
                  {"method", method_name},  {"epochs", epochs},
                  {"lr", lr},               {"batch_size", batch_size},
                  {"L", sample_count},      {"k", knn_k},
                  {"seed", seed},           {"noise_dim", noise_dim},
                  {"hidden_dim", hidden_dim}, {"train_frac", train_frac},
                  {"sigma_obs", sigma_obs}, {"clip_norm", clip_norm},
                  {"out", out_path},        {"log", log_path}};
    write_resolved_config(out_path, resolved);
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const ClassicalFlags& truth_flags, std::size_t sample_count, int grid_points,
                 std::uint64_t seed, int threads, const std::string& report_path,
                 std::string plot_path) {
    const ceg::LoadedModel model = ceg::load_model(model_path);
    const ceg::Dataset data = ceg::load_dataset(data_path);
    const auto truth = build_classical(truth_flags);
    ceg::classical::validate_params(truth);

    ceg::eval::EvalConfig cfg;
    cfg.sample_count = sample_count;
    cfg.grid_points = grid_points;
    cfg.seed = seed;
    cfg.threads = threads;
    const ceg::eval::EvalReport report = ceg::eval::evaluate(model, truth, data, cfg);

    ceg::eval::write_report_json(report_path, report);
    if (plot_path.empty()) plot_path = report_path + ".grid.csv";
    ceg::eval::write_grid_csv(plot_path, report.grid);

    json resolved = classical_to_json(truth_flags);
    resolved["command"] = "evaluate";
    resolved["model_file"] = model_path;
    resolved["data"] = data_path;
    resolved["L"] = sample_count;
    resolved["grid_points"] = grid_points;
    resolved["seed"] = seed;
    resolved["report"] = report_path;
    resolved["plot"] = plot_path;
    write_resolved_config(report_path, resolved);
    return 0;
}

int cmd_generate(const std::string& model_path, double horizon, int n_seqs, std::uint64_t seed,
                 std::size_t max_events, const std::string& out_path) {
    const ceg::LoadedModel model = ceg::load_model(model_path);
    if (n_seqs < 1) throw ceg::ValidationError("--n-seqs must be >= 1");

    ceg::Dataset ds;
    ds.mark_dim = model.model.mark_dim;
    ds.mark_bounds = model.model.mark_bounds;
    std::vector<std::size_t> truncated;
    const ceg::Rng root(seed);
    for (int s = 0; s < n_seqs; ++s) {
        ceg::gen::GenerationConfig cfg;
        cfg.horizon = horizon;
        cfg.max_events = max_events;
        cfg.seed = root.split(s).next_u64();
        auto result = ceg::gen::generate_sequence(model, cfg);
        if (result.truncated) truncated.push_back(s);
        ds.sequences.push_back(std::move(result.sequence));
    }
    ceg::save_dataset(ds, out_path);

    json resolved{{"command", "generate"}, {"model_file", model_path}, {"T", horizon},
                  {"n_seqs", n_seqs},      {"seed", seed},             {"max_events", max_events},
                  {"out", out_path},       {"truncated_sequences", truncated}};
    write_resolved_config(out_path, resolved);
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& history_path,
                std::size_t sample_count, std::uint64_t seed, const std::string& out_path) {
    const ceg::LoadedModel model = ceg::load_model(model_path);
    const ceg::Dataset history = ceg::load_dataset(history_path);
    if (history.sequences.empty()) {
        throw ceg::ValidationError("history file has no sequences: " + history_path);
    }
    if (history.mark_dim != model.model.mark_dim && !history.sequences.front().empty()) {
        throw ceg::ValidationError("history mark dimension does not match the model");
    }
    const auto& events = history.sequences.front().events;
    const ceg::Event next =
        ceg::gen::predict_next(model, events, sample_count, ceg::Rng(seed));

    const double last = events.empty() ? 0.0 : events.back().time;
    json out{{"dt_mean", next.time - last},
             {"time", next.time},
             {"mark_mean", next.mark},
             {"L", sample_count}};
    if (out_path.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::ofstream file(out_path);
        if (!file) throw ceg::ValidationError("cannot open output file: " + out_path);
        file << out.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional event generator toolkit for marked temporal point processes"};
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file; command-line flags take precedence");
    // Let "ceg simulate --config f" reach the root --config option.
    app.fallthrough();

    // simulate
    ClassicalFlags sim_flags;
    double sim_T = 100.0;
    int sim_n = 200;
    std::uint64_t sim_seed = 0;
    std::size_t sim_max_events = 1000000;
    int sim_threads = 0;
    std::string sim_out;
    auto* sim = app.add_subcommand("simulate", "simulate a classical process by thinning");
    add_classical_flags(sim, sim_flags, "--model", "process to simulate");
    sim->add_option("--T", sim_T, "time horizon")->check(CLI::PositiveNumber);
    sim->add_option("--n-seqs", sim_n, "number of sequences");
    sim->add_option("--seed", sim_seed, "rng seed");
    sim->add_option("--max-events", sim_max_events, "per-sequence event cap");
    sim->add_option("--threads", sim_threads, "worker threads (0: CEG_THREADS or 1)");
    sim->add_option("--out", sim_out, "output JSONL path")->required();

    // train
    std::string tr_data, tr_method = "kde", tr_out, tr_log;
    int tr_epochs = 50, tr_batch = 32, tr_L = 100, tr_k = 0;
    int tr_noise = 16, tr_hidden = 64;
    double tr_lr = 1e-3, tr_frac = 0.9, tr_sigma_obs = 0.1, tr_clip = 5.0;
    std::uint64_t tr_seed = 0;
    auto* tr = app.add_subcommand("train", "fit the event generator to a dataset");
    tr->add_option("--data", tr_data, "training JSONL path")->required();
    tr->add_option("--method", tr_method, "objective")
        ->check(CLI::IsMember({"kde", "cvae"}));
    tr->add_option("--epochs", tr_epochs, "training epochs")->check(CLI::PositiveNumber);
    tr->add_option("--lr", tr_lr, "Adam learning rate");
    tr->add_option("--batch-size", tr_batch, "sequences per optimizer step");
    tr->add_option("--L", tr_L, "generated samples per event (kde objective)");
    tr->add_option("--k", tr_k, "kNN bandwidth neighbor count (0: ceil(sqrt(L)))");
    tr->add_option("--seed", tr_seed, "rng seed");
    tr->add_option("--noise-dim", tr_noise, "noise dimension");
    tr->add_option("--hidden-dim", tr_hidden, "history embedding dimension");
    tr->add_option("--train-frac", tr_frac, "train/held-out split fraction");
    tr->add_option("--sigma-obs", tr_sigma_obs, "cvae reconstruction std");
    tr->add_option("--clip-norm", tr_clip, "global gradient norm clip");
    tr->add_option("--out", tr_out, "model JSON path")->required();
    tr->add_option("--log", tr_log, "training log CSV path (default: <out>.log.csv)");

    // evaluate
    ClassicalFlags ev_flags;
    std::string ev_model, ev_data, ev_report, ev_plot;
    std::size_t ev_L = 1000;
    int ev_grid = 20, ev_threads = 0;
    std::uint64_t ev_seed = 0;
    auto* ev = app.add_subcommand("evaluate", "compare a trained model against ground truth");
    ev->add_option("--model-file", ev_model, "trained model JSON")->required();
    ev->add_option("--data", ev_data, "test JSONL path")->required();
    add_classical_flags(ev, ev_flags, "--truth", "generating process");
    ev->add_option("--L", ev_L, "generated samples per conditioning history");
    ev->add_option("--grid-points", ev_grid, "time grid points per inter-event window");
    ev->add_option("--seed", ev_seed, "rng seed");
    ev->add_option("--threads", ev_threads, "worker threads (0: CEG_THREADS or 1)");
    ev->add_option("--report", ev_report, "report JSON path")->required();
    ev->add_option("--plot", ev_plot, "grid CSV path (default: <report>.grid.csv)");

    // generate
    std::string ge_model, ge_out;
    double ge_T = 100.0;
    int ge_n = 10;
    std::uint64_t ge_seed = 0;
    std::size_t ge_max_events = 100000;
    auto* ge = app.add_subcommand("generate", "sample sequences from a trained model");
    ge->add_option("--model-file", ge_model, "trained model JSON")->required();
    ge->add_option("--T", ge_T, "time horizon")->check(CLI::PositiveNumber);
    ge->add_option("--n-seqs", ge_n, "number of sequences");
    ge->add_option("--seed", ge_seed, "rng seed");
    ge->add_option("--max-events", ge_max_events, "per-sequence event cap");
    ge->add_option("--out", ge_out, "output JSONL path")->required();

    // predict
    std::string pr_model, pr_history, pr_out;
    std::size_t pr_L = 1000;
    std::uint64_t pr_seed = 0;
    auto* pr = app.add_subcommand("predict", "point-predict the next event after a history");
    pr->add_option("--model-file", pr_model, "trained model JSON")->required();
    pr->add_option("--history", pr_history, "JSONL file; the first sequence is the history")
        ->required();
    pr->add_option("--L", pr_L, "sample count for the prediction average");
    pr->add_option("--seed", pr_seed, "rng seed");
    pr->add_option("--out", pr_out, "output JSON path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(sim_flags, sim_T, sim_n, sim_seed, sim_max_events, sim_threads,
                                sim_out);
        }
        if (tr->parsed()) {
            return cmd_train(tr_data, tr_method, tr_epochs, tr_lr, tr_batch, tr_L, tr_k,
                             tr_seed, tr_noise, tr_hidden, tr_frac, tr_sigma_obs, tr_clip,
                             tr_out, tr_log);
        }
        if (ev->parsed()) {
            return cmd_evaluate(ev_model, ev_data, ev_flags, ev_L, ev_grid, ev_seed, ev_threads,
                                ev_report, ev_plot);
        }
        if (ge->parsed()) {
            return cmd_generate(ge_model, ge_T, ge_n, ge_seed, ge_max_events, ge_out);
        }
        if (pr->parsed()) {
            return cmd_predict(pr_model, pr_history, pr_L, pr_seed, pr_out);
        }
    } catch (const ceg::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const ceg::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
