#include "ceg/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ceg/dataset_io.hpp"
#include "ceg/errors.hpp"
#include "ceg/kde.hpp"
#include "ceg/parallel.hpp"

namespace ceg::eval {

namespace {

constexpr double kLogFloor = 1e-12;

double estimated_intensity(double f, double survival) {
    if (survival < gen::kIntensityEps) return f / gen::kIntensityEps;
    return f / survival;
}

} // namespace

double mre(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size()) throw ValidationError("mre: length mismatch");
    if (estimate.empty()) throw ValidationError("mre: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!(truth[i] > 0.0)) {
            throw ValidationError("mre: truth value at index " + std::to_string(i) +
                                  " is not positive");
        }
        total += std::abs(estimate[i] - truth[i]) / truth[i];
    }
    return total / static_cast<double>(truth.size());
}

double test_loglik(const LoadedModel& model, const Dataset& data, std::size_t sample_count,
                   std::uint64_t seed, int threads) {
    const Rng root(seed);
    std::vector<double> seq_sums(data.sequences.size(), 0.0);
    std::vector<std::size_t> seq_counts(data.sequences.size(), 0);

    parallel_for(data.sequences.size(), resolve_threads(threads), [&](std::size_t s) {
        const auto& events = data.sequences[s].events;
        double sum = 0.0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const std::span<const Event> prefix(events.data(), i);
            const double f = gen::cond_pdf(model, events[i], prefix, sample_count,
                                           root.split2(s, i));
            sum += std::log(std::max(f, kLogFloor));
        }
        seq_sums[s] = sum;
        seq_counts[s] = events.size();
    });

    double total = 0.0;
    std::size_t events = 0;
    for (std::size_t s = 0; s < seq_sums.size(); ++s) {
        total += seq_sums[s];
        events += seq_counts[s];
    }
    if (events == 0) throw ValidationError("test_loglik: dataset has no events");
    return total / static_cast<double>(events);
}

EvalReport evaluate(const LoadedModel& model, const classical::ClassicalModel& truth,
                    const Dataset& test_data, const EvalConfig& cfg) {
    if (cfg.grid_points < 1) throw ValidationError("evaluate: grid_points must be >= 1");
    if (cfg.sample_count < 2) throw ValidationError("evaluate: sample_count must be >= 2");
    validate_dataset(test_data);
    if (classical::model_mark_dim(truth) != test_data.mark_dim) {
        throw ValidationError("evaluate: model mark dimension does not match the dataset");
    }

    struct SeqResult {
        std::vector<GridPoint> grid;
        double ll_sum = 0.0;
        std::size_t events = 0;
    };
    const Rng root(cfg.seed);
    std::vector<SeqResult> results(test_data.sequences.size());

    parallel_for(test_data.sequences.size(), resolve_threads(cfg.threads), [&](std::size_t s) {
        const auto& events = test_data.sequences[s].events;
        SeqResult& out = results[s];
        out.events = events.size();
        double t_prev = 0.0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const std::span<const Event> prefix(events.data(), i);
            const auto dist = gen::next_event_distribution(model, prefix, cfg.sample_count,
                                                           root.split2(s, i));

            for (int g = 1; g <= cfg.grid_points; ++g) {
                const double frac = static_cast<double>(g) / (cfg.grid_points + 1);
                const double t = t_prev + frac * (events[i].time - t_prev);
                const double f_true = classical::ground_truth_cond_pdf_time(truth, t, prefix);
                if (f_true < cfg.truth_floor) continue;

                const double dt = t - t_prev;
                const double f_est = kde::cond_pdf_kde(std::vector<double>{dt}, dist.time_only);
                const double survival = 1.0 - kde::cdf_time_kde(dt, dist.time_only);
                GridPoint p;
                p.seq_id = s;
                p.t = t;
                p.f_true = f_true;
                p.f_est = f_est;
                p.lambda_true = classical::ground_intensity(truth, t, prefix);
                p.lambda_est = estimated_intensity(f_est, survival);
                out.grid.push_back(p);
            }

            // Held-out log-likelihood from the same cloud, at the event.
            std::vector<double> query;
            query.reserve(1 + events[i].mark.size());
            query.push_back(events[i].time - t_prev);
            query.insert(query.end(), events[i].mark.begin(), events[i].mark.end());
            const double f = kde::cond_pdf_kde(query, dist.joint);
            out.ll_sum += std::log(std::max(f, kLogFloor));
            t_prev = events[i].time;
        }
    });

    EvalReport report;
    std::vector<double> f_est, f_true, l_est, l_true;
    double ll = 0.0;
    for (const SeqResult& r : results) {
        ll += r.ll_sum;
        report.n_events += r.events;
        for (const GridPoint& p : r.grid) {
            report.grid.push_back(p);
            f_est.push_back(p.f_est);
            f_true.push_back(p.f_true);
            l_est.push_back(p.lambda_est);
            l_true.push_back(p.lambda_true);
        }
    }
    if (report.n_events == 0) throw ValidationError("evaluate: dataset has no events");
    if (report.grid.empty()) throw ValidationError("evaluate: every grid point was skipped");
    report.test_ll_per_event = ll / static_cast<double>(report.n_events);
    report.n_grid_points = report.grid.size();
    report.grid_spec = std::to_string(cfg.grid_points) +
                       " interior time points per inter-event window; log-likelihood "
                       "normalized per event";
    report.mre_f = mre(f_est, f_true);
    report.mre_lambda = mre(l_est, l_true);
    return report;
}

void write_grid_csv(const std::string& path, const std::vector<GridPoint>& grid) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open grid csv file: " + path);
    out << "seq_id,t,f_true,f_est,lambda_true,lambda_est\n";
    for (const GridPoint& p : grid) {
        out << p.seq_id << ',' << format_double(p.t) << ',' << format_double(p.f_true) << ','
            << format_double(p.f_est) << ',' << format_double(p.lambda_true) << ','
            << format_double(p.lambda_est) << '\n';
    }
}

void write_report_json(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open report file: " + path);
    out << "{\n"
        << "  \"test_ll_per_event\": " << format_double(report.test_ll_per_event) << ",\n"
        << "  \"mre_f\": " << format_double(report.mre_f) << ",\n"
        << "  \"mre_lambda\": " << format_double(report.mre_lambda) << ",\n"
        << "  \"n_events\": " << report.n_events << ",\n"
        << "  \"n_grid_points\": " << report.n_grid_points << ",\n"
        << "  \"grid_spec\": \"" << report.grid_spec << "\"\n"
        << "}\n";
}

RateMap background_rate_map(const Dataset& data, const classical::Box& domain, int nx, int ny,
                            double bandwidth) {
    if (nx < 1 || ny < 1) throw ValidationError("background_rate_map: grid must be >= 1x1");
    if (data.mark_dim != 2) {
        throw ValidationError("background_rate_map: marks must be 2-D locations");
    }
    std::vector<double> xs, ys;
    for (const auto& seq : data.sequences) {
        for (const auto& e : seq.events) {
            xs.push_back(e.mark[0]);
            ys.push_back(e.mark[1]);
        }
    }
    const std::size_t n = xs.size();
    if (n == 0) throw ValidationError("background_rate_map: dataset has no events");

    auto axis_bandwidth = [&](const std::vector<double>& v) {
        if (bandwidth > 0.0) return bandwidth;
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / n);
        // Scott's rule for 2 dimensions.
        const double h = sd * std::pow(static_cast<double>(n), -1.0 / 6.0);
        return h > 1e-12 ? h : 1e-12;
    };
    const double hx = axis_bandwidth(xs);
    const double hy = axis_bandwidth(ys);

    RateMap map;
    map.domain = domain;
    map.nx = nx;
    map.ny = ny;
    map.values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
    const double dx = (domain.x1 - domain.x0) / nx;
    const double dy = (domain.y1 - domain.y0) / ny;
    for (int iy = 0; iy < ny; ++iy) {
        const double cy = domain.y0 + (iy + 0.5) * dy;
        for (int ix = 0; ix < nx; ++ix) {
            const double cx = domain.x0 + (ix + 0.5) * dx;
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                total += kde::normal_pdf((cx - xs[j]) / hx) * kde::normal_pdf((cy - ys[j]) / hy);
            }
            map.values[static_cast<std::size_t>(iy) * nx + ix] = total / (n * hx * hy);
        }
    }
    // Riemann normalization over the domain.
    const double mass = std::accumulate(map.values.begin(), map.values.end(), 0.0) * dx * dy;
    if (mass > 0.0) {
        for (double& v : map.values) v /= mass;
    }
    return map;
}

void write_rate_map_csv(const std::string& path, const RateMap& map) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open rate map file: " + path);
    out << "x,y,density\n";
    const double dx = (map.domain.x1 - map.domain.x0) / map.nx;
    const double dy = (map.domain.y1 - map.domain.y0) / map.ny;
    for (int iy = 0; iy < map.ny; ++iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            const double cx = map.domain.x0 + (ix + 0.5) * dx;
            const double cy = map.domain.y0 + (iy + 0.5) * dy;
            out << format_double(cx) << ',' << format_double(cy) << ','
                << format_double(map.values[static_cast<std::size_t>(iy) * map.nx + ix]) << '\n';
        }
    }
}

} // namespace ceg::eval
