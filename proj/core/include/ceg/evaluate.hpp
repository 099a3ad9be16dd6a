#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ceg/classical.hpp"
#include "ceg/event.hpp"
#include "ceg/generation.hpp"
#include "ceg/model_io.hpp"

namespace ceg::eval {

struct EvalConfig {
    std::size_t sample_count = 1000; // L per conditioning history
    int grid_points = 20;            // interior time points per window
    std::uint64_t seed = 0;
    int threads = 1;
    double truth_floor = 1e-8; // grid points with f_true below this are skipped
};

// One comparison point on a per-window time grid.
struct GridPoint {
    std::size_t seq_id = 0;
    double t = 0.0;
    double f_true = 0.0;
    double f_est = 0.0;
    double lambda_true = 0.0;
    double lambda_est = 0.0;
};

struct EvalReport {
    double test_ll_per_event = 0.0; // mean log f_hat(x_i | H_i) over test events
    double mre_f = 0.0;             // mean |f_est - f_true| / f_true over grid points
    double mre_lambda = 0.0;
    std::size_t n_events = 0;
    std::size_t n_grid_points = 0;
    std::string grid_spec; // human-readable description of the grid convention
    std::vector<GridPoint> grid;
};

// Mean relative error; throws if any truth value is not strictly positive.
double mre(std::span<const double> estimate, std::span<const double> truth);

// Mean over events of log f_hat(x_i | H_i), the model's KDE density at the
// observed next event (floored at 1e-12 inside the log).
double test_loglik(const LoadedModel& model, const Dataset& data, std::size_t sample_count,
                   std::uint64_t seed, int threads = 1);

// Compares the learned time-marginal density and intensity against the
// generating process on per-window grids: for each inter-event window
// (t_{i-1}, t_i] the grid holds `grid_points` interior times, the truth is
// the exact conditional density/intensity, and the estimate comes from a
// fresh generated cloud conditioned on the same history. Deterministic
// given the seed; the thread count does not affect results.
EvalReport evaluate(const LoadedModel& model, const classical::ClassicalModel& truth,
                    const Dataset& test_data, const EvalConfig& cfg);

// Columns: seq_id,t,f_true,f_est,lambda_true,lambda_est.
void write_grid_csv(const std::string& path, const std::vector<GridPoint>& grid);

// Summary metrics as a JSON object (grid omitted).
void write_report_json(const std::string& path, const EvalReport& report);

struct RateMap {
    classical::Box domain;
    int nx = 0, ny = 0;
    std::vector<double> values; // row-major, values[iy * nx + ix]
};

// Fixed-bandwidth 2-D Gaussian KDE over event locations, evaluated at cell
// centers and Riemann-normalized to integrate to 1 over the domain.
// bandwidth <= 0 picks Scott's rule per axis.
RateMap background_rate_map(const Dataset& data, const classical::Box& domain, int nx, int ny,
                            double bandwidth = 0.0);

void write_rate_map_csv(const std::string& path, const RateMap& map);

} // namespace ceg::eval
