#include "ceg/nets.hpp"

#include <algorithm>
#include <cmath>

#include "ceg/errors.hpp"

namespace ceg {

namespace {

double softplus_val(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
double sigmoid_val(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// y = W x + b, W (out x in).
std::vector<double> matvec(const ad::Array& w, std::span<const double> x, const ad::Array& b) {
    std::vector<double> y(w.rows);
    for (std::size_t i = 0; i < w.rows; ++i) {
        double s = b.data[i];
        for (std::size_t j = 0; j < w.cols; ++j) s += w(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

void glorot_fill(ad::Array& w, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (double& v : w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
}

} // namespace

ad::Array& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols) {
    names.push_back(name);
    values.emplace_back(rows, cols);
    grads.emplace_back(rows, cols);
    return values.back();
}

int ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

void ParamStore::zero_grads() {
    for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
}

double ParamStore::grad_norm() const {
    double s = 0.0;
    for (const auto& g : grads)
        for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

void ParamStore::scale_grads(double c) {
    for (auto& g : grads)
        for (double& v : g.data) v *= c;
}

AdamState AdamState::for_params(const ParamStore& params, double lr) {
    AdamState st;
    st.lr = lr;
    for (const auto& p : params.values) {
        st.m.emplace_back(p.rows, p.cols);
        st.v.emplace_back(p.rows, p.cols);
    }
    return st;
}

CegModel init_ceg_model(int noise_dim, int hidden_dim, int mark_dim, std::uint64_t seed) {
    CegModel model;
    model.noise_dim = noise_dim;
    model.hidden_dim = hidden_dim;
    model.mark_dim = mark_dim;
    model.standardize.mark_mean.assign(mark_dim, 0.0);
    model.standardize.mark_std.assign(mark_dim, 1.0);

    Rng rng(seed);
    auto& p = model.params;
    const int in = noise_dim + hidden_dim;
    const int gh = model.gen_hidden;
    const int out = 1 + mark_dim;
    glorot_fill(p.add("gen.w1", gh, in), rng);
    p.add("gen.b1", gh, 1);
    glorot_fill(p.add("gen.w2", gh, gh), rng);
    p.add("gen.b2", gh, 1);
    glorot_fill(p.add("gen.w3", out, gh), rng);
    p.add("gen.b3", out, 1);

    const int lstm_in = 1 + mark_dim + hidden_dim;
    glorot_fill(p.add("lstm.w", 4 * hidden_dim, lstm_in), rng);
    auto& lb = p.add("lstm.b", 4 * hidden_dim, 1);
    // forget gate rows are [hidden_dim, 2*hidden_dim)
    for (int i = hidden_dim; i < 2 * hidden_dim; ++i) lb.data[i] = 1.0;

    // Calibrate the time head: with Glorot weights the pre-softplus time
    // output is nearly constant over the noise, so the initial gap cloud is
    // degenerate and the few optimizer steps of a short run are spent just
    // inflating its variance. Rescale the output row (and center its bias)
    // so the time output starts with unit-order spread.
    {
        ad::Array& w1 = p.values[p.index_of("gen.w1")];
        const ad::Array& b1 = p.values[p.index_of("gen.b1")];
        ad::Array& w2 = p.values[p.index_of("gen.w2")];
        const ad::Array& b2 = p.values[p.index_of("gen.b2")];
        ad::Array& w3 = p.values[p.index_of("gen.w3")];
        ad::Array& b3 = p.values[p.index_of("gen.b3")];
        const int draws = 256;
        double mean = 0.0, sq = 0.0;
        std::vector<double> x(in, 0.0);
        for (int d = 0; d < draws; ++d) {
            for (int j = 0; j < noise_dim; ++j) x[j] = rng.normal();
            auto a1 = matvec(w1, x, b1);
            for (double& v : a1) v = softplus_val(v);
            auto a2 = matvec(w2, a1, b2);
            for (double& v : a2) v = softplus_val(v);
            double y0 = b3.data[0];
            for (int j = 0; j < gh; ++j) y0 += w3(0, j) * a2[j];
            mean += y0;
            sq += y0 * y0;
        }
        mean /= draws;
        const double sd = std::sqrt(std::max(sq / draws - mean * mean, 0.0));
        const double target_sd = 1.5;
        const double c = target_sd / std::max(sd, 1e-6);
        for (std::size_t j = 0; j < w3.cols; ++j) w3(0, j) *= c;
        b3.data[0] = -c * mean;
    }
    return model;
}

CvaeNets init_cvae_nets(int noise_dim, int hidden_dim, int mark_dim, std::uint64_t seed) {
    CvaeNets nets;
    nets.noise_dim = noise_dim;
    Rng rng(seed);
    auto& p = nets.params;
    const int x_dim = 1 + mark_dim;
    glorot_fill(p.add("enc.w1", nets.hidden, x_dim + hidden_dim), rng);
    p.add("enc.b1", nets.hidden, 1);
    glorot_fill(p.add("enc.w2", 2 * noise_dim, nets.hidden), rng);
    p.add("enc.b2", 2 * noise_dim, 1);
    glorot_fill(p.add("pri.w1", nets.hidden, hidden_dim), rng);
    p.add("pri.b1", nets.hidden, 1);
    glorot_fill(p.add("pri.w2", 2 * noise_dim, nets.hidden), rng);
    p.add("pri.b2", 2 * noise_dim, 1);
    return nets;
}

GeneratedEvent generator_forward(const CegModel& model, std::span<const double> z,
                                 std::span<const double> h) {
    const auto& p = model.params;
    std::vector<double> in(z.begin(), z.end());
    in.insert(in.end(), h.begin(), h.end());
    for (double v : in) {
        if (!std::isfinite(v)) throw NumericError("generator_forward: non-finite input");
    }
    auto a1 = matvec(p.values[p.index_of("gen.w1")], in, p.values[p.index_of("gen.b1")]);
    for (double& v : a1) v = softplus_val(v);
    auto a2 = matvec(p.values[p.index_of("gen.w2")], a1, p.values[p.index_of("gen.b2")]);
    for (double& v : a2) v = softplus_val(v);
    auto y = matvec(p.values[p.index_of("gen.w3")], a2, p.values[p.index_of("gen.b3")]);
    for (double v : y) {
        if (!std::isfinite(v)) throw NumericError("generator_forward: non-finite activation");
    }

    GeneratedEvent ev;
    const double dt_std = softplus_val(y[0]);
    ev.dt = std::max(dt_std * model.standardize.gap_scale, model.dt_floor);
    ev.mark.resize(model.mark_dim);
    for (int d = 0; d < model.mark_dim; ++d) {
        double m = y[1 + d] * model.standardize.mark_std[d] + model.standardize.mark_mean[d];
        if (model.mark_bounds) {
            m = std::clamp(m, model.mark_bounds->lo[d], model.mark_bounds->hi[d]);
        }
        ev.mark[d] = m;
    }
    return ev;
}

double generator_time_preact(const CegModel& model, std::span<const double> z) {
    const auto& p = model.params;
    std::vector<double> in(z.begin(), z.end());
    in.resize(model.noise_dim + model.hidden_dim, 0.0);
    auto a1 = matvec(p.values[p.index_of("gen.w1")], in, p.values[p.index_of("gen.b1")]);
    for (double& v : a1) v = softplus_val(v);
    auto a2 = matvec(p.values[p.index_of("gen.w2")], a1, p.values[p.index_of("gen.b2")]);
    for (double& v : a2) v = softplus_val(v);
    const auto y = matvec(p.values[p.index_of("gen.w3")], a2, p.values[p.index_of("gen.b3")]);
    return y[0];
}

LstmState lstm_zero_state(const CegModel& model) {
    return LstmState{std::vector<double>(model.hidden_dim, 0.0),
                     std::vector<double>(model.hidden_dim, 0.0)};
}

std::vector<double> event_features(const CegModel& model, double gap,
                                   std::span<const double> mark) {
    std::vector<double> x;
    x.reserve(1 + model.mark_dim);
    x.push_back(gap / model.standardize.gap_scale);
    for (int d = 0; d < model.mark_dim; ++d) {
        x.push_back((mark[d] - model.standardize.mark_mean[d]) / model.standardize.mark_std[d]);
    }
    return x;
}

LstmState lstm_step(const CegModel& model, double gap, std::span<const double> mark,
                    const LstmState& state) {
    const auto& p = model.params;
    const int hd = model.hidden_dim;
    auto x = event_features(model, gap, mark);
    x.insert(x.end(), state.h.begin(), state.h.end());
    auto gates = matvec(p.values[p.index_of("lstm.w")], x, p.values[p.index_of("lstm.b")]);

    LstmState next{std::vector<double>(hd), std::vector<double>(hd)};
    for (int i = 0; i < hd; ++i) {
        const double ig = sigmoid_val(gates[i]);
        const double fg = sigmoid_val(gates[hd + i]);
        const double gg = std::tanh(gates[2 * hd + i]);
        const double og = sigmoid_val(gates[3 * hd + i]);
        next.c[i] = fg * state.c[i] + ig * gg;
        next.h[i] = og * std::tanh(next.c[i]);
    }
    return next;
}

LstmState encode_history(const CegModel& model, std::span<const Event> prefix) {
    LstmState state = lstm_zero_state(model);
    double prev_t = 0.0;
    for (const Event& e : prefix) {
        if (e.time < prev_t) throw ValidationError("encode_history: non-increasing prefix times");
        state = lstm_step(model, e.time - prev_t, e.mark, state);
        prev_t = e.time;
    }
    return state;
}

namespace {

GaussianParams mlp_gaussian(const ParamStore& p, const std::string& prefix,
                            std::span<const double> in, int noise_dim) {
    auto a1 = matvec(p.values[p.index_of(prefix + ".w1")], in,
                     p.values[p.index_of(prefix + ".b1")]);
    for (double& v : a1) v = softplus_val(v);
    auto out = matvec(p.values[p.index_of(prefix + ".w2")], a1,
                      p.values[p.index_of(prefix + ".b2")]);
    GaussianParams gp;
    gp.mu.assign(out.begin(), out.begin() + noise_dim);
    gp.logvar.assign(out.begin() + noise_dim, out.end());
    return gp;
}

} // namespace

GaussianParams encoder_forward(const CvaeNets& nets, const CegModel& model, double gap,
                               std::span<const double> mark, std::span<const double> h) {
    auto in = event_features(model, gap, mark);
    in.insert(in.end(), h.begin(), h.end());
    return mlp_gaussian(nets.params, "enc", in, nets.noise_dim);
}

GaussianParams prior_forward(const CvaeNets& nets, std::span<const double> h) {
    return mlp_gaussian(nets.params, "pri", std::vector<double>(h.begin(), h.end()),
                        nets.noise_dim);
}

std::vector<double> reparam_sample(const GaussianParams& gp, std::span<const double> eps) {
    std::vector<double> z(gp.mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = gp.mu[i] + std::exp(0.5 * gp.logvar[i]) * eps[i];
    }
    return z;
}

void adam_step(ParamStore& params, AdamState& state) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.values.size(); ++k) {
        auto& val = params.values[k].data;
        auto& grad = params.grads[k].data;
        auto& m = state.m[k].data;
        auto& v = state.v[k].data;
        for (std::size_t i = 0; i < val.size(); ++i) {
            if (!std::isfinite(grad[i])) {
                throw NumericError("adam_step: non-finite gradient in parameter " +
                                   params.names[k]);
            }
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            val[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamStore& params) {
    std::vector<ad::Var> bound;
    bound.reserve(params.values.size());
    for (const auto& p : params.values) bound.push_back(tape.leaf(p));
    return bound;
}

void accumulate_grads(const ad::Tape& tape, const std::vector<ad::Var>& bound,
                      ParamStore& params) {
    for (std::size_t k = 0; k < bound.size(); ++k) {
        const auto& g = tape.grad(bound[k]).data;
        auto& dst = params.grads[k].data;
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
}

ad::Var generator_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                               const CegModel& model, ad::Var z_matrix, ad::Var h) {
    const auto& ps = model.params;
    const auto idx = [&](const char* name) { return p[ps.index_of(name)]; };
    const std::size_t rows = tape.value(z_matrix).rows;

    ad::Var x = tape.concat_cols(z_matrix, tape.repeat_rows(h, rows));
    ad::Var a1 = tape.softplus(
        tape.add_row_bias(tape.matmul(x, tape.transpose(idx("gen.w1"))), idx("gen.b1")));
    ad::Var a2 = tape.softplus(
        tape.add_row_bias(tape.matmul(a1, tape.transpose(idx("gen.w2"))), idx("gen.b2")));
    ad::Var y = tape.add_row_bias(tape.matmul(a2, tape.transpose(idx("gen.w3"))), idx("gen.b3"));
    // Softplus applies to the time column only; mark columns stay linear.
    ad::Var dt = tape.softplus(tape.slice_cols(y, 0, 1));
    if (model.mark_dim == 0) return dt;
    return tape.concat_cols(dt, tape.slice_cols(y, 1, 1 + model.mark_dim));
}

std::pair<ad::Var, ad::Var> lstm_step_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                           const CegModel& model, ad::Var x, ad::Var h,
                                           ad::Var c) {
    const auto& ps = model.params;
    const std::size_t hd = model.hidden_dim;
    ad::Var in = tape.concat(x, h);
    ad::Var gates = tape.affine(p[ps.index_of("lstm.w")], in, p[ps.index_of("lstm.b")]);
    ad::Var ig = tape.sigmoid(tape.slice_rows(gates, 0, hd));
    ad::Var fg = tape.sigmoid(tape.slice_rows(gates, hd, 2 * hd));
    ad::Var gg = tape.tanh(tape.slice_rows(gates, 2 * hd, 3 * hd));
    ad::Var og = tape.sigmoid(tape.slice_rows(gates, 3 * hd, 4 * hd));
    ad::Var c_next = tape.add(tape.mul(fg, c), tape.mul(ig, gg));
    ad::Var h_next = tape.mul(og, tape.tanh(c_next));
    return {h_next, c_next};
}

namespace {

std::pair<ad::Var, ad::Var> mlp_gaussian_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                              const ParamStore& ps, const std::string& prefix,
                                              ad::Var in, int noise_dim) {
    ad::Var a1 = tape.softplus(tape.affine(p[ps.index_of(prefix + ".w1")], in,
                                           p[ps.index_of(prefix + ".b1")]));
    ad::Var out = tape.affine(p[ps.index_of(prefix + ".w2")], a1,
                              p[ps.index_of(prefix + ".b2")]);
    return {tape.slice_rows(out, 0, noise_dim),
            tape.slice_rows(out, noise_dim, 2 * noise_dim)};
}

} // namespace

std::pair<ad::Var, ad::Var> encoder_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                                 const CvaeNets& nets, ad::Var x, ad::Var h) {
    return mlp_gaussian_tape(tape, p, nets.params, "enc", tape.concat(x, h), nets.noise_dim);
}

std::pair<ad::Var, ad::Var> prior_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                               const CvaeNets& nets, ad::Var h) {
    return mlp_gaussian_tape(tape, p, nets.params, "pri", h, nets.noise_dim);
}

} // namespace ceg
