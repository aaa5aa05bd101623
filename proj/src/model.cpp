#include "pcwi/model.hpp"

#include <cmath>
#include <deque>

#include <nlohmann/json.hpp>

namespace pcwi {

using nlohmann::json;

std::string_view to_string(LabelSource s) {
    switch (s) {
        case LabelSource::seed: return "seed";
        case LabelSource::direct: return "direct";
        case LabelSource::propagated: return "propagated";
    }
    return "direct";
}

namespace {

void check_dims(std::span<const LabeledInstance> data, std::size_t d) {
    for (const auto& x : data)
        if (x.features.size() != d)
            throw DimensionError("instance '" + x.word + "' has dimension " + std::to_string(x.features.size()) +
                                 ", expected " + std::to_string(d));
}

// Objective and gradient in one pass over the data: O(n d).
double evaluate(std::span<const LabeledInstance> data, std::span<const double> theta, double lambda,
                std::vector<double>* grad) {
    const std::size_t d = theta.size() - 1;
    const std::span<const double> w = theta.first(d);
    const double b = theta[d];
    double loss = 0.0;
    if (grad) grad->assign(d + 1, 0.0);
    for (const auto& x : data) {
        const double z = dot(w, x.features) + b;
        loss += x.weight * (softplus(z) - x.label * z);
        if (grad) {
            const double r = x.weight * (sigmoid(z) - x.label);
            for (std::size_t j = 0; j < d; ++j) (*grad)[j] += r * x.features[j];
            (*grad)[d] += r;
        }
    }
    double penalty = 0.0;
    for (std::size_t j = 0; j < d; ++j) penalty += w[j] * w[j];
    loss += 0.5 * lambda * penalty;
    if (grad)
        for (std::size_t j = 0; j < d; ++j) (*grad)[j] += lambda * w[j];
    return loss;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

double objective(std::span<const LabeledInstance> data, std::span<const double> weights, double bias, double lambda) {
    check_dims(data, weights.size());
    std::vector<double> theta(weights.begin(), weights.end());
    theta.push_back(bias);
    return evaluate(data, theta, lambda, nullptr);
}

std::vector<double> gradient(std::span<const LabeledInstance> data, std::span<const double> weights, double bias,
                             double lambda) {
    check_dims(data, weights.size());
    std::vector<double> theta(weights.begin(), weights.end());
    theta.push_back(bias);
    std::vector<double> g;
    evaluate(data, theta, lambda, &g);
    return g;
}

std::vector<double> gradient(std::span<const LabeledInstance> data, const PersonalModel& model) {
    return gradient(data, model.weights, model.bias, model.regularization_strength);
}

PersonalModel fit(std::span<const LabeledInstance> data, const FitConfig& config, std::span<const double> initial,
                  FitTrace* trace) {
    if (data.empty()) throw Error("fit: no training data");
    if (config.regularization_strength < 0) throw Error("fit: negative regularization strength");
    const std::size_t d = data.front().features.size();
    check_dims(data, d);

    PersonalModel m;
    m.regularization_strength = config.regularization_strength;
    m.weights.assign(d, 0.0);
    for (const auto& x : data) {
        switch (x.source) {
            case LabelSource::seed: ++m.trained_on.seed; break;
            case LabelSource::direct: ++m.trained_on.direct; break;
            case LabelSource::propagated: ++m.trained_on.propagated; break;
        }
    }

    double positive = 0.0, total = 0.0;
    for (const auto& x : data) {
        positive += x.weight * x.label;
        total += x.weight;
    }
    if (positive == 0.0 || positive == total) {
        const double rate = (positive + 1.0) / (total + 2.0);
        m.bias = std::log(rate / (1.0 - rate));
        m.degenerate = true;
        return m;
    }

    std::vector<double> theta(d + 1, 0.0);
    if (!initial.empty()) {
        if (initial.size() != d + 1) throw DimensionError("fit: initial point has wrong dimension");
        theta.assign(initial.begin(), initial.end());
    }
    const double lambda = config.regularization_strength;
    std::vector<double> g;
    double f = evaluate(data, theta, lambda, &g);
    if (trace) trace->losses.push_back(f);

    constexpr std::size_t kHistory = 8;
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> dir(d + 1), next(d + 1), g_next;

    int iter = 0;
    while (norm2(g) > config.tolerance && iter < config.max_iterations) {
        // Two-loop recursion: dir = -H g.
        dir = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], dir);
            for (std::size_t j = 0; j <= d; ++j) dir[j] -= alpha[i] * y_hist[i][j];
        }
        if (!s_hist.empty()) {
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (double& v : dir) v *= gamma;
        } else {
            const double scale = 1.0 / std::max(1.0, norm2(g));
            for (double& v : dir) v *= scale;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], dir);
            for (std::size_t j = 0; j <= d; ++j) dir[j] += s_hist[i][j] * (alpha[i] - beta);
        }
        for (double& v : dir) v = -v;

        double slope = dot(g, dir);
        if (!(slope < 0)) {
            // Lost descent; restart from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            const double scale = 1.0 / std::max(1.0, norm2(g));
            for (std::size_t j = 0; j <= d; ++j) dir[j] = -g[j] * scale;
            slope = dot(g, dir);
        }

        // Backtracking line search: Armijo, or near the optimum where f no
        // longer resolves the decrease, the approximate Wolfe test on the
        // directional derivative.
        double step = 1.0;
        double f_next = 0.0;
        bool accepted = false;
        const double f_noise = 1e-12 * std::abs(f);
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j <= d; ++j) next[j] = theta[j] + step * dir[j];
            f_next = evaluate(data, next, lambda, &g_next);
            const double slope_next = dot(g_next, dir);
            const bool armijo = f_next <= f + 1e-4 * step * slope && f_next < f;
            const bool approx_wolfe = f_next <= f + f_noise && slope_next >= 0.9 * slope && slope_next <= -0.8 * slope;
            if (armijo || approx_wolfe) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no further decrease representable

        std::vector<double> s(d + 1), y(d + 1);
        for (std::size_t j = 0; j <= d; ++j) {
            s[j] = next[j] - theta[j];
            y[j] = g_next[j] - g[j];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * norm2(s) * norm2(y)) {
            if (s_hist.size() == kHistory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }
        theta = next;
        g = g_next;
        f = f_next;
        ++iter;
        if (trace) trace->losses.push_back(f);
    }

    m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
    m.bias = theta[d];
    m.iterations = iter;
    m.gradient_norm = norm2(g);
    return m;
}

double predict_proba(const PersonalModel& model, std::span<const double> features) {
    if (features.size() != model.weights.size())
        throw DimensionError("predict_proba: model has dimension " + std::to_string(model.weights.size()) +
                             ", features have " + std::to_string(features.size()));
    return sigmoid(dot(model.weights, features) + model.bias);
}

int predict_label(const PersonalModel& model, std::span<const double> features) {
    return predict_proba(model, features) > 0.5 ? 1 : 0;
}

double predict_proba_raw(const PersonalModel& model, const RawLexiconRecord& record) {
    return predict_proba(model, featurize(record, model.normalization));
}

std::string export_model(const PersonalModel& m) {
    json j;
    j["format_version"] = kModelFormatVersion;
    j["feature_names"] = m.normalization.feature_names;
    j["weights"] = m.weights;
    j["bias"] = m.bias;
    j["lambda"] = m.regularization_strength;
    j["normalization"] = {{"kept_columns", m.normalization.kept_columns},
                          {"mean", m.normalization.mean},
                          {"stddev", m.normalization.stddev},
                          {"pool_size", m.normalization.pool_size},
                          {"content_hash", m.normalization.content_hash}};
    j["trained_on"] = {{"seed", m.trained_on.seed}, {"direct", m.trained_on.direct},
                       {"propagated", m.trained_on.propagated}};
    j["session_id"] = m.session_id;
    j["model_version"] = m.version;
    j["degenerate"] = m.degenerate;
    // nlohmann emits the shortest round-tripping decimal for each double.
    return j.dump(2) + "\n";
}

PersonalModel import_model(std::string_view text, int expected_dim) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("model record: ") + e.what());
    }
    if (j.value("format_version", -1) != kModelFormatVersion) throw Error("model record: unsupported format_version");
    PersonalModel m;
    try {
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        m.regularization_strength = j.at("lambda").get<double>();
        const auto& n = j.at("normalization");
        m.normalization.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.normalization.kept_columns = n.at("kept_columns").get<std::vector<std::size_t>>();
        m.normalization.mean = n.at("mean").get<std::vector<double>>();
        m.normalization.stddev = n.at("stddev").get<std::vector<double>>();
        m.normalization.pool_size = n.at("pool_size").get<std::size_t>();
        m.normalization.content_hash = n.at("content_hash").get<std::string>();
        const auto& t = j.at("trained_on");
        m.trained_on = {t.at("seed").get<std::size_t>(), t.at("direct").get<std::size_t>(),
                        t.at("propagated").get<std::size_t>()};
        m.session_id = j.value("session_id", "");
        m.version = j.at("model_version").get<int>();
        m.degenerate = j.value("degenerate", false);
    } catch (const json::exception& e) {
        throw Error(std::string("model record: ") + e.what());
    }
    const std::size_t d = m.weights.size();
    if (m.normalization.mean.size() != d || m.normalization.stddev.size() != d ||
        m.normalization.feature_names.size() != d || m.normalization.kept_columns.size() != d)
        throw DimensionError("model record: weights and normalization disagree on dimension");
    if (expected_dim >= 0 && d != static_cast<std::size_t>(expected_dim))
        throw DimensionError("model record: dimension " + std::to_string(d) + ", expected " +
                             std::to_string(expected_dim));
    return m;
}

}  // namespace pcwi
