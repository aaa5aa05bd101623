#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcwi/lexicon.hpp"

namespace pcwi {

enum class LabelSource { seed, direct, propagated };

std::string_view to_string(LabelSource s);

struct LabeledInstance {
    std::string word;
    std::vector<double> features;
    int label = 0;   // 1 = complex
    LabelSource source = LabelSource::direct;
    double weight = 1.0;
};

struct FitConfig {
    double regularization_strength = 1.0;
    double tolerance = 1e-8;      // on the gradient 2-norm
    int max_iterations = 1000;
};

struct TrainedOn {
    std::size_t seed = 0;
    std::size_t direct = 0;
    std::size_t propagated = 0;
};

// Per-user logistic model. Scores are P(complex | z-scored features).
struct PersonalModel {
    std::vector<double> weights;
    double bias = 0.0;
    double regularization_strength = 1.0;
    PoolStatistics normalization;
    TrainedOn trained_on;
    int version = 0;
    std::string session_id;
    // Single-class training data: weights are zero and the bias is the
    // Laplace-smoothed log-odds of the class rate.
    bool degenerate = false;
    int iterations = 0;
    double gradient_norm = 0.0;

    std::size_t dim() const { return weights.size(); }
};

inline constexpr int kModelFormatVersion = 1;

// Objective: sum_i w_i * [softplus(z_i) - y_i z_i] + lambda/2 * |weights|^2,
// z_i = weights . x_i + bias. The bias is not penalised.
double objective(std::span<const LabeledInstance> data, std::span<const double> weights, double bias, double lambda);

// Gradient of `objective` with respect to (weights..., bias).
std::vector<double> gradient(std::span<const LabeledInstance> data, std::span<const double> weights, double bias,
                             double lambda);
std::vector<double> gradient(std::span<const LabeledInstance> data, const PersonalModel& model);

struct FitTrace {
    std::vector<double> losses;   // objective after each accepted iterate
};

// Limited-memory BFGS from `initial` (weights..., bias); zeros when empty.
PersonalModel fit(std::span<const LabeledInstance> data, const FitConfig& config,
                  std::span<const double> initial = {}, FitTrace* trace = nullptr);

double predict_proba(const PersonalModel& model, std::span<const double> features);
int predict_label(const PersonalModel& model, std::span<const double> features);

// Scores a raw word through the model's stored normalization.
double predict_proba_raw(const PersonalModel& model, const RawLexiconRecord& record);

std::string export_model(const PersonalModel& model);
// expected_dim < 0 disables the dimension check.
PersonalModel import_model(std::string_view text, int expected_dim = -1);

}  // namespace pcwi
