#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "boxkg/constraints.hpp"
#include "boxkg/data.hpp"
#include "boxkg/model.hpp"

namespace boxkg::training {

enum class ValMetric { Mse, Ndcg };

struct TrainConfig {
    std::size_t dim = 64;
    double beta = 0.01;
    double lr = 1e-4;
    std::size_t batch_size = 1024;
    double alpha = 0.1;         // unobserved-fact penalty weight
    std::size_t n_neg = 30;     // negatives per positive
    double w_tr = 0.1;          // transitivity constraint weight
    double w_c = 0.1;           // composition constraint weight
    std::size_t phi_samples = 64;  // constraint box sample size per step
    double l2_box = 1.0;        // L2 on log box sizes
    double l2_other = 0.001;    // L2 on centers and transform parameters
    std::size_t max_epochs = 1000;
    std::size_t patience = 30;
    ValMetric val_metric = ValMetric::Mse;
    std::uint64_t seed = 0;
    bool tail_identity = false;  // single-transform ablation
    std::size_t threads = 1;     // worker cap for ranking validation

    void validate() const;  // throws config_error

    // key = value text file; '#' comments. Unknown keys are errors.
    static TrainConfig from_file(const std::string& path);
    void apply_override(const std::string& key, const std::string& value);
    std::vector<std::pair<std::string, std::string>> items() const;
};

ValMetric parse_val_metric(const std::string& name);
std::string to_string(ValMetric metric);

// Adam with bias correction; beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
class AdamState {
public:
    explicit AdamState(std::size_t n_params);

    // theta -= lr * m_hat / (sqrt(v_hat) + eps), one moment pair per value.
    void step(std::span<double> params, std::span<const double> grads, double lr);

    std::uint64_t steps_taken() const { return t_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
};

// Sum over the batch of (phi - s)^2; degenerate samples are skipped and
// counted.
autodiff::NodeId positive_loss(model::GraphBuilder& graph,
                               const std::vector<data::WeightedTriple>& batch,
                               constraints::FaultCounter* faults = nullptr);

// alpha * sum of phi^2 over corruptions.
autodiff::NodeId negative_loss(model::GraphBuilder& graph,
                               const std::vector<data::WeightedTriple>& negatives, double alpha,
                               constraints::FaultCounter* faults = nullptr);

// scale * (l2_box * sum ||log_off||^2 + l2_other * (sum ||cen||^2 +
// sum ||tau||^2 + sum ||delta||^2)). scale is 1/batches-per-epoch so the
// epoch total does not depend on batch size.
autodiff::NodeId l2_loss(model::GraphBuilder& graph, double l2_box, double l2_other,
                         double scale);

struct StepReport {
    double j1 = 0.0;
    double j2 = 0.0;
    double l2 = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::size_t faults = 0;
    bool aborted = false;  // non-finite loss; no update applied
};

// One optimization step over a batch: builds J1 + J2 + L2 on the tape, runs
// backward, applies Adam. A non-finite loss aborts the step before any
// parameter is touched.
StepReport train_step(autodiff::Tape& tape, model::ParameterStore& store, AdamState& adam,
                      const std::vector<data::WeightedTriple>& batch,
                      const std::vector<data::WeightedTriple>& negatives,
                      const constraints::ConstraintSet& ruleset,
                      const std::vector<geometry::GumbelBox>& phi_boxes,
                      const TrainConfig& config, double l2_scale);

struct EpochLog {
    std::size_t epoch = 0;
    double j1 = 0.0;
    double j2 = 0.0;
    double l2 = 0.0;
    double val_metric = 0.0;
    double wall_seconds = 0.0;
};

struct FitResult {
    model::ParameterStore best;   // snapshot at the best validation metric
    model::ParameterStore final;  // parameters after the last epoch
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_metric = 0.0;
    std::size_t epochs_run = 0;
    std::size_t total_faults = 0;
};

// Called after each validation improvement with the snapshot and its epoch.
using SnapshotHook = std::function<void(const model::ParameterStore&, std::size_t)>;

// Full training loop: epoch batches, per-step negatives and constraint boxes,
// per-epoch validation, early stopping on `patience` epochs without
// improvement, best-snapshot return. Three consecutive aborted steps raise
// numeric_error.
FitResult fit(const data::Dataset& dataset, const constraints::ConstraintSet& ruleset,
              const TrainConfig& config, const SnapshotHook& on_improve = {});

}  // namespace boxkg::training
