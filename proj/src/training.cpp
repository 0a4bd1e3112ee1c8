#include "boxkg/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "boxkg/errors.hpp"
#include "boxkg/evaluation.hpp"

namespace boxkg::training {

void TrainConfig::validate() const {
    if (dim < 1) throw config_error("dim must be >= 1");
    if (!(beta > 0.0)) throw config_error("beta must be positive");
    if (lr < 0.0) throw config_error("lr must be >= 0");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (alpha < 0.0) throw config_error("alpha must be >= 0");
    if (w_tr < 0.0 || w_c < 0.0) throw config_error("constraint weights must be >= 0");
    if (l2_box < 0.0 || l2_other < 0.0) throw config_error("l2 coefficients must be >= 0");
    if (phi_samples < 1) throw config_error("phi_samples must be >= 1");
    if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
    if (patience < 1) throw config_error("patience must be >= 1");
}

ValMetric parse_val_metric(const std::string& name) {
    if (name == "mse") return ValMetric::Mse;
    if (name == "ndcg") return ValMetric::Ndcg;
    throw config_error("val_metric must be 'mse' or 'ndcg', got '" + name + "'");
}

std::string to_string(ValMetric metric) {
    return metric == ValMetric::Mse ? "mse" : "ndcg";
}

void TrainConfig::apply_override(const std::string& key, const std::string& value) {
    try {
        if (key == "dim") {
            dim = std::stoul(value);
        } else if (key == "beta") {
            beta = std::stod(value);
        } else if (key == "lr") {
            lr = std::stod(value);
        } else if (key == "batch_size") {
            batch_size = std::stoul(value);
        } else if (key == "alpha") {
            alpha = std::stod(value);
        } else if (key == "n_neg") {
            n_neg = std::stoul(value);
        } else if (key == "w_tr") {
            w_tr = std::stod(value);
        } else if (key == "w_c") {
            w_c = std::stod(value);
        } else if (key == "phi_samples") {
            phi_samples = std::stoul(value);
        } else if (key == "l2_box") {
            l2_box = std::stod(value);
        } else if (key == "l2_other") {
            l2_other = std::stod(value);
        } else if (key == "max_epochs") {
            max_epochs = std::stoul(value);
        } else if (key == "patience") {
            patience = std::stoul(value);
        } else if (key == "val_metric") {
            val_metric = parse_val_metric(value);
        } else if (key == "seed") {
            seed = std::stoull(value);
        } else if (key == "tail_identity") {
            if (value != "true" && value != "false") {
                throw config_error("tail_identity must be true or false");
            }
            tail_identity = value == "true";
        } else if (key == "threads") {
            threads = std::stoul(value);
        } else {
            throw config_error("unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw config_error("bad value '" + value + "' for config key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw config_error("bad value '" + value + "' for config key '" + key + "'");
    }
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("config file not found: " + path);
    TrainConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::size_t eq = line.find('=');
        std::string key, value;
        if (eq != std::string::npos) {
            key = line.substr(0, eq);
            value = line.substr(eq + 1);
        } else {
            key = line;
        }
        auto strip = [](std::string& s) {
            const auto begin = s.find_first_not_of(" \t\r");
            const auto end = s.find_last_not_of(" \t\r");
            s = begin == std::string::npos ? "" : s.substr(begin, end - begin + 1);
        };
        strip(key);
        strip(value);
        if (key.empty() && value.empty()) continue;
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            config.apply_override(key, value);
        } catch (const config_error& e) {
            throw config_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

std::vector<std::pair<std::string, std::string>> TrainConfig::items() const {
    auto fmt = [](double v) {
        std::ostringstream out;
        out << v;
        return out.str();
    };
    return {
        {"dim", std::to_string(dim)},
        {"beta", fmt(beta)},
        {"lr", fmt(lr)},
        {"batch_size", std::to_string(batch_size)},
        {"alpha", fmt(alpha)},
        {"n_neg", std::to_string(n_neg)},
        {"w_tr", fmt(w_tr)},
        {"w_c", fmt(w_c)},
        {"phi_samples", std::to_string(phi_samples)},
        {"l2_box", fmt(l2_box)},
        {"l2_other", fmt(l2_other)},
        {"max_epochs", std::to_string(max_epochs)},
        {"patience", std::to_string(patience)},
        {"val_metric", to_string(val_metric)},
        {"seed", std::to_string(seed)},
        {"tail_identity", tail_identity ? "true" : "false"},
        {"threads", std::to_string(threads)},
    };
}

AdamState::AdamState(std::size_t n_params) : m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw config_error("AdamState: parameter count mismatch");
    }
    ++t_;
    const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
        v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g * g;
        const double m_hat = m_[i] / corr1;
        const double v_hat = v_[i] / corr2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
    }
}

autodiff::NodeId positive_loss(model::GraphBuilder& graph,
                               const std::vector<data::WeightedTriple>& batch,
                               constraints::FaultCounter* faults) {
    if (batch.empty()) throw config_error("positive_loss: empty batch");
    autodiff::Tape& tape = graph.tape();
    autodiff::NodeId total = tape.constant(0.0);
    for (const data::WeightedTriple& triple : batch) {
        try {
            const autodiff::NodeId phi = graph.score_triple(triple.h, triple.r, triple.t);
            const autodiff::NodeId resid = tape.add_const(phi, -triple.s);
            total = tape.add(total, tape.mul(resid, resid));
        } catch (const degenerate_box_error&) {
            if (faults != nullptr) ++faults->faulted;
        }
    }
    return total;
}

autodiff::NodeId negative_loss(model::GraphBuilder& graph,
                               const std::vector<data::WeightedTriple>& negatives, double alpha,
                               constraints::FaultCounter* faults) {
    if (alpha < 0.0) throw config_error("negative_loss: alpha must be >= 0");
    autodiff::Tape& tape = graph.tape();
    autodiff::NodeId total = tape.constant(0.0);
    if (alpha == 0.0 || negatives.empty()) return total;
    for (const data::WeightedTriple& triple : negatives) {
        try {
            const autodiff::NodeId phi = graph.score_triple(triple.h, triple.r, triple.t);
            total = tape.add(total, tape.mul(phi, phi));
        } catch (const degenerate_box_error&) {
            if (faults != nullptr) ++faults->faulted;
        }
    }
    return tape.scale(total, alpha);
}

autodiff::NodeId l2_loss(model::GraphBuilder& graph, double l2_box, double l2_other,
                         double scale) {
    if (l2_box < 0.0 || l2_other < 0.0) throw config_error("l2_loss: coefficients must be >= 0");
    autodiff::Tape& tape = graph.tape();
    model::ParameterStore& store = graph.store();
    autodiff::NodeId box_term = tape.constant(0.0);
    autodiff::NodeId other_term = tape.constant(0.0);
    auto sum_sq = [&tape](autodiff::NodeId acc, autodiff::NodeId leaf) {
        return tape.add(acc, tape.sum_squares(leaf));
    };
    if (l2_box > 0.0) {
        for (std::size_t e = 0; e < store.n_entities(); ++e) {
            box_term = sum_sq(box_term, tape.param(store.entity_log_off(e),
                                                   store.entity_log_off_grad(e)));
        }
    }
    if (l2_other > 0.0) {
        for (std::size_t e = 0; e < store.n_entities(); ++e) {
            other_term = sum_sq(other_term, tape.param(store.entity_cen(e),
                                                       store.entity_cen_grad(e)));
        }
        for (std::size_t r = 0; r < store.n_relations(); ++r) {
            other_term = sum_sq(other_term, tape.param(store.f_tau(r), store.f_tau_grad(r)));
            other_term = sum_sq(other_term, tape.param(store.f_delta(r), store.f_delta_grad(r)));
            other_term = sum_sq(other_term, tape.param(store.g_tau(r), store.g_tau_grad(r)));
            other_term = sum_sq(other_term, tape.param(store.g_delta(r), store.g_delta_grad(r)));
        }
    }
    return tape.scale(
        tape.add(tape.scale(box_term, l2_box), tape.scale(other_term, l2_other)), scale);
}

// Triples per forward/backward segment. Loss terms are plain sums, so a big
// batch is split across several tapes whose leaf gradients accumulate into
// the store; this caps tape memory at segment size (matters at d = 300 with
// 4096-triple batches and 30 negatives each).
constexpr std::size_t kSegmentTriples = 8192;

StepReport train_step(autodiff::Tape& tape, model::ParameterStore& store, AdamState& adam,
                      const std::vector<data::WeightedTriple>& batch,
                      const std::vector<data::WeightedTriple>& negatives,
                      const constraints::ConstraintSet& ruleset,
                      const std::vector<geometry::GumbelBox>& phi_boxes,
                      const TrainConfig& config, double l2_scale) {
    store.zero_gradients();
    constraints::FaultCounter faults;
    StepReport report;

    // each segment: forward, record the component value, backward-accumulate
    auto run_segments = [&](const std::vector<data::WeightedTriple>& triples,
                            bool positive) -> double {
        double total = 0.0;
        for (std::size_t start = 0; start < triples.size(); start += kSegmentTriples) {
            const std::size_t stop = std::min(triples.size(), start + kSegmentTriples);
            const std::vector<data::WeightedTriple> segment(
                triples.begin() + static_cast<std::ptrdiff_t>(start),
                triples.begin() + static_cast<std::ptrdiff_t>(stop));
            tape.clear();
            model::GraphBuilder graph(tape, store);
            const autodiff::NodeId node =
                positive ? positive_loss(graph, segment, &faults)
                         : negative_loss(graph, segment, config.alpha, &faults);
            const double value = tape.value(node);
            total += value;
            if (!std::isfinite(value)) return value;
            tape.backward(node);
        }
        return total;
    };

    report.j1 = run_segments(batch, true);
    if (std::isfinite(report.j1) && config.alpha > 0.0 && !negatives.empty()) {
        report.j1 += run_segments(negatives, false);
    }

    if (std::isfinite(report.j1)) {
        tape.clear();
        model::GraphBuilder graph(tape, store);
        const autodiff::NodeId j2 =
            (config.w_tr > 0.0 || config.w_c > 0.0) && !ruleset.empty() && !phi_boxes.empty()
                ? constraints::constraint_loss(graph, ruleset, phi_boxes, config.w_tr,
                                               config.w_c, &faults)
                : tape.constant(0.0);
        const autodiff::NodeId l2 = l2_loss(graph, config.l2_box, config.l2_other, l2_scale);
        const autodiff::NodeId node = tape.add(j2, l2);
        report.j2 = tape.value(j2);
        report.l2 = tape.value(l2);
        if (std::isfinite(tape.value(node))) tape.backward(node);
    }

    report.loss = report.j1 + report.j2 + report.l2;
    report.faults = faults.faulted;
    if (!std::isfinite(report.loss)) {
        report.aborted = true;  // parameters untouched
        return report;
    }

    double norm_sq = 0.0;
    for (double g : store.all_gradients()) norm_sq += g * g;
    report.grad_norm = std::sqrt(norm_sq);
    adam.step(store.all_parameters(), store.all_gradients(), config.lr);
    return report;
}

FitResult fit(const data::Dataset& dataset, const constraints::ConstraintSet& ruleset,
              const TrainConfig& config, const SnapshotHook& on_improve) {
    config.validate();
    model::ParameterStore store = model::init_parameters(
        dataset.n_entities(), dataset.n_relations(), config.dim, config.beta, config.seed);
    store.tail_identity = config.tail_identity;
    AdamState adam(store.parameter_count());
    autodiff::Tape tape;

    const bool maximize = config.val_metric == ValMetric::Ndcg;
    auto validate_now = [&]() -> double {
        const bool have_val = !dataset.val().empty();
        if (config.val_metric == ValMetric::Mse) {
            return evaluation::confidence_metrics(have_val ? dataset.val() : dataset.train(),
                                                  store)
                .mse;
        }
        return evaluation::rank_queries(dataset, store,
                                        have_val ? evaluation::kRelevanceVal : 1u,
                                        std::max<std::size_t>(1, config.threads),
                                        have_val ? &dataset.val() : &dataset.train())
            .mean_linear;
    };

    FitResult result;
    result.best = store;  // placeholder until the first validation
    result.best_metric = maximize ? -1.0 : std::numeric_limits<double>::infinity();

    std::size_t consecutive_aborts = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto batches =
            data::batch_iter(dataset.train().size(), config.batch_size, config.seed, epoch);
        const double l2_scale = 1.0 / static_cast<double>(batches.size());
        EpochLog log;
        log.epoch = epoch;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            std::vector<data::WeightedTriple> batch;
            batch.reserve(batches[b].size());
            for (std::uint32_t idx : batches[b]) batch.push_back(dataset.train()[idx]);

            Rng step_rng(derive_seed(config.seed, epoch, b));
            std::vector<data::WeightedTriple> negatives;
            negatives.reserve(batch.size() * config.n_neg);
            if (config.alpha > 0.0 && config.n_neg > 0) {
                for (const data::WeightedTriple& triple : batch) {
                    auto negs = data::negative_sample(triple, config.n_neg, dataset, step_rng);
                    negatives.insert(negatives.end(), negs.begin(), negs.end());
                }
            }
            std::vector<geometry::GumbelBox> phi_boxes;
            if (!ruleset.empty() && (config.w_tr > 0.0 || config.w_c > 0.0)) {
                phi_boxes =
                    constraints::sample_boxes(config.phi_samples, config.dim, step_rng, store);
            }

            const StepReport report = train_step(tape, store, adam, batch, negatives, ruleset,
                                                 phi_boxes, config, l2_scale);
            result.total_faults += report.faults;
            if (report.aborted) {
                if (++consecutive_aborts >= 3) {
                    throw numeric_error("training aborted: 3 consecutive non-finite losses");
                }
                continue;
            }
            consecutive_aborts = 0;
            log.j1 += report.j1;
            log.j2 += report.j2;
            log.l2 += report.l2;
        }
        const auto n_batches = static_cast<double>(batches.size());
        log.j1 /= n_batches;
        log.j2 /= n_batches;
        log.l2 /= n_batches;
        log.val_metric = validate_now();
        log.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(log);
        result.epochs_run = epoch;

        const bool improved = result.log.size() == 1 ||
                              (maximize ? log.val_metric > result.best_metric
                                        : log.val_metric < result.best_metric);
        if (improved) {
            result.best_metric = log.val_metric;
            result.best_epoch = epoch;
            result.best = store;
            if (on_improve) on_improve(result.best, epoch);
        } else if (epoch - result.best_epoch >= config.patience) {
            break;
        }
    }
    result.final = store;
    return result;
}

}  // namespace boxkg::training
