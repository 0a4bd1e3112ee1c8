#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "boxkg/autodiff.hpp"
#include "boxkg/geometry.hpp"

namespace boxkg::model {

// Per-relation affine action on a box: translation tau on the center and a
// positive scaling exp(delta) on the offset. Values reference rows inside a
// ParameterStore (or a detached copy).
struct BoxTransform {
    std::vector<double> tau;
    std::vector<double> delta;  // realized scaling is exp(delta)
};

// tau3 = tau1 + tau2, delta3 = delta1 + delta2; the transforms form an
// Abelian group under composition.
BoxTransform compose(const BoxTransform& t1, const BoxTransform& t2);
BoxTransform inverse(const BoxTransform& t);
BoxTransform identity_transform(std::size_t d);

// cen' = cen + tau, off' = off * exp(delta) elementwise.
geometry::GumbelBox apply_transform(const BoxTransform& t, const geometry::GumbelBox& b);

// All trainable values, flat row-major arrays with matching gradient slots.
// Entity rows: cen, log_off. Relation rows: head transform (f) tau/delta and
// tail transform (g) tau/delta.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(std::size_t n_entities, std::size_t n_relations, std::size_t d,
                   double beta);

    std::size_t n_entities() const { return n_entities_; }
    std::size_t n_relations() const { return n_relations_; }
    std::size_t dim() const { return d_; }
    double beta() const { return beta_; }
    void set_beta(double beta) { beta_ = beta; }

    // When set, the tail transform g_r acts as the identity (ablation switch).
    bool tail_identity = false;

    // Row accessors; id out of range throws lookup_error.
    std::span<double> entity_cen(std::size_t id);
    std::span<double> entity_log_off(std::size_t id);
    std::span<double> f_tau(std::size_t id);
    std::span<double> f_delta(std::size_t id);
    std::span<double> g_tau(std::size_t id);
    std::span<double> g_delta(std::size_t id);
    std::span<const double> entity_cen(std::size_t id) const;
    std::span<const double> entity_log_off(std::size_t id) const;
    std::span<const double> f_tau(std::size_t id) const;
    std::span<const double> f_delta(std::size_t id) const;
    std::span<const double> g_tau(std::size_t id) const;
    std::span<const double> g_delta(std::size_t id) const;

    // Matching gradient rows.
    double* entity_cen_grad(std::size_t id);
    double* entity_log_off_grad(std::size_t id);
    double* f_tau_grad(std::size_t id);
    double* f_delta_grad(std::size_t id);
    double* g_tau_grad(std::size_t id);
    double* g_delta_grad(std::size_t id);

    // Realized (non-differentiable) views.
    geometry::GumbelBox entity_box(std::size_t id) const;
    BoxTransform head_transform(std::size_t id) const;
    BoxTransform tail_transform(std::size_t id) const;

    void zero_gradients();

    // Flat access for the optimizer; parameters and gradients share one layout:
    // [entity cen | entity log_off | f tau | f delta | g tau | g delta].
    std::span<double> all_parameters() { return {params_.data(), params_.size()}; }
    std::span<double> all_gradients() { return {grads_.data(), grads_.size()}; }
    std::span<const double> all_parameters() const { return {params_.data(), params_.size()}; }
    std::size_t parameter_count() const { return params_.size(); }

    // Layout offsets into all_parameters().
    std::size_t offset_entity_cen() const { return 0; }
    std::size_t offset_entity_log_off() const { return n_entities_ * d_; }
    std::size_t offset_f_tau() const { return 2 * n_entities_ * d_; }
    std::size_t offset_f_delta() const { return offset_f_tau() + n_relations_ * d_; }
    std::size_t offset_g_tau() const { return offset_f_tau() + 2 * n_relations_ * d_; }
    std::size_t offset_g_delta() const { return offset_f_tau() + 3 * n_relations_ * d_; }

private:
    void check_entity(std::size_t id) const;
    void check_relation(std::size_t id) const;

    std::size_t n_entities_ = 0;
    std::size_t n_relations_ = 0;
    std::size_t d_ = 0;
    double beta_ = 0.01;
    std::vector<double> params_;
    std::vector<double> grads_;
};

// Entity cen ~ U(0,1)^d, log_off = log(0.2) + N(0, 0.01); relation tau ~
// N(0, 1e-3) per coordinate, delta = 0 (identity scaling). Deterministic
// given seed.
ParameterStore init_parameters(std::size_t n_entities, std::size_t n_relations,
                               std::size_t d, double beta, std::uint64_t seed);

// Confidence score phi(h, r, t): conditional probability of the f_r-mapped
// head box given the g_r-mapped tail box. Value-only fast path.
double score_triple(const ParameterStore& store, std::size_t h, std::size_t r,
                    std::size_t t);

// ---------------------------------------------------------------------------
// Tape-backed model graph for training and gradient checks.

// Transform leaves on a tape; scale holds the realized exp(delta).
struct TransformNodes {
    autodiff::NodeId tau;
    autodiff::NodeId scale;
};

// Caches per-entity/per-relation leaves and per-(relation, entity) mapped
// boxes so values shared by many triples in a batch are single fan-out nodes
// (gradients accumulate by summation). Essential for negative sampling, where
// dozens of corruptions share a head or tail.
class GraphBuilder {
public:
    GraphBuilder(autodiff::Tape& tape, ParameterStore& store);

    geometry::BoxNodes entity_box(std::size_t id);
    TransformNodes head_transform(std::size_t id);
    TransformNodes tail_transform(std::size_t id);

    geometry::BoxNodes apply(const TransformNodes& t, const geometry::BoxNodes& b);
    // Constant (detached) box, e.g. a constraint sample.
    geometry::BoxNodes constant_box(const geometry::GumbelBox& b);

    // phi(h, r, t) as a scalar node. Throws degenerate_box_error if the tail
    // box volume is below the floor.
    autodiff::NodeId score_triple(std::size_t h, std::size_t r, std::size_t t);

    autodiff::Tape& tape() { return tape_; }
    ParameterStore& store() { return store_; }
    double beta() const { return store_.beta(); }

private:
    // endpoints of a relation-mapped entity box; neg_max is kept because the
    // max-side logsumexp consumes negated maxima
    struct MappedBox {
        autodiff::NodeId min;
        autodiff::NodeId neg_max;
        autodiff::NodeId log_vol = -1;  // filled for tail boxes only
    };

    MappedBox& mapped(std::size_t r, std::size_t e, bool tail_side);

    autodiff::Tape& tape_;
    ParameterStore& store_;
    std::vector<autodiff::NodeId> ent_cen_, ent_off_;  // realized off = exp(log_off)
    std::vector<autodiff::NodeId> f_tau_, f_scale_, g_tau_, g_scale_;
    std::unordered_map<std::uint64_t, MappedBox> head_cache_, tail_cache_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: magic "BXKG", u32 version, u32 d, u32 n_entities,
// u32 n_relations, f64 beta (all little-endian), then f64 arrays in order:
// entity cen, entity log_off, f tau, f delta, g tau, g delta.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterStore& store, const std::string& path);
ParameterStore load_checkpoint(const std::string& path);

}  // namespace boxkg::model
