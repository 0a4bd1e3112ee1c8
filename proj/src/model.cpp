#include "boxkg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "boxkg/errors.hpp"
#include "boxkg/numeric.hpp"
#include "boxkg/rng.hpp"

namespace boxkg::model {

BoxTransform compose(const BoxTransform& t1, const BoxTransform& t2) {
    if (t1.tau.size() != t2.tau.size()) {
        throw config_error("compose: dimension mismatch");
    }
    BoxTransform out;
    out.tau.resize(t1.tau.size());
    out.delta.resize(t1.delta.size());
    for (std::size_t i = 0; i < t1.tau.size(); ++i) {
        out.tau[i] = t1.tau[i] + t2.tau[i];
        out.delta[i] = t1.delta[i] + t2.delta[i];
    }
    return out;
}

BoxTransform inverse(const BoxTransform& t) {
    BoxTransform out;
    out.tau.resize(t.tau.size());
    out.delta.resize(t.delta.size());
    for (std::size_t i = 0; i < t.tau.size(); ++i) {
        out.tau[i] = -t.tau[i];
        out.delta[i] = -t.delta[i];
    }
    return out;
}

BoxTransform identity_transform(std::size_t d) {
    BoxTransform out;
    out.tau.assign(d, 0.0);
    out.delta.assign(d, 0.0);
    return out;
}

geometry::GumbelBox apply_transform(const BoxTransform& t, const geometry::GumbelBox& b) {
    if (t.tau.size() != b.dim()) {
        throw config_error("apply_transform: dimension mismatch");
    }
    std::vector<double> cen(b.dim()), off(b.dim());
    for (std::size_t i = 0; i < b.dim(); ++i) {
        cen[i] = b.cen[i] + t.tau[i];
        off[i] = b.off[i] * std::exp(t.delta[i]);
    }
    return geometry::GumbelBox(std::move(cen), std::move(off));
}

ParameterStore::ParameterStore(std::size_t n_entities, std::size_t n_relations,
                               std::size_t d, double beta)
    : n_entities_(n_entities), n_relations_(n_relations), d_(d), beta_(beta) {
    if (n_entities < 1 || n_relations < 1 || d < 1) {
        throw config_error("ParameterStore: counts and dimension must be >= 1");
    }
    if (!(beta > 0.0)) {
        throw config_error("ParameterStore: beta must be positive");
    }
    params_.assign((2 * n_entities_ + 4 * n_relations_) * d_, 0.0);
    grads_.assign(params_.size(), 0.0);
}

void ParameterStore::check_entity(std::size_t id) const {
    if (id >= n_entities_) {
        throw lookup_error("entity id " + std::to_string(id) + " out of range [0, " +
                           std::to_string(n_entities_) + ")");
    }
}

void ParameterStore::check_relation(std::size_t id) const {
    if (id >= n_relations_) {
        throw lookup_error("relation id " + std::to_string(id) + " out of range [0, " +
                           std::to_string(n_relations_) + ")");
    }
}

std::span<double> ParameterStore::entity_cen(std::size_t id) {
    check_entity(id);
    return {params_.data() + offset_entity_cen() + id * d_, d_};
}
std::span<double> ParameterStore::entity_log_off(std::size_t id) {
    check_entity(id);
    return {params_.data() + offset_entity_log_off() + id * d_, d_};
}
std::span<double> ParameterStore::f_tau(std::size_t id) {
    check_relation(id);
    return {params_.data() + offset_f_tau() + id * d_, d_};
}
std::span<double> ParameterStore::f_delta(std::size_t id) {
    check_relation(id);
    return {params_.data() + offset_f_delta() + id * d_, d_};
}
std::span<double> ParameterStore::g_tau(std::size_t id) {
    check_relation(id);
    return {params_.data() + offset_g_tau() + id * d_, d_};
}
std::span<double> ParameterStore::g_delta(std::size_t id) {
    check_relation(id);
    return {params_.data() + offset_g_delta() + id * d_, d_};
}

std::span<const double> ParameterStore::entity_cen(std::size_t id) const {
    return const_cast<ParameterStore*>(this)->entity_cen(id);
}
std::span<const double> ParameterStore::entity_log_off(std::size_t id) const {
    return const_cast<ParameterStore*>(this)->entity_log_off(id);
}
std::span<const double> ParameterStore::f_tau(std::size_t id) const {
    return const_cast<ParameterStore*>(this)->f_tau(id);
}
std::span<const double> ParameterStore::f_delta(std::size_t id) const {
    return const_cast<ParameterStore*>(this)->f_delta(id);
}
std::span<const double> ParameterStore::g_tau(std::size_t id) const {
    return const_cast<ParameterStore*>(this)->g_tau(id);
}
std::span<const double> ParameterStore::g_delta(std::size_t id) const {
    return const_cast<ParameterStore*>(this)->g_delta(id);
}

double* ParameterStore::entity_cen_grad(std::size_t id) {
    check_entity(id);
    return grads_.data() + offset_entity_cen() + id * d_;
}
double* ParameterStore::entity_log_off_grad(std::size_t id) {
    check_entity(id);
    return grads_.data() + offset_entity_log_off() + id * d_;
}
double* ParameterStore::f_tau_grad(std::size_t id) {
    check_relation(id);
    return grads_.data() + offset_f_tau() + id * d_;
}
double* ParameterStore::f_delta_grad(std::size_t id) {
    check_relation(id);
    return grads_.data() + offset_f_delta() + id * d_;
}
double* ParameterStore::g_tau_grad(std::size_t id) {
    check_relation(id);
    return grads_.data() + offset_g_tau() + id * d_;
}
double* ParameterStore::g_delta_grad(std::size_t id) {
    check_relation(id);
    return grads_.data() + offset_g_delta() + id * d_;
}

geometry::GumbelBox ParameterStore::entity_box(std::size_t id) const {
    auto c = entity_cen(id);
    auto lo = entity_log_off(id);
    std::vector<double> cen(c.begin(), c.end());
    std::vector<double> off(d_);
    for (std::size_t i = 0; i < d_; ++i) off[i] = std::exp(lo[i]);
    return geometry::GumbelBox(std::move(cen), std::move(off));
}

BoxTransform ParameterStore::head_transform(std::size_t id) const {
    auto t = f_tau(id);
    auto dl = f_delta(id);
    return BoxTransform{{t.begin(), t.end()}, {dl.begin(), dl.end()}};
}

BoxTransform ParameterStore::tail_transform(std::size_t id) const {
    if (tail_identity) return identity_transform(d_);
    auto t = g_tau(id);
    auto dl = g_delta(id);
    return BoxTransform{{t.begin(), t.end()}, {dl.begin(), dl.end()}};
}

void ParameterStore::zero_gradients() {
    std::fill(grads_.begin(), grads_.end(), 0.0);
}

ParameterStore init_parameters(std::size_t n_entities, std::size_t n_relations,
                               std::size_t d, double beta, std::uint64_t seed) {
    ParameterStore store(n_entities, n_relations, d, beta);
    Rng rng(seed);
    const double log_base = std::log(0.2);
    for (std::size_t e = 0; e < n_entities; ++e) {
        auto cen = store.entity_cen(e);
        auto off = store.entity_log_off(e);
        for (std::size_t i = 0; i < d; ++i) cen[i] = rng.uniform();
        for (std::size_t i = 0; i < d; ++i) off[i] = log_base + rng.normal(0.0, 0.01);
    }
    for (std::size_t r = 0; r < n_relations; ++r) {
        auto ft = store.f_tau(r);
        auto gt = store.g_tau(r);
        for (std::size_t i = 0; i < d; ++i) ft[i] = rng.normal(0.0, 1e-3);
        for (std::size_t i = 0; i < d; ++i) gt[i] = rng.normal(0.0, 1e-3);
        // f_delta, g_delta stay 0: identity scaling
    }
    return store;
}

double score_triple(const ParameterStore& store, std::size_t h, std::size_t r,
                    std::size_t t) {
    const geometry::GumbelBox head = apply_transform(store.head_transform(r), store.entity_box(h));
    const geometry::GumbelBox tail = apply_transform(store.tail_transform(r), store.entity_box(t));
    return geometry::conditional_prob(head, tail, store.beta());
}

GraphBuilder::GraphBuilder(autodiff::Tape& tape, ParameterStore& store)
    : tape_(tape), store_(store) {
    ent_cen_.assign(store.n_entities(), -1);
    ent_off_.assign(store.n_entities(), -1);
    f_tau_.assign(store.n_relations(), -1);
    f_scale_.assign(store.n_relations(), -1);
    g_tau_.assign(store.n_relations(), -1);
    g_scale_.assign(store.n_relations(), -1);
}

geometry::BoxNodes GraphBuilder::entity_box(std::size_t id) {
    if (ent_cen_[id] < 0) {
        ent_cen_[id] = tape_.param(store_.entity_cen(id), store_.entity_cen_grad(id));
        ent_off_[id] =
            tape_.exp(tape_.param(store_.entity_log_off(id), store_.entity_log_off_grad(id)));
    }
    return {ent_cen_[id], ent_off_[id]};
}

TransformNodes GraphBuilder::head_transform(std::size_t id) {
    if (f_tau_[id] < 0) {
        f_tau_[id] = tape_.param(store_.f_tau(id), store_.f_tau_grad(id));
        f_scale_[id] = tape_.exp(tape_.param(store_.f_delta(id), store_.f_delta_grad(id)));
    }
    return {f_tau_[id], f_scale_[id]};
}

TransformNodes GraphBuilder::tail_transform(std::size_t id) {
    if (g_tau_[id] < 0) {
        g_tau_[id] = tape_.param(store_.g_tau(id), store_.g_tau_grad(id));
        g_scale_[id] = tape_.exp(tape_.param(store_.g_delta(id), store_.g_delta_grad(id)));
    }
    return {g_tau_[id], g_scale_[id]};
}

geometry::BoxNodes GraphBuilder::apply(const TransformNodes& t, const geometry::BoxNodes& b) {
    return {tape_.add(b.cen, t.tau), tape_.mul(b.off, t.scale)};
}

geometry::BoxNodes GraphBuilder::constant_box(const geometry::GumbelBox& b) {
    return {tape_.constant({b.cen.data(), b.cen.size()}),
            tape_.constant({b.off.data(), b.off.size()})};
}

GraphBuilder::MappedBox& GraphBuilder::mapped(std::size_t r, std::size_t e, bool tail_side) {
    auto& cache = tail_side ? tail_cache_ : head_cache_;
    const std::uint64_t key = (static_cast<std::uint64_t>(r) << 32) | e;
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    const geometry::BoxNodes base = entity_box(e);
    geometry::BoxNodes box = base;
    if (!tail_side) {
        box = apply(head_transform(r), base);
    } else if (!store_.tail_identity) {
        box = apply(tail_transform(r), base);
    }
    MappedBox entry;
    entry.min = tape_.sub(box.cen, box.off);
    entry.neg_max = tape_.neg(tape_.add(box.cen, box.off));
    if (tail_side) {
        // side lengths as -(neg_max + min) so intersections built from the
        // same nodes compare against them monotonically
        const autodiff::NodeId side = tape_.neg(tape_.add(entry.neg_max, entry.min));
        entry.log_vol = tape_.sum(tape_.log_softplus(
            tape_.add_const(side, -2.0 * numeric::kEulerGamma * store_.beta()), store_.beta()));
    }
    return cache.emplace(key, entry).first->second;
}

autodiff::NodeId GraphBuilder::score_triple(std::size_t h, std::size_t r, std::size_t t) {
    if (h >= store_.n_entities() || t >= store_.n_entities()) {
        throw lookup_error("score_triple: entity id out of range");
    }
    if (r >= store_.n_relations()) {
        throw lookup_error("score_triple: relation id out of range");
    }
    const double beta = store_.beta();
    const MappedBox& head = mapped(r, h, false);
    const MappedBox& tail = mapped(r, t, true);
    if (tape_.value(tail.log_vol) < std::log(numeric::kVolumeFloor)) {
        throw degenerate_box_error("score_triple: tail box volume below floor");
    }
    const autodiff::NodeId lo = tape_.logsumexp_pair(head.min, tail.min, beta);
    const autodiff::NodeId neg_hi = tape_.logsumexp_pair(head.neg_max, tail.neg_max, beta);
    const autodiff::NodeId side = tape_.neg(tape_.add(neg_hi, lo));
    const autodiff::NodeId log_num = tape_.sum(tape_.log_softplus(
        tape_.add_const(side, -2.0 * numeric::kEulerGamma * beta), beta));
    return tape_.exp(tape_.sub(log_num, tail.log_vol));
}

// -- checkpoint io -----------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::string& path) {
    std::string out;
    out.reserve(24 + store.parameter_count() * 8);
    out.append("BXKG");
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(store.dim()));
    put_u32(out, static_cast<std::uint32_t>(store.n_entities()));
    put_u32(out, static_cast<std::uint32_t>(store.n_relations()));
    put_f64(out, store.beta());
    // all_parameters() layout already matches the on-disk array order
    for (double v : store.all_parameters()) put_f64(out, v);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw config_error("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw config_error("short write on checkpoint: " + path);
}

ParameterStore load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open checkpoint: " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < 28 || data.compare(0, 4, "BXKG") != 0) {
        throw config_error("bad checkpoint: missing BXKG magic in " + path);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    const std::uint32_t version = get_u32(p + 4);
    if (version != kCheckpointVersion) {
        throw config_error("bad checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t d = get_u32(p + 8);
    const std::uint32_t n_entities = get_u32(p + 12);
    const std::uint32_t n_relations = get_u32(p + 16);
    const double beta = get_f64(p + 20);
    ParameterStore store(n_entities, n_relations, d, beta);
    const std::size_t expect = 28 + store.parameter_count() * 8;
    if (data.size() != expect) {
        throw config_error("bad checkpoint: expected " + std::to_string(expect) +
                           " bytes, found " + std::to_string(data.size()));
    }
    auto params = store.all_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] = get_f64(p + 28 + i * 8);
    }
    return store;
}

}  // namespace boxkg::model
