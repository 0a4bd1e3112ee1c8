// boxkg: train, evaluate, and inspect uncertain knowledge graph box models.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "boxkg/constraints.hpp"
#include "boxkg/data.hpp"
#include "boxkg/errors.hpp"
#include "boxkg/evaluation.hpp"
#include "boxkg/geometry.hpp"
#include "boxkg/model.hpp"
#include "boxkg/numeric.hpp"
#include "boxkg/rng.hpp"
#include "boxkg/synthetic.hpp"
#include "boxkg/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace boxkg;

namespace {

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot hash missing file: " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

struct DataArgs {
    std::string dir;
    data::DatasetPaths paths() const {
        const fs::path base(dir);
        return {(base / "train.tsv").string(), (base / "val.tsv").string(),
                (base / "test.tsv").string(), (base / "entity_id.tsv").string(),
                (base / "relation_id.tsv").string()};
    }
};

void save_names_sidecar(const data::Dataset& dataset, const std::string& ckpt_path) {
    std::ofstream f(ckpt_path + ".names", std::ios::trunc);
    if (!f) throw config_error("cannot write names sidecar for " + ckpt_path);
    for (std::size_t i = 0; i < dataset.entity_names().size(); ++i) {
        f << "E\t" << i << '\t' << dataset.entity_names()[i] << '\n';
    }
    for (std::size_t i = 0; i < dataset.relation_names().size(); ++i) {
        f << "R\t" << i << '\t' << dataset.relation_names()[i] << '\n';
    }
}

struct NameTable {
    std::vector<std::string> entities;
    std::vector<std::string> relations;
};

NameTable load_names_sidecar(const std::string& ckpt_path) {
    const std::string path = ckpt_path + ".names";
    std::ifstream f(path);
    if (!f) throw config_error("names sidecar not found: " + path);
    NameTable table;
    std::string kind;
    std::size_t id;
    std::string rest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": expected kind\tid\tname");
        }
        kind = line.substr(0, tab1);
        id = std::stoul(line.substr(tab1 + 1, tab2 - tab1 - 1));
        rest = line.substr(tab2 + 1);
        auto& list = kind == "E" ? table.entities : table.relations;
        if (id != list.size()) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": ids must be dense");
        }
        list.push_back(rest);
    }
    return table;
}

std::uint32_t resolve_name(const std::vector<std::string>& vocab, const std::string& name,
                           const char* what) {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (vocab[i] == name) return static_cast<std::uint32_t>(i);
    }
    // suggest a few near matches to make typos findable
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const std::string& candidate : vocab) {
        std::size_t dist = std::max(candidate.size(), name.size()) -
                           std::min(candidate.size(), name.size());
        const std::size_t n = std::min(candidate.size(), name.size());
        for (std::size_t i = 0; i < n; ++i) dist += candidate[i] != name[i] ? 1 : 0;
        scored.emplace_back(dist, candidate);
    }
    std::sort(scored.begin(), scored.end());
    std::string msg = std::string("unknown ") + what + " '" + name + "'; nearest:";
    for (std::size_t i = 0; i < scored.size() && i < 5; ++i) msg += " " + scored[i].second;
    throw lookup_error(msg);
}

json config_to_json(const training::TrainConfig& config) {
    json out;
    for (const auto& [key, value] : config.items()) out[key] = value;
    return out;
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const DataArgs& data_args, const std::string& rules_path, std::string out_dir,
              std::optional<std::uint64_t> seed_flag) {
    training::TrainConfig config = config_path.empty()
                                       ? training::TrainConfig{}
                                       : training::TrainConfig::from_file(config_path);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw config_error("--set expects key=value, got " + kv);
        config.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_flag) config.seed = *seed_flag;
    config.validate();

    const data::DatasetPaths paths = data_args.paths();
    const data::Dataset dataset = data::Dataset::load(paths);
    constraints::ConstraintSet ruleset;
    if (!rules_path.empty()) ruleset = constraints::load_constraints(rules_path, dataset);

    // hash inputs before anything runs
    json hashes;
    for (const std::string& p : {paths.train, paths.val, paths.test, paths.entity_vocab,
                                 paths.relation_vocab}) {
        hashes[fs::path(p).filename().string()] = hex64(fnv1a_file(p));
    }
    if (!rules_path.empty()) hashes["rules"] = hex64(fnv1a_file(rules_path));
    std::uint64_t combined = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : hashes.items()) {
        for (char ch : v.get<std::string>()) {
            combined ^= static_cast<unsigned char>(ch);
            combined *= 0x100000001b3ULL;
        }
    }

    if (out_dir.empty()) {
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now).count();
        out_dir = "runs/" + std::to_string(secs) + "-" + hex64(combined).substr(0, 8);
    }
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    json manifest;
    manifest["config"] = config_to_json(config);
    manifest["data_dir"] = data_args.dir;
    manifest["rules"] = rules_path;
    manifest["seed"] = config.seed;
    manifest["input_hashes"] = hashes;
    manifest["input_hash"] = hex64(combined);
    manifest["output_dir"] = out_dir;
    {
        std::ofstream mf(out / "manifest.json", std::ios::trunc);
        mf << manifest.dump(2) << '\n';
    }

    const std::string ckpt_path = (out / "best.ckpt").string();
    auto on_improve = [&](const model::ParameterStore& snapshot, std::size_t epoch) {
        model::save_checkpoint(snapshot, ckpt_path);
        std::fprintf(stderr, "epoch %zu: improved validation metric, checkpoint written\n",
                     epoch);
    };
    const training::FitResult result = training::fit(dataset, ruleset, config, on_improve);

    model::save_checkpoint(result.best, ckpt_path);
    save_names_sidecar(dataset, ckpt_path);
    {
        std::ofstream lf(out / "train_log.csv", std::ios::trunc);
        lf << "epoch,J1,J2,L2,val_metric,wall_seconds\n";
        char buf[256];
        for (const training::EpochLog& row : result.log) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.3f\n", row.epoch,
                          row.j1, row.j2, row.l2, row.val_metric, row.wall_seconds);
            lf << buf;
        }
    }
    std::printf("trained %zu epochs; best %s = %.6g at epoch %zu\n", result.epochs_run,
                training::to_string(config.val_metric).c_str(), result.best_metric,
                result.best_epoch);
    std::printf("artifacts: %s/manifest.json, train_log.csv, best.ckpt\n", out_dir.c_str());
    return 0;
}

int run_eval(const std::string& ckpt, const DataArgs& data_args, const std::string& task,
             const std::string& out_path, unsigned relevance_splits, std::size_t threads) {
    const model::ParameterStore store = model::load_checkpoint(ckpt);
    const data::Dataset dataset = data::Dataset::load(data_args.paths());
    if (store.n_entities() != dataset.n_entities() ||
        store.n_relations() != dataset.n_relations()) {
        throw config_error("checkpoint vocabulary (" + std::to_string(store.n_entities()) + "/" +
                           std::to_string(store.n_relations()) +
                           ") does not match dataset (" + std::to_string(dataset.n_entities()) +
                           "/" + std::to_string(dataset.n_relations()) + ")");
    }

    std::ofstream metrics_file;
    if (!out_path.empty()) {
        metrics_file.open(out_path, std::ios::trunc);
        if (!metrics_file) throw config_error("cannot open " + out_path);
        metrics_file << "metric,value\n";
    }
    auto emit = [&](const std::string& name, double value) {
        std::printf("%s,%.6f\n", name.c_str(), value);
        if (metrics_file.is_open()) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%s,%.17g\n", name.c_str(), value);
            metrics_file << buf;
        }
    };

    if (task == "confidence") {
        const auto metrics = evaluation::confidence_metrics(dataset.test(), store);
        emit("mse", metrics.mse);
        emit("mae", metrics.mae);
        if (metrics.faults > 0) {
            std::fprintf(stderr, "warning: %zu degenerate predictions scored as 0\n",
                         metrics.faults);
        }
    } else if (task == "ranking") {
        const auto metrics = evaluation::rank_queries(dataset, store, relevance_splits, threads);
        emit("ndcg_linear", metrics.mean_linear);
        emit("ndcg_exponential", metrics.mean_exponential);
        if (!out_path.empty()) {
            const std::string per_query = out_path + ".per_query.csv";
            std::ofstream pq(per_query, std::ios::trunc);
            pq << "head,relation,ndcg_linear,ndcg_exponential\n";
            for (const auto& row : metrics.per_query) {
                pq << row.query.h << ',' << row.query.r << ',' << row.ndcg_linear << ','
                   << row.ndcg_exponential << '\n';
            }
        }
        if (metrics.skipped > 0) {
            std::fprintf(stderr, "warning: %zu queries skipped (all-zero gains)\n",
                         metrics.skipped);
        }
    } else {
        throw config_error("task must be 'confidence' or 'ranking', got '" + task + "'");
    }
    return 0;
}

int run_predict(const std::string& ckpt, const std::string& h, const std::string& r,
                const std::string& t) {
    const model::ParameterStore store = model::load_checkpoint(ckpt);
    const NameTable names = load_names_sidecar(ckpt);
    const std::uint32_t hid = resolve_name(names.entities, h, "entity");
    const std::uint32_t rid = resolve_name(names.relations, r, "relation");
    const std::uint32_t tid = resolve_name(names.entities, t, "entity");
    const double phi = std::clamp(model::score_triple(store, hid, rid, tid), 0.0, 1.0);
    std::printf("%.6f\n", phi);
    return 0;
}

int run_rank(const std::string& ckpt, const std::string& h, const std::string& r,
             std::size_t k) {
    const model::ParameterStore store = model::load_checkpoint(ckpt);
    const NameTable names = load_names_sidecar(ckpt);
    const std::uint32_t hid = resolve_name(names.entities, h, "entity");
    const std::uint32_t rid = resolve_name(names.relations, r, "relation");
    std::vector<std::pair<double, std::uint32_t>> scored(store.n_entities());
    for (std::uint32_t t = 0; t < store.n_entities(); ++t) {
        double phi = 0.0;
        try {
            phi = model::score_triple(store, hid, rid, t);
        } catch (const degenerate_box_error&) {
        }
        if (!std::isfinite(phi)) phi = 0.0;
        scored[t] = {-phi, t};
    }
    std::sort(scored.begin(), scored.end());
    const std::size_t limit = std::min<std::size_t>(k, scored.size());
    for (std::size_t i = 0; i < limit; ++i) {
        std::printf("%s\t%.6f\n", names.entities[scored[i].second].c_str(),
                    std::clamp(-scored[i].first, 0.0, 1.0));
    }
    return 0;
}

int run_inspect(const std::string& ckpt, const std::string& r, std::size_t k,
                const std::string& data_dir) {
    const model::ParameterStore store = model::load_checkpoint(ckpt);
    const NameTable names = load_names_sidecar(ckpt);
    const std::uint32_t rid = resolve_name(names.relations, r, "relation");

    std::vector<std::uint32_t> candidates(store.n_entities());
    for (std::uint32_t i = 0; i < store.n_entities(); ++i) candidates[i] = i;
    std::vector<std::uint32_t> coverage_set = candidates;
    if (!data_dir.empty()) {
        // narrow the coverage set to observed tails of r
        DataArgs args{data_dir};
        const data::Dataset dataset = data::Dataset::load(args.paths());
        std::unordered_set<std::uint32_t> tails;
        for (const auto* split : {&dataset.train(), &dataset.val(), &dataset.test()}) {
            for (const data::WeightedTriple& triple : *split) {
                if (triple.r == rid) tails.insert(triple.t);
            }
        }
        coverage_set.assign(tails.begin(), tails.end());
        std::sort(coverage_set.begin(), coverage_set.end());
    }
    const auto rows = evaluation::volume_report(store, rid, candidates, coverage_set, k);
    for (const auto& row : rows) {
        std::printf("%s\t%zu\n", names.entities[row.entity].c_str(), row.coverage);
    }
    return 0;
}

// Central-difference check of the full loss gradient on a toy model.
int run_gradcheck(std::size_t n_seeds) {
    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t trial = 0; trial < n_seeds; ++trial) {
        const std::uint64_t seed = 1000 + trial;
        synthetic::PlantedDataset planted = synthetic::make_planted_dataset(10, 2, 40, 4, 0.1, seed);
        training::TrainConfig config;
        config.dim = 4;
        config.beta = 0.1;
        config.alpha = 0.1;
        config.n_neg = 4;
        config.w_tr = 0.1;
        config.w_c = 0.1;
        config.seed = seed;

        model::ParameterStore store =
            model::init_parameters(10, 2, config.dim, config.beta, seed);
        constraints::ConstraintSet ruleset;
        ruleset.transitive.push_back(0);
        ruleset.compositions.emplace_back(0, 1, 1);

        Rng rng(derive_seed(seed, 7, 7));
        std::vector<data::WeightedTriple> batch(planted.dataset.train().begin(),
                                                planted.dataset.train().begin() + 16);
        std::vector<data::WeightedTriple> negatives;
        for (const auto& triple : batch) {
            auto negs = data::negative_sample(triple, config.n_neg, planted.dataset, rng);
            negatives.insert(negatives.end(), negs.begin(), negs.end());
        }
        const auto phi_boxes = constraints::sample_boxes(8, config.dim, rng, store);

        auto loss_value = [&](model::ParameterStore& s) {
            autodiff::Tape tape;
            model::GraphBuilder graph(tape, s);
            const auto j1 = tape.add(training::positive_loss(graph, batch),
                                     training::negative_loss(graph, negatives, config.alpha));
            const auto j2 = constraints::constraint_loss(graph, ruleset, phi_boxes, config.w_tr,
                                                         config.w_c);
            const auto l2 = training::l2_loss(graph, config.l2_box, config.l2_other, 1.0);
            return tape.value(tape.add(tape.add(j1, j2), l2));
        };

        autodiff::Tape tape;
        store.zero_gradients();
        model::GraphBuilder graph(tape, store);
        const auto j1 = tape.add(training::positive_loss(graph, batch),
                                 training::negative_loss(graph, negatives, config.alpha));
        const auto j2 =
            constraints::constraint_loss(graph, ruleset, phi_boxes, config.w_tr, config.w_c);
        const auto l2 = training::l2_loss(graph, config.l2_box, config.l2_other, 1.0);
        tape.backward(tape.add(tape.add(j1, j2), l2));

        auto params = store.all_parameters();
        auto grads = store.all_gradients();
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + eps;
            const double up = loss_value(store);
            params[i] = saved - eps;
            const double down = loss_value(store);
            params[i] = saved;
            const double numeric = (up - down) / (2 * eps);
            const double rel =
                std::abs(grads[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    std::printf("gradcheck: max relative error %.3g over %zu seeds (tolerance 1e-4)\n", worst,
                n_seeds);
    return worst < 1e-4 ? 0 : 1;
}

int run_mccheck(std::size_t n_boxes, std::size_t n_samples) {
    Rng rng(20240601);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_boxes; ++i) {
        const std::size_t d = 1 + rng.below(3);
        std::vector<double> cen(d), off(d);
        for (std::size_t k = 0; k < d; ++k) {
            cen[k] = rng.uniform(-1.0, 1.0);
            off[k] = rng.uniform(0.25, 1.0);
        }
        geometry::GumbelBox box(cen, off);
        double min_side = 1e300;
        for (std::size_t k = 0; k < d; ++k) min_side = std::min(min_side, 2 * off[k]);
        const double beta = min_side / rng.uniform(10.0, 100.0);
        const double closed = geometry::expected_volume(box, beta);
        const double mc = geometry::mc_volume_oracle(box, beta, n_samples, rng.next_u64());
        worst = std::max(worst, std::abs(closed - mc) / mc);
    }
    std::printf("mccheck: worst relative deviation %.4f over %zu boxes (tolerance 0.02)\n",
                worst, n_boxes);
    return worst < 0.02 ? 0 : 1;
}

}  // namespace

namespace {

int run_main(int argc, char** argv) {
    CLI::App app{"uncertain knowledge graph embedding with Gumbel boxes"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a model and write run artifacts");
    std::string config_path, rules_path, out_dir, data_dir;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed_flag;
    train->add_option("--config", config_path, "key = value config file");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--rules", rules_path, "constraint declarations file");
    train->add_option("--out", out_dir, "output directory (default runs/<time>-<hash>)");
    train->add_option("--set", overrides, "config override key=value (repeatable)");
    std::uint64_t seed_value = 0;
    auto* seed_opt = train->add_option("--seed", seed_value, "override the config seed");
    std::size_t train_threads = 1;
    auto* threads_opt = train->add_option(
        "--threads", train_threads, "worker cap for ranking validation (= --set threads=N)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_task = "confidence", eval_out;
    std::string eval_data;
    bool eval_all_splits = false;
    std::size_t eval_threads = 1;
    eval->add_option("--checkpoint", eval_ckpt)->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--task", eval_task, "confidence | ranking");
    eval->add_option("--out", eval_out, "metrics CSV path");
    eval->add_option("--threads", eval_threads, "ranking worker cap");
    eval->add_flag("--relevance-all-splits", eval_all_splits,
                   "take ranking gains from train+val+test instead of test only");

    // predict
    auto* predict = app.add_subcommand("predict", "print phi(h, r, t)");
    std::string p_ckpt, p_h, p_r, p_t;
    predict->add_option("--checkpoint", p_ckpt)->required();
    predict->add_option("head", p_h)->required();
    predict->add_option("relation", p_r)->required();
    predict->add_option("tail", p_t)->required();

    // rank
    auto* rank = app.add_subcommand("rank", "top-k tails for (h, r, ?)");
    std::string k_ckpt, k_h, k_r;
    std::size_t k_k = 10;
    rank->add_option("--checkpoint", k_ckpt)->required();
    rank->add_option("head", k_h)->required();
    rank->add_option("relation", k_r)->required();
    rank->add_option("-k", k_k, "number of tails to print");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "volume/coverage report for a relation");
    std::string i_ckpt, i_r, i_data;
    std::size_t i_k = 10;
    inspect->add_option("--checkpoint", i_ckpt)->required();
    inspect->add_option("relation", i_r)->required();
    inspect->add_option("-k", i_k, "rows from each end");
    inspect->add_option("--data", i_data, "restrict coverage to observed tails of the relation");

    // gradcheck / mccheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::size_t gc_seeds = 100;
    gradcheck->add_option("--seeds", gc_seeds, "number of random models");
    auto* mccheck = app.add_subcommand("mccheck", "Monte-Carlo volume check");
    std::size_t mc_boxes = 100, mc_samples = 1000000;
    mccheck->add_option("--boxes", mc_boxes);
    mccheck->add_option("--samples", mc_samples);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            if (*seed_opt) seed_flag = seed_value;
            if (*threads_opt) overrides.push_back("threads=" + std::to_string(train_threads));
            return run_train(config_path, overrides, DataArgs{data_dir}, rules_path, out_dir,
                             seed_flag);
        }
        if (eval->parsed()) {
            return run_eval(eval_ckpt, DataArgs{eval_data}, eval_task, eval_out,
                            eval_all_splits ? evaluation::kRelevanceAll
                                            : evaluation::kRelevanceTest,
                            eval_threads);
        }
        if (predict->parsed()) return run_predict(p_ckpt, p_h, p_r, p_t);
        if (rank->parsed()) return run_rank(k_ckpt, k_h, k_r, k_k);
        if (inspect->parsed()) return run_inspect(i_ckpt, i_r, i_k, i_data);
        if (gradcheck->parsed()) return run_gradcheck(gc_seeds);
        if (mccheck->parsed()) return run_mccheck(mc_boxes, mc_samples);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_main(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
