#include "ctl/data/cleanup.hpp"
#include "ctl/data/corpus_io.hpp"
#include "ctl/data/synthetic.hpp"
#include "ctl/eval/ablation.hpp"
#include "ctl/eval/judgment.hpp"
#include "ctl/net/trainer.hpp"
#include "ctl/retrieval/engine.hpp"
#include "ctl/service/server.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <iostream>

using namespace ctl;
using nlohmann::json;

namespace {

void write_json(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream os(path, std::ios::trunc);
    require(bool(os), ErrorCode::Io, "cannot open " + path);
    os << j.dump(2) << '\n';
}

data::CategoryVocab load_vocab(const std::string& path) {
    if (path.empty()) return data::CategoryVocab::defaults();
    std::ifstream is(path);
    require(bool(is), ErrorCode::Io, "cannot open " + path);
    std::vector<std::string> names;
    for (std::string line; std::getline(is, line);)
        if (!data::CategoryVocab::normalize(line).empty() && line[0] != '#') names.push_back(line);
    return data::CategoryVocab(names);
}

json stats_json(const data::DatasetStats& s) {
    json sizes = json::object();
    for (const auto& [k, v] : s.outfits_by_size) sizes[std::to_string(k)] = v;
    return {{"total_outfits", s.total_outfits},
            {"total_items", s.total_items},
            {"items_per_category", s.items_per_category},
            {"outfits_by_size", sizes}};
}

void print_stats(const data::DatasetStats& s) {
    std::cout << "outfits: " << s.total_outfits << "  items: " << s.total_items << '\n';
    for (const auto& [c, n] : s.items_per_category) std::cout << "  " << c << ": " << n << '\n';
    for (const auto& [k, n] : s.outfits_by_size) std::cout << "  size " << k << ": " << n << '\n';
}

struct TrainFlags {
    std::string method = "triplet";
    std::string negatives = "same_category";
    int ratio = 1;
    std::size_t epochs = 10;
    std::size_t batch = 64;
    double lr = net::AdamConfig{}.lr;
    double dropout = 0.5;
    double margin = 0.2;
    std::size_t proxy_samples = 2048;
    std::uint64_t seed = 1;

    void add(CLI::App* app) {
        app->add_option("--method", method, "proxy | contrastive | triplet")->capture_default_str();
        app->add_option("--negatives", negatives, "triplet negatives: random | same_category")->capture_default_str();
        app->add_option("--ratio", ratio, "contrastive negatives per positive (1 or 16)")->capture_default_str();
        app->add_option("--epochs", epochs)->capture_default_str();
        app->add_option("--batch", batch)->capture_default_str();
        app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        app->add_option("--dropout", dropout)->capture_default_str();
        app->add_option("--margin", margin)->capture_default_str();
        app->add_option("--proxy-samples", proxy_samples)->capture_default_str();
        app->add_option("--seed", seed)->capture_default_str();
    }

    net::TrainConfig config() const {
        net::TrainConfig c;
        c.method = net::parse_method(method);
        c.triplet_negatives = net::parse_negative_mode(negatives);
        c.negative_ratio = ratio;
        c.epochs = epochs;
        c.batch_size = batch;
        c.adam.lr = lr;
        c.dropout = dropout;
        c.margin = margin;
        c.proxy_samples = proxy_samples;
        c.seed = seed;
        c.validate();
        return c;
    }
};

struct EvalFlags {
    std::string mode = "per_category";
    std::size_t corpus_size = 200;
    std::size_t outfit_size = 5;
    std::uint64_t seed = 1;

    void add(CLI::App* app) {
        app->add_option("--mode", mode, "per_category | all_categories")->capture_default_str();
        app->add_option("--corpus-size", corpus_size)->capture_default_str();
        app->add_option("--outfit-size", outfit_size, "outfits of exactly this size are queried")->capture_default_str();
        app->add_option("--eval-seed", seed)->capture_default_str();
    }

    eval::EvalConfig config() const {
        eval::EvalConfig c;
        c.mode = eval::parse_corpus_mode(mode);
        c.corpus_size = corpus_size;
        c.outfit_size = outfit_size;
        c.seed = seed;
        c.validate();
        return c;
    }
};

retrieval::Engine load_engine(const std::string& checkpoint, const std::string& index, const std::string& features,
                              const std::string& catalog, const std::string& map, const retrieval::EngineConfig& ec) {
    service::ServiceConfig sc;
    sc.checkpoint = checkpoint;
    sc.index = index;
    sc.features = features;
    sc.catalog = catalog;
    sc.complementary_map = map;
    sc.k_per_category = ec.k_per_category;
    sc.k_final = ec.k_final;
    sc.probes = ec.probes;
    sc.product_shot_threshold = ec.product_shot_threshold;
    sc.judgment_store = "";
    return service::load_snapshot(sc)->engine;
}

service::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->http().stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outfit compatibility toolkit: data cleanup, training, evaluation, indexing and serving"};
    app.require_subcommand(1);
    std::string vocab_path;
    app.add_option("--vocab", vocab_path, "category list, one per line (default: built-in 13 categories)");

    // clean
    auto* clean = app.add_subcommand("clean", "clean raw outfit images into a corpus");
    std::string clean_in, clean_released, clean_out, clean_report;
    data::CleanupConfig ccfg;
    bool no_mono = false;
    unsigned clean_threads = 1;
    auto* clean_src = clean->add_option("--input", clean_in, "raw images (JSONL)");
    clean->add_option("--released", clean_released, "released tabular dataset (TSV/CSV)")->excludes(clean_src);
    clean->add_option("--out", clean_out, "cleaned corpus (JSONL)")->required();
    clean->add_option("--report", clean_report, "rejection report (JSON)");
    clean->add_option("--polyvore-threshold", ccfg.polyvore_threshold)->capture_default_str();
    clean->add_option("--nms-iou", ccfg.nms_iou)->capture_default_str();
    clean->add_option("--min-area", ccfg.min_area_frac)->capture_default_str();
    clean->add_option("--min-items", ccfg.min_items)->capture_default_str();
    clean->add_option("--max-items", ccfg.max_items)->capture_default_str();
    clean->add_option("--min-categories", ccfg.min_distinct_categories)->capture_default_str();
    clean->add_flag("--no-monochrome-filter", no_mono);
    clean->add_option("--threads", clean_threads)->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted style structure");
    data::SyntheticConfig scfg;
    std::string synth_out, synth_features, synth_raw, synth_catalog;
    synth->add_option("--outfits", scfg.n_outfits)->capture_default_str();
    synth->add_option("--feature-dim", scfg.feature_dim)->capture_default_str();
    synth->add_option("--style-dim", scfg.style_dim)->capture_default_str();
    synth->add_option("--noise", scfg.noise)->capture_default_str();
    synth->add_option("--seed", scfg.seed)->capture_default_str();
    synth->add_option("--prefix", scfg.id_prefix)->capture_default_str();
    synth->add_option("--out", synth_out, "corpus (JSONL)")->required();
    synth->add_option("--features", synth_features, "feature store")->required();
    synth->add_option("--raw-out", synth_raw, "also write the outfits as raw images (JSONL)");
    synth->add_option("--catalog-out", synth_catalog, "also write a product-shot catalog (JSONL)");

    // split
    auto* split = app.add_subcommand("split", "deterministic train/test split by outfit id");
    std::string split_in, split_train, split_test;
    double holdout = 0.2;
    std::uint64_t split_seed = 1;
    split->add_option("--input", split_in)->required();
    split->add_option("--train-out", split_train)->required();
    split->add_option("--test-out", split_test)->required();
    split->add_option("--holdout", holdout)->capture_default_str();
    split->add_option("--seed", split_seed)->capture_default_str();

    // stats
    auto* stats = app.add_subcommand("stats", "category and outfit-size histograms");
    std::string stats_in, stats_out;
    stats->add_option("--input", stats_in)->required();
    stats->add_option("--out", stats_out, "JSON output");

    // train
    auto* train = app.add_subcommand("train", "train the style and category heads");
    std::string train_in, train_features, train_ckpt, train_curve;
    TrainFlags tflags;
    train->add_option("--train", train_in, "training corpus (JSONL)")->required();
    train->add_option("--features", train_features)->required();
    train->add_option("--checkpoint", train_ckpt, "output checkpoint")->required();
    train->add_option("--loss-curve", train_curve, "per-epoch loss CSV");
    tflags.add(train);

    // index
    auto* index = app.add_subcommand("index", "build per-category search indices");
    std::string idx_ckpt, idx_features, idx_catalog, idx_corpus, idx_out, idx_catalog_out;
    retrieval::IndexBuildOptions iopt;
    index->add_option("--checkpoint", idx_ckpt)->required();
    index->add_option("--features", idx_features)->required();
    auto* idx_cat_opt = index->add_option("--catalog", idx_catalog, "catalog (JSONL)");
    index->add_option("--corpus", idx_corpus, "index every item of a corpus as a product shot")->excludes(idx_cat_opt);
    index->add_option("--catalog-out", idx_catalog_out, "write the derived catalog");
    index->add_option("--out", idx_out)->required();
    index->add_option("--seed", iopt.seed)->capture_default_str();
    index->add_option("--exact-below", iopt.exact_below)->capture_default_str();
    index->add_option("--partitions", iopt.partitions, "0 = round(sqrt(n)) per category")->capture_default_str();
    index->add_option("--product-shot-threshold", iopt.product_shot_threshold)->capture_default_str();
    index->add_option("--created-at", iopt.created_at, "unix seconds recorded in the index (default: now)");

    // eval
    auto* evalc = app.add_subcommand("eval", "R@K and FITB on a test corpus");
    std::string ev_ckpt, ev_test, ev_features, ev_out, ev_name;
    bool ev_random = false, ev_identity = false;
    EvalFlags eflags;
    auto* ev_ck = evalc->add_option("--checkpoint", ev_ckpt);
    auto* ev_rand = evalc->add_flag("--random", ev_random, "random-embedding baseline");
    evalc->add_flag("--identity", ev_identity, "raw features as embeddings")->excludes(ev_ck)->excludes(ev_rand);
    ev_rand->excludes(ev_ck);
    evalc->add_option("--test", ev_test)->required();
    evalc->add_option("--features", ev_features);
    evalc->add_option("--out", ev_out, "report JSON");
    evalc->add_option("--name", ev_name, "method label");
    eflags.add(evalc);

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train and evaluate a grid of methods, features and sizes");
    std::string ab_train, ab_test, ab_out;
    std::vector<std::string> ab_features, ab_methods;
    std::vector<std::size_t> ab_sizes{0};
    TrainFlags abflags;
    EvalFlags abeval;
    ablate->add_option("--train", ab_train)->required();
    ablate->add_option("--test", ab_test)->required();
    ablate->add_option("--features", ab_features, "name=path, repeatable")->required();
    ablate->add_option("--methods", ab_methods,
                       "method specs: triplet:same_category, triplet:random, contrastive:1, contrastive:16, proxy")
        ->required();
    ablate->add_option("--sizes", ab_sizes, "training outfit counts (0 = all)")->capture_default_str();
    ablate->add_option("--out", ab_out, "results JSON");
    abflags.add(ablate);
    abeval.add(ablate);

    // export-judgments
    auto* exportj = app.add_subcommand("export-judgments", "blinded pairwise judgment tasks");
    std::vector<std::string> ex_methods;
    std::string ex_features, ex_catalog, ex_map, ex_queries, ex_out, ex_key_out;
    std::size_t ex_n = 50, ex_k = 3;
    std::uint64_t ex_seed = 1;
    exportj->add_option("--method", ex_methods, "name=checkpoint,index (repeatable)")->required();
    exportj->add_option("--features", ex_features)->required();
    exportj->add_option("--catalog", ex_catalog)->required();
    exportj->add_option("--map", ex_map, "complementary map file");
    exportj->add_option("--queries", ex_queries, "query item ids, one per line (default: sample from catalog)");
    exportj->add_option("--n-queries", ex_n)->capture_default_str();
    exportj->add_option("--k", ex_k, "candidates per query and method (blended)")->capture_default_str();
    exportj->add_option("--key-seed", ex_seed)->capture_default_str();
    exportj->add_option("--out", ex_out, "tasks (JSONL)")->required();
    exportj->add_option("--key-out", ex_key_out, "unblinding key (JSON)")->required();

    // precision
    auto* prec = app.add_subcommand("precision", "per-method precision from stored judgments");
    std::string pr_tasks, pr_judgments, pr_key, pr_out;
    prec->add_option("--tasks", pr_tasks)->required();
    prec->add_option("--judgments", pr_judgments)->required();
    prec->add_option("--key", pr_key, "unblinding key; methods stay blinded without it");
    prec->add_option("--out", pr_out, "JSON output");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP JSON service");
    std::string sv_config, sv_host;
    int sv_port = -1;
    serve->add_option("--config", sv_config, "key = value config file; CTL_* environment variables override it");
    serve->add_option("--host", sv_host);
    serve->add_option("--port", sv_port);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto vocab = load_vocab(vocab_path);

        if (*clean) {
            data::ReleasedDataset released;
            data::JsonlReadResult raw;
            if (!clean_released.empty()) {
                std::ifstream is(clean_released);
                require(bool(is), ErrorCode::Io, "cannot open " + clean_released);
                released = data::read_released_dataset(is, vocab);
                raw.images = std::move(released.images);
            } else {
                require(!clean_in.empty(), ErrorCode::InvalidArgument, "one of --input or --released is required");
                std::ifstream is(clean_in);
                require(bool(is), ErrorCode::Io, "cannot open " + clean_in);
                raw = data::read_raw_jsonl(is, vocab);
            }
            ccfg.monochrome_filter = !no_mono;
            const auto res = data::run_pipeline(raw.images, ccfg, vocab, std::max(1u, clean_threads));
            data::save_outfits(clean_out, res.outfits, vocab);
            json rejects = json::object();
            for (const auto& [r, n] : res.rejects) rejects[data::to_string(r)] = n;
            json malformed = json::array();
            for (const auto& [line, why] : raw.malformed) malformed.push_back({{"line", line}, {"problem", why}});
            for (const auto& [id, why] : res.malformed) malformed.push_back({{"image_id", id}, {"problem", why}});
            const json report = {{"input_images", raw.images.size() + raw.malformed.size()},
                                 {"unparsable_lines", raw.malformed.size()},
                                 {"outfits", res.outfits.size()},
                                 {"rejects", rejects},
                                 {"malformed", malformed},
                                 {"unknown_categories", released.unknown_categories},
                                 {"stats", stats_json(data::dataset_stats(res.outfits, vocab))}};
            if (!clean_report.empty()) write_json(clean_report, report);
            std::cout << "kept " << res.outfits.size() << " of " << raw.images.size() + raw.malformed.size()
                      << " images\n";
            for (const auto& [r, n] : res.rejects) std::cout << "  rejected " << data::to_string(r) << ": " << n << '\n';
        } else if (*synth) {
            auto ds = data::generate_synthetic_dataset(scfg, vocab);
            data::save_outfits(synth_out, ds.outfits, vocab);
            ds.features.save(synth_features);
            if (!synth_raw.empty()) {
                std::ofstream os(synth_raw, std::ios::trunc);
                require(bool(os), ErrorCode::Io, "cannot open " + synth_raw);
                for (const auto& o : ds.outfits) os << data::raw_to_json(data::to_raw(o), vocab).dump() << '\n';
            }
            if (!synth_catalog.empty()) retrieval::catalog_from_outfits(ds.outfits).save(synth_catalog, vocab);
            std::cout << "generated " << ds.outfits.size() << " outfits, " << ds.features.size() << " items\n";
        } else if (*split) {
            const auto s = data::split_dataset(data::load_outfits(split_in, vocab), holdout, split_seed);
            data::save_outfits(split_train, s.train, vocab);
            data::save_outfits(split_test, s.test, vocab);
            std::cout << "train " << s.train.size() << "  test " << s.test.size() << '\n';
        } else if (*stats) {
            const auto s = data::dataset_stats(data::load_outfits(stats_in, vocab), vocab);
            if (!stats_out.empty()) write_json(stats_out, stats_json(s));
            print_stats(s);
        } else if (*train) {
            const auto cfg = tflags.config();
            const auto outfits = data::load_outfits(train_in, vocab);
            const auto store = data::FeatureStore::load(train_features);
            net::TrainOptions opt;
            opt.checkpoint_path = train_ckpt;
            opt.on_epoch = [](const net::EpochLog& e) {
                std::printf("epoch %zu  loss %.5f  category loss %.5f  %.1fs\n", e.epoch, e.loss, e.category_loss,
                            e.wall_seconds);
                std::fflush(stdout);
            };
            const auto res = net::train(outfits, store, vocab, cfg, opt);
            net::save_checkpoint(train_ckpt, {net::checkpoint_metadata(cfg, vocab, store.dim()), res.params});
            if (!train_curve.empty()) {
                std::ofstream os(train_curve, std::ios::trunc);
                require(bool(os), ErrorCode::Io, "cannot open " + train_curve);
                net::write_loss_curve_csv(os, res.curve);
            }
            if (res.skipped_triplets) std::cout << "skipped triplets: " << res.skipped_triplets << '\n';
            std::cout << "checkpoint " << train_ckpt << "  digest " << net::checkpoint_digest(train_ckpt) << '\n';
        } else if (*index) {
            const auto ck = net::load_checkpoint(idx_ckpt);
            const auto store = data::FeatureStore::load(idx_features);
            retrieval::Catalog catalog;
            if (!idx_catalog.empty()) {
                catalog = retrieval::Catalog::load(idx_catalog, vocab);
            } else {
                require(!idx_corpus.empty(), ErrorCode::InvalidArgument, "one of --catalog or --corpus is required");
                catalog = retrieval::catalog_from_outfits(data::load_outfits(idx_corpus, vocab));
            }
            if (!idx_catalog_out.empty()) catalog.save(idx_catalog_out, vocab);
            iopt.checkpoint_hash = net::checkpoint_digest(idx_ckpt);
            const auto idx = retrieval::InvertedIndex::build(catalog, store, ck.params, vocab, iopt);
            idx.save(idx_out);
            std::cout << "indexed " << idx.size() << " of " << catalog.size() << " items ("
                      << idx.metadata().skipped_missing_features << " without features, "
                      << idx.metadata().skipped_not_product_shot << " not product shots)\n";
            for (const auto& [c, ann] : idx.partitions())
                std::cout << "  " << vocab.name(c) << ": " << ann.size() << " items, " << ann.partitions()
                          << " partitions\n";
        } else if (*evalc) {
            const auto cfg = eflags.config();
            const auto test = data::load_outfits(ev_test, vocab);
            eval::EmbeddingTable table(0);
            std::string name = ev_name;
            if (ev_random) {
                table = eval::random_embeddings(test, 128, cfg.seed);
                if (name.empty()) name = "random";
            } else {
                require(!ev_features.empty(), ErrorCode::InvalidArgument, "--features is required");
                const auto store = data::FeatureStore::load(ev_features);
                if (ev_identity) {
                    table = eval::identity_embeddings(test, store);
                    if (name.empty()) name = "features";
                } else {
                    require(!ev_ckpt.empty(), ErrorCode::InvalidArgument,
                            "one of --checkpoint, --random or --identity is required");
                    const auto ck = net::load_checkpoint(ev_ckpt);
                    table = eval::embed_outfits(ck.params, test, store);
                    if (name.empty()) name = ck.metadata.value("method", std::string("model"));
                }
            }
            const auto rep = eval::evaluate(name, table, test, cfg);
            if (!ev_out.empty()) write_json(ev_out, eval::report_to_json(rep));
            std::cout << eval::format_table({rep});
        } else if (*ablate) {
            eval::AblationSpec spec;
            spec.train = data::load_outfits(ab_train, vocab);
            spec.test = data::load_outfits(ab_test, vocab);
            spec.dataset_sizes = ab_sizes;
            spec.eval = abeval.config();
            std::vector<std::unique_ptr<data::FeatureStore>> stores;
            for (const auto& f : ab_features) {
                const auto eq = f.find('=');
                require(eq != std::string::npos, ErrorCode::InvalidArgument, "--features expects name=path");
                stores.push_back(std::make_unique<data::FeatureStore>(data::FeatureStore::load(f.substr(eq + 1))));
                spec.feature_sets.push_back({f.substr(0, eq), stores.back().get()});
            }
            const auto base = abflags.config();
            for (const auto& m : ab_methods) {
                auto cfg = base;
                const auto colon = m.find(':');
                cfg.method = net::parse_method(m.substr(0, colon));
                if (colon != std::string::npos) {
                    const auto arg = m.substr(colon + 1);
                    if (cfg.method == net::Method::Contrastive) cfg.negative_ratio = std::stoi(arg);
                    else if (cfg.method == net::Method::Triplet) cfg.triplet_negatives = net::parse_negative_mode(arg);
                }
                cfg.validate();
                spec.methods.push_back({m, cfg});
            }
            const auto cells = eval::run_ablation(spec, vocab, [](const eval::AblationCell& c) {
                std::cout << "done " << c.method << " [" << c.feature_set << ", " << c.outfits << "]"
                          << (c.error.empty() ? "" : " FAILED: " + c.error) << '\n';
            });
            if (!ab_out.empty()) write_json(ab_out, eval::ablation_to_json(cells));
            std::cout << eval::format_ablation(cells);
        } else if (*exportj) {
            retrieval::EngineConfig ec;
            ec.k_final = ex_k;
            std::map<std::string, retrieval::Engine> engines;
            std::vector<std::string> names;
            for (const auto& m : ex_methods) {
                const auto eq = m.find('=');
                const auto comma = m.find(',', eq == std::string::npos ? 0 : eq);
                require(eq != std::string::npos && comma != std::string::npos, ErrorCode::InvalidArgument,
                        "--method expects name=checkpoint,index");
                const auto name = m.substr(0, eq);
                engines.emplace(name, load_engine(m.substr(eq + 1, comma - eq - 1), m.substr(comma + 1), ex_features,
                                                  ex_catalog, ex_map, ec));
                names.push_back(name);
            }
            std::vector<std::string> queries;
            if (!ex_queries.empty()) {
                std::ifstream is(ex_queries);
                require(bool(is), ErrorCode::Io, "cannot open " + ex_queries);
                for (std::string line; std::getline(is, line);)
                    if (!line.empty()) queries.push_back(line);
            } else {
                const auto& items = engines.begin()->second.catalog->items();
                Rng rng(derive_seed(ex_seed, "queries"));
                for (auto i : sample_without_replacement(items.size(), std::min(ex_n, items.size()), rng))
                    queries.push_back(items[i].item_id);
            }
            const eval::Recommender rec = [&](const std::string& method, const std::string& q) {
                const auto& eng = engines.at(method);
                const auto r = retrieval::complete_the_look(eng, {q, std::nullopt, std::nullopt});
                std::vector<eval::Recommendation> out;
                for (const auto& b : r.blended) out.push_back({b.item_id, eng.vocab.name(b.category)});
                return out;
            };
            const auto ex = eval::export_judgment_tasks(rec, queries, names, ex_seed);
            {
                std::ofstream os(ex_out, std::ios::trunc);
                require(bool(os), ErrorCode::Io, "cannot open " + ex_out);
                eval::write_tasks_jsonl(os, ex.tasks);
            }
            write_json(ex_key_out, ex.key);
            std::cout << "exported " << ex.tasks.size() << " tasks for " << queries.size() << " queries\n";
            for (const auto& [q, why] : ex.failures) std::cout << "  skipped " << q << ": " << why << '\n';
        } else if (*prec) {
            std::ifstream ts(pr_tasks);
            require(bool(ts), ErrorCode::Io, "cannot open " + pr_tasks);
            const auto tasks = eval::read_tasks_jsonl(ts);
            const auto scan = service::scan_judgments(pr_judgments);
            std::map<std::string, std::string> key;
            if (!pr_key.empty()) {
                std::ifstream ks(pr_key);
                require(bool(ks), ErrorCode::Io, "cannot open " + pr_key);
                key = json::parse(ks).get<std::map<std::string, std::string>>();
            }
            const auto p = eval::compute_precision(scan.records, tasks, pr_key.empty() ? nullptr : &key);
            if (!pr_out.empty()) write_json(pr_out, eval::precision_to_json(p));
            for (const auto& [name, mp] : p) {
                std::cout << name << ": ";
                if (mp.precision_percent) std::printf("%.1f%%", *mp.precision_percent);
                else std::cout << "n/a";
                std::cout << "  (" << mp.compatible << " compatible, " << mp.incompatible << " incompatible, "
                          << mp.skipped << " skipped)\n";
            }
        } else if (*serve) {
            auto cfg = sv_config.empty() ? service::ServiceConfig{} : service::ServiceConfig::load(sv_config);
            cfg.apply_env();
            if (!sv_host.empty()) cfg.host = sv_host;
            if (sv_port >= 0) cfg.port = sv_port;
            service::Service svc(cfg);
            g_service = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::thread loader([&] {
                try {
                    svc.reload();
                    std::cerr << "snapshot loaded\n";
                } catch (const std::exception& e) {
                    std::cerr << json{{"error", "LoadFailed"}, {"message", e.what()}}.dump() << '\n';
                }
            });
            std::cerr << "listening on " << cfg.host << ':' << cfg.port << '\n';
            svc.run(cfg.host, cfg.port);
            loader.join();
            g_service = nullptr;
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 3;
    }
    return 0;
}
