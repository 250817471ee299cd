// eqsearch command line: corpus building, training, indexing, evaluation and
// the HTTP service. Exit codes: 0 success, 1 user error, 2 internal error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eqsearch/checkpoint.hpp"
#include "eqsearch/corpus.hpp"
#include "eqsearch/embedding_store.hpp"
#include "eqsearch/encoder.hpp"
#include "eqsearch/error.hpp"
#include "eqsearch/ingest.hpp"
#include "eqsearch/metrics.hpp"
#include "eqsearch/relation_pairs.hpp"
#include "eqsearch/rptree.hpp"
#include "eqsearch/sampler.hpp"
#include "eqsearch/search_engine.hpp"
#include "eqsearch/service.hpp"
#include "eqsearch/synthetic.hpp"
#include "eqsearch/trainer.hpp"
#include "eqsearch/ustat.hpp"
#include "eqsearch/vocabulary.hpp"

namespace fs = std::filesystem;
using namespace eqsearch;

namespace {

// A path option that falls back to <dir>/<default name> when not given.
struct PathOpt {
    std::string value;
    std::string fallback;
    CLI::Option* opt = nullptr;

    fs::path resolve(const fs::path& dir) const {
        if (opt && opt->count() > 0) return value;
        return dir / fallback;
    }
    bool given() const { return opt && opt->count() > 0; }
};

PathOpt& add_path(CLI::App* cmd, PathOpt& p, const std::string& flag, const std::string& fallback,
                  const std::string& help) {
    p.fallback = fallback;
    p.opt = cmd->add_option(flag, p.value, help + " (default: <dir>/" + fallback + ")");
    return p;
}

Vocabulary load_or_build_vocab(const fs::path& path, const Corpus& corpus, bool required) {
    if (fs::exists(path)) return Vocabulary::load(path);
    if (required) throw InvalidArgument("vocabulary file " + path.string() + " does not exist");
    return build_vocabulary(corpus);
}

Matrix<float> embed_mathml(const std::vector<std::string>& docs, const Checkpoint& ck) {
    Matrix<float> out(static_cast<Eigen::Index>(docs.size()), kEmbeddingDim);
    const bool unit = ck.similarity == Similarity::Cosine;
    for (std::size_t i = 0; i < docs.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = embed_graph(encode(docs[i], ck.vocab), ck.params, unit).transpose();
    return out;
}

Matrix<float> bow_mathml(const std::vector<std::string>& docs, const Vocabulary& vocab) {
    Matrix<float> out(static_cast<Eigen::Index>(docs.size()), kFeatureDim);
    for (std::size_t i = 0; i < docs.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = bow_embed(encode(docs[i], vocab)).transpose();
    return out;
}

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-based mathematical formula search", "eqsearch"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config-file", "", "INI/TOML file with option defaults, one [section] per subcommand");
    std::string dir = ".";
    app.add_option("--dir", dir, "Working directory holding default artifact paths");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic template corpus");
    PathOpt synth_out;
    add_path(synth, synth_out, "--out", "corpus", "Corpus directory to write");
    SyntheticConfig synth_cfg;
    synth->add_option("--papers", synth_cfg.papers, "Number of papers")->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "Random seed")->capture_default_str();
    synth->add_option("--noise", synth_cfg.noise, "Fraction of off-topic equations")->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Build a corpus from a directory of LaTeX sources");
    std::string ingest_src;
    ingest->add_option("--src", ingest_src, "Directory of .tex files")->required();
    PathOpt ingest_out;
    add_path(ingest, ingest_out, "--out", "corpus", "Corpus directory to write");

    // pairs
    auto* pairs = app.add_subcommand("pairs", "Extract relation pairs");
    PathOpt pairs_corpus, pairs_out;
    add_path(pairs, pairs_corpus, "--corpus", "corpus", "Corpus directory");
    add_path(pairs, pairs_out, "--out", "pairs.jsonl", "Output JSON Lines");
    std::string pairs_relations = "eq";
    pairs->add_option("--relations", pairs_relations, "eq | ineq | all")->capture_default_str();

    // vocab
    auto* vocab_cmd = app.add_subcommand("vocab", "Build the feature vocabulary");
    PathOpt vocab_corpus, vocab_out;
    add_path(vocab_cmd, vocab_corpus, "--corpus", "corpus", "Corpus directory");
    add_path(vocab_cmd, vocab_out, "--out", "vocab.json", "Vocabulary file");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the graph encoder");
    PathOpt train_corpus, train_vocab, train_out, train_config, train_holdout;
    add_path(train_cmd, train_corpus, "--corpus", "corpus", "Training corpus");
    add_path(train_cmd, train_vocab, "--vocab", "vocab.json", "Vocabulary (built from the corpus if absent)");
    add_path(train_cmd, train_out, "--out", "model.ckpt", "Checkpoint to write");
    add_path(train_cmd, train_config, "--config", "train.conf", "Training config (key = value lines)");
    add_path(train_cmd, train_holdout, "--holdout", "holdout", "Hold-out corpus for the per-epoch ranking score");
    std::optional<int> train_epochs;
    std::optional<std::uint64_t> train_seed;
    train_cmd->add_option("--epochs", train_epochs, "Override epochs");
    train_cmd->add_option("--seed", train_seed, "Override seed");
    std::string materialize;
    std::size_t materialize_count = 2000;
    train_cmd->add_option("--materialize", materialize, "Write sampled triplets to this file instead of training");
    train_cmd->add_option("--count", materialize_count, "Triplets to materialize")->capture_default_str();

    // finetune
    auto* ft = app.add_subcommand("finetune", "Contrastive finetuning on relation pairs");
    PathOpt ft_pairs, ft_ckpt, ft_out, ft_config;
    add_path(ft, ft_pairs, "--pairs", "pairs.jsonl", "Relation pairs");
    add_path(ft, ft_ckpt, "--checkpoint", "model.ckpt", "Pretrained checkpoint");
    add_path(ft, ft_out, "--out", "finetuned.ckpt", "Checkpoint to write");
    add_path(ft, ft_config, "--config", "train.conf", "Training config");
    std::optional<int> ft_epochs, ft_batch;
    std::optional<double> ft_lr;
    ft->add_option("--epochs", ft_epochs, "Override finetune_epochs");
    ft->add_option("--batch", ft_batch, "Override finetune_batch");
    ft->add_option("--lr", ft_lr, "Override finetune_lr0");

    // embed
    auto* embed = app.add_subcommand("embed", "Embed every corpus equation into a store");
    PathOpt embed_corpus_dir, embed_ckpt, embed_out, embed_vocab;
    add_path(embed, embed_corpus_dir, "--corpus", "corpus", "Corpus directory");
    add_path(embed, embed_ckpt, "--checkpoint", "model.ckpt", "Checkpoint");
    add_path(embed, embed_out, "--out", "store.bin", "Store to write");
    add_path(embed, embed_vocab, "--vocab", "vocab.json", "Expected vocabulary (checked when present)");
    bool embed_bow = false;
    embed->add_flag("--bow", embed_bow, "Bag-of-words vectors instead of the encoder");

    // index
    auto* index_cmd = app.add_subcommand("index", "Build a random-projection tree index");
    PathOpt index_store, index_out;
    add_path(index_cmd, index_store, "--store", "store.bin", "Embedding store");
    add_path(index_cmd, index_out, "--out", "index.bin", "Index to write");
    RpTreeConfig rp;
    index_cmd->add_option("--trees", rp.trees, "Number of trees")->capture_default_str();
    index_cmd->add_option("--leaf-size", rp.leaf_size, "Maximum leaf size")->capture_default_str();
    index_cmd->add_option("--seed", rp.seed, "Random seed")->capture_default_str();

    // shared by search / eval / serve
    struct EngineOpts {
        PathOpt corpus, ckpt, store, index;
        bool exact = false;
    };
    auto add_engine = [](CLI::App* cmd, EngineOpts& e) {
        add_path(cmd, e.corpus, "--corpus", "corpus", "Corpus directory");
        add_path(cmd, e.ckpt, "--checkpoint", "model.ckpt", "Checkpoint");
        add_path(cmd, e.store, "--store", "store.bin", "Embedding store");
        add_path(cmd, e.index, "--index", "index.bin", "RP-tree index (used when given, or when present for large stores)");
        cmd->add_flag("--exact", e.exact, "Ignore the index and scan exhaustively");
    };
    auto load_engine = [&dir](const EngineOpts& e) {
        auto engine = load_search_engine(e.corpus.resolve(dir), e.ckpt.resolve(dir), e.store.resolve(dir));
        fs::path ip = e.index.resolve(dir);
        if (!e.exact && (e.index.given() || (fs::exists(ip) && engine.size() >= kExactScanLimit)))
            engine.attach_index(RpTreeIndex::load(ip));
        return engine;
    };

    // search
    auto* search = app.add_subcommand("search", "Query the index with LaTeX or MathML");
    EngineOpts search_opts;
    add_engine(search, search_opts);
    std::string query;
    std::size_t k = 10;
    search->add_option("-q,--query,query", query, "Query (LaTeX or MathML)")->required();
    search->add_option("-k", k, "Number of results")->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    EngineOpts eval_opts;
    add_engine(eval, eval_opts);
    std::string eval_queries, eval_triplets, eval_pairs, eval_out;
    auto* q_opt = eval->add_option("--queries", eval_queries, "Keyword queries (JSON Lines)");
    auto* t_opt = eval->add_option("--triplets", eval_triplets, "Triplets for the ranking score");
    auto* p_opt = eval->add_option("--pairs", eval_pairs, "Relation pairs for recall@k");
    q_opt->excludes(t_opt)->excludes(p_opt);
    t_opt->excludes(p_opt);
    bool eval_bow = false;
    eval->add_flag("--bow", eval_bow, "Also report bag-of-words recall (with --pairs)");
    eval->add_option("--out", eval_out, "Also write the JSON report here");

    // ci
    auto* ci = app.add_subcommand("ci", "U-statistic estimate with a Janson upper bound");
    PathOpt ci_corpus, ci_ckpt;
    add_path(ci, ci_corpus, "--corpus", "corpus", "Corpus directory");
    add_path(ci, ci_ckpt, "--checkpoint", "model.ckpt", "Checkpoint");
    std::string ci_triplets, ci_mode = "incomplete", ci_kernel = "ranking";
    double ci_delta = 0.05;
    int ci_bins = kDefaultBins;
    ci->add_option("--triplets", ci_triplets, "Sampled triplets (incomplete mode)");
    ci->add_option("--delta", ci_delta, "Failure probability")->capture_default_str();
    ci->add_option("--mode", ci_mode, "complete | incomplete")
        ->check(CLI::IsMember({"complete", "incomplete"}))
        ->capture_default_str();
    ci->add_option("--kernel", ci_kernel, "ranking | hist")->check(CLI::IsMember({"ranking", "hist"}))->capture_default_str();
    ci->add_option("--bins", ci_bins, "Histogram bins for the hist kernel")->capture_default_str();

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP search service");
    EngineOpts serve_opts;
    add_engine(serve_cmd, serve_opts);
    std::string host = "127.0.0.1";
    int port = 8080;
    serve_cmd->add_option("--host", host, "Bind address (HOST overrides)")->capture_default_str();
    serve_cmd->add_option("--port", port, "Port, 0 for any free port (PORT overrides)")->capture_default_str();

    if (argc <= 1) {
        std::cout << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    const fs::path d = dir;
    try {
        if (*synth) {
            auto corpus = synthetic_corpus(synth_cfg);
            save_corpus(corpus, synth_out.resolve(d));
            std::printf("wrote %zu papers, %zu equations to %s\n", corpus.papers().size(), corpus.size(),
                        synth_out.resolve(d).c_str());
        } else if (*ingest) {
            IngestDiagnostics diag;
            auto corpus = ingest_directory(ingest_src, &diag);
            save_corpus(corpus, ingest_out.resolve(d));
            std::printf("files %zu papers %zu equations %zu unmatched_environments %zu compile_failures %zu\n",
                        diag.files, corpus.papers().size(), corpus.size(), diag.unmatched_environments,
                        diag.compile_failures);
        } else if (*pairs) {
            auto corpus = load_corpus(pairs_corpus.resolve(d));
            auto out = extract_relation_pairs(corpus, relation_preset(pairs_relations));
            save_pairs(out, pairs_out.resolve(d));
            std::printf("wrote %zu pairs\n", out.size());
        } else if (*vocab_cmd) {
            auto v = build_vocabulary(load_corpus(vocab_corpus.resolve(d)));
            v.save(vocab_out.resolve(d));
            std::printf("vocabulary %s\n", v.hash().c_str());
        } else if (*train_cmd) {
            auto corpus = load_corpus(train_corpus.resolve(d));
            TrainConfig cfg;
            if (train_config.given() || fs::exists(train_config.resolve(d)))
                cfg = load_train_config(train_config.resolve(d));
            if (train_epochs) cfg.epochs = *train_epochs;
            if (train_seed) cfg.seed = *train_seed;
            if (!materialize.empty()) {
                TripletSampler sampler(corpus);
                save_triplets(corpus, materialize_triplets(sampler, materialize_count, cfg.seed), materialize);
                std::printf("wrote %zu triplets to %s\n", materialize_count, materialize.c_str());
                return 0;
            }
            auto vocab = load_or_build_vocab(train_vocab.resolve(d), corpus, train_vocab.given());
            std::optional<Corpus> holdout;
            if (train_holdout.given() || fs::exists(train_holdout.resolve(d)))
                holdout = load_corpus(train_holdout.resolve(d));
            auto ck = train(corpus, vocab, cfg, holdout ? &*holdout : nullptr, [](const EpochMetrics& m) {
                std::printf("%s\n", m.to_json().c_str());
                std::fflush(stdout);
            });
            save_checkpoint(ck, train_out.resolve(d));
            std::printf("wrote %s (model %s)\n", train_out.resolve(d).c_str(), model_hash(ck).c_str());
        } else if (*ft) {
            TrainConfig cfg;
            if (ft_config.given() || fs::exists(ft_config.resolve(d))) cfg = load_train_config(ft_config.resolve(d));
            if (ft_epochs) cfg.finetune_epochs = *ft_epochs;
            if (ft_batch) cfg.finetune_batch = *ft_batch;
            if (ft_lr) cfg.finetune_lr0 = *ft_lr;
            auto start = load_checkpoint(ft_ckpt.resolve(d));
            auto ps = load_pairs(ft_pairs.resolve(d));
            auto ck = finetune_contrastive(ps, start, cfg, [](const EpochMetrics& m) {
                std::printf("%s\n", m.to_json().c_str());
                std::fflush(stdout);
            });
            save_checkpoint(ck, ft_out.resolve(d));
            std::printf("wrote %s (model %s)\n", ft_out.resolve(d).c_str(), model_hash(ck).c_str());
        } else if (*embed) {
            auto corpus = load_corpus(embed_corpus_dir.resolve(d));
            EmbeddingStore store;
            if (embed_bow) {
                store = bow_store(corpus, load_or_build_vocab(embed_vocab.resolve(d), corpus, embed_vocab.given()));
            } else {
                auto ck = load_checkpoint(embed_ckpt.resolve(d));
                std::optional<Vocabulary> expected;
                if (embed_vocab.given() || fs::exists(embed_vocab.resolve(d)))
                    expected = Vocabulary::load(embed_vocab.resolve(d));
                store = embed_corpus(corpus, ck, expected ? &*expected : nullptr);
            }
            save_store(store, embed_out.resolve(d));
            std::printf("wrote %zu x %ld vectors to %s\n", store.size(), static_cast<long>(store.dim()),
                        embed_out.resolve(d).c_str());
        } else if (*index_cmd) {
            auto store = load_store(index_store.resolve(d));
            auto idx = RpTreeIndex::build(store, rp);
            idx.save(index_out.resolve(d));
            std::printf("indexed %zu vectors in %zu trees\n", idx.size(), idx.tree_count());
        } else if (*search) {
            auto engine = load_engine(search_opts);
            auto results = engine.search(query, k);
            std::printf("%-5s %-12s %-20s %s\n", "rank", "score", "eq_id", "latex");
            for (std::size_t i = 0; i < results.size(); ++i)
                std::printf("%-5zu %-12.6g %-20s %s\n", i + 1, results[i].score, results[i].eq_id.c_str(),
                            one_line(results[i].latex).c_str());
        } else if (*eval) {
            nlohmann::json report;
            if (!eval_queries.empty()) {
                auto engine = load_engine(eval_opts);
                report = evaluate_queries(engine, load_queries(eval_queries)).to_json();
            } else if (!eval_triplets.empty()) {
                auto corpus = load_corpus(eval_opts.corpus.resolve(d));
                auto ck = load_checkpoint(eval_opts.ckpt.resolve(d));
                auto triplets = load_triplets(corpus, eval_triplets);
                report = {{"triplets", triplets.size()},
                          {"ranking_score", ranking_score(triplets, embed_corpus_matrix(corpus, ck))}};
            } else if (!eval_pairs.empty()) {
                auto ck = load_checkpoint(eval_opts.ckpt.resolve(d));
                auto ps = load_pairs(eval_pairs);
                std::vector<std::string> lhs, rhs;
                for (const auto& p : ps) {
                    lhs.push_back(p.lhs_mathml);
                    rhs.push_back(p.rhs_mathml);
                }
                auto el = embed_mathml(lhs, ck), er = embed_mathml(rhs, ck);
                const bool cosine = ck.similarity == Similarity::Cosine;
                report["pairs"] = ps.size();
                for (std::size_t kk : {1, 10, 100})
                    report["graph"]["R@" + std::to_string(kk)] = recall_at_k(el, er, kk, cosine);
                if (eval_bow) {
                    auto bl = bow_mathml(lhs, ck.vocab), br = bow_mathml(rhs, ck.vocab);
                    for (std::size_t kk : {1, 10, 100})
                        report["bow"]["R@" + std::to_string(kk)] = recall_at_k(bl, br, kk, true);
                }
            } else {
                throw InvalidArgument("eval needs one of --queries, --triplets or --pairs");
            }
            std::printf("%s\n", report.dump(2).c_str());
            if (!eval_out.empty()) {
                std::ofstream out(eval_out);
                out << report.dump(2) << "\n";
                if (!out) throw InvalidArgument("cannot write " + eval_out);
            }
        } else if (*ci) {
            if (!(ci_delta > 0 && ci_delta < 1)) throw InvalidArgument("delta must be in (0, 1)");
            auto corpus = load_corpus(ci_corpus.resolve(d));
            auto ck = load_checkpoint(ci_ckpt.resolve(d));
            Matrix<double> emb = embed_corpus_matrix(corpus, ck).cast<double>();
            TripletSampler sampler(corpus);
            RelatedFn related = [&sampler](std::size_t a, std::size_t b) { return sampler.related(a, b); };
            UKernel kernel = ci_kernel == "hist" ? UKernel::Histogram : UKernel::Ranking;
            if (ci_mode == "complete") {
                double s = complete_ustat(emb, related, kernel, ci_bins);
                std::size_t largest = 0;
                for (const auto& p : corpus.papers()) {
                    std::size_t n = 0;
                    for (const auto& sec : p.sections) n += sec.size();
                    largest = std::max(largest, n);
                }
                std::size_t big_n = corpus.size() / std::max<std::size_t>(1, largest);
                double m = janson_margin_complete(big_n, ci_delta);
                std::printf("%.6f\n%zu\n%.6f\n", s, big_n, s + m);
            } else {
                if (ci_triplets.empty()) throw InvalidArgument("incomplete mode needs --triplets");
                auto samples = load_triplets(corpus, ci_triplets);
                if (samples.empty()) throw InvalidArgument("no triplets in " + ci_triplets);
                std::vector<Triple> triples, papers_of;
                for (const auto& t : samples) {
                    triples.push_back({t.anchor, t.positive, t.negative});
                    papers_of.push_back(
                        {sampler.paper_of(t.anchor), sampler.paper_of(t.positive), sampler.paper_of(t.negative)});
                }
                double s = incomplete_ustat(triples, emb, related, kernel, ci_bins);
                auto chi = greedy_coloring(papers_of).chromatic_bound;
                double m = janson_margin_incomplete(chi, triples.size(), ci_delta);
                std::printf("%.6f\n%zu\n%.6f\n", s, chi, s + m);
            }
        } else if (*serve_cmd) {
            if (const char* h = std::getenv("HOST"); h && *h) host = h;
            if (const char* p = std::getenv("PORT"); p && *p) {
                try {
                    port = std::stoi(p);
                } catch (const std::exception&) {
                    throw InvalidArgument(std::string("PORT is not a number: ") + p);
                }
            }
            auto engine = load_engine(serve_opts);
            bool ok = serve(engine, host, port, [&host, &engine](int bound) {
                std::printf("serving %zu equations on http://%s:%d\n", engine.size(), host.c_str(), bound);
                std::fflush(stdout);
            });
            if (!ok) throw InvalidArgument("cannot bind " + host + ":" + std::to_string(port));
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
    return 0;
}
