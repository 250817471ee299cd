#include "eqsearch/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"
#include "eqsearch/metrics.hpp"

namespace eqsearch {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("config key '" + key + "' expects on/off, got '" + v + "'");
}

template <class N>
N parse_number(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    N x{};
    in >> x;
    if (!in || !in.eof()) throw InvalidArgument("config key '" + key + "' expects a number, got '" + v + "'");
    return x;
}

void validate(const TrainConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("invalid training config: ") + what);
    };
    require(c.epochs >= 1, "epochs must be at least 1");
    require(c.batch_size >= 1, "batch_size must be at least 1");
    require(c.lr0 >= 0, "lr0 must be non-negative");
    require(c.bins >= 2, "bins must be at least 2");
    require(c.margin > 0, "margin must be positive");
    require(c.mask_rate > 0 && c.mask_rate <= 1, "mask_rate must lie in (0, 1]");
    require(c.poisson_mean >= 0, "poisson_mean must be non-negative");
    require(c.tau > 0, "tau must be positive");
    require(c.similarity_weight >= 0 && c.masking_weight >= 0, "loss weights must be non-negative");
    require(c.finetune_epochs >= 1, "finetune_epochs must be at least 1");
    require(c.finetune_lr0 >= 0, "finetune_lr0 must be non-negative");
    require(c.finetune_batch >= 2, "finetune_batch must be at least 2");
}

}  // namespace

std::string TrainConfig::to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "epochs = " << epochs << '\n'
        << "batch_size = " << batch_size << '\n'
        << "lr0 = " << lr0 << '\n'
        << "bins = " << bins << '\n'
        << "margin = " << margin << '\n'
        << "mask_rate = " << mask_rate << '\n'
        << "poisson_mean = " << poisson_mean << '\n'
        << "loss = " << (loss == SimilarityLoss::Histogram ? "histogram" : "triplet") << '\n'
        << "tau = " << tau << '\n'
        << "seed = " << seed << '\n'
        << "augmentation = " << (augmentation ? "on" : "off") << '\n'
        << "masking = " << (masking ? "on" : "off") << '\n'
        << "similarity_weight = " << similarity_weight << '\n'
        << "masking_weight = " << masking_weight << '\n'
        << "mask_stream = " << (mask_stream == MaskStream::Anchors ? "anchors" : "independent") << '\n'
        << "bn_placement = " << bn_placement_name(bn_placement) << '\n'
        << "triplets_per_epoch = " << triplets_per_epoch << '\n'
        << "adam_beta1 = " << adam_beta1 << '\n'
        << "adam_beta2 = " << adam_beta2 << '\n'
        << "adam_epsilon = " << adam_epsilon << '\n'
        << "holdout_triplets = " << holdout_triplets << '\n'
        << "finetune_epochs = " << finetune_epochs << '\n'
        << "finetune_lr0 = " << finetune_lr0 << '\n'
        << "finetune_batch = " << finetune_batch << '\n'
        << "infonce_exclude_diagonal = " << (infonce_exclude_diagonal ? "on" : "off") << '\n';
    return out.str();
}

TrainConfig parse_train_config(std::string_view text) {
    TrainConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string body = trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string v = trim(std::string_view(body).substr(eq + 1));
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);

        if (key == "epochs") c.epochs = parse_number<int>(key, v);
        else if (key == "batch_size") c.batch_size = parse_number<int>(key, v);
        else if (key == "lr0") c.lr0 = parse_number<double>(key, v);
        else if (key == "bins" || key == "R") c.bins = parse_number<int>(key, v);
        else if (key == "margin") c.margin = parse_number<double>(key, v);
        else if (key == "mask_rate") c.mask_rate = parse_number<double>(key, v);
        else if (key == "poisson_mean") c.poisson_mean = parse_number<double>(key, v);
        else if (key == "loss") {
            if (v == "histogram") c.loss = SimilarityLoss::Histogram;
            else if (v == "triplet") c.loss = SimilarityLoss::Triplet;
            else throw InvalidArgument("config key 'loss' expects histogram or triplet");
        } else if (key == "tau") c.tau = parse_number<double>(key, v);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "augmentation") c.augmentation = parse_bool(key, v);
        else if (key == "masking") c.masking = parse_bool(key, v);
        else if (key == "similarity_weight") c.similarity_weight = parse_number<double>(key, v);
        else if (key == "masking_weight") c.masking_weight = parse_number<double>(key, v);
        else if (key == "mask_stream") {
            if (v == "anchors") c.mask_stream = MaskStream::Anchors;
            else if (v == "independent") c.mask_stream = MaskStream::Independent;
            else throw InvalidArgument("config key 'mask_stream' expects anchors or independent");
        } else if (key == "bn_placement") c.bn_placement = parse_bn_placement(v);
        else if (key == "triplets_per_epoch") c.triplets_per_epoch = parse_number<std::size_t>(key, v);
        else if (key == "adam_beta1") c.adam_beta1 = parse_number<double>(key, v);
        else if (key == "adam_beta2") c.adam_beta2 = parse_number<double>(key, v);
        else if (key == "adam_epsilon") c.adam_epsilon = parse_number<double>(key, v);
        else if (key == "holdout_triplets") c.holdout_triplets = parse_number<std::size_t>(key, v);
        else if (key == "finetune_epochs") c.finetune_epochs = parse_number<int>(key, v);
        else if (key == "finetune_lr0") c.finetune_lr0 = parse_number<double>(key, v);
        else if (key == "finetune_batch") c.finetune_batch = parse_number<int>(key, v);
        else if (key == "infonce_exclude_diagonal") c.infonce_exclude_diagonal = parse_bool(key, v);
        else throw InvalidArgument("unknown config key '" + key + "'");
    }
    validate(c);
    return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_train_config(ss.str());
}

template <class T>
LossEvaluation<T> evaluate_loss(const LossBatch& batch, const ModelParams<T>& params, const LossOptions& options,
                                ModelParams<T>* grads) {
    if (batch.graphs.size() < 3 * batch.triplets) throw InvalidArgument("loss batch is missing triplet graphs");
    LossEvaluation<T> ev;
    ev.batch = pack_graphs(batch.graphs);
    ev.forward = forward(ev.batch, params, Mode::Train);
    const auto graphs = static_cast<Eigen::Index>(batch.graphs.size());
    const auto m = static_cast<Eigen::Index>(batch.triplets);
    Matrix<T> d_pooled = Matrix<T>::Zero(graphs, kEmbeddingDim);

    if (options.similarity && m > 0) {
        Matrix<T> pooled = ev.forward.pooled.topRows(3 * m);
        ev.norm = normalize_embeddings(pooled, params, Mode::Train);
        const Matrix<T>& E = ev.norm->output;
        ev.s_pos.resize(static_cast<std::size_t>(m));
        ev.s_neg.resize(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) {
            ev.s_pos[static_cast<std::size_t>(i)] = static_cast<double>(E.row(i).dot(E.row(m + i)));
            ev.s_neg[static_cast<std::size_t>(i)] = static_cast<double>(E.row(i).dot(E.row(2 * m + i)));
        }
        std::vector<double> d_pos(static_cast<std::size_t>(m)), d_neg(static_cast<std::size_t>(m));
        if (options.loss == SimilarityLoss::Histogram) {
            auto h = histogram_loss(ev.s_pos, ev.s_neg, options.bins);
            ev.similarity = h.value;
            d_pos = std::move(h.d_pos);
            d_neg = std::move(h.d_neg);
        } else {
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < d_pos.size(); ++i) {
                auto t = triplet_loss_with_grad(ev.s_pos[i], ev.s_neg[i], options.margin);
                ev.similarity += t.value * inv_m;
                d_pos[i] = t.d_first * inv_m;
                d_neg[i] = t.d_second * inv_m;
            }
        }
        ev.total += options.similarity_weight * ev.similarity;
        if (grads) {
            Matrix<T> dE = Matrix<T>::Zero(3 * m, kEmbeddingDim);
            for (Eigen::Index i = 0; i < m; ++i) {
                auto dp = static_cast<T>(options.similarity_weight * d_pos[static_cast<std::size_t>(i)]);
                auto dn = static_cast<T>(options.similarity_weight * d_neg[static_cast<std::size_t>(i)]);
                dE.row(i) += dp * E.row(m + i) + dn * E.row(2 * m + i);
                dE.row(m + i) += dp * E.row(i);
                dE.row(2 * m + i) += dn * E.row(i);
            }
            d_pooled.topRows(3 * m) = normalize_embeddings_backward(pooled, *ev.norm, dE);
        }
    }

    Matrix<T> d_phi;
    if (!batch.masked.empty()) {
        const auto k = static_cast<Eigen::Index>(batch.masked.size());
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(k));
        std::vector<MaskTarget> targets;
        Matrix<T> phi_rows(k, kHiddenDim);
        for (Eigen::Index r = 0; r < k; ++r) {
            const auto& mn = batch.masked[static_cast<std::size_t>(r)];
            rows[static_cast<std::size_t>(r)] = ev.batch.offsets[static_cast<std::size_t>(mn.graph)] + mn.node;
            phi_rows.row(r) = ev.forward.phi().row(rows[static_cast<std::size_t>(r)]);
            targets.push_back(mn.target);
        }
        auto logits = head_logits(phi_rows, params);
        HeadLogits<double> logits_d{logits.tag.template cast<double>(), logits.attr.template cast<double>(),
                                    logits.chr.template cast<double>()};
        auto ml = masking_loss_from_logits(logits_d, targets);
        ev.masking = ml.value;
        ev.total += options.masking_weight * ml.value;
        if (grads) {
            const double w = options.masking_weight;
            HeadLogits<T> d{(ml.d_logits.tag * w).template cast<T>(), (ml.d_logits.attr * w).template cast<T>(),
                            (ml.d_logits.chr * w).template cast<T>()};
            Matrix<T> d_rows = head_backward(phi_rows, d, params, *grads);
            d_phi = Matrix<T>::Zero(ev.forward.phi().rows(), kHiddenDim);
            for (Eigen::Index r = 0; r < k; ++r) d_phi.row(rows[static_cast<std::size_t>(r)]) += d_rows.row(r);
        }
    }

    if (grads) backward(ev.batch, params, ev.forward, d_pooled, d_phi.size() ? &d_phi : nullptr, *grads);
    return ev;
}

template <class T>
ContrastiveEvaluation<T> evaluate_contrastive_loss(const std::vector<ExpressionGraph>& lhs,
                                                   const std::vector<ExpressionGraph>& rhs,
                                                   const ModelParams<T>& params, double tau, bool exclude_diagonal,
                                                   ModelParams<T>* grads) {
    if (lhs.size() != rhs.size()) throw InvalidArgument("contrastive batch sides differ in length");
    if (lhs.size() < 2) throw InvalidArgument("contrastive batch needs at least two pairs");
    std::vector<const ExpressionGraph*> all;
    for (const auto& g : lhs) all.push_back(&g);
    for (const auto& g : rhs) all.push_back(&g);
    ContrastiveEvaluation<T> ev;
    ev.batch = pack_graphs(all);
    ev.forward = forward(ev.batch, params, Mode::Train);
    const auto m = static_cast<Eigen::Index>(lhs.size());
    Matrix<T> unit = unit_normalize(ev.forward.pooled);
    Matrix<double> u = unit.template cast<double>();
    auto loss = infonce_loss(u.topRows(m), u.bottomRows(m), tau, exclude_diagonal);
    ev.value = loss.value;
    if (grads) {
        Matrix<T> d_unit(2 * m, kEmbeddingDim);
        d_unit.topRows(m) = loss.d_lhs.template cast<T>();
        d_unit.bottomRows(m) = loss.d_rhs.template cast<T>();
        Matrix<T> d_pooled = unit_normalize_backward(ev.forward.pooled, d_unit);
        backward(ev.batch, params, ev.forward, d_pooled, static_cast<const Matrix<T>*>(nullptr), *grads);
    }
    return ev;
}

template <class T>
Adam<T>::Adam(double beta1, double beta2, double epsilon) : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

template <class T>
void Adam<T>::step(ModelParams<T>& params, ModelParams<T>& grads, double lr) {
    if (!m_) {
        m_ = ModelParams<T>::gradient_buffer();
        v_ = ModelParams<T>::gradient_buffer();
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::vector<std::pair<T*, Eigen::Index>> p, g, m, v;
    auto collect = [](std::vector<std::pair<T*, Eigen::Index>>& out) {
        return [&out](const char*, T* data, Eigen::Index n) { out.emplace_back(data, n); };
    };
    params.for_each_trainable(collect(p));
    grads.for_each_trainable(collect(g));
    m_->for_each_trainable(collect(m));
    v_->for_each_trainable(collect(v));
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (Eigen::Index i = 0; i < p[k].second; ++i) {
            double gi = static_cast<double>(g[k].first[i]);
            double mi = beta1_ * static_cast<double>(m[k].first[i]) + (1.0 - beta1_) * gi;
            double vi = beta2_ * static_cast<double>(v[k].first[i]) + (1.0 - beta2_) * gi * gi;
            m[k].first[i] = static_cast<T>(mi);
            v[k].first[i] = static_cast<T>(vi);
            double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + epsilon_);
            p[k].first[i] = static_cast<T>(static_cast<double>(p[k].first[i]) - update);
        }
    }
}

double linear_decay(double lr0, std::size_t step, std::size_t total) {
    if (total == 0) return lr0;
    return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

std::string EpochMetrics::to_json() const {
    nlohmann::json j = {{"epoch", epoch},
                        {"steps", steps},
                        {"similarity_loss", similarity_loss},
                        {"masking_loss", masking_loss},
                        {"total_loss", total_loss},
                        {"learning_rate", learning_rate},
                        {"seconds", seconds}};
    if (holdout_ranking) j["holdout_ranking"] = *holdout_ranking;
    return j.dump();
}

namespace {

std::vector<ExpressionGraph> encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
    std::vector<ExpressionGraph> graphs;
    graphs.reserve(corpus.size());
    for (const auto& eq : corpus.equations()) graphs.push_back(encode(eq.mathml, vocab));
    return graphs;
}

LossOptions options_for(const TrainConfig& c) {
    LossOptions o;
    o.loss = c.loss;
    o.bins = c.bins;
    o.margin = c.margin;
    o.similarity_weight = c.similarity_weight;
    o.masking_weight = c.masking_weight;
    return o;
}

void check_finite(double loss, std::size_t step) {
    if (!std::isfinite(loss)) throw Error("training diverged: non-finite loss at step " + std::to_string(step));
}

}  // namespace

Trainer::Trainer(const Corpus& corpus, const Vocabulary& vocab, TrainConfig config,
                 std::optional<ModelParams<float>> init)
    : corpus_(corpus),
      vocab_(vocab),
      config_(std::move(config)),
      sampler_(corpus),
      graphs_(encode_corpus(corpus, vocab)),
      params_(init ? std::move(*init) : ModelParams<float>::initialize(config_.seed, config_.bn_placement)),
      adam_(config_.adam_beta1, config_.adam_beta2, config_.adam_epsilon),
      rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
    validate(config_);
    std::size_t per_epoch = config_.triplets_per_epoch ? config_.triplets_per_epoch : corpus.size();
    auto batch = static_cast<std::size_t>(config_.batch_size);
    steps_per_epoch_ = std::max<std::size_t>(1, (per_epoch + batch - 1) / batch);
}

LossBatch Trainer::make_batch() {
    const auto b = static_cast<std::size_t>(config_.batch_size);
    std::vector<TripletSample> triplets;
    triplets.reserve(b);
    for (std::size_t i = 0; i < b; ++i) triplets.push_back(sampler_.sample(rng_));

    LossBatch lb;
    lb.triplets = b;
    lb.graphs.reserve(4 * b);
    auto take = [&](std::size_t eq) {
        if (!config_.augmentation) return graphs_[eq];
        return augment_identifiers(graphs_[eq], rng_, config_.poisson_mean);
    };
    for (const auto& t : triplets) lb.graphs.push_back(take(t.anchor));
    for (const auto& t : triplets) lb.graphs.push_back(take(t.positive));
    for (const auto& t : triplets) lb.graphs.push_back(take(t.negative));

    if (config_.masking) {
        auto mask_into = [&](std::size_t gi) {
            auto mg = mask_nodes(lb.graphs[gi], config_.mask_rate, rng_);
            for (std::size_t k = 0; k < mg.masked.size(); ++k)
                lb.masked.push_back({static_cast<int>(gi), mg.masked[k], mg.targets[k]});
            lb.graphs[gi] = std::move(mg.graph);
        };
        if (config_.mask_stream == MaskStream::Anchors) {
            for (std::size_t i = 0; i < b; ++i) mask_into(i);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, graphs_.size() - 1);
            for (std::size_t i = 0; i < b; ++i) {
                lb.graphs.push_back(take(pick(rng_)));
                mask_into(lb.graphs.size() - 1);
            }
        }
    }
    return lb;
}

StepResult Trainer::step() {
    LossBatch lb = make_batch();
    auto grads = ModelParams<float>::gradient_buffer();
    auto ev = evaluate_loss<float>(lb, params_, options_for(config_), &grads);
    check_finite(ev.total, step_);
    StepResult r{ev.similarity, ev.masking, ev.total, learning_rate(step_)};
    adam_.step(params_, grads, r.learning_rate);
    update_running_stats(params_, ev.forward);
    if (ev.norm) update_norm_stats(params_, *ev.norm);
    ++step_;
    return r;
}

EpochMetrics Trainer::run_epoch(const Corpus* holdout) {
    auto start = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = ++epoch_;
    for (std::size_t s = 0; s < steps_per_epoch_; ++s) {
        auto r = step();
        m.similarity_loss += r.similarity;
        m.masking_loss += r.masking;
        m.total_loss += r.total;
        m.learning_rate = r.learning_rate;
        ++m.steps;
    }
    auto n = static_cast<double>(m.steps);
    m.similarity_loss /= n;
    m.masking_loss /= n;
    m.total_loss /= n;
    if (holdout && !holdout->empty())
        m.holdout_ranking = holdout_ranking_score(*holdout, checkpoint(), config_.holdout_triplets, config_.seed + 1);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

Checkpoint Trainer::checkpoint() const {
    return {params_, vocab_, Similarity::InnerProduct};
}

Checkpoint train(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& config, const Corpus* holdout,
                 const EpochCallback& on_epoch) {
    Trainer trainer(corpus, vocab, config);
    for (int e = 0; e < config.epochs; ++e) {
        auto m = trainer.run_epoch(holdout);
        if (on_epoch) on_epoch(m);
    }
    return trainer.checkpoint();
}

Checkpoint initial_checkpoint(const Vocabulary& vocab, const TrainConfig& config) {
    return {ModelParams<float>::initialize(config.seed, config.bn_placement), vocab, Similarity::InnerProduct};
}

Checkpoint finetune_contrastive(const std::vector<RelationPair>& pairs, const Checkpoint& start,
                                const TrainConfig& config, const EpochCallback& on_epoch) {
    validate(config);
    if (pairs.size() < 2) throw InvalidArgument("finetuning needs at least two relation pairs");
    std::vector<ExpressionGraph> lhs, rhs;
    for (const auto& p : pairs) {
        lhs.push_back(encode(p.lhs_mathml, start.vocab));
        rhs.push_back(encode(p.rhs_mathml, start.vocab));
    }
    const std::size_t n = pairs.size();
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(config.finetune_batch), n);
    const std::size_t per_epoch = n / b + (n % b >= 2 ? 1 : 0);
    const std::size_t total = per_epoch * static_cast<std::size_t>(config.finetune_epochs);

    Checkpoint ck = start;
    ck.similarity = Similarity::Cosine;
    Adam<float> adam(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<std::size_t> order(n);
    std::size_t step = 0;
    for (int epoch = 1; epoch <= config.finetune_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        EpochMetrics m;
        m.epoch = epoch;
        for (std::size_t lo = 0; lo + 2 <= n; lo += b) {
            std::size_t hi = std::min(n, lo + b);
            std::vector<ExpressionGraph> bl, br;
            for (std::size_t k = lo; k < hi; ++k) {
                bl.push_back(lhs[order[k]]);
                br.push_back(rhs[order[k]]);
            }
            auto grads = ModelParams<float>::gradient_buffer();
            auto ev = evaluate_contrastive_loss<float>(bl, br, ck.params, config.tau, config.infonce_exclude_diagonal,
                                                       &grads);
            check_finite(ev.value, step);
            m.learning_rate = linear_decay(config.finetune_lr0, step, total);
            adam.step(ck.params, grads, m.learning_rate);
            update_running_stats(ck.params, ev.forward);
            m.total_loss += ev.value;
            m.similarity_loss += ev.value;
            ++m.steps;
            ++step;
        }
        if (m.steps) {
            m.total_loss /= static_cast<double>(m.steps);
            m.similarity_loss /= static_cast<double>(m.steps);
        }
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_epoch) on_epoch(m);
    }
    return ck;
}

Matrix<float> embed_corpus_matrix(const Corpus& corpus, const Checkpoint& checkpoint) {
    Matrix<float> out(static_cast<Eigen::Index>(corpus.size()), kEmbeddingDim);
    const bool unit = checkpoint.similarity == Similarity::Cosine;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto g = encode(corpus.equations()[i].mathml, checkpoint.vocab);
        out.row(static_cast<Eigen::Index>(i)) = embed_graph(g, checkpoint.params, unit).transpose();
    }
    return out;
}

double holdout_ranking_score(const Corpus& corpus, const Checkpoint& checkpoint, std::size_t n_triplets,
                             std::uint64_t seed) {
    TripletSampler sampler(corpus);
    auto triplets = materialize_triplets(sampler, n_triplets, seed);
    return ranking_score(triplets, embed_corpus_matrix(corpus, checkpoint));
}

double masked_tag_accuracy(const Corpus& corpus, const Checkpoint& checkpoint, double mask_rate, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t correct = 0, total = 0;
    for (const auto& eq : corpus.equations()) {
        auto mg = mask_nodes(encode(eq.mathml, checkpoint.vocab), mask_rate, rng);
        auto batch = pack_graphs(std::vector<const ExpressionGraph*>{&mg.graph});
        auto state = forward(batch, checkpoint.params, Mode::Eval);
        for (std::size_t k = 0; k < mg.masked.size(); ++k) {
            if (mg.targets[k].tag < 0) continue;
            Matrix<float> row = state.phi().row(mg.masked[k]);
            auto logits = head_logits(row, checkpoint.params);
            Eigen::Index best = 0;
            logits.tag.row(0).maxCoeff(&best);
            correct += best == mg.targets[k].tag;
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

template LossEvaluation<float> evaluate_loss(const LossBatch&, const ModelParams<float>&, const LossOptions&,
                                             ModelParams<float>*);
template LossEvaluation<double> evaluate_loss(const LossBatch&, const ModelParams<double>&, const LossOptions&,
                                              ModelParams<double>*);
template ContrastiveEvaluation<float> evaluate_contrastive_loss(const std::vector<ExpressionGraph>&,
                                                               const std::vector<ExpressionGraph>&,
                                                               const ModelParams<float>&, double, bool,
                                                               ModelParams<float>*);
template ContrastiveEvaluation<double> evaluate_contrastive_loss(const std::vector<ExpressionGraph>&,
                                                                const std::vector<ExpressionGraph>&,
                                                                const ModelParams<double>&, double, bool,
                                                                ModelParams<double>*);
template class Adam<float>;
template class Adam<double>;

}  // namespace eqsearch
